"""MEC/digital-twin coordination layer and its P2P counterfactual.

Holds the twin registry (last known positions and sensed distances, kept
for the whole run), computes the gbest, performs uplink/downlink
exchanges with per-mode retry semantics, and charges every transmission
attempt to the ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import planner
from .environment import WorldMap
from .radio import RadioField, try_transmit
from .swarm import AgentMode, AgentState


class Mode(str, Enum):
    P2P = "P2P"
    DT1 = "DT1"
    DT2 = "DT2"
    RW1 = "RW1"
    RW2 = "RW2"

    @property
    def has_planner(self) -> bool:
        # RW modes carry agent twins only, no obstacle twins
        return self in (Mode.DT1, Mode.DT2)

    @property
    def retries(self) -> bool:
        return self in (Mode.DT2, Mode.RW2)


class EmptyRegistryError(Exception):
    pass


@dataclass
class TwinEntry:
    pos: np.ndarray
    d: float
    round_no: int
    fresh: bool = False
    arrived: bool = False


@dataclass
class TwinRegistry:
    entries: dict[int, TwinEntry] = field(default_factory=dict)
    gbest_pos: np.ndarray | None = None
    gbest_dist: float = math.inf
    gbest_agent: int | None = None
    gbest_round: int | None = None
    # gbest value last acknowledged per agent; only meaningful in the
    # reliable (mode 2) variants, where downlinks are acknowledged
    delivered_gbest: dict[int, float] = field(default_factory=dict)

    def update(self, agent_id: int, pos, d: float, round_no: int) -> None:
        pos = np.asarray(pos, dtype=float).copy()
        self.entries[agent_id] = TwinEntry(pos, d, round_no, fresh=True)
        # strict < keeps the earliest round / lowest id on ties, since
        # uploads are processed in (round, id) order
        if d < self.gbest_dist:
            self.gbest_dist = d
            self.gbest_pos = pos
            self.gbest_agent = agent_id
            self.gbest_round = round_no

    def mark_arrived(self, agent_id: int) -> None:
        if agent_id in self.entries:
            self.entries[agent_id].arrived = True

    def begin_round(self) -> None:
        for e in self.entries.values():
            e.fresh = False


def compute_gbest(reg: TwinRegistry):
    """Position of the minimum sensed distance over all recorded history."""
    if not reg.entries:
        raise EmptyRegistryError("no agent has ever uploaded")
    return reg.gbest_pos


@dataclass
class CommLedger:
    uplink_attempts: int = 0
    uplink_successes: int = 0
    downlink_attempts: int = 0
    downlink_successes: int = 0
    assistance_requests: int = 0
    assistance_uplink: int = 0
    assistance_downlink: int = 0
    per_round: list[dict] = field(default_factory=list)

    def log_uplink(self, ok: bool) -> None:
        self.uplink_attempts += 1
        if ok:
            self.uplink_successes += 1

    def log_downlink(self, ok: bool) -> None:
        self.downlink_attempts += 1
        if ok:
            self.downlink_successes += 1


@dataclass
class ExchangeResult:
    comm_ok: dict[int, bool]
    uplink_ok: dict[int, bool]
    stationary: set[int]       # mode-2 agents frozen this round by exhausted retries


def _attempt_leg(field_: RadioField, pos, rng, cap: int, log) -> tuple[bool, int]:
    """Repeat a channel leg up to `cap` attempts, stopping at first success."""
    for i in range(cap):
        ok = try_transmit(field_, pos, rng)
        log(ok)
        if ok:
            return True, i + 1
    return False, cap


def retry_cap(mode: Mode, n_agents: int) -> int:
    if mode.retries:
        return 1 + max(0, n_agents - 2)
    return 1


def dt_exchange(
    agents: list[AgentState],
    reg: TwinRegistry,
    field_: RadioField,
    ledger: CommLedger,
    mode: Mode,
    rngs: dict[int, np.random.Generator],
    round_no: int,
) -> ExchangeResult:
    """One round of upload/gbest/download through the base station.

    Uplink phase first (registry updates), then the gbest is distributed
    to exactly those agents whose uplink succeeded. The two variants run
    different sync protocols:

    * best-effort (mode 1): one uplink attempt, and the current gbest is
      pushed every round because deliveries are not acknowledged;
    * reliable (mode 2): the uplink is retried until it succeeds or the
      attempt budget runs out, and downlink deliveries are acknowledged,
      so the server pushes the gbest only when it changed since the last
      delivery to that agent.

    Arrived agents are exempt from upload duty and contribute no attempts.
    """
    if mode == Mode.P2P:
        raise ValueError("dt_exchange is not defined for P2P mode")
    cap = retry_cap(mode, len(agents))
    reg.begin_round()
    active = [a for a in agents if a.mode != AgentMode.ARRIVED]

    uplink_ok: dict[int, bool] = {}
    for a in sorted(active, key=lambda a: a.id):
        ok, _ = _attempt_leg(field_, a.pos, rngs[a.id], cap, ledger.log_uplink)
        uplink_ok[a.id] = ok
        if ok:
            reg.update(a.id, a.pos, a.last_sensed_dist, round_no)

    gbest_pos = reg.gbest_pos
    gbest_dist = reg.gbest_dist

    comm_ok: dict[int, bool] = {}
    stationary: set[int] = set()
    for a in sorted(active, key=lambda a: a.id):
        if not uplink_ok[a.id]:
            comm_ok[a.id] = False
            if mode.retries:
                stationary.add(a.id)
            continue
        if mode.retries:
            # reliable variant: skip the downlink when this agent already
            # acknowledged the current gbest; a missed update is benign
            # (the agent keeps flying on its last known gbest)
            if gbest_pos is not None and reg.delivered_gbest.get(a.id, math.inf) > gbest_dist:
                ok, _ = _attempt_leg(field_, a.pos, rngs[a.id], 1, ledger.log_downlink)
                if ok:
                    a.offer_gbest(gbest_pos, gbest_dist)
                    reg.delivered_gbest[a.id] = gbest_dist
            comm_ok[a.id] = True
        else:
            ok, _ = _attempt_leg(field_, a.pos, rngs[a.id], 1, ledger.log_downlink)
            if ok and gbest_pos is not None:
                a.offer_gbest(gbest_pos, gbest_dist)
            comm_ok[a.id] = ok
    return ExchangeResult(comm_ok, uplink_ok, stationary)


def p2p_exchange(
    agents: list[AgentState],
    field_: RadioField,
    ledger: CommLedger,
    rngs: dict[int, np.random.Generator],
    round_no: int,
) -> ExchangeResult:
    """Pairwise gbest flooding: n(n-1) directed attempts per round.

    A directed message i->j succeeds only if both endpoints' independent
    channel draws succeed; each attempt is charged as one uplink. Arrived
    agents keep transmitting (peers still need their gbest).
    """
    ids = sorted(a.id for a in agents)
    by_id = {a.id: a for a in agents}
    n = len(ids)
    comm_ok = {i: True for i in ids}
    if n < 2:
        return ExchangeResult(comm_ok, dict(comm_ok), set())

    # pre-draw per-agent send/receive uniforms in id order so results do
    # not depend on pair evaluation order
    send_u = {i: rngs[i].random(n - 1) for i in ids}
    recv_u = {i: rngs[i].random(n - 1) for i in ids}
    idx = {i: {j: k for k, j in enumerate(x for x in ids if x != i)} for i in ids}

    received: dict[int, bool] = {i: False for i in ids}
    for i in ids:
        ai = by_id[i]
        p_i = 1.0 - field_.per_at(ai.pos)
        for j in ids:
            if j == i:
                continue
            aj = by_id[j]
            p_j = 1.0 - field_.per_at(aj.pos)
            ok = (send_u[i][idx[i][j]] < p_i) and (recv_u[j][idx[j][i]] < p_j)
            ledger.log_uplink(ok)
            if ok:
                received[j] = True
                # j learns i's current (position, sensed distance) tuple
                aj.offer_gbest(ai.pos, ai.last_sensed_dist)
    for i in ids:
        if by_id[i].mode != AgentMode.ARRIVED:
            comm_ok[i] = received[i]
    return ExchangeResult(comm_ok, dict(comm_ok), set())


def handle_assistance(
    agent: AgentState,
    reg: TwinRegistry,
    world: WorldMap,
    field_: RadioField,
    ledger: CommLedger,
    mode: Mode,
    rng: np.random.Generator,
) -> planner.GridPath | None:
    """Rescue request from a stuck agent; returns a path or None (denial).

    Costs one uplink attempt and, if planning succeeds, one downlink
    attempt, in every mode: rescue traffic is fire-and-forget and is never
    retried. Only DT modes carry obstacle twins, so RW/P2P requests are
    denied without planning or traffic.
    """
    if not mode.has_planner:
        return None
    ledger.assistance_requests += 1
    up_ok, up_n = _attempt_leg(field_, agent.pos, rng, 1, ledger.log_uplink)
    ledger.assistance_uplink += up_n
    if not up_ok:
        return None
    if reg.gbest_pos is None:
        return None
    try:
        path = planner.plan(world, agent.pos, reg.gbest_pos)
    except planner.UnreachableGoalError:
        return None
    down_ok, down_n = _attempt_leg(field_, agent.pos, rng, 1, ledger.log_downlink)
    ledger.assistance_downlink += down_n
    if not down_ok:
        return None
    return path
