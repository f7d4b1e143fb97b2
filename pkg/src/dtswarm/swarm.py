"""Per-agent state and movement primitives.

One round gives each agent at most one positional move. PSO drives normal
motion; random walk (VFH guided) is the fallback on communication failure,
obstacle traps, and gbest stagnation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import avoidance
from .environment import WorldMap, is_free, range_scan, segment_clear


class AgentMode(Enum):
    PSO = "PSO"
    RANDOM_WALK = "RANDOM_WALK"
    RESCUE_FOLLOW = "RESCUE_FOLLOW"
    ARRIVED = "ARRIVED"


# why an agent is in RANDOM_WALK; controls when it may return to PSO
WALK_COMM = "comm"
WALK_STUCK = "stuck"
WALK_STAGNATION = "stagnation"


@dataclass
class PsoParams:
    inertia: float = 0.7298          # constriction-factor coefficient set
    cognitive: float = 1.49618
    social: float = 1.49618
    v_max: float = 5.0               # m per round
    stuck_threshold: int = 3         # consecutive blocked proposals
    stagnation_radius: float = 2.0   # distance to gbest that triggers escape

    def validate(self) -> None:
        if self.v_max <= 0:
            raise ValueError("v_max must be > 0")
        if self.stuck_threshold < 1:
            raise ValueError("stuck_threshold must be >= 1")


@dataclass
class AgentState:
    id: int
    pos: np.ndarray
    vel: np.ndarray = field(default_factory=lambda: np.zeros(2))
    pbest_pos: np.ndarray | None = None
    pbest_dist: float = math.inf
    last_sensed_dist: float = math.inf
    mode: AgentMode = AgentMode.PSO
    walk_reason: str | None = None
    walk_steps_left: int = 0
    blocked_proposals: int = 0
    rescue_waypoints: list[np.ndarray] | None = None
    rescue_goal: np.ndarray | None = None
    moves: int = 0
    # last gbest received (downlink in DT modes, peer messages in P2P)
    known_gbest_pos: np.ndarray | None = None
    known_gbest_dist: float = math.inf

    def observe(self, d: float) -> None:
        self.last_sensed_dist = d
        if d < self.pbest_dist:
            self.pbest_dist = d
            self.pbest_pos = self.pos.copy()

    def offer_gbest(self, pos, d: float) -> None:
        if d < self.known_gbest_dist:
            self.known_gbest_dist = d
            self.known_gbest_pos = np.asarray(pos, dtype=float).copy()

    def enter_random_walk(self, reason: str, steps: int = 1) -> None:
        self.mode = AgentMode.RANDOM_WALK
        self.walk_reason = reason
        self.walk_steps_left = steps
        self.blocked_proposals = 0
        self.rescue_waypoints = None
        self.rescue_goal = None


def pso_step(agent: AgentState, gbest, params: PsoParams, rng: np.random.Generator):
    """Velocity update toward pbest/gbest; returns (proposal, new_velocity).

    Does not mutate the agent; the caller applies the move and commits the
    velocity only if the move succeeds.
    """
    pbest = agent.pbest_pos if agent.pbest_pos is not None else agent.pos
    r1 = rng.random(2)
    r2 = rng.random(2)
    vel = (
        params.inertia * agent.vel
        + params.cognitive * r1 * (np.asarray(pbest) - agent.pos)
        + params.social * r2 * (np.asarray(gbest) - agent.pos)
    )
    speed = float(np.hypot(vel[0], vel[1]))
    if speed > params.v_max:
        vel = vel * (params.v_max / speed)
    return agent.pos + vel, vel


def random_walk_step(
    agent: AgentState,
    world: WorldMap,
    rng: np.random.Generator,
    v_max: float = 5.0,
    ray_count: int = 36,
    scan_range: float = 30.0,
    sector_count: int = 36,
    vfh_threshold: float = 0.6,
    vfh_margin: int = 1,
):
    """One VFH-guided random step; None when every heading is blocked."""
    desired = rng.random() * 2.0 * math.pi
    scan = range_scan(world, agent.pos, ray_count, scan_range)
    hist = avoidance.build_histogram(scan, sector_count, vfh_threshold)
    heading = avoidance.select_heading(hist, desired, vfh_margin)
    if heading is None:
        return None
    return agent.pos + v_max * np.array([math.cos(heading), math.sin(heading)])


def apply_move(agent: AgentState, proposal, world: WorldMap) -> bool:
    """Execute a proposal if physically feasible; returns True on movement.

    Out-of-bounds proposals are clamped to the map boundary first. Blocked
    proposals leave the position unchanged and bump the stuck counter.
    """
    p = world.clamp(np.asarray(proposal, dtype=float))
    if is_free(world, p) and segment_clear(world, agent.pos, p):
        stayed = float(np.hypot(p[0] - agent.pos[0], p[1] - agent.pos[1])) < 1e-12
        agent.pos = p
        if not stayed:
            agent.moves += 1   # zero-length stays are not movement cost
        agent.blocked_proposals = 0
        return True
    agent.blocked_proposals += 1
    return False


def detect_stuck(agent: AgentState, params: PsoParams) -> bool:
    return agent.blocked_proposals >= params.stuck_threshold


def escape_gbest_stagnation(agent: AgentState, gbest, radius: float,
                            target, convergence_radius: float,
                            walk_steps: int = 1) -> AgentState:
    """Agents sitting on the gbest move away instead of stagnating there.

    Arrival dominates: an agent already within the convergence radius of
    the target is marked ARRIVED rather than sent walking. `walk_steps`
    sets the excursion length; longer excursions let a swarm clustered at
    a false optimum probe beyond nearby walls.
    """
    if gbest is None:
        return agent
    if math.hypot(agent.pos[0] - target[0], agent.pos[1] - target[1]) <= convergence_radius:
        agent.mode = AgentMode.ARRIVED
        return agent
    if math.hypot(agent.pos[0] - gbest[0], agent.pos[1] - gbest[1]) <= radius:
        agent.enter_random_walk(WALK_STAGNATION, walk_steps)
    return agent
