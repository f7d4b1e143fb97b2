"""Round loop, convergence detection, Monte Carlo batches, CSV schemas.

One round = sense -> exchange -> move -> stuck handling, mirroring the
coordination flowchart. Everything is a pure function of (config, seed):
per-agent random streams are derived with a fixed 64-bit mix so results
do not depend on evaluation order or worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import multiprocessing
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import coordinator, environment, planner, radio, swarm
from .coordinator import CommLedger, Mode, TwinRegistry
from .environment import WorldMap, sense_distance
from .radio import RadioField
from .swarm import AgentMode, AgentState, PsoParams

SUMMARY_COLUMNS = [
    "mode", "n_agents", "seed", "converged", "rounds", "total_moves",
    "uplink", "downlink", "assistance_requests", "convergence_fraction",
    "config_hash",
]

SERIES_COLUMNS = [
    "mode", "n_agents", "seed", "round", "fraction", "gbest_dist",
    "uplink_attempts", "downlink_attempts", "moves",
]


class InvalidConfigError(ValueError):
    pass


def splitmix64(x: int) -> int:
    """Fixed 64-bit mix (SplitMix64) used for run-seed derivation."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def derive_run_seed(seed_base: int, run_index: int) -> int:
    return splitmix64(splitmix64(seed_base & 0xFFFFFFFFFFFFFFFF) ^ run_index)


@dataclass
class ScanParams:
    ray_count: int = 36
    max_range_m: float = 30.0
    sector_count: int = 36
    vfh_threshold: float = 0.6
    vfh_margin: int = 1


@dataclass
class ScenarioConfig:
    map_path: str = "plant"
    mode: Mode = Mode.DT1
    n_agents: int = 20
    seed: int = 0
    max_rounds: int = 700
    convergence_radius: float = 10.0
    convergence_fraction: float = 0.9
    sigma: float = 2.0
    replan_threshold_m: float = 15.0
    stuck_walk_rounds: int = 20       # walk steps taken after an obstacle trap
    comm_walk_rounds: int = 1         # minimum walk steps after a comm failure
    stagnation_walk_rounds: int = 8   # excursion length away from the gbest
    pso: PsoParams = field(default_factory=PsoParams)
    radio: radio.RadioParams = field(default_factory=radio.RadioParams)
    scan: ScanParams = field(default_factory=ScanParams)

    def validate(self) -> None:
        if self.n_agents < 1:
            raise InvalidConfigError("n_agents >= 1")
        if self.max_rounds < 1:
            raise InvalidConfigError("max_rounds >= 1")
        if not (0.0 < self.convergence_fraction <= 1.0):
            raise InvalidConfigError("0 < convergence_fraction <= 1")
        if self.convergence_radius <= 0:
            raise InvalidConfigError("convergence_radius > 0")
        if self.sigma < 0:
            raise InvalidConfigError("sigma >= 0")
        self.pso.validate()
        self.radio.validate()

    def effective_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d

    def config_hash(self) -> str:
        d = self.effective_dict()
        d.pop("seed", None)  # seed is its own CSV column
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class RunMetrics:
    mode: str
    n_agents: int
    seed: int
    converged: bool
    rounds_used: int
    final_convergence_fraction: float
    total_moves: int
    uplink_attempts: int
    downlink_attempts: int
    assistance_requests: int
    config_hash: str
    per_round: list[dict] = field(default_factory=list)

    @property
    def total_transmissions(self) -> int:
        return self.uplink_attempts + self.downlink_attempts

    def summary_row(self) -> list:
        return [
            self.mode, self.n_agents, self.seed, int(self.converged),
            self.rounds_used, self.total_moves, self.uplink_attempts,
            self.downlink_attempts, self.assistance_requests,
            f"{self.final_convergence_fraction:.4f}", self.config_hash,
        ]


def check_convergence(agents, target, radius: float, fraction: float):
    """Fraction of agents within `radius` of the target; converged flag."""
    if radius <= 0:
        raise ValueError("radius > 0")
    n = len(agents)
    within = sum(
        1 for a in agents
        if math.hypot(a.pos[0] - target[0], a.pos[1] - target[1]) <= radius
    )
    frac = within / n
    return frac, frac >= fraction


class Simulation:
    """One seeded run: owns agents, registry, ledger, and per-agent rngs."""

    def __init__(self, config: ScenarioConfig, world: WorldMap, field_: RadioField):
        config.validate()
        self.config = config
        self.world = world
        self.field = field_
        self.reg = TwinRegistry()
        self.ledger = CommLedger()
        self.round_no = 0

        run_seed = config.seed & 0xFFFFFFFFFFFFFFFF
        self.rngs = {
            i: np.random.default_rng(np.random.SeedSequence((run_seed, i)))
            for i in range(config.n_agents)
        }
        spawn_rng = np.random.default_rng(np.random.SeedSequence((run_seed, 1 << 32)))
        cells = world.spawn_cells
        picks = spawn_rng.choice(
            len(cells), size=config.n_agents, replace=len(cells) < config.n_agents
        )
        self.agents = [
            AgentState(id=i, pos=world.cell_center(*cells[int(k)]))
            for i, k in enumerate(picks)
        ]

    # ------------------------------------------------------------------

    def _dispatch_pso(self, a: AgentState) -> None:
        gbest = a.known_gbest_pos if a.known_gbest_pos is not None else a.pbest_pos
        if gbest is None:
            gbest = a.pos
        if (
            a.known_gbest_pos is None
            and (a.pbest_pos is None or np.array_equal(a.pbest_pos, a.pos))
            and not a.vel.any()
        ):
            # degenerate update: with no swarm information and pbest at the
            # current position the velocity stays zero forever, so take one
            # obstacle-aware exploration step instead of standing still
            sc = self.config.scan
            proposal = swarm.random_walk_step(
                a, self.world, self.rngs[a.id],
                v_max=self.config.pso.v_max,
                ray_count=sc.ray_count, scan_range=sc.max_range_m,
                sector_count=sc.sector_count, vfh_threshold=sc.vfh_threshold,
                vfh_margin=sc.vfh_margin,
            )
            if proposal is not None:
                swarm.apply_move(a, proposal, self.world)
            return
        proposal, vel = swarm.pso_step(a, gbest, self.config.pso, self.rngs[a.id])
        moved = swarm.apply_move(a, proposal, self.world)
        a.vel = vel if moved else np.zeros(2)

    def _dispatch_walk(self, a: AgentState) -> None:
        sc = self.config.scan
        proposal = swarm.random_walk_step(
            a, self.world, self.rngs[a.id],
            v_max=self.config.pso.v_max,
            ray_count=sc.ray_count, scan_range=sc.max_range_m,
            sector_count=sc.sector_count, vfh_threshold=sc.vfh_threshold,
            vfh_margin=sc.vfh_margin,
        )
        stepped = False
        if proposal is not None:
            stepped = swarm.apply_move(a, proposal, self.world)
        a.vel = np.zeros(2)
        # trap/stagnation escapes are bounded excursions; comm-triggered
        # walks run their excursion too, but end only once the link is back
        if stepped:
            a.walk_steps_left -= 1
            if a.walk_steps_left <= 0 and a.walk_reason != swarm.WALK_COMM:
                a.mode = AgentMode.PSO
                a.walk_reason = None

    def _dispatch_rescue(self, a: AgentState) -> None:
        cfg = self.config
        if (
            a.rescue_goal is not None
            and self.reg.gbest_pos is not None
            and float(np.hypot(*(self.reg.gbest_pos - a.rescue_goal))) > cfg.replan_threshold_m
        ):
            path = coordinator.handle_assistance(
                a, self.reg, self.world, self.field, self.ledger, cfg.mode,
                self.rngs[a.id],
            )
            if path is None:
                a.enter_random_walk(swarm.WALK_STUCK, cfg.stuck_walk_rounds)
                return
            a.rescue_waypoints = list(path.points)
            a.rescue_goal = self.reg.gbest_pos.copy()
        wps = a.rescue_waypoints or []
        if not wps:
            a.mode = AgentMode.PSO
            a.rescue_waypoints = None
            a.rescue_goal = None
            return
        # farthest path point reachable over a clear straight segment
        idx = None
        for i in range(len(wps) - 1, -1, -1):
            if environment.segment_clear(self.world, a.pos, wps[i]):
                idx = i
                break
        if idx is None:
            a.enter_random_walk(swarm.WALK_STUCK, cfg.stuck_walk_rounds)
            return
        del wps[:idx]   # points behind the shortcut are consumed
        pick = np.asarray(wps[0], dtype=float)
        d = float(np.hypot(*(pick - a.pos)))
        if len(wps) == 1 and d <= self.world.cell_size_m / 2:
            a.mode = AgentMode.PSO
            a.rescue_waypoints = None
            a.rescue_goal = None
            return
        proposal = pick if d <= cfg.pso.v_max else a.pos + (pick - a.pos) * (cfg.pso.v_max / d)
        moved = swarm.apply_move(a, proposal, self.world)
        a.vel = np.zeros(2)
        if moved and len(wps) > 1 and float(np.hypot(*(np.asarray(wps[0]) - a.pos))) <= self.world.cell_size_m / 2:
            wps.pop(0)
        if not moved:
            # path no longer followable from here; fall back to walking
            a.enter_random_walk(swarm.WALK_STUCK, cfg.stuck_walk_rounds)

    # ------------------------------------------------------------------

    def run_round(self) -> None:
        cfg = self.config
        world = self.world
        target = world.target
        self.round_no += 1
        rnd = self.round_no
        up0, down0 = self.ledger.uplink_attempts, self.ledger.downlink_attempts
        moves0 = sum(a.moves for a in self.agents)

        active = [a for a in self.agents if a.mode != AgentMode.ARRIVED]

        # 1. sensing
        for a in active:
            d = sense_distance(a.pos, target, cfg.sigma, self.rngs[a.id])
            a.observe(d)
            if cfg.mode == Mode.P2P:
                a.offer_gbest(a.pos, d)

        # 2. information exchange (P2P: arrived agents still transmit)
        if cfg.mode == Mode.P2P:
            res = coordinator.p2p_exchange(self.agents, self.field, self.ledger, self.rngs, rnd)
        else:
            res = coordinator.dt_exchange(
                active, self.reg, self.field, self.ledger, cfg.mode, self.rngs, rnd
            )

        # 3. arrival check, stagnation escape, movement
        for a in active:
            if math.hypot(a.pos[0] - target[0], a.pos[1] - target[1]) <= cfg.convergence_radius:
                a.mode = AgentMode.ARRIVED
                self.reg.mark_arrived(a.id)
                continue
            if (
                res.comm_ok.get(a.id, False)
                and a.mode == AgentMode.RANDOM_WALK
                and a.walk_reason == swarm.WALK_COMM
                and a.walk_steps_left <= 0
            ):
                a.mode = AgentMode.PSO
                a.walk_reason = None
            if a.id in res.stationary and a.known_gbest_pos is not None:
                continue   # mode-2 retry exhaustion: synced agents stay put;
                           # never-synced ones keep exploring toward coverage
            if a.mode == AgentMode.PSO:
                swarm.escape_gbest_stagnation(
                    a, a.known_gbest_pos, cfg.pso.stagnation_radius,
                    target, cfg.convergence_radius, cfg.stagnation_walk_rounds,
                )
                if a.mode == AgentMode.ARRIVED:
                    self.reg.mark_arrived(a.id)
                    continue
            if a.mode == AgentMode.PSO:
                self._dispatch_pso(a)
            elif a.mode == AgentMode.RANDOM_WALK:
                self._dispatch_walk(a)
            elif a.mode == AgentMode.RESCUE_FOLLOW:
                self._dispatch_rescue(a)

        # 4. trapped agents ask the server for help (DT modes only)
        for a in active:
            if a.mode == AgentMode.PSO and swarm.detect_stuck(a, cfg.pso):
                if cfg.mode.has_planner:
                    path = coordinator.handle_assistance(
                        a, self.reg, self.world, self.field, self.ledger,
                        cfg.mode, self.rngs[a.id],
                    )
                    if path is not None:
                        a.mode = AgentMode.RESCUE_FOLLOW
                        a.rescue_waypoints = list(path.points)
                        a.rescue_goal = self.reg.gbest_pos.copy()
                        a.blocked_proposals = 0
                    else:
                        a.enter_random_walk(swarm.WALK_STUCK, cfg.stuck_walk_rounds)
                else:
                    a.enter_random_walk(swarm.WALK_STUCK, cfg.stuck_walk_rounds)

        # 5. communication failures push agents into random walk next round;
        # mode-2 agents already paid by staying stationary and simply retry
        for a in active:
            if a.id in res.stationary:
                continue
            if a.mode == AgentMode.PSO and not res.comm_ok.get(a.id, True):
                a.enter_random_walk(swarm.WALK_COMM, cfg.comm_walk_rounds)

        frac, _ = check_convergence(
            self.agents, target, cfg.convergence_radius, cfg.convergence_fraction
        )
        gbest_dist = self.reg.gbest_dist
        if cfg.mode == Mode.P2P:
            gbest_dist = min((a.known_gbest_dist for a in self.agents), default=math.inf)
        self.ledger.per_round.append({
            "round": rnd,
            "uplink_attempts": self.ledger.uplink_attempts - up0,
            "downlink_attempts": self.ledger.downlink_attempts - down0,
            "uplink_cum": self.ledger.uplink_attempts,
            "downlink_cum": self.ledger.downlink_attempts,
            "moves": sum(a.moves for a in self.agents) - moves0,
            "fraction": frac,
            "gbest_dist": gbest_dist,
        })

    def run(self) -> RunMetrics:
        cfg = self.config
        converged = False
        while self.round_no < cfg.max_rounds:
            self.run_round()
            frac, converged = check_convergence(
                self.agents, self.world.target, cfg.convergence_radius,
                cfg.convergence_fraction,
            )
            if converged:
                break
        frac, converged = check_convergence(
            self.agents, self.world.target, cfg.convergence_radius,
            cfg.convergence_fraction,
        )
        return RunMetrics(
            mode=cfg.mode.value,
            n_agents=cfg.n_agents,
            seed=cfg.seed,
            converged=converged,
            rounds_used=self.round_no,
            final_convergence_fraction=frac,
            total_moves=sum(a.moves for a in self.agents),
            uplink_attempts=self.ledger.uplink_attempts,
            downlink_attempts=self.ledger.downlink_attempts,
            assistance_requests=self.ledger.assistance_requests,
            config_hash=cfg.config_hash(),
            per_round=list(self.ledger.per_round),
        )


# ----------------------------------------------------------------------
# map/field caching (immutable, shared across runs)

_MAP_CACHE: dict = {}


def load_world(map_path: str) -> WorldMap:
    if map_path in _MAP_CACHE:
        return _MAP_CACHE[map_path]
    if map_path == "plant" or not os.path.exists(map_path):
        from importlib import resources
        candidate = resources.files("dtswarm") / "maps" / f"{map_path}.yaml"
        if candidate.is_file():
            with resources.as_file(candidate) as p:
                world = environment.load_map(p)
        else:
            world = environment.load_map(map_path)   # raises a sensible error
    else:
        world = environment.load_map(map_path)
    _MAP_CACHE[map_path] = world
    return world


_FIELD_CACHE: dict = {}


def field_for(world: WorldMap, params: radio.RadioParams) -> RadioField:
    key = (id(world), tuple(sorted(asdict(params).items())))
    if key not in _FIELD_CACHE:
        _FIELD_CACHE[key] = radio.compute_field(world, params)
    return _FIELD_CACHE[key]


def run_scenario(config: ScenarioConfig, world: WorldMap | None = None,
                 field_: RadioField | None = None) -> RunMetrics:
    config.validate()
    if world is None:
        world = load_world(config.map_path)
    if field_ is None:
        field_ = field_for(world, config.radio)
    sim = Simulation(config, world, field_)
    return sim.run()


# ----------------------------------------------------------------------
# Monte Carlo

@dataclass
class Aggregate:
    mean: float
    stdev: float
    ci95: tuple[float, float]


def aggregate(values) -> Aggregate:
    v = np.asarray(list(values), dtype=float)
    m = float(v.mean()) if v.size else float("nan")
    s = float(v.std(ddof=1)) if v.size > 1 else 0.0
    half = 1.96 * s / math.sqrt(v.size) if v.size else 0.0
    return Aggregate(m, s, (m - half, m + half))


@dataclass
class MonteCarloResult:
    runs: list[RunMetrics]
    convergence_rate: float
    aggregates: dict[str, Aggregate]


_MC_STATE: dict = {}


def _mc_init(config, world, field_, seed_base):
    _MC_STATE["config"] = config
    _MC_STATE["world"] = world
    _MC_STATE["field"] = field_
    _MC_STATE["seed_base"] = seed_base


def _mc_run(i: int) -> RunMetrics:
    import dataclasses
    cfg = dataclasses.replace(
        _MC_STATE["config"], seed=derive_run_seed(_MC_STATE["seed_base"], i)
    )
    return run_scenario(cfg, _MC_STATE["world"], _MC_STATE["field"])


def monte_carlo(config: ScenarioConfig, runs: int, seed_base: int,
                jobs: int = 1) -> MonteCarloResult:
    """Seeded batch; run i's seed is a fixed mix of (seed_base, i)."""
    if runs < 1:
        raise InvalidConfigError("runs >= 1")
    world = load_world(config.map_path)
    field_ = field_for(world, config.radio)
    if jobs <= 1:
        _mc_init(config, world, field_, seed_base)
        results = [_mc_run(i) for i in range(runs)]
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(jobs, initializer=_mc_init,
                      initargs=(config, world, field_, seed_base)) as pool:
            results = pool.map(_mc_run, range(runs))
    conv = [r for r in results if r.converged]
    aggs = {
        "rounds": aggregate(r.rounds_used for r in results),
        "total_moves": aggregate(r.total_moves for r in results),
        "uplink": aggregate(r.uplink_attempts for r in results),
        "downlink": aggregate(r.downlink_attempts for r in results),
        "total_transmissions": aggregate(r.total_transmissions for r in results),
    }
    return MonteCarloResult(results, len(conv) / len(results), aggs)


# ----------------------------------------------------------------------
# CSV output

def write_summary_csv(path, metrics: list[RunMetrics]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_COLUMNS)
        for m in metrics:
            w.writerow(m.summary_row())


def write_series_csv(path, metrics: list[RunMetrics]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SERIES_COLUMNS)
        for m in metrics:
            for r in m.per_round:
                w.writerow([
                    m.mode, m.n_agents, m.seed, r["round"],
                    f"{r['fraction']:.4f}", f"{r['gbest_dist']:.3f}",
                    r["uplink_attempts"], r["downlink_attempts"], r["moves"],
                ])
