"""Batch entry point: single runs or mode x agent-count Monte Carlo sweeps.

Usage:
    dtswarm --config sweep.yaml --out results/
    dtswarm --mode DT1 --agents 20 --runs 5 --seed 7 --out results/

Flag values override config-file values; the fully materialized effective
configuration is echoed to <out>/effective_config.json so no default
stays hidden.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import yaml

from . import engine
from .coordinator import Mode
from .engine import InvalidConfigError, ScenarioConfig
from .radio import RadioParams
from .swarm import PsoParams

MODE_NAMES = [m.value for m in Mode]


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class SweepSpec:
    modes: list[Mode]
    agent_counts: list[int]
    runs: int
    seed_base: int
    out_dir: str
    base_config: ScenarioConfig
    export_per_field: bool = False

    def validate(self) -> None:
        if not self.modes or not self.agent_counts:
            raise ConfigError("modes and agent counts must be non-empty")
        if self.runs < 1:
            raise ConfigError("runs >= 1")
        for n in self.agent_counts:
            if n < 1:
                raise ConfigError("n_agents >= 1")
        self.base_config.validate()


def _parse_mode(name: str) -> Mode:
    try:
        return Mode(name)
    except ValueError:
        raise ConfigError(
            f"unknown mode {name!r}; valid modes: {', '.join(MODE_NAMES)}"
        ) from None


def _sub_params(cls, doc: dict, key: str):
    params = cls()
    for k, v in (doc.get(key) or {}).items():
        if not hasattr(params, k):
            raise ConfigError(f"unknown field {key}.{k}")
        setattr(params, k, v)
    return params


def parse_config(path: str | None, overrides: dict | None = None) -> SweepSpec:
    """Read the YAML config, apply CLI overrides, materialize every default."""
    doc: dict = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as f:
                doc = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")

    ov = overrides or {}
    modes = doc.get("modes")
    if "mode" in doc and modes is None:
        modes = [doc["mode"]]
    if ov.get("mode"):
        modes = [ov["mode"]]
    if modes is None:
        raise ConfigError("no mode given (use 'mode:', 'modes:' or --mode)")
    modes = [_parse_mode(str(m)) for m in modes]

    counts = doc.get("agents", doc.get("n_agents"))
    if ov.get("agents"):
        counts = ov["agents"]
    if counts is None:
        counts = [20]
    if isinstance(counts, int):
        counts = [counts]
    counts = [int(n) for n in counts]

    base = ScenarioConfig(
        map_path=str(ov.get("map") or doc.get("map", "plant")),
        mode=modes[0],
        n_agents=counts[0],
        max_rounds=int(ov.get("max_rounds") or doc.get("max_rounds", 700)),
        convergence_radius=float(doc.get("convergence_radius", 10.0)),
        convergence_fraction=float(doc.get("convergence_fraction", 0.9)),
        sigma=float(doc.get("sigma", 2.0)),
        replan_threshold_m=float(doc.get("replan_threshold_m", 15.0)),
        stuck_walk_rounds=int(doc.get("stuck_walk_rounds", 20)),
        comm_walk_rounds=int(doc.get("comm_walk_rounds", 1)),
        stagnation_walk_rounds=int(doc.get("stagnation_walk_rounds", 8)),
        pso=_sub_params(PsoParams, doc, "pso"),
        radio=_sub_params(RadioParams, doc, "radio"),
        scan=_sub_params(engine.ScanParams, doc, "scan"),
    )

    spec = SweepSpec(
        modes=modes,
        agent_counts=counts,
        runs=int(ov["runs"] if ov.get("runs") is not None else doc.get("runs", 1)),
        seed_base=int(ov["seed"] if ov.get("seed") is not None else doc.get("seed", 0)),
        out_dir=str(ov.get("out") or doc.get("out", "results")),
        base_config=base,
        export_per_field=bool(ov.get("export_per_field") or doc.get("export_per_field", False)),
    )
    try:
        spec.validate()
    except InvalidConfigError as e:
        raise ConfigError(str(e)) from None
    return spec


def run_sweep(spec: SweepSpec, jobs: int = 1) -> int:
    """Execute every (mode, n) cell; writes summary.csv and series.csv."""
    os.makedirs(spec.out_dir, exist_ok=True)

    echo = {
        "modes": [m.value for m in spec.modes],
        "agents": spec.agent_counts,
        "runs": spec.runs,
        "seed": spec.seed_base,
        "out": spec.out_dir,
        "jobs": jobs,
        "base_config": spec.base_config.effective_dict(),
    }
    with open(os.path.join(spec.out_dir, "effective_config.json"), "w") as f:
        json.dump(echo, f, indent=2, sort_keys=True)

    world = engine.load_world(spec.base_config.map_path)
    field_ = engine.field_for(world, spec.base_config.radio)
    if spec.export_per_field:
        field_.to_csv(os.path.join(spec.out_dir, "per_field.csv"))

    all_metrics = []
    try:
        for mi, mode in enumerate(spec.modes):
            for n in spec.agent_counts:
                cell_base = engine.derive_run_seed(spec.seed_base, (mi << 20) + n)
                cfg = dataclasses.replace(spec.base_config, mode=mode, n_agents=n)
                print(f"[dtswarm] {mode.value} n={n} runs={spec.runs}", file=sys.stderr)
                mc = engine.monte_carlo(cfg, spec.runs, cell_base, jobs=jobs)
                all_metrics.extend(mc.runs)
                print(
                    f"[dtswarm]   convergence_rate={mc.convergence_rate:.2f} "
                    f"mean_rounds={mc.aggregates['rounds'].mean:.1f}",
                    file=sys.stderr,
                )
    finally:
        # flush whatever completed, even on abort
        engine.write_summary_csv(os.path.join(spec.out_dir, "summary.csv"), all_metrics)
        engine.write_series_csv(os.path.join(spec.out_dir, "series.csv"), all_metrics)
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dtswarm", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="YAML scenario/sweep config file")
    p.add_argument("--mode", choices=MODE_NAMES, help="single mode (overrides config)")
    p.add_argument("--agents", type=int, nargs="+", help="agent counts")
    p.add_argument("--runs", type=int, help="Monte Carlo runs per (mode, n) cell")
    p.add_argument("--seed", type=int, help="seed base")
    p.add_argument("--out", help="output directory")
    p.add_argument("--map", help="map file path or builtin name")
    p.add_argument("--max-rounds", type=int, dest="max_rounds")
    p.add_argument("--export-per-field", action="store_true", dest="export_per_field",
                   help="also write the PER grid as CSV")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    return p


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    overrides = {
        "mode": args.mode,
        "agents": args.agents,
        "runs": args.runs,
        "seed": args.seed,
        "out": args.out,
        "map": args.map,
        "max_rounds": args.max_rounds,
        "export_per_field": args.export_per_field,
    }
    try:
        spec = parse_config(args.config, overrides)
    except ConfigError as e:
        print(f"dtswarm: config error: {e}", file=sys.stderr)
        return 1
    try:
        return run_sweep(spec, jobs=max(1, args.jobs))
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"dtswarm: runtime error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
