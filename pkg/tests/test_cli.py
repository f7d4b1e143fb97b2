import json
import os

import pytest

from dtswarm import cli
from dtswarm.cli import ConfigError, main, parse_config
from dtswarm.coordinator import Mode


# ---------------------------------------------------------------- parse_config

def test_parse_minimal_overrides():
    spec = parse_config(None, {"mode": "DT1", "agents": [10], "runs": 3,
                               "seed": 5, "out": "o"})
    assert spec.modes == [Mode.DT1]
    assert spec.agent_counts == [10]
    assert spec.runs == 3 and spec.seed_base == 5 and spec.out_dir == "o"
    assert spec.base_config.max_rounds == 700          # default materialized


def test_parse_yaml_config(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(
        "modes: [DT1, P2P]\n"
        "agents: [10, 20]\n"
        "runs: 4\n"
        "seed: 9\n"
        "max_rounds: 123\n"
        "sigma: 1.5\n"
        "pso:\n  v_max: 4.0\n"
        "radio:\n  wall_penetration_db: 6.0\n"
    )
    spec = parse_config(str(p), {})
    assert spec.modes == [Mode.DT1, Mode.P2P]
    assert spec.agent_counts == [10, 20]
    assert spec.runs == 4 and spec.seed_base == 9
    assert spec.base_config.max_rounds == 123
    assert spec.base_config.sigma == 1.5
    assert spec.base_config.pso.v_max == 4.0
    assert spec.base_config.radio.wall_penetration_db == 6.0


def test_cli_flags_override_config_file(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("mode: DT1\nagents: 10\nruns: 4\nseed: 9\n")
    spec = parse_config(str(p), {"mode": "RW2", "agents": [30], "runs": 2})
    assert spec.modes == [Mode.RW2]
    assert spec.agent_counts == [30]
    assert spec.runs == 2
    assert spec.seed_base == 9       # untouched values survive


def test_parse_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(None, {})                          # no mode anywhere
    with pytest.raises(ConfigError):
        parse_config(None, {"mode": "DT9"})             # unknown mode
    with pytest.raises(ConfigError):
        parse_config(None, {"mode": "DT1", "runs": 0})
    with pytest.raises(ConfigError):
        parse_config(None, {"mode": "DT1", "agents": [0]})
    with pytest.raises(ConfigError):
        parse_config(str(tmp_path / "missing.yaml"), {})
    bad = tmp_path / "bad.yaml"
    bad.write_text("mode: DT1\npso:\n  nonsense_field: 1\n")
    with pytest.raises(ConfigError):
        parse_config(str(bad), {})
    notmap = tmp_path / "list.yaml"
    notmap.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        parse_config(str(notmap), {})


# ---------------------------------------------------------------- main / sweeps

def run_main(*argv):
    return main(list(argv))


def test_main_exit_codes(tmp_path):
    assert run_main("--mode", "DT1", "--agents", "0", "--runs", "1",
                    "--out", str(tmp_path / "x")) == 1
    with pytest.raises(SystemExit):
        run_main("--mode", "NOPE")


def test_main_writes_all_outputs(tmp_path):
    out = tmp_path / "res"
    rc = run_main("--mode", "DT1", "--agents", "5", "--runs", "2", "--seed", "3",
                  "--max-rounds", "40", "--out", str(out), "--export-per-field")
    assert rc == 0
    assert (out / "summary.csv").is_file()
    assert (out / "series.csv").is_file()
    assert (out / "per_field.csv").is_file()
    echo = json.loads((out / "effective_config.json").read_text())
    assert echo["modes"] == ["DT1"] and echo["runs"] == 2
    assert echo["base_config"]["max_rounds"] == 40
    with open(out / "summary.csv") as f:
        lines = f.read().strip().splitlines()
    assert len(lines) == 3                       # header + 2 runs


def test_sweep_covers_every_cell(tmp_path):
    out = tmp_path / "res"
    p = tmp_path / "c.yaml"
    p.write_text(
        f"modes: [DT1, P2P]\nagents: [5, 8]\nruns: 2\nseed: 1\n"
        f"max_rounds: 30\nout: {out}\n"
    )
    assert run_main("--config", str(p)) == 0
    import csv
    with open(out / "summary.csv") as f:
        rows = list(csv.DictReader(f))
    cells = {(r["mode"], r["n_agents"]) for r in rows}
    assert cells == {("DT1", "5"), ("DT1", "8"), ("P2P", "5"), ("P2P", "8")}
    assert len(rows) == 8


def test_sweep_byte_identical_across_worker_counts(tmp_path):
    outs = []
    for jobs, name in ((1, "a"), (8, "b")):
        out = tmp_path / name
        rc = run_main("--mode", "DT1", "--agents", "6", "--runs", "4",
                      "--seed", "21", "--max-rounds", "60",
                      "--out", str(out), "--jobs", str(jobs))
        assert rc == 0
        outs.append(out)
    for fname in ("summary.csv", "series.csv"):
        a = (outs[0] / fname).read_bytes()
        b = (outs[1] / fname).read_bytes()
        assert a == b
