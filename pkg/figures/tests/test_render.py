import math

import pytest

from dtswarm_figures import (
    EmptyInputError,
    FigureSpec,
    KINDS,
    MissingColumnError,
    render,
)

from figdata import SUMMARY_HEADER, summary_rows, write_summary

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.fixture
def results_dir(tmp_path):
    """Directory with a synthetic summary.csv and a small per_field.csv."""
    import csv
    write_summary(tmp_path / "summary.csv", summary_rows())
    with open(tmp_path / "per_field.csv", "w", newline="") as f:
        w = csv.writer(f)
        for iy in range(20):
            w.writerow([f"{min(1.0, (abs(ix - 10) + abs(iy - 10)) / 15):.6f}"
                        for ix in range(20)])
    return tmp_path


def test_all_kinds_render_png(results_dir, tmp_path):
    for kind in KINDS:
        out = tmp_path / f"{kind}.png"
        render(FigureSpec(kind, str(results_dir), str(out)))
        assert out.read_bytes()[:8] == PNG_MAGIC


def test_unknown_kind_rejected(results_dir, tmp_path):
    with pytest.raises(ValueError):
        render(FigureSpec("pie", str(results_dir), str(tmp_path / "x.png")))


def test_total_moves_series_are_group_means(results_dir, tmp_path):
    series = render(FigureSpec("total_moves", str(results_dir),
                               str(tmp_path / "m.png")))
    # DT1 base 1000, n=10, jitter 1.0..1.15 over 6 runs
    vals = [int(1000 * (1.0 + 0.03 * r)) for r in range(6)]
    mean = sum(vals) / len(vals)
    got = series["DT1"]["mean"][series["DT1"]["n"].index(10)]
    assert math.isclose(got, mean, rel_tol=1e-12)
    # CI half-width: 1.96 * sample stdev / sqrt(runs)
    var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    half = 1.96 * math.sqrt(var) / math.sqrt(len(vals))
    got_half = series["DT1"]["ci_half"][series["DT1"]["n"].index(10)]
    assert math.isclose(got_half, half, rel_tol=1e-12)


def test_traffic_series_reproduce_mode_orderings(results_dir, tmp_path):
    series = render(FigureSpec("traffic", str(results_dir),
                               str(tmp_path / "t.png")))
    for i, n in enumerate((10, 20, 40)):
        up, dn = series["uplink"], series["downlink"]
        assert up["DT2"]["mean"][i] > up["DT1"]["mean"][i]
        assert dn["DT2"]["mean"][i] < dn["DT1"]["mean"][i]
        assert up["P2P"]["mean"][i] > 3 * (up["DT1"]["mean"][i] + dn["DT1"]["mean"][i])


def test_convergence_ratio_values(results_dir, tmp_path):
    series = render(FigureSpec("convergence_ratio", str(results_dir),
                               str(tmp_path / "c.png")))
    assert series["n"] == [10, 20, 40]
    for r in series["uplink_ratio"]:
        assert math.isclose(r, 4500 / 1100, rel_tol=1e-12)
    assert series["rw1_rate"] == [1.0, 1.0, 0.0]
    assert series["dt1_rate"] == [1.0, 1.0, 1.0]


def test_per_map_reports_grid(results_dir, tmp_path):
    series = render(FigureSpec("per_map", str(results_dir),
                               str(tmp_path / "p.png")))
    assert series["shape"] == [20, 20]
    assert series["min"] == 0.0 and series["max"] == 1.0


def test_single_run_renders_without_ci(tmp_path):
    write_summary(tmp_path / "summary.csv", summary_rows(runs=1, counts=(10,)))
    series = render(FigureSpec("total_moves", str(tmp_path),
                               str(tmp_path / "m.png")))
    assert series["DT1"]["ci_half"] == [0.0]
    assert (tmp_path / "m.png").exists()


def test_missing_column_raises(tmp_path):
    rows = [r[:5] + r[6:] for r in summary_rows(runs=2)]   # drop total_moves
    header = SUMMARY_HEADER[:5] + SUMMARY_HEADER[6:]
    import csv
    with open(tmp_path / "summary.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    with pytest.raises(MissingColumnError):
        render(FigureSpec("total_moves", str(tmp_path), str(tmp_path / "m.png")))


def test_empty_summary_raises(tmp_path):
    write_summary(tmp_path / "summary.csv", [])
    with pytest.raises(EmptyInputError):
        render(FigureSpec("traffic", str(tmp_path), str(tmp_path / "t.png")))


def test_absent_input_raises(tmp_path):
    with pytest.raises(EmptyInputError):
        render(FigureSpec("per_map", str(tmp_path), str(tmp_path / "p.png")))


def test_ratio_requires_both_modes(tmp_path):
    rows = [r for r in summary_rows(runs=2) if r[0] != "RW1"]
    write_summary(tmp_path / "summary.csv", rows)
    with pytest.raises(EmptyInputError):
        render(FigureSpec("convergence_ratio", str(tmp_path),
                          str(tmp_path / "c.png")))


def test_repeat_render_identical_series(results_dir, tmp_path):
    a = render(FigureSpec("traffic", str(results_dir), str(tmp_path / "a.png")))
    b = render(FigureSpec("traffic", str(results_dir), str(tmp_path / "b.png")))
    assert a == b


def test_cli_exit_codes(results_dir, tmp_path):
    from dtswarm_figures.render import main
    ok = main(["--kind", "total_moves", "--in", str(results_dir),
               "--out", str(tmp_path / "m.png")])
    assert ok == 0
    bad = main(["--kind", "per_map", "--in", str(tmp_path / "nope"),
                "--out", str(tmp_path / "p.png")])
    assert bad == 1
