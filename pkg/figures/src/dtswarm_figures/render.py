"""Render result figures from dtswarm CSV outputs.

Four figure kinds:

* ``total_moves``        mean total moves vs agent count, one line per mode,
                         with 95% CI bands;
* ``traffic``            mean uplink and downlink attempts vs agent count,
                         grouped bars per mode;
* ``convergence_ratio``  bars of the RW1-to-DT1 uplink ratio per agent count,
                         overlaid with the two modes' convergence rates;
* ``per_map``            heat image of the exported packet-error-rate grid
                         (lighter shades = better signal quality).

Every renderer returns the exact data series it drew, so tests (and
callers) can assert on numbers instead of pixels. Rendering is read-only
over its inputs.

Usage:
    dtswarm-figures --kind traffic --in results/ --out traffic.png
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

KINDS = ("total_moves", "traffic", "convergence_ratio", "per_map")

# canonical mode ordering for legends and bar groups
MODE_ORDER = ["P2P", "DT1", "DT2", "RW1", "RW2"]

SUMMARY_COLUMNS = {
    "total_moves": ["mode", "n_agents", "total_moves"],
    "traffic": ["mode", "n_agents", "uplink", "downlink"],
    "convergence_ratio": ["mode", "n_agents", "uplink", "converged"],
}


class MissingColumnError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


@dataclass
class FigureSpec:
    kind: str
    in_path: str      # CSV file, or a results directory holding it
    out_path: str

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; one of {KINDS}")


def _resolve_csv(in_path: str, default_name: str) -> str:
    if os.path.isdir(in_path):
        return os.path.join(in_path, default_name)
    return in_path


def load_summary(path: str, required: list[str]) -> pd.DataFrame:
    if not os.path.exists(path):
        raise EmptyInputError(f"input CSV not found: {path}")
    df = pd.read_csv(path)
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise MissingColumnError(f"{path}: missing columns {missing}")
    if df.empty:
        raise EmptyInputError(f"{path}: no data rows")
    return df


def load_per_grid(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise EmptyInputError(f"input CSV not found: {path}")
    grid = np.genfromtxt(path, delimiter=",")
    if grid.size == 0 or np.isnan(grid).all():
        raise EmptyInputError(f"{path}: no grid values")
    return np.atleast_2d(grid)


def _modes_in(df: pd.DataFrame) -> list[str]:
    present = set(df["mode"].astype(str))
    ordered = [m for m in MODE_ORDER if m in present]
    return ordered + sorted(present - set(ordered))


def summary_stats(df: pd.DataFrame, value: str) -> pd.DataFrame:
    """Per (mode, n_agents): mean, 95% CI half-width and run count of `value`."""
    def agg(g: pd.Series) -> pd.Series:
        v = g.to_numpy(dtype=float)
        mean = v.mean()
        half = 1.96 * v.std(ddof=1) / math.sqrt(len(v)) if len(v) > 1 else 0.0
        return pd.Series({"mean": mean, "ci_half": half, "runs": len(v)})

    out = (
        df.groupby(["mode", "n_agents"])[value]
        .apply(agg)
        .unstack()
        .reset_index()
    )
    out["runs"] = out["runs"].astype(int)
    return out


def render_total_moves(spec: FigureSpec) -> dict:
    df = load_summary(_resolve_csv(spec.in_path, "summary.csv"),
                      SUMMARY_COLUMNS["total_moves"])
    stats = summary_stats(df, "total_moves")
    fig, ax = plt.subplots(figsize=(6, 4))
    series: dict = {}
    for mode in _modes_in(df):
        s = stats[stats["mode"] == mode].sort_values("n_agents")
        n = s["n_agents"].to_numpy()
        mean = s["mean"].to_numpy()
        half = s["ci_half"].to_numpy()
        ax.plot(n, mean, marker="o", label=mode)
        ax.fill_between(n, mean - half, mean + half, alpha=0.2)
        series[mode] = {"n": n.tolist(), "mean": mean.tolist(),
                        "ci_half": half.tolist()}
    ax.set_xlabel("agents")
    ax.set_ylabel("mean total moves")
    ax.set_title("Total moves per mode (95% CI)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out_path)
    plt.close(fig)
    return series


def render_traffic(spec: FigureSpec) -> dict:
    df = load_summary(_resolve_csv(spec.in_path, "summary.csv"),
                      SUMMARY_COLUMNS["traffic"])
    modes = _modes_in(df)
    counts = sorted(df["n_agents"].unique())
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharex=True)
    series: dict = {}
    width = 0.8 / max(1, len(modes))
    x = np.arange(len(counts), dtype=float)
    for link, ax in zip(("uplink", "downlink"), axes):
        stats = summary_stats(df, link)
        series[link] = {}
        for k, mode in enumerate(modes):
            s = (stats[stats["mode"] == mode]
                 .set_index("n_agents").reindex(counts))
            mean = s["mean"].to_numpy(dtype=float)
            half = s["ci_half"].to_numpy(dtype=float)
            ax.bar(x + (k - (len(modes) - 1) / 2) * width, mean, width,
                   yerr=half, label=mode, capsize=2)
            series[link][mode] = {"n": counts, "mean": mean.tolist(),
                                  "ci_half": half.tolist()}
        ax.set_yscale("log")
        ax.set_xticks(x, [str(c) for c in counts])
        ax.set_xlabel("agents")
        ax.set_ylabel(f"mean {link} attempts")
        ax.set_title(link)
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(spec.out_path)
    plt.close(fig)
    return series


def render_convergence_ratio(spec: FigureSpec) -> dict:
    df = load_summary(_resolve_csv(spec.in_path, "summary.csv"),
                      SUMMARY_COLUMNS["convergence_ratio"])
    for mode in ("RW1", "DT1"):
        if mode not in set(df["mode"].astype(str)):
            raise EmptyInputError(f"convergence_ratio needs {mode} rows")
    counts = sorted(
        set(df[df["mode"] == "RW1"]["n_agents"])
        & set(df[df["mode"] == "DT1"]["n_agents"])
    )
    if not counts:
        raise EmptyInputError("no agent count present in both RW1 and DT1")
    up = summary_stats(df, "uplink").set_index(["mode", "n_agents"])
    rates = df.groupby(["mode", "n_agents"])["converged"].mean()
    ratio = [up.loc[("RW1", n), "mean"] / up.loc[("DT1", n), "mean"]
             for n in counts]
    rw1_rate = [float(rates.loc[("RW1", n)]) for n in counts]
    dt1_rate = [float(rates.loc[("DT1", n)]) for n in counts]

    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(counts), dtype=float)
    ax.bar(x, ratio, 0.5, color="tab:gray", label="RW1 / DT1 uplink ratio")
    ax.set_xticks(x, [str(c) for c in counts])
    ax.set_xlabel("agents")
    ax.set_ylabel("uplink ratio")
    ax2 = ax.twinx()
    ax2.plot(x, rw1_rate, marker="s", color="tab:red", label="RW1 rate")
    ax2.plot(x, dt1_rate, marker="o", color="tab:blue", label="DT1 rate")
    ax2.set_ylim(0.0, 1.05)
    ax2.set_ylabel("convergence rate")
    h1, l1 = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(h1 + h2, l1 + l2, loc="center left")
    ax.set_title("Walk-only vs twin-assisted: rate and uplink cost")
    fig.tight_layout()
    fig.savefig(spec.out_path)
    plt.close(fig)
    return {"n": counts, "uplink_ratio": ratio,
            "rw1_rate": rw1_rate, "dt1_rate": dt1_rate}


def render_per_map(spec: FigureSpec) -> dict:
    grid = load_per_grid(_resolve_csv(spec.in_path, "per_field.csv"))
    fig, ax = plt.subplots(figsize=(5.5, 5))
    # Greys maps PER 0 -> white, PER 1 -> black: lighter = better signal
    im = ax.imshow(grid, origin="lower", cmap="Greys", vmin=0.0, vmax=1.0)
    fig.colorbar(im, ax=ax, label="packet error rate")
    ax.set_xlabel("grid x")
    ax.set_ylabel("grid y")
    ax.set_title("Packet-error-rate map")
    fig.tight_layout()
    fig.savefig(spec.out_path)
    plt.close(fig)
    return {"shape": list(grid.shape),
            "min": float(grid.min()), "max": float(grid.max())}


_RENDERERS = {
    "total_moves": render_total_moves,
    "traffic": render_traffic,
    "convergence_ratio": render_convergence_ratio,
    "per_map": render_per_map,
}


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns the plotted data series."""
    spec.validate()
    return _RENDERERS[spec.kind](spec)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="dtswarm-figures", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="in_path", required=True,
                   help="CSV file or results directory")
    p.add_argument("--out", dest="out_path", required=True,
                   help="output image path")
    args = p.parse_args(argv)
    try:
        render(FigureSpec(args.kind, args.in_path, args.out_path))
    except (MissingColumnError, EmptyInputError, ValueError) as e:
        print(f"dtswarm-figures: {e}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
