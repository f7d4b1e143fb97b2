"""Packet-error-rate field around the base station.

Log-distance path loss with a per-wall penetration penalty, mapped to a
PER in [0,1] through a logistic curve. The field is computed once per map
and shared (immutable) across runs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .environment import WorldMap, supercover_cells


@dataclass
class RadioParams:
    ref_loss_db: float = 40.0          # loss at 1 m
    path_loss_exponent: float = 3.0
    wall_penetration_db: float = 9.0   # per distinct obstacle run crossed
    per_curve_midpoint_db: float = 126.0
    per_curve_slope_db: float = 3.0

    def validate(self) -> None:
        if self.path_loss_exponent < 2.0:
            raise ValueError("path_loss_exponent must be >= 2 (indoor-plausible)")
        if self.wall_penetration_db < 0:
            raise ValueError("wall_penetration_db must be >= 0")
        if self.per_curve_slope_db <= 0:
            raise ValueError("per_curve_slope_db must be > 0")


@dataclass
class RadioField:
    per: np.ndarray        # shape (ny, nx), values in [0, 1]
    cell_size_m: float

    def per_at(self, p) -> float:
        ny, nx = self.per.shape
        ix = min(max(int(p[0] // self.cell_size_m), 0), nx - 1)
        iy = min(max(int(p[1] // self.cell_size_m), 0), ny - 1)
        return float(self.per[iy, ix])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            for row in self.per:
                w.writerow([f"{v:.6f}" for v in row])


def _wall_runs(world: WorldMap, a, b) -> int:
    """Number of distinct obstacle-cell runs crossed by segment a->b."""
    runs = 0
    inside = False
    occ = world.occupancy
    for ix, iy in supercover_cells(world, a, b):
        blocked = occ[iy, ix]
        if blocked and not inside:
            runs += 1
        inside = blocked
    return runs


def path_loss(world: WorldMap, params: RadioParams, p) -> float:
    d = max(1.0, math.hypot(p[0] - world.base_station[0], p[1] - world.base_station[1]))
    loss = params.ref_loss_db + 10.0 * params.path_loss_exponent * math.log10(d)
    loss += params.wall_penetration_db * _wall_runs(world, world.base_station, p)
    return loss


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def compute_field(world: WorldMap, params: RadioParams) -> RadioField:
    params.validate()
    per = np.empty((world.ny, world.nx))
    for iy in range(world.ny):
        for ix in range(world.nx):
            c = world.cell_center(ix, iy)
            loss = path_loss(world, params, c)
            per[iy, ix] = _logistic((loss - params.per_curve_midpoint_db) / params.per_curve_slope_db)
    return RadioField(per, world.cell_size_m)


def try_transmit(field: RadioField, p, rng: np.random.Generator) -> bool:
    """One Bernoulli channel draw at p; success probability 1 - PER."""
    return rng.random() < 1.0 - field.per_at(p)
