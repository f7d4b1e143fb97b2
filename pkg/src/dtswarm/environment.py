"""Static world model: occupancy grid, target, and the two onboard sensors.

The world is a rectangular area (600x600 m by default) rasterized onto a
square-cell occupancy grid. Obstacles are axis-aligned rectangles. Agents
carry two sensors: a noisy distance-to-target sensor (gas-concentration
style, penetrates walls) and a 360-degree range scanner for local
obstacle detection.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import yaml


class MapError(ValueError):
    pass


class TargetInsideObstacleError(MapError):
    pass


class DisconnectedMapError(MapError):
    pass


class OriginOccupiedError(ValueError):
    pass


@dataclass
class ObstacleSpec:
    """Axis-aligned obstacle rectangles, (x_min, y_min, x_max, y_max) in meters."""

    rects: list[tuple[float, float, float, float]] = field(default_factory=list)

    def validate(self, width_m: float, height_m: float) -> None:
        for r in self.rects:
            x0, y0, x1, y1 = r
            if x1 <= x0 or y1 <= y0:
                raise MapError(f"degenerate obstacle rectangle {r}")
            if x0 < 0 or y0 < 0 or x1 > width_m or y1 > height_m:
                raise MapError(f"obstacle rectangle {r} outside map bounds")


@dataclass
class WorldMap:
    width_m: float
    height_m: float
    cell_size_m: float
    occupancy: np.ndarray          # bool, shape (ny, nx), True = obstacle
    target: np.ndarray             # (2,)
    base_station: np.ndarray       # (2,)
    spawn_cells: list[tuple[int, int]]   # free (ix, iy) cells agents may start in
    rects: list[tuple[float, float, float, float]] = field(default_factory=list)

    @property
    def nx(self) -> int:
        return self.occupancy.shape[1]

    @property
    def ny(self) -> int:
        return self.occupancy.shape[0]

    def cell_of(self, p) -> tuple[int, int]:
        ix = min(int(p[0] // self.cell_size_m), self.nx - 1)
        iy = min(int(p[1] // self.cell_size_m), self.ny - 1)
        return max(ix, 0), max(iy, 0)

    def cell_center(self, ix: int, iy: int) -> np.ndarray:
        return np.array([(ix + 0.5) * self.cell_size_m, (iy + 0.5) * self.cell_size_m])

    def in_bounds(self, p) -> bool:
        return 0.0 <= p[0] < self.width_m and 0.0 <= p[1] < self.height_m

    def clamp(self, p) -> np.ndarray:
        eps = 1e-9
        return np.array([
            min(max(p[0], 0.0), self.width_m - eps),
            min(max(p[1], 0.0), self.height_m - eps),
        ])


@dataclass
class RangeScan:
    origin: np.ndarray
    ray_count: int
    max_range_m: float
    headings: np.ndarray           # (ray_count,), radians, uniform over [0, 2pi)
    distances: np.ndarray          # (ray_count,), first-hit distance, max_range if none


def _rasterize(spec: ObstacleSpec, nx: int, ny: int, cell: float) -> np.ndarray:
    occ = np.zeros((ny, nx), dtype=bool)
    cx = (np.arange(nx) + 0.5) * cell
    cy = (np.arange(ny) + 0.5) * cell
    for x0, y0, x1, y1 in spec.rects:
        xm = (cx > x0) & (cx < x1)
        ym = (cy > y0) & (cy < y1)
        occ[np.ix_(ym, xm)] = True
    return occ


def _free_neighbors(occ: np.ndarray, ix: int, iy: int):
    """8-connected free neighbors, diagonals forbidden past blocked corners."""
    ny, nx = occ.shape
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            jx, jy = ix + dx, iy + dy
            if not (0 <= jx < nx and 0 <= jy < ny):
                continue
            if occ[jy, jx]:
                continue
            if dx != 0 and dy != 0:
                if occ[iy, jx] or occ[jy, ix]:
                    continue
            yield jx, jy


def build_map(
    spec: ObstacleSpec,
    target,
    base_station,
    cell_size: float = 5.0,
    width_m: float = 600.0,
    height_m: float = 600.0,
    spawn_rect: tuple[float, float, float, float] | None = None,
) -> WorldMap:
    """Rasterize obstacles and validate target reachability from every spawn cell."""
    spec.validate(width_m, height_m)
    nx = int(round(width_m / cell_size))
    ny = int(round(height_m / cell_size))
    occ = _rasterize(spec, nx, ny, cell_size)

    target = np.asarray(target, dtype=float)
    base_station = np.asarray(base_station, dtype=float)
    world = WorldMap(width_m, height_m, cell_size, occ, target, base_station, [], spec.rects)

    tix, tiy = world.cell_of(target)
    if occ[tiy, tix]:
        raise TargetInsideObstacleError(f"target {tuple(target)} lies inside an obstacle")
    bix, biy = world.cell_of(base_station)
    if occ[biy, bix]:
        raise MapError(f"base station {tuple(base_station)} lies inside an obstacle")

    # Reachability: flood fill from the target cell over the free grid.
    reach = np.zeros_like(occ)
    q = deque([(tix, tiy)])
    reach[tiy, tix] = True
    while q:
        cx_, cy_ = q.popleft()
        for jx, jy in _free_neighbors(occ, cx_, cy_):
            if not reach[jy, jx]:
                reach[jy, jx] = True
                q.append((jx, jy))

    if spawn_rect is None:
        spawn_rect = (0.0, 0.0, width_m, height_m)
    sx0, sy0, sx1, sy1 = spawn_rect
    spawn = []
    for iy in range(ny):
        for ix in range(nx):
            if occ[iy, ix]:
                continue
            c = world.cell_center(ix, iy)
            if sx0 <= c[0] <= sx1 and sy0 <= c[1] <= sy1:
                if not reach[iy, ix]:
                    raise DisconnectedMapError(
                        f"spawn cell ({ix},{iy}) has no free path to the target"
                    )
                spawn.append((ix, iy))
    if not spawn:
        raise MapError("empty spawn region")
    world.spawn_cells = spawn
    return world


def is_free(world: WorldMap, p) -> bool:
    if not world.in_bounds(p):
        return False
    ix, iy = world.cell_of(p)
    return not world.occupancy[iy, ix]


def supercover_cells(world: WorldMap, a, b) -> list[tuple[int, int]]:
    """Every grid cell touched by segment a->b, in traversal order.

    Amanatides-Woo traversal; on exact corner crossings both side cells are
    included so a diagonal move can never slip between two blocked cells.
    """
    cell = world.cell_size_m
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    ix, iy = world.cell_of(a)
    jx, jy = world.cell_of(b)
    cells = [(ix, iy)]
    dx, dy = bx - ax, by - ay
    if dx == 0.0 and dy == 0.0:
        return cells
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    inf = float("inf")
    if dx != 0.0:
        nbx = (ix + (1 if dx > 0 else 0)) * cell
        t_max_x = (nbx - ax) / dx
        t_dx = cell / abs(dx)
    else:
        t_max_x, t_dx = inf, inf
    if dy != 0.0:
        nby = (iy + (1 if dy > 0 else 0)) * cell
        t_max_y = (nby - ay) / dy
        t_dy = cell / abs(dy)
    else:
        t_max_y, t_dy = inf, inf

    guard = 4 * (world.nx + world.ny)
    while (ix, iy) != (jx, jy) and guard > 0:
        guard -= 1
        if abs(t_max_x - t_max_y) < 1e-12:
            cells.append((ix + step_x, iy))
            cells.append((ix, iy + step_y))
            ix += step_x
            iy += step_y
            t_max_x += t_dx
            t_max_y += t_dy
        elif t_max_x < t_max_y:
            ix += step_x
            t_max_x += t_dx
        else:
            iy += step_y
            t_max_y += t_dy
        cells.append((ix, iy))
    return cells


def segment_clear(world: WorldMap, a, b) -> bool:
    """True iff every cell touched by segment a->b is free (supercover test)."""
    if not (world.in_bounds(a) and world.in_bounds(b)):
        return False
    occ = world.occupancy
    for ix, iy in supercover_cells(world, a, b):
        if ix < 0 or iy < 0 or ix >= world.nx or iy >= world.ny:
            return False
        if occ[iy, ix]:
            return False
    return True


def sense_distance(agent_pos, target, sigma: float, rng: np.random.Generator) -> float:
    """Noisy distance to target; concentration-style, unaffected by obstacles."""
    d = math.hypot(agent_pos[0] - target[0], agent_pos[1] - target[1])
    if sigma > 0:
        d += rng.normal(0.0, sigma)
    return max(0.0, d)


def range_scan(world: WorldMap, pos, ray_count: int = 36, max_range: float = 30.0) -> RangeScan:
    """March rays at half-cell steps and report first-obstacle distances."""
    if ray_count < 8:
        raise ValueError("ray_count must be >= 8")
    if not is_free(world, pos):
        raise OriginOccupiedError(f"scan origin {tuple(pos)} is not in a free cell")
    pos = np.asarray(pos, dtype=float)
    headings = np.arange(ray_count) * (2.0 * math.pi / ray_count)
    step = world.cell_size_m / 2.0
    ts = np.arange(1, int(math.ceil(max_range / step)) + 1) * step
    xs = pos[0] + np.outer(np.cos(headings), ts)
    ys = pos[1] + np.outer(np.sin(headings), ts)
    cell = world.cell_size_m
    ix = np.floor(xs / cell).astype(int)
    iy = np.floor(ys / cell).astype(int)
    oob = (ix < 0) | (ix >= world.nx) | (iy < 0) | (iy >= world.ny)
    ixc = np.clip(ix, 0, world.nx - 1)
    iyc = np.clip(iy, 0, world.ny - 1)
    blocked = oob | world.occupancy[iyc, ixc]
    hit = blocked.any(axis=1)
    first = np.argmax(blocked, axis=1)
    dist = np.where(hit, ts[first], max_range)
    dist = np.minimum(dist, max_range)
    return RangeScan(pos, ray_count, max_range, headings, dist)


def load_map(path) -> WorldMap:
    """Load a map document (YAML) and build the validated world."""
    with open(path) as f:
        doc = yaml.safe_load(f)
    spec = ObstacleSpec([tuple(r) for r in doc.get("obstacles", [])])
    spawn = tuple(doc["spawn_region"]) if "spawn_region" in doc else None
    return build_map(
        spec,
        target=doc["target"],
        base_station=doc["base_station"],
        cell_size=doc.get("cell_size_m", 5.0),
        width_m=doc.get("width_m", 600.0),
        height_m=doc.get("height_m", 600.0),
        spawn_rect=spawn,
    )
