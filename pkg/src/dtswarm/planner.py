"""Server-side grid path planning for trapped agents.

A* over the 8-connected free grid with octile heuristic. Diagonal moves
are forbidden when either orthogonal neighbor is blocked, matching the
supercover segment test used for physical movement.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .environment import WorldMap, segment_clear

SQRT2 = math.sqrt(2.0)


class UnreachableGoalError(Exception):
    pass


@dataclass
class GridPath:
    points: list[np.ndarray]   # free cell centers, start first
    total_cost: float          # meters, octile metric


def octile(a_cell: tuple[int, int], b_cell: tuple[int, int], cell_size: float) -> float:
    dx = abs(a_cell[0] - b_cell[0])
    dy = abs(a_cell[1] - b_cell[1])
    return cell_size * (max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy))


def _snap_to_free(world: WorldMap, p) -> tuple[int, int]:
    ix, iy = world.cell_of(p)
    if not world.occupancy[iy, ix]:
        return ix, iy
    free_iy, free_ix = np.nonzero(~world.occupancy)
    cx = (free_ix + 0.5) * world.cell_size_m
    cy = (free_iy + 0.5) * world.cell_size_m
    k = int(np.argmin((cx - p[0]) ** 2 + (cy - p[1]) ** 2))
    return int(free_ix[k]), int(free_iy[k])


def plan(world: WorldMap, frm, to) -> GridPath:
    """Optimal 8-connected path from the cell of `frm` to the (snapped) cell of `to`."""
    occ = world.occupancy
    start = world.cell_of(frm)
    if occ[start[1]][start[0]]:
        raise ValueError(f"start {tuple(frm)} is not in a free cell")
    goal = _snap_to_free(world, to)

    cell = world.cell_size_m
    g: dict[tuple[int, int], float] = {start: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    open_heap: list[tuple[float, int, tuple[int, int]]] = []
    tick = 0
    heapq.heappush(open_heap, (octile(start, goal, cell), tick, start))
    closed: set[tuple[int, int]] = set()

    while open_heap:
        _, _, cur = heapq.heappop(open_heap)
        if cur in closed:
            continue
        if cur == goal:
            pts = [cur]
            while cur in came:
                cur = came[cur]
                pts.append(cur)
            pts.reverse()
            return GridPath([world.cell_center(ix, iy) for ix, iy in pts], g[goal])
        closed.add(cur)
        cx, cy = cur
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                jx, jy = cx + dx, cy + dy
                if not (0 <= jx < world.nx and 0 <= jy < world.ny):
                    continue
                if occ[jy, jx]:
                    continue
                if dx != 0 and dy != 0 and (occ[cy, jx] or occ[jy, cx]):
                    continue
                step = cell * (SQRT2 if dx != 0 and dy != 0 else 1.0)
                ng = g[cur] + step
                nb = (jx, jy)
                if nb not in g or ng < g[nb] - 1e-12:
                    g[nb] = ng
                    came[nb] = cur
                    tick += 1
                    heapq.heappush(open_heap, (ng + octile(nb, goal, cell), tick, nb))

    raise UnreachableGoalError(f"no free path from cell {start} to cell {goal}")


def next_waypoint(world: WorldMap, path_points: list[np.ndarray], pos, v_max: float,
                  k: int | None = None) -> np.ndarray:
    """Next movement target along a planned path.

    Picks the farthest path point visible from `pos` over a clear straight
    segment (string pulling), or the k-th such point when k is given, then
    caps the step length at v_max.
    """
    if not path_points:
        raise ValueError("empty path")
    pos = np.asarray(pos, dtype=float)
    if k is None:
        pick = path_points[0]
        for pt in reversed(path_points):
            if segment_clear(world, pos, pt):
                pick = pt
                break
    else:
        visible = [pt for pt in path_points if segment_clear(world, pos, pt)]
        if not visible:
            pick = path_points[0]
        else:
            pick = visible[min(k, len(visible)) - 1]
    delta = np.asarray(pick, dtype=float) - pos
    d = float(np.hypot(delta[0], delta[1]))
    if d <= v_max or d == 0.0:
        return np.asarray(pick, dtype=float)
    return pos + delta * (v_max / d)
