import heapq
import math

import numpy as np
import pytest

from dtswarm import environment, radio


def make_world(rects=(), width=100.0, height=100.0, cell=5.0,
               target=(52.5, 52.5), base=(52.5, 52.5), spawn=None):
    spec = environment.ObstacleSpec([tuple(r) for r in rects])
    return environment.build_map(
        spec, target=target, base_station=base, cell_size=cell,
        width_m=width, height_m=height, spawn_rect=spawn,
    )


def uniform_field(world, per: float) -> radio.RadioField:
    grid = np.full((world.ny, world.nx), float(per))
    return radio.RadioField(grid, world.cell_size_m)


def dijkstra_cost(world, start_cell, goal_cell):
    """Reference shortest-path cost on the 8-connected free grid.

    Plain Dijkstra, written independently of the production planner, with
    the same movement rules: orthogonal steps cost one cell, diagonal
    steps cost sqrt(2) cells, and a diagonal is forbidden when either of
    its orthogonal neighbors is blocked. Returns math.inf if unreachable.
    """
    occ = world.occupancy
    cell = world.cell_size_m
    dist = {start_cell: 0.0}
    heap = [(0.0, start_cell)]
    while heap:
        d, cur = heapq.heappop(heap)
        if cur == goal_cell:
            return d
        if d > dist.get(cur, math.inf):
            continue
        cx, cy = cur
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1),
                       (1, 1), (1, -1), (-1, 1), (-1, -1)):
            jx, jy = cx + dx, cy + dy
            if not (0 <= jx < world.nx and 0 <= jy < world.ny) or occ[jy, jx]:
                continue
            if dx != 0 and dy != 0 and (occ[cy, jx] or occ[jy, cx]):
                continue
            nd = d + cell * (math.sqrt(2.0) if dx and dy else 1.0)
            if nd < dist.get((jx, jy), math.inf):
                dist[(jx, jy)] = nd
                heapq.heappush(heap, (nd, (jx, jy)))
    return math.inf


@pytest.fixture(scope="session")
def plant_world():
    from dtswarm import engine
    return engine.load_world("plant")


@pytest.fixture()
def empty_world():
    return make_world()
