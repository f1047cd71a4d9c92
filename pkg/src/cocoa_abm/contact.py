"""Fixed-radius proximity between infectious agents and everyone else.

Agents are bucketed on a uniform grid whose cell edge equals the contact
radius. Two points within the radius are never more than one cell apart, so
each infectious agent only inspects the 3x3 block of cells around its own.
Infectious agents are few, so scanning from them is much cheaper than
asking every agent whether an infectious one is nearby.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numba import njit

from .domain import InfectionState

_I = int(InfectionState.I)
_D = int(InfectionState.D)


@dataclass(frozen=True, order=True)
class ContactEvent:
    infector_id: int
    other_id: int
    day: int = 0
    step: int = 0


@dataclass
class SpatialIndex:
    cell_size: float
    cells: dict = field(default_factory=dict)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor(x / self.cell_size), math.floor(y / self.cell_size))

    def __len__(self) -> int:
        return sum(len(ids) for ids in self.cells.values())

    def neighbours(self, x: float, y: float) -> list[int]:
        """Ids in the 3x3 block of cells around ``(x, y)``."""
        cx, cy = self.cell_of(x, y)
        out = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                out.extend(self.cells.get((cx + dx, cy + dy), ()))
        return out


def build_index(positions: Iterable[tuple[int, tuple[float, float]]],
                cell_size: float) -> SpatialIndex:
    if not cell_size > 0:
        raise ValueError("cell_size must be > 0")
    index = SpatialIndex(float(cell_size))
    cells = defaultdict(list)
    for agent_id, (x, y) in positions:
        cells[index.cell_of(x, y)].append(agent_id)
    index.cells = dict(cells)
    return index


@dataclass
class Snapshot:
    """Positions and statuses of every agent at one step."""

    x: np.ndarray
    y: np.ndarray
    state: np.ndarray
    hospitalized: np.ndarray
    contact_radius: float = 1.0
    day: int = 0
    step: int = 0


class Grid:
    """Dense cell table over a fixed rectangle holding the agents present.

    Cells hold doubly linked lists: ``head[c]`` is the first agent in cell
    ``c``, ``nxt[a]``/``prv[a]`` the neighbours of agent ``a`` (-1 ends a
    list). Agents move between cells in O(1), so the engine keeps one grid
    for the whole run and only touches agents whose cell changed.
    """

    def __init__(self, x0: float, y0: float, width: float, height: float,
                 cell_size: float, n_agents: int):
        self.x0 = float(x0)
        self.y0 = float(y0)
        self.cell = float(cell_size)
        self.nx = int(math.floor(width / cell_size)) + 1
        self.ny = int(math.floor(height / cell_size)) + 1
        self.head, self.nxt, self.prv = new_tables(self.nx, self.ny, n_agents)

    def arrays(self):
        return (self.x0, self.y0, self.cell, self.nx, self.ny, self.head, self.nxt, self.prv)


@njit(cache=True)
def new_tables(nx, ny, n_agents):
    return (np.full(nx * ny, -1, dtype=np.int32), np.full(n_agents, -1, dtype=np.int32),
            np.full(n_agents, -1, dtype=np.int32))


@njit(cache=True, inline="always")
def _cell(v, v0, cell, n):
    c = int(math.floor((v - v0) / cell))
    if c < 0:
        return 0
    if c >= n:
        return n - 1
    return c


@njit(cache=True, inline="always")
def cell_index(px, py, x0, y0, cell, nx, ny):
    return _cell(px, x0, cell, nx) * ny + _cell(py, y0, cell, ny)


@njit(cache=True, inline="always")
def index_insert(a, c, head, nxt, prv):
    h = head[c]
    nxt[a] = h
    prv[a] = -1
    if h >= 0:
        prv[h] = a
    head[c] = a


@njit(cache=True, inline="always")
def index_remove(a, c, head, nxt, prv):
    p = prv[a]
    q = nxt[a]
    if p >= 0:
        nxt[p] = q
    else:
        head[c] = q
    if q >= 0:
        prv[q] = p
    nxt[a] = -1
    prv[a] = -1


@njit(cache=True)
def source_pairs(sources, cell_of, x, y, radius, nx, ny, head, nxt, out_i, out_j):
    """Write every (source, indexed agent) pair within ``radius`` into
    ``out_i``/``out_j``, unordered; return the count.

    Returns ``-needed`` instead when the buffers are too small.
    """
    n = 0
    for k in range(sources.size):
        i = sources[k]
        c = cell_of[i]
        cx = c // ny
        cy = c - cx * ny
        for gx in range(max(cx - 1, 0), min(cx + 2, nx)):
            for gy in range(max(cy - 1, 0), min(cy + 2, ny)):
                j = head[gx * ny + gy]
                while j >= 0:
                    if j != i and math.hypot(x[i] - x[j], y[i] - y[j]) <= radius:
                        if n < out_i.size:
                            out_i[n] = i
                            out_j[n] = j
                        n += 1
                    j = nxt[j]
    if n > out_i.size:
        return -n
    return n


@njit(cache=True)
def _all_contacts(x, y, sources, targets, radius, x0, y0, cell, nx, ny, head, nxt, prv):
    cell_of = np.empty(x.size, dtype=np.int64)
    for t in range(targets.size):
        j = targets[t]
        cell_of[j] = cell_index(x[j], y[j], x0, y0, cell, nx, ny)
        index_insert(j, cell_of[j], head, nxt, prv)
    for k in range(sources.size):
        i = sources[k]
        cell_of[i] = cell_index(x[i], y[i], x0, y0, cell, nx, ny)
    size = max(4 * targets.size, 16)
    while True:
        out_i = np.empty(size, dtype=np.int64)
        out_j = np.empty(size, dtype=np.int64)
        m = source_pairs(sources, cell_of, x, y, radius, nx, ny, head, nxt, out_i, out_j)
        if m >= 0:
            break
        size = -m
    for t in range(targets.size):
        j = targets[t]
        index_remove(j, cell_of[j], head, nxt, prv)
    order = np.argsort(out_j[:m] * x.size + out_i[:m], kind="mergesort")
    return out_i[:m][order], out_j[:m][order]


def contact_pairs(x, y, state, hospitalized, radius: float = 1.0, grid: Grid | None = None):
    """``(infector_ids, other_ids)`` arrays sorted by ``(other_id, infector_id)``.

    Sources are the infectious agents present; anyone present (not dead, not
    hospitalized) can be the other party.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    state = np.asarray(state)
    hospitalized = np.asarray(hospitalized, dtype=bool)
    present = (state != _D) & ~hospitalized
    sources = np.flatnonzero(present & (state == _I)).astype(np.int64)
    targets = np.flatnonzero(present).astype(np.int64)
    if sources.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    if grid is None:
        x0, y0 = float(x.min()), float(y.min())
        grid = Grid(x0, y0, float(x.max()) - x0, float(y.max()) - y0, radius, x.size)
    return _all_contacts(x, y, sources, targets, float(radius), *grid.arrays())


def contacts_for_step(world) -> list[ContactEvent]:
    """Every (infector, other) pair within ``world.contact_radius``.

    ``world`` is anything with array attributes ``x``, ``y``, ``state``,
    ``hospitalized`` and scalars ``contact_radius``, ``day``, ``step``
    (:class:`Snapshot`, or the engine's world).
    """
    inf, oth = contact_pairs(world.x, world.y, world.state, world.hospitalized,
                             world.contact_radius)
    day, step = int(world.day), int(world.step)
    return [ContactEvent(int(i), int(j), day, step) for i, j in zip(inf, oth)]
