"""Grid-city map: roads on a square lattice, one BS per lattice node, one building per cell.

Roads are the lines ``x = k * road_length`` and ``y = k * road_length`` for
``k = 0..grid_size``.  Base stations sit on a ``grid_size x grid_size`` lattice
anchored at the origin, so BS ``m`` is at ``((m // Z) * road, (m % Z) * road)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

# Segments that only graze a building boundary within this distance count as clear.
LOS_TOLERANCE = 1e-9


class Point2D(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Building:
    cell: tuple[int, int]
    x0: float
    y0: float
    width: float
    height: float

    @property
    def x1(self) -> float:
        return self.x0 + self.width

    @property
    def y1(self) -> float:
        return self.y0 + self.height

    def as_rect(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class NetworkMap:
    grid_size: int
    road_length: float
    coverage_radius: float
    bs_positions: tuple[Point2D, ...]
    buildings: tuple[Building, ...]
    _bs_xy: np.ndarray = field(init=False, repr=False, compare=False)
    _rects: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bs = np.array([[p.x, p.y] for p in self.bs_positions], dtype=float).reshape(-1, 2)
        rects = np.array([b.as_rect() for b in self.buildings], dtype=float).reshape(-1, 4)
        bs.setflags(write=False)
        rects.setflags(write=False)
        object.__setattr__(self, "_bs_xy", bs)
        object.__setattr__(self, "_rects", rects)

    @property
    def side(self) -> float:
        return self.grid_size * self.road_length

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def bs_xy(self) -> np.ndarray:
        """``(M, 2)`` read-only array of BS coordinates."""
        return self._bs_xy

    @property
    def rects(self) -> np.ndarray:
        """``(K, 4)`` read-only array of building rectangles ``x0, y0, x1, y1``."""
        return self._rects

    def to_dict(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "road_length": self.road_length,
            "side": self.side,
            "coverage_radius": self.coverage_radius,
            "base_stations": [{"id": m, "x": p.x, "y": p.y} for m, p in enumerate(self.bs_positions)],
            "buildings": [
                {"cell": list(b.cell), "x0": b.x0, "y0": b.y0, "width": b.width, "height": b.height}
                for b in self.buildings
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> NetworkMap:
        return cls(
            grid_size=int(d["grid_size"]),
            road_length=float(d["road_length"]),
            coverage_radius=float(d["coverage_radius"]),
            bs_positions=tuple(Point2D(float(b["x"]), float(b["y"])) for b in d["base_stations"]),
            buildings=tuple(
                Building(tuple(b["cell"]), float(b["x0"]), float(b["y0"]), float(b["width"]), float(b["height"]))
                for b in d["buildings"]
            ),
        )


def generate_map(grid_size: int, road_length: float, coverage_radius: float,
                 rng: np.random.Generator) -> NetworkMap:
    """Build a ``grid_size x grid_size`` city.

    Each cell receives one building whose sides are drawn uniformly from
    ``(0.1, 0.9) * road_length`` and whose position is uniform subject to
    keeping a margin of ``min(1 m, 5% of a road)`` from every road line.
    """
    z = int(grid_size)
    road = float(road_length)
    bs = tuple(Point2D(i * road, j * road) for i in range(z) for j in range(z))
    margin = min(1.0, 0.05 * road)
    buildings = []
    for cx in range(z):
        for cy in range(z):
            w, h = rng.uniform(0.1 * road, 0.9 * road, size=2)
            x0 = rng.uniform(cx * road + margin, (cx + 1) * road - margin - w)
            y0 = rng.uniform(cy * road + margin, (cy + 1) * road - margin - h)
            buildings.append(Building((cx, cy), float(x0), float(y0), float(w), float(h)))
    return NetworkMap(z, road, float(coverage_radius), bs, tuple(buildings))


def distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def segment_blocked(ax, ay, bx, by, x0, y0, x1, y1, tol=LOS_TOLERANCE):
    """True if the open segment ``a-b`` meets the open rectangle shrunk by ``tol``.

    Slab clipping on the segment parameter ``s in (0, 1)``; written with plain
    scalars so the same source can be compiled by numba.
    """
    x0 += tol
    y0 += tol
    x1 -= tol
    y1 -= tol
    if x0 >= x1 or y0 >= y1:
        return False
    lo = 0.0
    hi = 1.0
    dx = bx - ax
    dy = by - ay
    if dx == 0.0:
        if not (x0 < ax < x1):
            return False
    else:
        s0 = (x0 - ax) / dx
        s1 = (x1 - ax) / dx
        if s0 > s1:
            s0, s1 = s1, s0
        lo = max(lo, s0)
        hi = min(hi, s1)
    if dy == 0.0:
        if not (y0 < ay < y1):
            return False
    else:
        s0 = (y0 - ay) / dy
        s1 = (y1 - ay) / dy
        if s0 > s1:
            s0, s1 = s1, s0
        lo = max(lo, s0)
        hi = min(hi, s1)
    return lo < hi


def los_clear(net: NetworkMap, a, b) -> bool:
    """True iff no building interior intersects the open segment between ``a`` and ``b``."""
    if a[0] == b[0] and a[1] == b[1]:
        return True
    for x0, y0, x1, y1 in net.rects:
        if segment_blocked(a[0], a[1], b[0], b[1], x0, y0, x1, y1):
            return False
    return True
