"""Predetermined UE trajectories along the road grid."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import OutOfHorizonError
from .geometry import NetworkMap, Point2D
from .radio import RadioParams


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear path; ``times[0] == 0`` and ``times`` strictly increasing."""

    ue_id: int
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    speed: float

    def __post_init__(self):
        for name in ("times", "xs", "ys"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.times) == len(self.xs) == len(self.ys)) or len(self.times) < 1:
            raise ValueError("waypoint arrays must be non-empty and of equal length")
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("waypoint times must start at 0 and increase strictly")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def waypoints(self) -> list[tuple[float, Point2D]]:
        return [(float(t), Point2D(float(x), float(y))) for t, x, y in zip(self.times, self.xs, self.ys)]

    @classmethod
    def stationary(cls, ue_id: int, p, horizon: float) -> Trajectory:
        return cls(ue_id, [0.0, horizon], [p[0], p[0]], [p[1], p[1]], 0.0)

    @classmethod
    def from_points(cls, ue_id: int, points, speed: float, horizon: float,
                    start_time: float = 0.0) -> Trajectory:
        """Walk ``points`` at ``speed`` (waiting at the first point until ``start_time``), then stop."""
        times, xs, ys = [0.0], [points[0][0]], [points[0][1]]
        t = 0.0
        if start_time > 0:
            t = start_time
            times.append(t)
            xs.append(points[0][0])
            ys.append(points[0][1])
        for a, b in zip(points[:-1], points[1:]):
            t += math.hypot(b[0] - a[0], b[1] - a[1]) / speed
            times.append(t)
            xs.append(b[0])
            ys.append(b[1])
        if t < horizon:
            times.append(horizon)
            xs.append(xs[-1])
            ys.append(ys[-1])
        traj = cls(ue_id, times, xs, ys, speed)
        return traj if t <= horizon else truncate(traj, horizon)


def truncate(traj: Trajectory, horizon: float) -> Trajectory:
    keep = traj.times < horizon
    end = position_at(traj, horizon)
    return Trajectory(traj.ue_id, np.append(traj.times[keep], horizon),
                      np.append(traj.xs[keep], end.x), np.append(traj.ys[keep], end.y), traj.speed)


@dataclass(frozen=True)
class Scenario:
    net: NetworkMap
    trajectories: tuple[Trajectory, ...]
    radio: RadioParams
    horizon: float
    quad_dt: float = 0.5
    scan_dt: float = 0.1
    seed: int | None = None
    _bank: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if abs(self.net.coverage_radius - self.radio.coverage_radius) > 1e-12:
            raise ValueError("map and radio coverage radii differ")
        for tr in self.trajectories:
            if abs(tr.horizon - self.horizon) > 1e-9:
                raise ValueError(f"trajectory {tr.ue_id} ends at {tr.horizon}, horizon is {self.horizon}")

    @property
    def n_ues(self) -> int:
        return len(self.trajectories)

    @property
    def bank(self):
        """Padded waypoint arrays used by the compiled kernels (built lazily)."""
        if self._bank is None:
            from ._kernels import TrajectoryBank
            object.__setattr__(self, "_bank", TrajectoryBank.from_trajectories(self.trajectories))
        return self._bank


def _road_edges(z: int):
    edges = []
    for j in range(z + 1):
        for i in range(z):
            edges.append(((i, j), (i + 1, j)))
    for i in range(z + 1):
        for j in range(z):
            edges.append(((i, j), (i, j + 1)))
    return edges


def _neighbours(node, z):
    i, j = node
    out = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        a, b = i + di, j + dj
        if 0 <= a <= z and 0 <= b <= z:
            out.append((a, b))
    return out


def generate_trajectory(net: NetworkMap, ue_id: int, speed: float, horizon: float,
                        rng: np.random.Generator, no_u_turn: bool = True) -> Trajectory:
    """Random walk on the road grid at constant ``speed`` covering ``[0, horizon]``.

    The start point is uniform over total road length.  At every intersection the
    next road is uniform over the available ones, excluding the road just
    travelled unless it is the only one (when ``no_u_turn``).
    """
    if speed <= 0 or horizon <= 0:
        raise ValueError("speed and horizon must be positive")
    z, road = net.grid_size, net.road_length
    edges = _road_edges(z)
    a, b = edges[int(rng.integers(len(edges)))]
    offset = float(rng.random()) * road
    if rng.random() < 0.5:
        a, b = b, a
    # start `offset` metres from node a towards node b; offset < road so the first leg is non-empty
    px = a[0] * road + (b[0] - a[0]) * offset
    py = a[1] * road + (b[1] - a[1]) * offset
    times, xs, ys = [0.0], [px], [py]
    t = 0.0
    came_from, node = a, b
    remaining = road - offset
    while True:
        step = remaining / speed
        if t + step >= horizon:
            frac = (horizon - t) / step
            xs.append(xs[-1] + (node[0] * road - xs[-1]) * frac)
            ys.append(ys[-1] + (node[1] * road - ys[-1]) * frac)
            times.append(float(horizon))
            break
        t += step
        times.append(t)
        xs.append(float(node[0] * road))
        ys.append(float(node[1] * road))
        options = _neighbours(node, z)
        if no_u_turn and len(options) > 1:
            options = [o for o in options if o != came_from]
        came_from, node = node, options[int(rng.integers(len(options)))]
        remaining = road
    return Trajectory(ue_id, times, xs, ys, float(speed))


def position_at(traj: Trajectory, t: float) -> Point2D:
    if t < 0 or t > traj.horizon:
        raise OutOfHorizonError(f"t={t} outside [0, {traj.horizon}]")
    return Point2D(float(np.interp(t, traj.times, traj.xs)), float(np.interp(t, traj.times, traj.ys)))


def write_trajectories_csv(trajs, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ue_id", "t", "x", "y"])
        for tr in trajs:
            for t, x, y in zip(tr.times, tr.xs, tr.ys):
                w.writerow([tr.ue_id, repr(float(t)), repr(float(x)), repr(float(y))])


def read_trajectories_csv(path) -> list[Trajectory]:
    rows: dict[int, list] = {}
    with open(Path(path), newline="") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault(int(r["ue_id"]), []).append((float(r["t"]), float(r["x"]), float(r["y"])))
    out = []
    for ue, pts in sorted(rows.items()):
        t, x, y = map(np.array, zip(*pts))
        seg = np.hypot(np.diff(x), np.diff(y)) / np.diff(t) if len(t) > 1 else np.zeros(1)
        out.append(Trajectory(ue, t, x, y, float(seg.max()) if seg.size else 0.0))
    return out
