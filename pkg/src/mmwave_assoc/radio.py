"""Noise-limited link model, candidate sets and the decision-epoch schedule."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import ContractViolation
from .geometry import NetworkMap, distance, los_clear

if TYPE_CHECKING:
    from .mobility import Scenario

ENTERED = "bs-entered"
LEFT = "bs-left"
SERVING_LEFT = "serving-left"

BISECT_TOL = 1e-3
TIE_EPS = 1e-6


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass(frozen=True)
class RadioParams:
    bandwidth: float = 10e6
    tx_power: float = 1.0
    path_loss_exponent: float = 3.0
    noise: float = 1e-12
    coverage_radius: float = 300.0

    def __post_init__(self):
        for name in ("bandwidth", "tx_power", "path_loss_exponent", "noise", "coverage_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def from_dbm(cls, bandwidth: float = 10e6, tx_power_dbm: float = 30.0, path_loss_exponent: float = 3.0,
                 noise_dbm: float = -90.0, coverage_radius: float = 300.0) -> RadioParams:
        return cls(bandwidth, dbm_to_watt(tx_power_dbm), path_loss_exponent, dbm_to_watt(noise_dbm),
                   coverage_radius)

    @property
    def snr_scale(self) -> float:
        return self.tx_power / self.noise

    @property
    def peak_rate(self) -> float:
        """Rate of a lone UE at the 1 m clamp distance; an upper bound on any per-UE rate."""
        return self.bandwidth * math.log2(1.0 + self.snr_scale)


def snr(params: RadioParams, dis: float) -> float:
    return params.tx_power * max(dis, 1.0) ** (-params.path_loss_exponent) / params.noise


def rate(params: RadioParams, cnt: int, dis: float) -> float:
    if cnt < 1:
        raise ContractViolation(f"cnt must be >= 1, got {cnt}")
    return params.bandwidth * math.log2(1.0 + snr(params, dis)) / cnt


def candidate_set(net: NetworkMap, params: RadioParams, ue_pos) -> tuple[int, ...]:
    return tuple(
        m for m, bs in enumerate(net.bs_positions)
        if distance(bs, ue_pos) <= params.coverage_radius and los_clear(net, bs, ue_pos)
    )


@dataclass(frozen=True)
class DecisionEpoch:
    """One candidate-set change of one UE.

    ``kind`` is ``bs-entered`` or ``bs-left``.  A ``bs-left`` event is a
    decision epoch only when ``bs`` is serving the UE at that time; the engine
    resolves this against its current association (``trigger``).
    """

    index: int
    time: float
    ue: int
    bs: int
    kind: str
    candidates: tuple[int, ...]

    def trigger(self, serving: int) -> str | None:
        if self.kind == ENTERED:
            return ENTERED
        return SERVING_LEFT if serving == self.bs else None


class EpochSchedule:
    """Time-ordered candidate-set events plus per-event arrays for the kernels.

    Array attributes (length ``E``): ``t``, ``end`` (next event time or the
    horizon), ``ue``, ``bs``, ``kind`` (1 enter, 0 leave), ``nc``; and
    ``(E, K)`` arrays ``cand`` (padded with -1), ``dist`` and ``se``
    (spectral efficiency of each candidate at the event time).
    """

    def __init__(self, horizon: float, t, ue, bs, kind, cand, nc, px, py, dist, se,
                 initial_candidates: tuple[tuple[int, ...], ...]):
        self.horizon = float(horizon)
        self.t = np.asarray(t, dtype=float)
        self.ue = np.asarray(ue, dtype=np.int64)
        self.bs = np.asarray(bs, dtype=np.int64)
        self.kind = np.asarray(kind, dtype=np.int8)
        self.cand = np.asarray(cand, dtype=np.int64)
        self.nc = np.asarray(nc, dtype=np.int64)
        self.px = np.asarray(px, dtype=float)
        self.py = np.asarray(py, dtype=float)
        self.dist = np.asarray(dist, dtype=float)
        self.se = np.asarray(se, dtype=float)
        self.end = np.append(self.t[1:], self.horizon) if len(self.t) else np.zeros(0)
        self.initial_candidates = initial_candidates
        for arr in (self.t, self.ue, self.bs, self.kind, self.cand, self.nc, self.px, self.py,
                    self.dist, self.se, self.end):
            arr.setflags(write=False)
        self._times = self.t.tolist()

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> DecisionEpoch:
        if i < 0:
            i += len(self)
        return DecisionEpoch(
            index=i,
            time=float(self.t[i]),
            ue=int(self.ue[i]),
            bs=int(self.bs[i]),
            kind=ENTERED if self.kind[i] == 1 else LEFT,
            candidates=tuple(int(c) for c in self.cand[i, : self.nc[i]]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def epochs(self) -> list[DecisionEpoch]:
        return list(self)

    def last(self, t: float) -> int | None:
        """Index of the latest event with time ``<= t``, or None before the first."""
        i = bisect.bisect_right(self._times, t) - 1
        return i if i >= 0 else None

    def U(self, t: float) -> int | None:
        """UE of the event at exactly ``t``, if any."""
        i = self.last(t)
        if i is None or self._times[i] != t:
            return None
        return int(self.ue[i])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "time", "ue", "bs", "trigger", "candidates"])
            for ep in self:
                w.writerow([ep.index, repr(ep.time), ep.ue, ep.bs, ep.kind, " ".join(map(str, ep.candidates))])


def compute_epochs(scenario: Scenario, scan_dt: float | None = None, tol: float = BISECT_TOL) -> EpochSchedule:
    from . import _kernels as K

    net, params, bank = scenario.net, scenario.radio, scenario.bank
    scan_dt = scenario.scan_dt if scan_dt is None else scan_dt
    bs_x = np.ascontiguousarray(net.bs_xy[:, 0])
    bs_y = np.ascontiguousarray(net.bs_xy[:, 1])
    rects = np.ascontiguousarray(net.rects)
    times, ues, bss, kinds, init = [], [], [], [], []
    for u in range(scenario.n_ues):
        t, b, k, members = K.scan_ue(bank.wt[u], bank.wx[u], bank.wy[u], bank.wn[u], scenario.horizon,
                                     scan_dt, tol, bs_x, bs_y, params.coverage_radius, rects)
        times.append(t)
        bss.append(b)
        kinds.append(k)
        ues.append(np.full(len(t), u, dtype=np.int64))
        init.append(tuple(int(m) for m in np.flatnonzero(members)))
    t = np.concatenate(times) if times else np.zeros(0)
    ue = np.concatenate(ues) if ues else np.zeros(0, dtype=np.int64)
    bs = np.concatenate(bss) if bss else np.zeros(0, dtype=np.int64)
    kind = np.concatenate(kinds) if kinds else np.zeros(0, dtype=np.int8)
    order = np.lexsort((bs, ue, t))
    t, ue, bs, kind = t[order], ue[order], bs[order], kind[order]
    # strict ordering: nudge collisions forward by TIE_EPS in (ue, bs) order
    t = t.copy()
    for i in range(1, len(t)):
        if t[i] <= t[i - 1]:
            t[i] = t[i - 1] + TIE_EPS
    keep = t < scenario.horizon
    t, ue, bs, kind = t[keep], ue[keep], bs[keep], kind[keep]
    cand, nc, px, py, dist, se = K.candidates_at_events(
        t, ue, bank.wt, bank.wx, bank.wy, bank.wn, bs_x, bs_y, params.coverage_radius, rects,
        params.snr_scale, params.path_loss_exponent)
    return EpochSchedule(scenario.horizon, t, ue, bs, kind, cand, nc, px, py, dist, se, tuple(init))
