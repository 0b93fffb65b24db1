"""Exhaustive search over decision series on tiny instances."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .engine import OUTAGE, DecisionSeries, PolicyBase, RunContext
from .errors import OracleSizeError
from .mobility import Scenario
from .radio import EpochSchedule

MAX_SERIES = 10**6


@dataclass
class OracleResult:
    best_series: DecisionSeries
    best_L_bar: float
    evaluated_count: int

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "bs"])
            for i, bs in enumerate(self.best_series.decisions):
                w.writerow([i, bs])


def series_bound(schedule: EpochSchedule) -> int:
    """Product of candidate-set sizes: an upper bound on the number of distinct series."""
    return math.prod(max(int(n), 1) for n in schedule.nc)


def brute_force(scenario: Scenario, schedule: EpochSchedule, limit: int = MAX_SERIES) -> OracleResult:
    """Depth-first enumeration of every feasible series, scored with the engine's quadrature.

    Only decision epochs branch; at other events the UE keeps its BS.  Rewards
    of shared prefixes are computed once.  Ties keep the lexicographically
    smallest series, which is the first one reached.
    """
    bound = series_bound(schedule)
    if bound > limit:
        raise OracleSizeError(f"{bound} candidate series exceed the limit of {limit}")
    ctx = RunContext(scenario, schedule)
    state = ctx.initial_state()
    assoc, cnt = state.assoc, state.cnt
    e = len(schedule)
    t0 = float(schedule.t[0]) if e else scenario.horizon
    base = ctx.accrue(assoc, cnt, 0.0, t0) if t0 > 0 else 0.0
    best = [-math.inf, None]
    count = 0
    series = [0] * e

    def move(u, new):
        old = assoc[u]
        if old >= 0:
            cnt[old] -= 1
        if new >= 0:
            cnt[new] += 1
        assoc[u] = new
        return old

    def visit(i, total):
        nonlocal count
        if i == e:
            count += 1
            if total > best[0]:
                best[0], best[1] = total, list(series)
            return
        u = int(schedule.ue[i])
        nc = int(schedule.nc[i])
        t, end = float(schedule.t[i]), float(schedule.end[i])
        if not ctx.is_active(i, assoc):
            choices = [int(assoc[u])]
        elif nc == 0:
            choices = [OUTAGE]
        else:
            choices = [int(b) for b in schedule.cand[i, :nc]]
        for b in choices:
            old = move(u, b)
            series[i] = b
            visit(i + 1, total + ctx.accrue(assoc, cnt, t, end))
            move(u, old)

    visit(0, base)
    return OracleResult(DecisionSeries(best[1]), best[0] / scenario.horizon, count)


class FixedSeries(PolicyBase):
    """Replays a series: at each decision epoch returns the recorded BS for that event."""

    name = "fixed"

    def __init__(self, series):
        self.series = np.asarray(list(series), dtype=np.int64)

    def decide(self, i, state):
        return int(self.series[i])
