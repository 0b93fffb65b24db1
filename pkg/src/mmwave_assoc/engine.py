"""Event-driven association simulator: state, reward quadrature, constraint audit and metrics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np

from . import _kernels as K
from .errors import ConstraintViolation
from .mobility import Scenario
from .radio import EpochSchedule

OUTAGE = -1


@dataclass
class AssociationState:
    """Current UE -> BS mapping (``-1`` is outage) and per-BS load counts."""

    assoc: np.ndarray
    cnt: np.ndarray
    time: float = 0.0
    handover_log: list[tuple[int, float, int, int]] = field(default_factory=list)

    def copy(self) -> AssociationState:
        return AssociationState(self.assoc.copy(), self.cnt.copy(), self.time, list(self.handover_log))

    def move(self, ue: int, new: int, t: float) -> None:
        old = int(self.assoc[ue])
        if new == old:
            return
        if old >= 0:
            self.cnt[old] -= 1
        if new >= 0:
            self.cnt[new] += 1
        self.assoc[ue] = new
        if old >= 0 and new >= 0:
            self.handover_log.append((ue, t, old, new))


@dataclass
class DecisionSeries:
    """Association of the triggering UE after each processed event (``-1`` for outage)."""

    decisions: list[int] = field(default_factory=list)

    def append(self, bs: int) -> DecisionSeries:
        self.decisions.append(int(bs))
        return self

    def __len__(self) -> int:
        return len(self.decisions)

    def __getitem__(self, i):
        return self.decisions[i]


@dataclass
class MetricsReport:
    policy: str
    L_bar: float
    X_n: float | None
    instant_rate_series: list[tuple[float, float]]
    handover_count: int
    outage_time: float
    total_bits: float
    horizon: float
    n_ues: int
    n_epochs: int
    n_decisions: int
    handover_log: list[tuple[int, float, int, int]] = field(default_factory=list)
    decisions: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("handover_log")
        d.pop("instant_rate_series")
        d.pop("decisions")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, outdir) -> None:
        from pathlib import Path

        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(self.to_json() + "\n")
        with open(out / "rates.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "sum_rate_bps"])
            for t, r in self.instant_rate_series:
                w.writerow([repr(t), repr(r)])
        with open(out / "handovers.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ue", "t", "from_bs", "to_bs"])
            for ue, t, a, b in self.handover_log:
                w.writerow([ue, repr(t), a, b])


class RunContext:
    """Read-only arrays shared by the engine, the policies and the oracle."""

    def __init__(self, scenario: Scenario, schedule: EpochSchedule):
        self.scenario = scenario
        self.schedule = schedule
        self.params = scenario.radio
        self.bank = scenario.bank
        self.bs_x = np.ascontiguousarray(scenario.net.bs_xy[:, 0])
        self.bs_y = np.ascontiguousarray(scenario.net.bs_xy[:, 1])
        self.bw = scenario.radio.bandwidth
        self.snr_k = scenario.radio.snr_scale
        self.beta = scenario.radio.path_loss_exponent
        self.quad_dt = scenario.quad_dt
        self.n_ues = scenario.n_ues
        self.n_bs = scenario.net.n_bs

    def positions(self, t: float):
        b = self.bank
        return K.positions_at(b.wt, b.wx, b.wy, b.wn, t)

    def sum_rate(self, assoc, cnt, t: float) -> float:
        b = self.bank
        return K.network_rate(t, assoc, cnt, b.wt, b.wx, b.wy, b.wn, self.bs_x, self.bs_y,
                              self.bw, self.snr_k, self.beta)

    def accrue(self, assoc, cnt, t_a: float, t_b: float, dt: float | None = None) -> float:
        b = self.bank
        return K.accrue(t_a, t_b, self.quad_dt if dt is None else dt, assoc, cnt, b.wt, b.wx, b.wy, b.wn,
                        self.bs_x, self.bs_y, self.bw, self.snr_k, self.beta)

    def is_active(self, i: int, assoc) -> bool:
        s = self.schedule
        return bool(s.kind[i] == 1 or assoc[s.ue[i]] == s.bs[i])

    def initial_state(self) -> AssociationState:
        """Rate-greedy association at t=0, UEs processed in id order with loads accumulating."""
        assoc = np.full(self.n_ues, OUTAGE, dtype=np.int64)
        cnt = np.zeros(self.n_bs, dtype=np.int64)
        xs, ys = self.positions(0.0)
        for u, cands in enumerate(self.schedule.initial_candidates):
            best, best_r = OUTAGE, -1.0
            for m in cands:
                se = K.spectral_eff(self.bs_x[m], self.bs_y[m], xs[u], ys[u], self.snr_k, self.beta)
                r = self.bw * se / (cnt[m] + 1)
                if r > best_r:
                    best, best_r = m, r
            if best >= 0:
                assoc[u] = best
                cnt[best] += 1
        return AssociationState(assoc, cnt)


class Policy(Protocol):
    name: str

    def start(self, ctx: RunContext, state: AssociationState) -> None: ...

    def decide(self, i: int, state: AssociationState) -> int: ...

    def learn_between(self, i: int, state: AssociationState) -> None: ...

    def observe(self, i: int, state: AssociationState) -> None: ...


class PolicyBase:
    """Default no-op hooks; subclasses override ``decide`` and optionally the rest."""

    name = "base"

    def start(self, ctx: RunContext, state: AssociationState) -> None:
        self.ctx = ctx

    def decide(self, i: int, state: AssociationState) -> int:
        raise NotImplementedError

    def learn_between(self, i: int, state: AssociationState) -> None:
        pass

    def observe(self, i: int, state: AssociationState) -> None:
        pass


def accrue_reward(scenario: Scenario, state: AssociationState, t_a: float, t_b: float, dt: float = 0.5) -> float:
    """Bits delivered on ``[t_a, t_b]`` with associations frozen, left Riemann sum anchored at ``t_a``."""
    b = scenario.bank
    bs_xy = scenario.net.bs_xy
    return K.accrue(t_a, t_b, dt, np.asarray(state.assoc, dtype=np.int64), np.asarray(state.cnt, dtype=np.int64),
                    b.wt, b.wx, b.wy, b.wn, np.ascontiguousarray(bs_xy[:, 0]), np.ascontiguousarray(bs_xy[:, 1]),
                    scenario.radio.bandwidth, scenario.radio.snr_scale, scenario.radio.path_loss_exponent)


def audit(ctx: RunContext, state: AssociationState, prev_assoc: np.ndarray | None = None,
          i: int | None = None) -> None:
    """Check the four association constraints; raise ConstraintViolation on the first failure."""
    assoc, cnt = state.assoc, state.cnt
    if assoc.shape != (ctx.n_ues,) or np.any(assoc < OUTAGE) or np.any(assoc >= ctx.n_bs):
        raise ConstraintViolation(f"t={state.time}: every UE must map to exactly one BS or outage")
    if not np.array_equal(np.bincount(assoc[assoc >= 0], minlength=ctx.n_bs), cnt):
        raise ConstraintViolation(f"t={state.time}: load counts disagree with associations")
    if i is None or prev_assoc is None:
        return
    s = ctx.schedule
    u = int(s.ue[i])
    changed = np.flatnonzero(assoc != prev_assoc)
    if changed.size > 1 or (changed.size == 1 and changed[0] != u):
        raise ConstraintViolation(f"epoch {i}: UEs {changed.tolist()} changed, only UE {u} may")
    if not ctx.is_active(i, prev_assoc):
        if changed.size:
            raise ConstraintViolation(f"epoch {i}: UE {u} re-associated at a non-decision event")
        return
    a = int(assoc[u])
    cands = s.cand[i, : s.nc[i]]
    if (a == OUTAGE) != (len(cands) == 0) or (a != OUTAGE and a not in cands):
        raise ConstraintViolation(f"epoch {i}: UE {u} associated with {a}, candidates {cands.tolist()}")


def finalize_metrics(policy: str, total_bits: float, horizon: float, handover_log, n_ues: int,
                     instant_rate_series, outage_time: float = 0.0, n_epochs: int = 0, n_decisions: int = 0,
                     decisions=None) -> MetricsReport:
    by_ue: dict[int, list[float]] = {}
    for ue, t, _, _ in handover_log:
        by_ue.setdefault(ue, []).append(t)
    gaps = [(ts[-1] - ts[0]) / (len(ts) - 1) for ts in by_ue.values() if len(ts) >= 2]
    return MetricsReport(
        policy=policy,
        L_bar=total_bits / horizon,
        X_n=float(np.mean(gaps)) if gaps else None,
        instant_rate_series=list(instant_rate_series),
        handover_count=len(handover_log),
        outage_time=outage_time,
        total_bits=total_bits,
        horizon=horizon,
        n_ues=n_ues,
        n_epochs=n_epochs,
        n_decisions=n_decisions,
        handover_log=list(handover_log),
        decisions=list(decisions or []),
    )


def run(scenario: Scenario, schedule: EpochSchedule, policy, check: bool = True) -> MetricsReport:
    """Simulate ``policy`` over ``schedule``.

    At each event the triggering UE is re-associated when the event is a
    decision epoch (a BS entered, or its serving BS left).  An empty candidate
    set puts the UE in outage.  Rewards accrue between consecutive events.
    """
    ctx = RunContext(scenario, schedule)
    state = ctx.initial_state()
    if check:
        audit(ctx, state)
    policy.start(ctx, state)
    horizon = scenario.horizon
    series: list[tuple[float, float]] = []
    next_sample = 0
    n_samples = math.ceil(horizon)
    outage_since = {u: 0.0 for u in np.flatnonzero(state.assoc == OUTAGE).tolist()}
    outage_time = 0.0
    decisions = DecisionSeries()
    n_decisions = 0

    def sample_until(t_stop):
        nonlocal next_sample
        while next_sample < n_samples and next_sample < t_stop:
            s = float(next_sample)
            if check:
                audit(ctx, state)
            series.append((s, ctx.sum_rate(state.assoc, state.cnt, s)))
            next_sample += 1

    t0 = float(schedule.t[0]) if len(schedule) else horizon
    total = ctx.accrue(state.assoc, state.cnt, 0.0, t0) if t0 > 0 else 0.0
    for i in range(len(schedule)):
        t = float(schedule.t[i])
        sample_until(t)
        state.time = t
        u = int(schedule.ue[i])
        prev = state.assoc.copy() if check else None
        if ctx.is_active(i, state.assoc):
            nc = int(schedule.nc[i])
            if nc == 0:
                new = OUTAGE
            else:
                policy.learn_between(i, state)
                new = int(policy.decide(i, state))
                n_decisions += 1
                if new not in schedule.cand[i, :nc]:
                    raise ConstraintViolation(f"epoch {i}: policy {policy.name} chose {new} outside "
                                              f"{schedule.cand[i, :nc].tolist()}")
            old = int(state.assoc[u])
            if old == OUTAGE and new != OUTAGE:
                outage_time += t - outage_since.pop(u)
            elif old != OUTAGE and new == OUTAGE:
                outage_since[u] = t
            state.move(u, new, t)
        decisions.append(state.assoc[u])
        policy.observe(i, state)
        if check:
            audit(ctx, state, prev, i)
        total += ctx.accrue(state.assoc, state.cnt, t, float(schedule.end[i]))
    sample_until(horizon)
    state.time = horizon
    outage_time += sum(horizon - t for t in outage_since.values())
    return finalize_metrics(policy.name, total, horizon, state.handover_log, scenario.n_ues, series,
                            outage_time, len(schedule), n_decisions, decisions.decisions)
