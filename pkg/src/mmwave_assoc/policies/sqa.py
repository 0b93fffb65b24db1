"""Sequence Q-learning association (SQA).

Per-epoch action values ``q[i, a]`` and conditional values
``q_cond[i, a, a']`` (value of action ``a'`` at epoch ``i+1`` given ``a`` at
``i``) are learned between consecutive decision epochs from Monte-Carlo
traces that sample actions with the ranked softmax and stop after ``step``
epochs.  Actions are stored by candidate slot: slot ``a`` of epoch ``i`` is
BS ``schedule.cand[i, a]``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from ..engine import AssociationState, DecisionSeries, PolicyBase, RunContext
from ..errors import ContractViolation

log = logging.getLogger(__name__)

REWARDS = ("absolute", "advantage", "marginal")
ROLLOUTS = ("auto", "exact", "incremental")
EXACT_MAX_UES = 8


@dataclass(frozen=True)
class SqaParams:
    epsilon: float = 3.0
    alpha: float = 0.01
    gamma: float = 1.0
    step: int | None = None  # None: half the number of UEs
    iterations: int = 100
    seed: int = 0
    reward: str = "marginal"
    rollout: str = "auto"
    lookahead: float = 10.0
    harmonic: bool = False

    def __post_init__(self):
        if not self.epsilon > 1:
            raise ValueError("epsilon must exceed 1")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.step is not None and self.step < 1:
            raise ValueError("step must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.reward not in REWARDS:
            raise ValueError(f"reward must be one of {REWARDS}")
        if self.rollout not in ROLLOUTS:
            raise ValueError(f"rollout must be one of {ROLLOUTS}")
        if self.lookahead < 0:
            raise ValueError("lookahead must be >= 0")

    def resolve_step(self, n_ues: int) -> int:
        return self.step if self.step is not None else max(1, n_ues // 2)


def transition_probs(values, epsilon: float) -> np.ndarray:
    """Ranked softmax: ``p_j`` proportional to ``epsilon ** phi_j``, ``phi_j`` = number of strictly smaller values."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ContractViolation("empty action row")
    if not epsilon > 1:
        raise ContractViolation("epsilon must exceed 1")
    phi = (v[None, :] < v[:, None]).sum(axis=1)
    with np.errstate(over="ignore"):
        w = float(epsilon) ** phi.astype(float)
    if not np.isfinite(w.sum()):
        w = float(epsilon) ** (phi - phi.max()).astype(float)
    return w / w.sum()


@dataclass
class QTable:
    q: np.ndarray
    q_cond: np.ndarray
    visits: np.ndarray
    cond_visits: np.ndarray
    committed_prefix: DecisionSeries = field(default_factory=DecisionSeries)

    @classmethod
    def empty(cls, n_epochs: int, k: int) -> QTable:
        k = max(k, 1)
        return cls(np.zeros((n_epochs, k)), np.zeros((n_epochs, k, k)), np.zeros((n_epochs, k), dtype=np.int64),
                   np.zeros((n_epochs, k, k), dtype=np.int64))

    def copy(self) -> QTable:
        return QTable(self.q.copy(), self.q_cond.copy(), self.visits.copy(), self.cond_visits.copy(),
                      DecisionSeries(list(self.committed_prefix.decisions)))

    def write_csv(self, path, schedule) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "bs", "q", "visits"])
            for i in range(len(schedule)):
                for a in range(int(schedule.nc[i])):
                    w.writerow([i, int(schedule.cand[i, a]), repr(float(self.q[i, a])), int(self.visits[i, a])])


def _use_exact(params: SqaParams, n_ues: int) -> bool:
    return params.rollout == "exact" or (params.rollout == "auto" and n_ues <= EXACT_MAX_UES)


@dataclass(frozen=True)
class RewardModel:
    """How rollouts score an interval.

    ``exact`` integrates the network rate along the trajectories.  Otherwise
    each UE's spectral efficiency is frozen for the length of a trace, taken as
    its mean over the next ``span`` seconds (``span > 0``) or its value at the
    decision time.  ``ep_val[j, a]`` is that frozen value for the triggering UE
    of epoch ``j`` on candidate ``a``; ``cum`` holds the running integrals the
    look-ahead means come from.
    """

    exact: bool
    span: float
    ep_val: np.ndarray
    cum: np.ndarray

    @classmethod
    def build(cls, ctx: RunContext, params: SqaParams) -> RewardModel:
        s, b = ctx.schedule, ctx.bank
        exact = _use_exact(params, ctx.n_ues)
        if exact or params.lookahead == 0 or len(s) == 0:
            return cls(exact, 0.0, s.se, np.zeros((1, 1, 1)))
        h = ctx.scenario.horizon
        cum = K.se_cumulative(b.wt, b.wx, b.wy, b.wn, ctx.bs_x, ctx.bs_y, ctx.params.coverage_radius,
                              np.ascontiguousarray(ctx.scenario.net.rects), ctx.snr_k, ctx.beta, h, ctx.quad_dt)
        ep_val = K.lookahead_event_se(cum, s.t, s.ue, s.cand, s.nc, h, params.lookahead, ctx.quad_dt)
        return cls(False, float(params.lookahead), ep_val, cum)

    def snapshot(self, ctx: RunContext, t: float, assoc: np.ndarray):
        b = ctx.bank
        if self.span > 0:
            return K.lookahead_snapshot(t, assoc, ctx.n_bs, self.cum, ctx.bw, ctx.scenario.horizon,
                                        self.span, ctx.quad_dt)
        return K.load_snapshot(t, assoc, ctx.n_bs, b.wt, b.wx, b.wy, b.wn, ctx.bs_x, ctx.bs_y,
                               ctx.bw, ctx.snr_k, ctx.beta)


def init_qtable(ctx: RunContext, params: SqaParams, assoc0: np.ndarray | None = None,
                model: RewardModel | None = None) -> QTable:
    """Seed the tables from one rate-greedy pass over the schedule.

    Each action's value is its counterfactual reward on its own interval
    (greedy everywhere else) plus the greedy continuation over the rest of the
    exploration window.  In advantage mode values are rate gains over keeping
    the incumbent, scaled to the window length.  ``q_cond[i, a, :]`` starts as
    the initial ``q[i+1, :]`` for every ``a``.
    """
    s = ctx.schedule
    e = len(s)
    table = QTable.empty(e, s.cand.shape[1])
    if e == 0:
        return table
    step = params.resolve_step(ctx.n_ues)
    model = RewardModel.build(ctx, params) if model is None else model
    assoc0 = ctx.initial_state().assoc if assoc0 is None else assoc0
    b = ctx.bank
    g_slot, r_after, r_before = K.greedy_pass(
        assoc0, s.t, s.end, s.ue, s.bs, s.kind, s.nc, s.cand, s.se, model.ep_val, model.cum, model.span,
        ctx.quad_dt, ctx.scenario.horizon, b.wt, b.wx, b.wy, b.wn,
        ctx.bs_x, ctx.bs_y, ctx.bw, ctx.snr_k, ctx.beta, ctx.quad_dt, model.exact)
    mask = np.arange(s.cand.shape[1])[None, :] < s.nc[:, None]
    if params.reward == "absolute":
        r_g = np.where(g_slot >= 0, r_after[np.arange(e), np.maximum(g_slot, 0)], r_before)
        cont = K.window_returns(r_g, params.gamma, step - 1)
        q = r_after + params.gamma * cont[1:, None]
    else:
        width = s.end - s.t
        if params.reward == "marginal" and not model.exact:
            window = np.minimum(params.lookahead, ctx.scenario.horizon - s.t)
        else:
            t_ext = np.append(s.t, ctx.scenario.horizon)
            window = t_ext[np.minimum(np.arange(e) + step, e)] - s.t
        q = (r_after - r_before[:, None]) / np.maximum(width, 1e-12)[:, None] * window[:, None]
    table.q[:] = np.where(mask, q, 0.0)
    table.q_cond[:-1] = table.q[1:, None, :] * mask[:-1, :, None]
    return table


def greedy_slot(ctx: RunContext, i: int, state: AssociationState) -> int:
    s = ctx.schedule
    nc = int(s.nc[i])
    cands = s.cand[i, :nc]
    inc = state.assoc[s.ue[i]]
    return int(np.argmax(s.se[i, :nc] / (state.cnt[cands] + (cands != inc))))


class SQA(PolicyBase):
    name = "SQA"

    def __init__(self, params: SqaParams | None = None):
        self.params = params or SqaParams()
        self.samples = 0

    def start(self, ctx: RunContext, state: AssociationState) -> None:
        super().start(ctx, state)
        self.step = self.params.resolve_step(ctx.n_ues)
        self.model = RewardModel.build(ctx, self.params)
        self.rng = np.random.default_rng(self.params.seed)
        self.table = init_qtable(ctx, self.params, state.assoc, self.model)
        self.slots = np.full(len(ctx.schedule), -1, dtype=np.int64)
        self.samples = 0
        self.q_bound = ctx.scenario.horizon * ctx.n_ues * ctx.params.peak_rate

    def learn_between(self, k: int, state: AssociationState) -> None:
        p = self.params
        if p.iterations == 0:
            return
        uniforms = self.rng.random((p.iterations, self.step))
        self.learn_with(k, state, uniforms)

    def learn_with(self, k: int, state: AssociationState, uniforms: np.ndarray) -> int:
        """Run one exploration trace per row of ``uniforms`` starting at epoch ``k``."""
        p, ctx, s, b = self.params, self.ctx, self.ctx.schedule, self.ctx.bank
        assoc = np.ascontiguousarray(state.assoc, dtype=np.int64)
        contrib, S, cnt, rate0 = self.model.snapshot(ctx, float(s.t[k]), assoc)
        prev_slot = int(self.slots[k - 1]) if k > 0 else -1
        t = self.table
        n = K.sqa_learn(k, uniforms.shape[0], uniforms.shape[1], p.epsilon, p.alpha, p.gamma,
                        REWARDS.index(p.reward), p.lookahead, ctx.scenario.horizon, self.model.exact, prev_slot,
                        p.harmonic,
                        t.q, t.q_cond, t.visits, t.cond_visits, uniforms,
                        s.t, s.end, s.ue, s.bs, s.kind, s.nc, s.cand, self.model.ep_val,
                        assoc, contrib, S, cnt, rate0,
                        b.wt, b.wx, b.wy, b.wn, ctx.bs_x, ctx.bs_y, ctx.bw, ctx.snr_k, ctx.beta, ctx.quad_dt)
        self.samples += n
        if p.reward == "absolute":
            row = t.q[k:k + self.step]
            if row.size and (row.min() < -1e-6 * self.q_bound or row.max() > self.q_bound):
                raise ContractViolation(f"q values at epoch {k} escaped [0, {self.q_bound}]")
        return n

    def decide(self, i: int, state: AssociationState) -> int:
        s = self.ctx.schedule
        nc = int(s.nc[i])
        row = self.table.q[i, :nc]
        if not np.all(np.isfinite(row)):
            log.warning("epoch %d has no learned values, falling back to rate-greedy", i)
            return int(s.cand[i, greedy_slot(self.ctx, i, state)])
        return int(s.cand[i, int(np.argmax(row))])

    def observe(self, i: int, state: AssociationState) -> None:
        s = self.ctx.schedule
        bs = int(state.assoc[s.ue[i]])
        self.table.committed_prefix.append(bs)
        hit = np.flatnonzero(s.cand[i, : s.nc[i]] == bs)
        self.slots[i] = int(hit[0]) if hit.size else -1
