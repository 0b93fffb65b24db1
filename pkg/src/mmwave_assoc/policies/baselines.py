"""Benchmark association policies: SNR-greedy, rate-greedy, threshold-gated and per-UE Q-learning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _lbh
from ..engine import AssociationState, PolicyBase, RunContext
from ..errors import ContractViolation


def _row(ctx: RunContext, i: int):
    s = ctx.schedule
    nc = int(s.nc[i])
    if nc == 0:
        raise ContractViolation(f"epoch {i} has an empty candidate set")
    return s.cand[i, :nc], s.se[i, :nc]


def loaded_rates(ctx: RunContext, i: int, state: AssociationState) -> np.ndarray:
    """Rate each candidate would give the UE, counting the UE itself in the load of non-incumbents."""
    cands, se = _row(ctx, i)
    inc = state.assoc[ctx.schedule.ue[i]]
    load = state.cnt[cands] + (cands != inc)
    return ctx.bw * se / load


def sbh_decide(ctx: RunContext, i: int, state: AssociationState) -> int:
    cands, se = _row(ctx, i)
    # se is monotone in SNR; argmax returns the first (lowest id) of any tie
    return int(cands[int(np.argmax(se))])


def rbh_decide(ctx: RunContext, i: int, state: AssociationState) -> int:
    cands, _ = _row(ctx, i)
    return int(cands[int(np.argmax(loaded_rates(ctx, i, state)))])


@dataclass(frozen=True)
class SmartParams:
    theta: float = 1.2

    def __post_init__(self):
        if self.theta < 1:
            raise ValueError("theta must be >= 1")


def smart_decide(ctx: RunContext, i: int, state: AssociationState, params: SmartParams) -> int:
    cands, _ = _row(ctx, i)
    rates = loaded_rates(ctx, i, state)
    best = int(np.argmax(rates))
    inc = state.assoc[ctx.schedule.ue[i]]
    hit = np.flatnonzero(cands == inc)
    if hit.size == 0:
        return int(cands[best])
    if cands[best] != inc and rates[best] >= params.theta * rates[hit[0]]:
        return int(cands[best])
    return int(inc)


class SBH(PolicyBase):
    name = "SBH"

    def decide(self, i, state):
        return sbh_decide(self.ctx, i, state)


class RBH(PolicyBase):
    name = "RBH"

    def decide(self, i, state):
        return rbh_decide(self.ctx, i, state)


class SMART(PolicyBase):
    name = "SMART"

    def __init__(self, params: SmartParams | None = None):
        self.params = params or SmartParams()

    def decide(self, i, state):
        return smart_decide(self.ctx, i, state, self.params)


@dataclass(frozen=True)
class LbhParams:
    episodes: int = 20
    alpha: float = 0.1
    gamma: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    bucket: float = 25.0
    seed: int = 0


class LBH(PolicyBase):
    """Per-UE tabular Q-learning on the UE's own trajectory with unshared bandwidth.

    State is (serving BS, triggering BS, trigger kind, 25 m distance bucket to the
    triggering BS); the reward of a decision is the unshared rate integrated
    until the UE's next decision epoch.  Since neither reward nor triggers
    depend on other UEs, each UE trains over repeated episodes of its own event
    sequence and the greedy plan is fixed before the run starts.
    """

    name = "LBH"

    def __init__(self, params: LbhParams | None = None):
        self.params = params or LbhParams()

    def start(self, ctx: RunContext, state: AssociationState) -> None:
        super().start(ctx, state)
        s, p = ctx.schedule, self.params
        b = ctx.bank
        order = np.lexsort((s.t, s.ue))
        ue_end = np.full(len(s), ctx.scenario.horizon)
        same = s.ue[order[1:]] == s.ue[order[:-1]]
        ue_end[order[:-1][same]] = s.t[order[1:][same]]
        hold = _lbh.holding_integrals(s.t, ue_end, s.ue, s.cand, s.nc, b.wt, b.wx, b.wy, b.wn,
                                      ctx.bs_x, ctx.bs_y, ctx.bw, ctx.snr_k, ctx.beta, ctx.quad_dt)
        trig_dist = np.hypot(s.px - ctx.bs_x[s.bs], s.py - ctx.bs_y[s.bs]) if len(s) else np.zeros(0)
        rng = np.random.default_rng(p.seed)
        self.plan = np.full(len(s), -1, dtype=np.int64)
        bounds = np.searchsorted(s.ue[order], np.arange(ctx.n_ues + 1))
        for u in range(ctx.n_ues):
            idx = order[bounds[u]:bounds[u + 1]]
            uniforms = rng.random((max(p.episodes, 1), 2 * max(len(idx), 1)))
            if len(idx) == 0:
                continue
            self.plan[idx] = _lbh.train_and_plan(
                idx, int(state.assoc[u]), s.bs, s.kind, s.nc, s.cand, trig_dist, s.se, hold,
                ctx.n_bs, ctx.params.coverage_radius, p.bucket, p.episodes, p.eps_start, p.eps_end,
                p.alpha, p.gamma, uniforms)

    def decide(self, i, state):
        return int(self.plan[i])

