"""numba kernels for the per-UE Q-learning baseline."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._kernels import pos_at, spectral_eff


@njit(cache=True)
def holding_integrals(ep_t, ue_end, ep_ue, ep_cand, ep_nc, wt, wx, wy, wn, bs_x, bs_y, bw, snr_k, beta, dt):
    """Unshared bits from each candidate of event ``j`` until the same UE's next event."""
    e, k = ep_cand.shape
    out = np.zeros((e, k))
    for j in range(e):
        u = ep_ue[j]
        t_a = ep_t[j]
        t_b = ue_end[j]
        for a in range(ep_nc[j]):
            b = ep_cand[j, a]
            total = 0.0
            n = 0
            while True:
                s = t_a + n * dt
                if s >= t_b:
                    break
                x, y = pos_at(wt[u], wx[u], wy[u], wn[u], s)
                total += bw * spectral_eff(bs_x[b], bs_y[b], x, y, snr_k, beta) * min(dt, t_b - s)
                n += 1
            out[j, a] = total
    return out


@njit(cache=True)
def _state(cur, trig, kind, dist, n_bs, n_bucket, bucket):
    bk = min(int(dist // bucket), n_bucket - 1)
    c = cur if cur >= 0 else n_bs
    return ((c * n_bs + trig) * 2 + kind) * n_bucket + bk


@njit(cache=True)
def _slot(cand_row, nc, b):
    for a in range(nc):
        if cand_row[a] == b:
            return a
    return -1


@njit(cache=True)
def _walk(idx, init_bs, ep_bs, ep_kind, ep_nc, ep_cand, trig_dist, ep_se, hold, q, seen,
          n_bs, n_bucket, bucket, eps, alpha, gamma, u_row, learn, plan):
    """One pass over a UE's events; ``learn`` toggles exploration and Q updates."""
    cur = init_bs
    prev_s = -1
    prev_a = -1
    acc = 0.0
    for p in range(idx.shape[0]):
        j = idx[p]
        active = ep_kind[j] == 1 or ep_bs[j] == cur
        if active:
            nc = ep_nc[j]
            trig = ep_bs[j]
            s = _state(cur, trig, ep_kind[j], trig_dist[j], n_bs, n_bucket, bucket)
            if learn and prev_s >= 0:
                best = 0.0
                if nc > 0:
                    best = -1e300
                    for a in range(nc):
                        v = q[s, ep_cand[j, a]]
                        if v > best:
                            best = v
                q[prev_s, prev_a] += alpha * (acc + gamma * best - q[prev_s, prev_a])
            if nc == 0:
                cur = -1
                prev_s = -1
            else:
                choice = -1
                if learn and u_row[2 * p] < eps:
                    choice = ep_cand[j, min(int(u_row[2 * p + 1] * nc), nc - 1)]
                else:
                    unseen = True
                    for a in range(nc):
                        if seen[s, ep_cand[j, a]]:
                            unseen = False
                    if unseen:
                        bv = -1.0
                        for a in range(nc):
                            if ep_se[j, a] > bv:
                                bv = ep_se[j, a]
                                choice = ep_cand[j, a]
                    else:
                        bv = -1e300
                        for a in range(nc):
                            v = q[s, ep_cand[j, a]]
                            if seen[s, ep_cand[j, a]] and v > bv:
                                bv = v
                                choice = ep_cand[j, a]
                cur = choice
                if learn:
                    seen[s, cur] = True
                prev_s = s
                prev_a = cur
            acc = 0.0
            plan[p] = cur
        else:
            plan[p] = cur
        if cur >= 0:
            sl = _slot(ep_cand[j], ep_nc[j], cur)
            if sl >= 0:
                acc += hold[j, sl]
    if learn and prev_s >= 0:
        q[prev_s, prev_a] += alpha * (acc - q[prev_s, prev_a])


@njit(cache=True)
def train_and_plan(idx, init_bs, ep_bs, ep_kind, ep_nc, ep_cand, trig_dist, ep_se, hold,
                   n_bs, radius, bucket, episodes, eps_start, eps_end, alpha, gamma, uniforms):
    n_bucket = int(math.floor(radius / bucket)) + 1
    n_states = (n_bs + 1) * n_bs * 2 * n_bucket
    q = np.zeros((n_states, n_bs))
    seen = np.zeros((n_states, n_bs), dtype=np.bool_)
    plan = np.empty(idx.shape[0], dtype=np.int64)
    for e in range(episodes):
        frac = e / (episodes - 1) if episodes > 1 else 0.0
        eps = eps_start + (eps_end - eps_start) * frac
        _walk(idx, init_bs, ep_bs, ep_kind, ep_nc, ep_cand, trig_dist, ep_se, hold, q, seen,
              n_bs, n_bucket, bucket, eps, alpha, gamma, uniforms[e], True, plan)
    _walk(idx, init_bs, ep_bs, ep_kind, ep_nc, ep_cand, trig_dist, ep_se, hold, q, seen,
          n_bs, n_bucket, bucket, 0.0, alpha, gamma, uniforms[0], False, plan)
    return plan
