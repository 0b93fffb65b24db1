"""numba kernels for the hot loops.

Everything here works on flat numpy arrays.  The public modules wrap these
with the dataclass-level API; the pure-Python versions in ``geometry`` and
``radio`` remain the reference implementations used by the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import segment_blocked

_seg_blocked = njit(cache=True)(segment_blocked)


@dataclass(frozen=True)
class TrajectoryBank:
    """Waypoints of all UEs padded into ``(N, W)`` arrays."""

    wt: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    wn: np.ndarray

    @classmethod
    def from_trajectories(cls, trajs) -> TrajectoryBank:
        n = len(trajs)
        w = max((len(tr.times) for tr in trajs), default=1)
        wt = np.zeros((n, w))
        wx = np.zeros((n, w))
        wy = np.zeros((n, w))
        wn = np.zeros(n, dtype=np.int64)
        for i, tr in enumerate(trajs):
            k = len(tr.times)
            wt[i, :k], wx[i, :k], wy[i, :k] = tr.times, tr.xs, tr.ys
            wn[i] = k
        return cls(wt, wx, wy, wn)


@njit(cache=True)
def pos_at(wt, wx, wy, n, t):
    if t <= wt[0]:
        return wx[0], wy[0]
    if t >= wt[n - 1]:
        return wx[n - 1], wy[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if wt[mid] <= t:
            lo = mid
        else:
            hi = mid
    f = (t - wt[lo]) / (wt[hi] - wt[lo])
    return wx[lo] + f * (wx[hi] - wx[lo]), wy[lo] + f * (wy[hi] - wy[lo])


@njit(cache=True)
def positions_at(wt, wx, wy, wn, t):
    n = wn.shape[0]
    xs = np.empty(n)
    ys = np.empty(n)
    for i in range(n):
        xs[i], ys[i] = pos_at(wt[i], wx[i], wy[i], wn[i], t)
    return xs, ys


@njit(cache=True)
def spectral_eff(bx, by, x, y, snr_k, beta):
    d = math.hypot(x - bx, y - by)
    if d < 1.0:
        d = 1.0
    return math.log2(1.0 + snr_k * d ** (-beta))


@njit(cache=True)
def is_member(bx, by, x, y, radius, rects):
    if math.hypot(x - bx, y - by) > radius:
        return False
    if bx == x and by == y:
        return True
    for r in range(rects.shape[0]):
        if _seg_blocked(bx, by, x, y, rects[r, 0], rects[r, 1], rects[r, 2], rects[r, 3], 1e-9):
            return False
    return True


@njit(cache=True)
def membership(x, y, bs_x, bs_y, radius, rects):
    m = bs_x.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    for b in range(m):
        out[b] = is_member(bs_x[b], bs_y[b], x, y, radius, rects)
    return out


@njit(cache=True)
def scan_ue(wt, wx, wy, n, horizon, scan_dt, tol, bs_x, bs_y, radius, rects):
    """Membership flips of one UE: returns (times, bs, kind, members_at_0).

    ``kind`` is 1 when the BS enters the candidate set, 0 when it leaves.  Each
    flip is bisected to ``tol`` and reported at the post-flip end of the bracket.
    """
    m = bs_x.shape[0]
    x, y = pos_at(wt, wx, wy, n, 0.0)
    prev = membership(x, y, bs_x, bs_y, radius, rects)
    init = prev.copy()
    cap = 64
    times = np.empty(cap)
    bss = np.empty(cap, dtype=np.int64)
    kinds = np.empty(cap, dtype=np.int8)
    ne = 0
    steps = int(math.ceil(horizon / scan_dt - 1e-9))
    t_prev = 0.0
    for g in range(1, steps + 1):
        t = min(g * scan_dt, horizon)
        x, y = pos_at(wt, wx, wy, n, t)
        cur = membership(x, y, bs_x, bs_y, radius, rects)
        for b in range(m):
            if cur[b] == prev[b]:
                continue
            lo = t_prev
            hi = t
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                mx, my = pos_at(wt, wx, wy, n, mid)
                if is_member(bs_x[b], bs_y[b], mx, my, radius, rects) == prev[b]:
                    lo = mid
                else:
                    hi = mid
            if ne == cap:
                cap *= 2
                times = np.concatenate((times, np.empty(cap - ne)))
                bss = np.concatenate((bss, np.empty(cap - ne, dtype=np.int64)))
                kinds = np.concatenate((kinds, np.empty(cap - ne, dtype=np.int8)))
            times[ne] = hi
            bss[ne] = b
            kinds[ne] = 1 if cur[b] else 0
            ne += 1
        prev = cur
        t_prev = t
    return times[:ne], bss[:ne], kinds[:ne], init


@njit(cache=True)
def candidates_at_events(ev_t, ev_ue, wt, wx, wy, wn, bs_x, bs_y, radius, rects, snr_k, beta):
    """Per event: UE position, candidate BS ids (padded with -1), distances and spectral efficiencies."""
    e = ev_t.shape[0]
    m = bs_x.shape[0]
    cand = np.full((e, m), -1, dtype=np.int64)
    nc = np.zeros(e, dtype=np.int64)
    px = np.empty(e)
    py = np.empty(e)
    kmax = 0
    for i in range(e):
        u = ev_ue[i]
        x, y = pos_at(wt[u], wx[u], wy[u], wn[u], ev_t[i])
        px[i] = x
        py[i] = y
        c = 0
        for b in range(m):
            if is_member(bs_x[b], bs_y[b], x, y, radius, rects):
                cand[i, c] = b
                c += 1
        nc[i] = c
        if c > kmax:
            kmax = c
    kmax = max(kmax, 1)
    cand = cand[:, :kmax].copy()
    dist = np.zeros((e, kmax))
    se = np.zeros((e, kmax))
    for i in range(e):
        for a in range(nc[i]):
            b = cand[i, a]
            dist[i, a] = math.hypot(px[i] - bs_x[b], py[i] - bs_y[b])
            se[i, a] = spectral_eff(bs_x[b], bs_y[b], px[i], py[i], snr_k, beta)
    return cand, nc, px, py, dist, se


@njit(cache=True)
def network_rate(t, assoc, cnt, wt, wx, wy, wn, bs_x, bs_y, bw, snr_k, beta):
    total = 0.0
    for n in range(assoc.shape[0]):
        m = assoc[n]
        if m < 0:
            continue
        x, y = pos_at(wt[n], wx[n], wy[n], wn[n], t)
        total += bw * spectral_eff(bs_x[m], bs_y[m], x, y, snr_k, beta) / cnt[m]
    return total


@njit(cache=True)
def accrue(t_a, t_b, dt, assoc, cnt, wt, wx, wy, wn, bs_x, bs_y, bw, snr_k, beta):
    """Left Riemann sum of the network rate on a grid anchored at ``t_a``."""
    total = 0.0
    k = 0
    while True:
        s = t_a + k * dt
        if s >= t_b:
            break
        w = min(dt, t_b - s)
        total += network_rate(s, assoc, cnt, wt, wx, wy, wn, bs_x, bs_y, bw, snr_k, beta) * w
        k += 1
    return total


@njit(cache=True)
def _term(bw, s, c):
    return bw * s / c if c > 0 else 0.0


@njit(cache=True)
def _ranked_sample(row, nc, eps, u, w):
    total = 0.0
    for j in range(nc):
        phi = 0
        for l in range(nc):
            if row[l] < row[j]:
                phi += 1
        w[j] = eps ** phi
        total += w[j]
    target = u * total
    acc = 0.0
    for j in range(nc):
        acc += w[j]
        if target < acc:
            return j
    return nc - 1


@njit(cache=True)
def _slot_of(cand_row, nc, bs):
    for a in range(nc):
        if cand_row[a] == bs:
            return a
    return -1


@njit(cache=True)
def sqa_learn(k, n_iter, step_max, eps, alpha, gamma, mode, span, horizon, exact, prev_slot, harmonic,
              Q, QC, visits, qc_visits, uniforms,
              ep_t, ep_end, ep_ue, ep_bs, ep_kind, ep_nc, ep_cand, ep_se,
              assoc0, contrib0, S0, cnt0, rate0,
              wt, wx, wy, wn, bs_x, bs_y, bw, snr_k, beta, quad_dt):
    """Run ``n_iter`` exploration traces from epoch ``k`` and apply the backtracking updates.

    A trace samples one action per epoch (ranked softmax on ``Q``) for at most
    ``step_max`` epochs.  Epochs that are not decision epochs under the
    hypothetical association (a non-serving BS leaving) keep the incumbent.
    Updates run deepest-first, which is the unwind order of the recursive form.
    ``mode`` selects the interval reward: 0 the network rate integrated over
    the interval, 1 the same minus the committed rate at ``t_k``, 2 the rate
    change caused by this step's move held for ``min(span, horizon - t_j)``.
    With ``harmonic`` the step size of an entry is ``max(alpha, 1 / n_updates)``.
    Returns the number of sampled actions.
    """
    n_ep = ep_t.shape[0]
    hassoc = assoc0.copy()
    contrib = contrib0.copy()
    S = S0.copy()
    cnt = cnt0.copy()
    slots = np.empty(step_max, dtype=np.int64)
    rewards = np.empty(step_max)
    ue_log = np.empty(step_max, dtype=np.int64)
    ue_old_assoc = np.empty(step_max, dtype=np.int64)
    ue_old_contrib = np.empty(step_max)
    bs_log = np.empty(2 * step_max, dtype=np.int64)
    bs_old_s = np.empty(2 * step_max)
    bs_old_cnt = np.empty(2 * step_max, dtype=np.int64)
    w = np.empty(ep_cand.shape[1])
    sampled = 0
    for it in range(n_iter):
        rate = rate0
        nu = 0
        nb = 0
        depth = 0
        for d in range(step_max):
            j = k + d
            if j >= n_ep:
                break
            u = ep_ue[j]
            inc = hassoc[u]
            nc = ep_nc[j]
            rate_before = rate
            if ep_kind[j] == 1 or ep_bs[j] == inc:
                if nc == 0:
                    slot = -1
                    new = -1
                else:
                    slot = _ranked_sample(Q[j], nc, eps, uniforms[it, d], w)
                    new = ep_cand[j, slot]
                    sampled += 1
            else:
                new = inc
                slot = _slot_of(ep_cand[j], nc, inc)
            if new != inc:
                ue_log[nu] = u
                ue_old_assoc[nu] = inc
                ue_old_contrib[nu] = contrib[u]
                nu += 1
                if inc >= 0:
                    bs_log[nb] = inc
                    bs_old_s[nb] = S[inc]
                    bs_old_cnt[nb] = cnt[inc]
                    nb += 1
                    old = _term(bw, S[inc], cnt[inc])
                    S[inc] -= contrib[u]
                    cnt[inc] -= 1
                    if cnt[inc] == 0:
                        S[inc] = 0.0
                    rate += _term(bw, S[inc], cnt[inc]) - old
                if new >= 0:
                    bs_log[nb] = new
                    bs_old_s[nb] = S[new]
                    bs_old_cnt[nb] = cnt[new]
                    nb += 1
                    old = _term(bw, S[new], cnt[new])
                    c = ep_se[j, slot]
                    S[new] += c
                    cnt[new] += 1
                    contrib[u] = c
                    rate += _term(bw, S[new], cnt[new]) - old
                else:
                    contrib[u] = 0.0
                hassoc[u] = new
            if exact:
                r = accrue(ep_t[j], ep_end[j], quad_dt, hassoc, cnt, wt, wx, wy, wn, bs_x, bs_y, bw, snr_k, beta)
                if mode == 1:
                    r -= accrue(ep_t[j], ep_end[j], quad_dt, assoc0, cnt0, wt, wx, wy, wn,
                                bs_x, bs_y, bw, snr_k, beta)
            elif mode == 2:
                r = (rate - rate_before) * min(span, horizon - ep_t[j])
            else:
                r = (rate - rate0) if mode == 1 else rate
                r *= ep_end[j] - ep_t[j]
            slots[d] = slot
            rewards[d] = r
            depth = d + 1
        ret = 0.0
        for d in range(depth - 1, -1, -1):
            j = k + d
            ret = rewards[d] + gamma * ret
            s = slots[d]
            ps = prev_slot if d == 0 else slots[d - 1]
            if s >= 0 and ps >= 0 and j >= 1:
                qc_visits[j - 1, ps, s] += 1
                a_eff = max(alpha, 1.0 / qc_visits[j - 1, ps, s]) if harmonic else alpha
                QC[j - 1, ps, s] += a_eff * (ret - QC[j - 1, ps, s])
            if s >= 0:
                visits[j, s] += 1
                mx = 0.0
                if j + 1 < n_ep and ep_nc[j + 1] > 0:
                    mx = QC[j, s, 0]
                    for a in range(1, ep_nc[j + 1]):
                        if QC[j, s, a] > mx:
                            mx = QC[j, s, a]
                a_eff = max(alpha, 1.0 / visits[j, s]) if harmonic else alpha
                Q[j, s] += a_eff * (rewards[d] + gamma * mx - Q[j, s])
        for i in range(nb - 1, -1, -1):
            S[bs_log[i]] = bs_old_s[i]
            cnt[bs_log[i]] = bs_old_cnt[i]
        for i in range(nu - 1, -1, -1):
            hassoc[ue_log[i]] = ue_old_assoc[i]
            contrib[ue_log[i]] = ue_old_contrib[i]
    return sampled


@njit(cache=True)
def greedy_pass(assoc_init, ep_t, ep_end, ep_ue, ep_bs, ep_kind, ep_nc, ep_cand, ep_se, ep_val,
                C, span, grid_dt, horizon, wt, wx, wy, wn, bs_x, bs_y, bw, snr_k, beta, quad_dt, exact):
    """Rate-greedy run over the whole schedule recording counterfactual interval rewards.

    Returns ``(g_slot, r_after, r_before)``: the greedy slot per epoch (-1 for
    outage), the reward of each epoch's interval had slot ``a`` been chosen
    with everything else on the greedy path, and the interval reward with no
    change at that epoch.  Greedy choices use the instantaneous ``ep_se``;
    the incremental reward model values UEs by ``ep_val`` and, when ``span > 0``,
    by look-ahead means of ``C``.
    """
    n_ep = ep_t.shape[0]
    n = assoc_init.shape[0]
    m = bs_x.shape[0]
    kmax = ep_cand.shape[1]
    assoc = assoc_init.copy()
    cnt = np.zeros(m, dtype=np.int64)
    for i in range(n):
        if assoc[i] >= 0:
            cnt[assoc[i]] += 1
    contrib = np.zeros(n)
    S = np.zeros(m)
    g_slot = np.full(n_ep, -1, dtype=np.int64)
    r_after = np.zeros((n_ep, kmax))
    r_before = np.zeros(n_ep)
    next_refresh = -1.0
    for j in range(n_ep):
        t = ep_t[j]
        if not exact and t >= next_refresh:
            S[:] = 0.0
            for i in range(n):
                a = assoc[i]
                if a >= 0:
                    if span > 0:
                        w = min(span, horizon - t)
                        contrib[i] = window_mean_se(C, i, a, t, w, grid_dt) if w > 0 else 0.0
                    else:
                        x, y = pos_at(wt[i], wx[i], wy[i], wn[i], t)
                        contrib[i] = spectral_eff(bs_x[a], bs_y[a], x, y, snr_k, beta)
                    S[a] += contrib[i]
                else:
                    contrib[i] = 0.0
            next_refresh = t + quad_dt
        rate = 0.0
        if not exact:
            for b in range(m):
                rate += _term(bw, S[b], cnt[b])
        dt_j = ep_end[j] - t
        u = ep_ue[j]
        inc = assoc[u]
        nc = ep_nc[j]
        if exact:
            r_before[j] = accrue(t, ep_end[j], quad_dt, assoc, cnt, wt, wx, wy, wn, bs_x, bs_y, bw, snr_k, beta)
        else:
            r_before[j] = rate * dt_j
        for a in range(nc):
            b = ep_cand[j, a]
            if b == inc:
                r_after[j, a] = r_before[j]
                continue
            if exact:
                assoc[u] = b
                cnt[b] += 1
                if inc >= 0:
                    cnt[inc] -= 1
                r_after[j, a] = accrue(t, ep_end[j], quad_dt, assoc, cnt, wt, wx, wy, wn,
                                       bs_x, bs_y, bw, snr_k, beta)
                assoc[u] = inc
                cnt[b] -= 1
                if inc >= 0:
                    cnt[inc] += 1
            else:
                r = rate + _term(bw, S[b] + ep_val[j, a], cnt[b] + 1) - _term(bw, S[b], cnt[b])
                if inc >= 0:
                    r += _term(bw, S[inc] - contrib[u], cnt[inc] - 1) - _term(bw, S[inc], cnt[inc])
                r_after[j, a] = r * dt_j
        # rate-greedy choice on the greedy path
        if ep_kind[j] == 1 or ep_bs[j] == inc:
            best = -1
            best_v = -1.0
            for a in range(nc):
                b = ep_cand[j, a]
                c = cnt[b] if b == inc else cnt[b] + 1
                v = ep_se[j, a] / c
                if v > best_v:
                    best_v = v
                    best = a
            new = ep_cand[j, best] if best >= 0 else -1
            g_slot[j] = best
        else:
            new = inc
            g_slot[j] = _slot_of(ep_cand[j], nc, inc)
        if new != inc:
            if inc >= 0:
                cnt[inc] -= 1
                S[inc] -= contrib[u]
                if cnt[inc] == 0:
                    S[inc] = 0.0
            if new >= 0:
                cnt[new] += 1
                contrib[u] = ep_val[j, g_slot[j]]
                S[new] += contrib[u]
            else:
                contrib[u] = 0.0
            assoc[u] = new
    return g_slot, r_after, r_before


@njit(cache=True)
def window_returns(r, gamma, width):
    """``out[j] = sum_{l=j}^{min(j+width, E)-1} gamma**(l-j) * r[l]``."""
    e = r.shape[0]
    out = np.zeros(e + 1)
    for j in range(e):
        acc = 0.0
        g = 1.0
        for l in range(j, min(j + width, e)):
            acc += g * r[l]
            g *= gamma
        out[j] = acc
    return out


@njit(cache=True)
def load_snapshot(t, assoc, n_bs, wt, wx, wy, wn, bs_x, bs_y, bw, snr_k, beta):
    """Per-UE spectral efficiency, per-BS sums and counts, and the network rate at ``t``."""
    n = assoc.shape[0]
    contrib = np.zeros(n)
    S = np.zeros(n_bs)
    cnt = np.zeros(n_bs, dtype=np.int64)
    for i in range(n):
        m = assoc[i]
        if m < 0:
            continue
        x, y = pos_at(wt[i], wx[i], wy[i], wn[i], t)
        contrib[i] = spectral_eff(bs_x[m], bs_y[m], x, y, snr_k, beta)
        S[m] += contrib[i]
        cnt[m] += 1
    rate = 0.0
    for m in range(n_bs):
        rate += _term(bw, S[m], cnt[m])
    return contrib, S, cnt, rate


@njit(cache=True)
def se_cumulative(wt, wx, wy, wn, bs_x, bs_y, radius, rects, snr_k, beta, horizon, grid_dt):
    """``C[n, m, g]``: integral of UE n's spectral efficiency to BS m over ``[0, g * grid_dt]``.

    The integrand is zero while m is out of range or blocked, and the grid is
    integrated with the midpoint rule.
    """
    n = wn.shape[0]
    m = bs_x.shape[0]
    g = int(math.ceil(horizon / grid_dt - 1e-9))
    out = np.zeros((n, m, g + 1))
    for i in range(n):
        for k in range(g):
            t = min((k + 0.5) * grid_dt, horizon)
            x, y = pos_at(wt[i], wx[i], wy[i], wn[i], t)
            for b in range(m):
                v = 0.0
                if is_member(bs_x[b], bs_y[b], x, y, radius, rects):
                    v = spectral_eff(bs_x[b], bs_y[b], x, y, snr_k, beta) * grid_dt
                out[i, b, k + 1] = out[i, b, k] + v
    return out


@njit(cache=True)
def _cum_at(row, t, grid_dt):
    f = t / grid_dt
    k = int(math.floor(f))
    if k >= row.shape[0] - 1:
        return row[row.shape[0] - 1]
    return row[k] + (f - k) * (row[k + 1] - row[k])


@njit(cache=True)
def window_mean_se(C, n, m, t0, span, grid_dt):
    return (_cum_at(C[n, m], t0 + span, grid_dt) - _cum_at(C[n, m], t0, grid_dt)) / span


@njit(cache=True)
def lookahead_event_se(C, ep_t, ep_ue, ep_cand, ep_nc, horizon, span, grid_dt):
    e, k = ep_cand.shape
    out = np.zeros((e, k))
    for j in range(e):
        w = min(span, horizon - ep_t[j])
        if w <= 0:
            continue
        for a in range(ep_nc[j]):
            out[j, a] = window_mean_se(C, ep_ue[j], ep_cand[j, a], ep_t[j], w, grid_dt)
    return out


@njit(cache=True)
def lookahead_snapshot(t, assoc, n_bs, C, bw, horizon, span, grid_dt):
    n = assoc.shape[0]
    contrib = np.zeros(n)
    S = np.zeros(n_bs)
    cnt = np.zeros(n_bs, dtype=np.int64)
    w = min(span, horizon - t)
    for i in range(n):
        m = assoc[i]
        if m < 0:
            continue
        if w > 0:
            contrib[i] = window_mean_se(C, i, m, t, w, grid_dt)
        S[m] += contrib[i]
        cnt[m] += 1
    rate = 0.0
    for m in range(n_bs):
        rate += _term(bw, S[m], cnt[m])
    return contrib, S, cnt, rate
