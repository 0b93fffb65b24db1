import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from mmwave_assoc.engine import (OUTAGE, AssociationState, PolicyBase, RunContext, accrue_reward, audit,
                                 finalize_metrics, run)
from mmwave_assoc.errors import ConstraintViolation
from mmwave_assoc.geometry import Building
from mmwave_assoc.mobility import Scenario, Trajectory
from mmwave_assoc.policies import RBH, SBH
from mmwave_assoc.radio import RadioParams, compute_epochs, rate
from conftest import open_map

REF = RadioParams()


def one_ue(traj, horizon, bs=((0.0, 0.0),), buildings=()):
    sc = Scenario(open_map(bs, buildings), (traj,), REF, horizon)
    return sc, AssociationState(np.array([0]), np.array([1] + [0] * (len(bs) - 1)))


def test_zero_length_interval():
    sc, st = one_ue(Trajectory.stationary(0, (100, 0), 5.0), 5.0)
    assert accrue_reward(sc, st, 1.0, 1.0) == 0.0


def test_constant_integrand():
    sc, st = one_ue(Trajectory.stationary(0, (100, 0), 5.0), 5.0)
    assert accrue_reward(sc, st, 0.0, 2.0) == pytest.approx(2 * rate(REF, 1, 100.0), rel=1e-12)


def test_moving_ue_matches_fine_quadrature():
    sc, st = one_ue(Trajectory.from_points(0, [(100, 0), (130, 0)], 15.0, 2.0), 2.0)
    exact, _ = quad(lambda t: rate(REF, 1, 100.0 + 15.0 * t), 0.0, 2.0)
    assert accrue_reward(sc, st, 0.0, 2.0, dt=0.5) == pytest.approx(exact, rel=0.01)


def test_partial_last_step_weighted_by_width():
    sc, st = one_ue(Trajectory.stationary(0, (100, 0), 5.0), 5.0)
    assert accrue_reward(sc, st, 0.0, 1.2) == pytest.approx(1.2 * rate(REF, 1, 100.0), rel=1e-12)


def test_additivity_on_aligned_grid():
    sc, st = one_ue(Trajectory.from_points(0, [(10, 0), (250, 0)], 15.0, 16.0), 16.0)
    whole = accrue_reward(sc, st, 1.0, 9.0)
    assert whole == accrue_reward(sc, st, 1.0, 4.0) + accrue_reward(sc, st, 4.0, 9.0)


def test_single_ue_single_bs_time_average():
    horizon = 12.0
    sc, st = one_ue(Trajectory.from_points(0, [(20, 0), (200, 0)], 15.0, horizon), horizon)
    s = compute_epochs(sc)
    rep = run(sc, s, SBH())
    assert len(s) == 0 and rep.handover_count == 0 and rep.X_n is None
    assert rep.L_bar == pytest.approx(accrue_reward(sc, st, 0.0, horizon) / horizon, rel=1e-12)
    assert [t for t, _ in rep.instant_rate_series] == list(map(float, range(12)))


def test_runs_are_deterministic(small_case):
    sc, s = small_case
    a, b = run(sc, s, SBH()), run(sc, s, SBH())
    assert a == b and a.to_json() == b.to_json()


class Stubborn(PolicyBase):
    name = "stubborn"

    def decide(self, i, state):
        return self.ctx.n_bs + 5


def test_choice_outside_candidates_fails_fast(small_case):
    sc, s = small_case
    with pytest.raises(ConstraintViolation):
        run(sc, s, Stubborn())


def test_audit_detects_each_violation(small_case):
    sc, s = small_case
    ctx = RunContext(sc, s)
    state = ctx.initial_state()
    audit(ctx, state)
    bad = state.copy()
    bad.assoc[0] = ctx.n_bs
    with pytest.raises(ConstraintViolation, match="exactly one BS"):
        audit(ctx, bad)
    bad = state.copy()
    bad.cnt[0] += 1
    with pytest.raises(ConstraintViolation, match="load counts"):
        audit(ctx, bad)
    i = next(j for j in range(len(s)) if s.kind[j] == 1 and s.nc[j] >= 2)
    u = int(s.ue[i])
    other = state.copy()
    v = (u + 1) % ctx.n_ues
    target = next(m for m in range(ctx.n_bs) if m != other.assoc[v])
    other.move(v, target, 0.0)
    with pytest.raises(ConstraintViolation, match="changed"):
        audit(ctx, other, state.assoc, i)
    outside = state.copy()
    outside.move(u, next(m for m in range(ctx.n_bs) if m not in s.cand[i, : s.nc[i]]), 0.0)
    with pytest.raises(ConstraintViolation, match="candidates"):
        audit(ctx, outside, state.assoc, i)


def test_outage_is_not_a_handover():
    # the walker loses its only BS behind a building, then regains it
    wall = Building((0, 0), 90.0, -20.0, 20.0, 40.0)
    tr = Trajectory.from_points(0, [(150, -100), (150, 100)], 15.0, 14.0)
    sc = Scenario(open_map([(0, 0)], [wall]), (tr,), REF, 14.0)
    s = compute_epochs(sc)
    assert s.nc.tolist().count(0) == 1
    rep = run(sc, s, RBH())
    assert rep.handover_count == 0
    assert rep.outage_time == pytest.approx(s.t[1] - s.t[0], abs=1e-9)
    assert rep.decisions == [OUTAGE, 0]


def test_finalize_examples():
    rep = finalize_metrics("x", 1e10, 100.0, [(0, 10.0, 0, 1), (0, 24.5, 1, 0), (0, 39.0, 0, 1)], 1, [])
    assert rep.L_bar == 1e8
    assert rep.X_n == pytest.approx(14.5)
    rep = finalize_metrics("x", 5.0, 1.0, [(0, 1.0, 0, 1), (1, 2.0, 0, 1), (1, 6.0, 1, 0)], 2, [])
    assert rep.X_n == pytest.approx(4.0)
    assert finalize_metrics("x", 5.0, 1.0, [], 2, []).X_n is None


def test_artifacts(tmp_path, small_case):
    sc, s = small_case
    rep = run(sc, s, RBH())
    rep.write(tmp_path)
    meta = json.loads((tmp_path / "metrics.json").read_text())
    assert meta["L_bar"] == rep.L_bar and meta["handover_count"] == rep.handover_count
    rates = (tmp_path / "rates.csv").read_text().splitlines()
    hos = (tmp_path / "handovers.csv").read_text().splitlines()
    assert rates[0] == "t,sum_rate_bps" and len(rates) == math.ceil(sc.horizon) + 1
    assert hos[0] == "ue,t,from_bs,to_bs" and len(hos) == rep.handover_count + 1


def test_initial_association_is_rate_greedy():
    trajs = tuple(Trajectory.stationary(u, (10.0, 0.0), 5.0) for u in range(3))
    sc = Scenario(open_map([(0, 0), (60, 0)]), trajs, REF, 5.0)
    state = RunContext(sc, compute_epochs(sc)).initial_state()
    # first UE takes the near BS; the rest compare half the near rate against the far BS alone
    expect = [0]
    near, far = rate(REF, 1, 10.0), rate(REF, 1, 50.0)
    load = [1, 0]
    for _ in range(2):
        b = 0 if near / (load[0] + 1) > far / (load[1] + 1) else 1
        load[b] += 1
        expect.append(b)
    assert state.assoc.tolist() == expect
