"""Small hand-built and seeded instances for optimality checks."""

from __future__ import annotations

import numpy as np

from .geometry import Building, NetworkMap, Point2D, generate_map
from .mobility import Scenario, Trajectory, generate_trajectory, truncate
from .radio import RadioParams, compute_epochs

# high-noise link budget so rates are a few bit/s/Hz and load sharing matters
CRAFTED_RADIO = RadioParams(bandwidth=1e7, tx_power=1.0, path_loss_exponent=3.0, noise=1e-8, coverage_radius=300.0)


def _two_bs_map(buildings) -> NetworkMap:
    return NetworkMap(1, 340.0, 300.0, (Point2D(0.0, 0.0), Point2D(340.0, 0.0)), tuple(buildings))


def load_split(horizon: float = 20.0) -> Scenario:
    """Two BSs, one UE parked next to BS0 and one UE emerging from behind a building.

    When BS0 comes into view the walker can share BS0 (higher rate for itself,
    which rate-greedy picks) or stay alone on the far BS1 (higher network rate).
    """
    net = _two_bs_map([Building((0, 0), 20.0, 5.0, 10.0, 10.0)])
    trajs = (
        Trajectory.stationary(0, (10.0, 0.0), horizon),
        Trajectory.from_points(1, [(130.0, 60.0), (60.0, 60.0)], 15.0, horizon),
    )
    return Scenario(net, trajs, CRAFTED_RADIO, horizon)


def load_split_two_epochs(horizon: float = 20.0, delay: float = 5.0) -> Scenario:
    """Mirror image of :func:`load_split` with a second walker ``delay`` seconds behind."""
    net = _two_bs_map([Building((0, 0), 20.0, 5.0, 10.0, 10.0), Building((0, 0), 20.0, -15.0, 10.0, 10.0)])
    trajs = (
        Trajectory.stationary(0, (10.0, 0.0), horizon),
        Trajectory.from_points(1, [(130.0, 60.0), (60.0, 60.0)], 15.0, horizon),
        Trajectory.from_points(2, [(130.0, -60.0), (60.0, -60.0)], 15.0, horizon, start_time=delay),
    )
    return Scenario(net, trajs, CRAFTED_RADIO, horizon)


def tiny_random(seed: int, n_ues: int | None = None, max_epochs: int = 6, max_series: int = 10**4,
                horizon: float = 120.0) -> Scenario:
    """Seeded 2x2-grid instance cut to at most ``max_epochs`` events and ``max_series`` candidate series.

    The horizon is cut halfway between the last kept event and the next one.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4)) if n_ues is None else n_ues
    radio = RadioParams(coverage_radius=300.0)
    net = generate_map(2, 200.0, radio.coverage_radius, rng)
    trajs = tuple(generate_trajectory(net, u, 15.0, horizon, rng) for u in range(n))
    sched = compute_epochs(Scenario(net, trajs, radio, horizon))
    keep = min(len(sched), max_epochs)
    while keep > 0 and np.prod(np.maximum(sched.nc[:keep], 1), dtype=float) > max_series:
        keep -= 1
    if keep < len(sched):
        nxt = float(sched.t[keep])
        cut = nxt if keep == 0 else 0.5 * (float(sched.t[keep - 1]) + nxt)
        cut = max(cut, 1e-3)
        trajs = tuple(truncate(tr, cut) for tr in trajs)
        horizon = cut
    return Scenario(net, trajs, radio, horizon, seed=seed)
