import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mmwave_assoc.geometry import Building, NetworkMap, Point2D, generate_map
from mmwave_assoc.mobility import Scenario, generate_trajectory
from mmwave_assoc.radio import RadioParams, compute_epochs

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def open_map(bs, buildings=(), radius=300.0, road=200.0):
    """Hand-built map with arbitrary BS positions (grid_size is nominal)."""
    return NetworkMap(1, road, radius, tuple(Point2D(*p) for p in bs), tuple(buildings))


def random_scenario(seed, n_ues, grid=3, horizon=60.0, radio=None):
    radio = radio or RadioParams()
    rng = np.random.default_rng(seed)
    net = generate_map(grid, 200.0, radio.coverage_radius, rng)
    trajs = tuple(generate_trajectory(net, u, 15.0, horizon, rng) for u in range(n_ues))
    return Scenario(net, trajs, radio, horizon, seed=seed)


@pytest.fixture(scope="session")
def small_case():
    sc = random_scenario(7, 12)
    return sc, compute_epochs(sc)


@pytest.fixture
def block_80_120():
    return Building((0, 0), 80.0, 80.0, 40.0, 40.0)


ACCEPTANCE_LINES: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
