import numpy as np
import pytest

from ncihf.constraints import SolitonSpec, solve_constraints
from ncihf.kernels import Params

R2 = 1 / np.sqrt(2)
R6 = 1 / np.sqrt(6)
N0 = np.array([0.0, 0.0, 1.0])
AX1 = np.array([0.0, -R2, R2])
AX2 = np.array([R2, 0.0, -R2])
AX3 = np.array([R6, R6, -2 * R6])

EXAMPLES = {
    1: ([0.75j], [AX1]),
    2: ([0.75j, 1.25j], [AX1, AX2]),
    3: ([-3 + 0.85j, 0.8j, 1.1 + 1.3j], [AX1, AX2, AX3]),
}


def example_spec(n, delta=1.0):
    poles, axes = EXAMPLES[n]
    return SolitonSpec(N0, np.array(poles) * delta, np.array(axes), Params(delta))


def example_state(n, delta=1.0):
    spec = example_spec(n, delta)
    return solve_constraints(spec).to_state(spec)


def random_one_soliton(rng, p=Params()):
    """Admissible one-soliton spec with Im a away from the singular midline."""
    while True:
        im = rng.uniform(0.55, 1.45) * p.delta
        if abs(im - p.delta) > 0.05 * p.delta:
            break
    n3 = rng.standard_normal(3)
    n3 /= np.linalg.norm(n3)
    return SolitonSpec(N0, [rng.uniform(-2, 2) * p.delta + 1j * im], [n3], p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def one_state():
    return example_state(1)


@pytest.fixture(scope="session")
def two_state():
    return example_state(2)


@pytest.fixture(scope="session")
def three_state():
    return example_state(3)


@pytest.fixture(scope="session")
def three_traj(three_state):
    from ncihf.dynamics import integrate_window

    return integrate_window(three_state, -5.0, 17.5, 2251)


@pytest.fixture(scope="session")
def strip_exit_config():
    from pathlib import Path

    return Path(__file__).parent / "data" / "strip_exit.json"


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
