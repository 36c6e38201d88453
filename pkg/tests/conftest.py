import numpy as np
import pytest

from detsched.dpp import SymmetricKernel
from detsched.geometry import Network, PathLossModel, generate_network


def random_orthogonal(n, rng):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))


def random_psd(n, rng, scale=2.0):
    A = rng.normal(size=(n, n))
    return scale * A @ A.T / n


def random_marginal(n, rng, top=0.95):
    V = random_orthogonal(n, rng)
    lam = rng.uniform(0.0, top, n)
    return SymmetricKernel.marginal((V * lam) @ V.T)


def two_point_net(x1, y1, x2, y2, pathloss=None, noise=0.0):
    return Network(np.array([x1, x2], float), np.array([y1, y2], float), pathloss or PathLossModel.singular(), noise)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def net5():
    return generate_network(5, 1.0, 0.1, PathLossModel.bounded(4.0), 0.0, seed=42)


# One line per acceptance criterion, printed after the run.
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
