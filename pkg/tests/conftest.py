import math

import numpy as np
import pytest

from elastica.mesh import Partition, uniform_partition
from elastica.polygon import BoundaryData, Polygon


def quarter_bd():
    return BoundaryData(np.zeros(2), np.ones(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]), math.pi / 2)


def arc_polygon(n, L=math.pi / 2):
    """Stretched inscribed polygon of the unit circle starting at the origin heading along x."""
    t = np.linspace(0.0, L, n + 1)
    Q = np.column_stack([np.sin(t), 1 - np.cos(t)])
    T = uniform_partition(L, n)
    d = np.diff(Q, axis=0)
    d *= (T.edge_lengths / np.linalg.norm(d, axis=1))[:, None]
    return Polygon(T, np.vstack([Q[0], Q[0] + np.cumsum(d, axis=0)]))


def random_tame_polygon(rng, m=2, n=None):
    """Random bent polygon in discrete arc length over a random graded partition."""
    n = n or int(rng.integers(6, 40))
    gaps = rng.uniform(0.5, 1.5, n)
    T = Partition(np.concatenate(([0.0], np.cumsum(gaps))) / gaps.sum() * 2.0)
    turn = rng.uniform(0.3, 1.2) * T.edge_lengths * rng.choice([-1, 1]) + rng.normal(0, 0.05, n)
    if m == 2:
        ang = np.cumsum(turn)
        tau = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        # slowly twisting helix-like tangents
        ang = np.cumsum(turn)
        lift = 0.3 * np.sin(np.cumsum(rng.uniform(0.2, 0.6, n) * T.edge_lengths))
        tau = np.column_stack([np.cos(ang), np.sin(ang), lift])
        tau /= np.linalg.norm(tau, axis=1)[:, None]
    X = np.vstack([np.zeros(m), np.cumsum(tau * T.edge_lengths[:, None], axis=0)])
    return Polygon(T, X + rng.normal(0, 1, m))


def random_polygon(rng, m=2, n=6):
    """Unstructured random polygon (not in arc length), moderate angles."""
    steps = rng.normal(0, 1, (n, m))
    steps[:, 0] += 2.0
    X = np.vstack([np.zeros(m), np.cumsum(steps, axis=0)])
    return Polygon(Partition(np.arange(n + 1.0)), X)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance outcomes, printed once at the end of the session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":").split(".")[0])):
        terminalreporter.write_line(line)
