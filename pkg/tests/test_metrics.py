import math

import numpy as np
import pytest

from elastica.arcspline import planar_arcspline
from elastica.errors import InvalidArgument
from elastica.mesh import uniform_partition
from elastica.metrics import (
    chord_arc_report,
    dist_w1inf,
    dist_w2inf,
    dist_w2p,
    fit_rate,
    hausdorff,
    second_difference_report,
)
from elastica.polygon import Polygon, piecewise_linear_interpolant


def arc(k=1.0, x0=(0, 0)):
    return planar_arcspline(x0, 0.0, [0, 0.5, 1.0, 1.5], [k, k, k])


def test_distance_of_translate():
    a = arc()
    b = arc(x0=(0.3, 0.4))
    assert dist_w1inf(a, a) == 0
    assert dist_w1inf(a, b) == pytest.approx(0.5)
    assert dist_w2inf(a, b) == pytest.approx(0.5)
    assert hausdorff([a], [b], dist_w1inf) == pytest.approx(0.5)
    assert hausdorff([a, b], [a, b], dist_w1inf) == 0


def test_dist_w2inf_sees_curvature():
    a, b = arc(1.0), arc(1.2)
    # curvature vectors differ by at least 0.2 at s = 0
    assert dist_w2inf(a, b) >= 0.2
    assert dist_w2inf(a, b) >= dist_w1inf(a, b)


def test_distances_match_dense_sampling(rng):
    for _ in range(5):
        s = np.concatenate(([0], np.cumsum(rng.uniform(0.2, 1, 4))))
        s2 = np.sort(np.concatenate(([0, s[-1]], rng.uniform(0, s[-1], 3))))
        a = planar_arcspline(rng.normal(size=2), 0.3, s, rng.uniform(-1, 1, 4))
        b = planar_arcspline(rng.normal(size=2), 0.1, s2, rng.uniform(-1, 1, 4))
        t = np.linspace(0, s[-1], 200001)
        dense = np.max(np.linalg.norm(a.position(t) - b.position(t), axis=1) + np.linalg.norm(a.velocity(t) - b.velocity(t), axis=1))
        d = dist_w1inf(a, b)
        # sampled sup, certified to within 1% of the true sup
        assert dense / 1.01 <= d <= dense * (1 + 1e-5)


def test_domain_mismatch():
    with pytest.raises(InvalidArgument):
        dist_w1inf(arc(), planar_arcspline([0, 0], 0, [0, 1.0], [0.0]))


def test_polyline_has_no_second_derivative():
    T = uniform_partition(1.5, 3)
    P = piecewise_linear_interpolant(Polygon(T, arc().position(T.vertex_params)))
    assert dist_w1inf(arc(), P) > 0
    with pytest.raises(InvalidArgument):
        dist_w2p(arc(), P)


def test_w2p_translate():
    a, b = arc(), arc(x0=(0.3, 0.4))
    assert dist_w2p(a, b) == pytest.approx(0.5 * math.sqrt(1.5))


def test_hausdorff_empty():
    with pytest.raises(InvalidArgument):
        hausdorff([], [arc()], dist_w1inf)


def test_fit_rate_examples(rng):
    h = np.array([0.1, 0.05, 0.025, 0.0125])
    r = fit_rate(zip(h, 2 * h))
    assert r["slope"] == pytest.approx(1) and r["r2"] == pytest.approx(1)
    assert fit_rate(zip(h, 3 * h**2))["slope"] == pytest.approx(2)
    noisy = 2 * h * (1 + rng.uniform(-0.05, 0.05, h.size))
    assert 0.9 <= fit_rate(zip(h, noisy))["slope"] <= 1.1
    assert fit_rate(zip(h, [1.0, 2 * h[1], 2 * h[2], 2 * h[3]]), drop=1)["slope"] == pytest.approx(1)
    with pytest.raises(InvalidArgument):
        fit_rate(zip(h[:2], h[:2]))
    with pytest.raises(InvalidArgument):
        fit_rate(zip(h, [0, 1, 1, 1]))


def test_chord_arc_straight_and_circle():
    line = planar_arcspline([0, 0], 0.2, [0, 3.0], [0.0])
    for row in chord_arc_report(line, [(0, 1), (0.5, 3)]):
        assert row["deviation"] < 1e-15 and row["inverse_deviation"] < 1e-15
    circ = planar_arcspline([0, 0], 0, [0, 1.0], [1.0])
    row = chord_arc_report(circ, [(0, 0.2)])[0]
    assert row["chord"] == pytest.approx(2 * math.sin(0.1))
    assert row["deviation"] == pytest.approx(1 - math.sin(0.1) / 0.1)


def test_second_difference_examples():
    line = planar_arcspline([0, 0], 0.0, [0, 1.0], [0.0])
    T = uniform_partition(1.0, 8)
    err = second_difference_report(line, lambda t: (t**2, 2 + 0 * t), T)
    assert np.allclose(err, 0, atol=1e-12)
    err = second_difference_report(line, lambda t: (3 + 0 * t, 0 * t), T)
    assert np.allclose(err, 0)


def test_second_difference_second_order_on_circle():
    circ = planar_arcspline([0, 0], 0, [0, 2.0], [1.0])
    errs = []
    for n in (8, 16, 32):
        T = uniform_partition(2.0, n)
        errs.append(np.max(second_difference_report(circ, lambda t: (np.sin(3 * t), -9 * np.sin(3 * t)), T)))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5
