import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from conftest import quarter_bd

from elastica.arcspline import (
    ArcSpline,
    SmoothTangent,
    bending_energy,
    evaluate,
    norm_equivalence_check,
    planar_arcspline,
    smooth_constraint_map,
    smooth_right_inverse_apply,
    theta_matrix,
    tv3_seminorm,
)
from elastica.errors import InvalidArgument, NearStraightConfiguration, SingularConfiguration
from elastica.polygon import BoundaryData

Q = math.pi / 2


def quarter():
    return planar_arcspline([0, 0], 0.0, [0, Q], [1.0])


def random_arcspline(rng, m=2, J=None):
    J = J or int(rng.integers(2, 8))
    s = np.concatenate(([0.0], np.cumsum(rng.uniform(0.2, 1.0, J))))
    if m == 2:
        return planar_arcspline(rng.normal(size=2), rng.uniform(0, 2 * np.pi), s, rng.uniform(-1.5, 1.5, J))
    t = rng.normal(size=(J + 1, m))
    t[:, 0] += 3.0
    t /= np.linalg.norm(t, axis=1)[:, None]
    return ArcSpline(rng.normal(size=m), s, t)


def test_quarter_circle_evaluation():
    p, t, k = evaluate(quarter(), Q)
    assert np.allclose(p, [1, 1]) and np.allclose(t, [0, 1]) and np.allclose(k, [-1, 0])
    p, t, k = evaluate(quarter(), 0.0)
    assert np.allclose(t, [1, 0]) and np.allclose(k, [0, 1])


def test_straight_segment():
    g = planar_arcspline([1, 2], 0.3, [0, 2.0], [0.0])
    d = np.array([math.cos(0.3), math.sin(0.3)])
    assert np.allclose(g.position(1.5), [[1, 2]] + 1.5 * d)
    assert np.allclose(g.acceleration(1.0), 0)
    assert bending_energy(g) == 0 and tv3_seminorm(g) == 0


def test_energy_examples():
    assert bending_energy(quarter()) == pytest.approx(math.pi / 4)
    two = planar_arcspline([0, 0], 0, [0, 1, 2], [Q, -Q])
    assert bending_energy(two) == pytest.approx(math.pi**2 / 4)


def test_tv3_examples():
    assert tv3_seminorm(quarter()) == pytest.approx(Q)
    split = planar_arcspline([0, 0], 0, [0, 0.7, Q], [1.0, 1.0])
    assert tv3_seminorm(split) == pytest.approx(Q, abs=1e-12)
    kink = planar_arcspline([0, 0], 0, [0, 1, 2], [1.0, -1.0])
    assert tv3_seminorm(kink) == pytest.approx(2 + 2)


def test_positions_match_integrated_tangent(rng):
    for m in (2, 3):
        g = random_arcspline(rng, m)
        s = np.linspace(0, g.length, 20001)
        v = g.velocity(s)
        x = g.x0 + np.vstack([np.zeros(m), np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(s)[:, None], axis=0)])
        assert np.allclose(g.position(s), x, atol=1e-7)


def test_domain_checks():
    with pytest.raises(InvalidArgument):
        quarter().position(2.0)
    with pytest.raises(SingularConfiguration):
        ArcSpline([0, 0], [0, 1], [[1, 0], [-1, 0.0]])


def test_constraint_map_examples():
    bd = quarter_bd()
    assert smooth_constraint_map(quarter(), bd).max_norm() <= 1e-12
    v = np.array([0.5, -1.0])
    r = smooth_constraint_map(quarter().transformed(translation=v), bd)
    assert np.allclose(r.pos0, v) and np.allclose(r.posL, v)
    th = 0.4
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    rot = BoundaryData(bd.p0, bd.pL, bd.N0, R @ bd.NL, bd.L)
    assert np.linalg.norm(smooth_constraint_map(quarter(), rot).tanL) == pytest.approx(2 * math.sin(th / 2))
    with pytest.raises(InvalidArgument):
        smooth_constraint_map(planar_arcspline([0, 0], 0, [0, 1.0], [1.0]), bd)


def test_theta_straight_is_singular():
    with pytest.raises(NearStraightConfiguration):
        theta_matrix(planar_arcspline([0, 0], 0, [0, 1.0], [0.0]))


def test_right_inverse_zero():
    g = quarter()
    z = np.zeros(2)
    out = smooth_right_inverse_apply(g, SmoothTangent(z, z, z, z))
    assert np.allclose(out.values, 0) and np.allclose(out.derivatives, 0)


@pytest.mark.parametrize("m", [2, 3])
def test_right_inverse_hits_target(rng, m):
    for _ in range(5):
        g = random_arcspline(rng, m)
        w = SmoothTangent(*rng.normal(size=(4, m)), lam=lambda r: np.sin(r))
        out = smooth_right_inverse_apply(g, w)
        L = g.length
        assert np.allclose(out.values[0], w.U0) and np.allclose(out.values[-1], w.U1, atol=1e-10)
        t0, t1 = g.velocity(0.0)[0], g.velocity(L, side=-1)[0]
        d0, d1 = out.derivatives[0], out.derivatives[-1]
        assert np.allclose(d0 - (d0 @ t0) * t0, w.V0 - (w.V0 @ t0) * t0)
        assert np.allclose(d1 - (d1 @ t1) * t1, w.V1 - (w.V1 @ t1) * t1)
        tau = g.velocity(out.params, np.where(out.params == L, -1, 1))
        assert np.allclose(np.einsum("ij,ij->i", tau, out.derivatives), np.sin(out.params))


def test_norm_equivalence_trivial_on_arc_length():
    g = quarter()

    def u(r):
        return np.sin(r), np.cos(r), -np.sin(r)

    for k in (0, 1, 2):
        res = norm_equivalence_check(g, u, k)
        assert res["weighted"] == pytest.approx(res["unweighted"], rel=1e-12)
    # int_0^{pi/2} cos^2 = pi/4
    assert norm_equivalence_check(g, u, 1)["unweighted"] == pytest.approx(math.sqrt(math.pi / 4))


def test_energy_lipschitz_sanity():
    base = planar_arcspline([0, 0], 0, [0, 1, 2], [0.5, 1.0])
    ratios = []
    for s in (1e-4, 1e-3, 1e-2, 1e-1):
        g = planar_arcspline([0, 0], 0, [0, 1, 2], [0.5 + s, 1.0 - s])
        # W^{2,2} distance of the two curves from dense sampling
        r = np.linspace(0, 2, 4001)
        d2 = np.linalg.norm(g.acceleration(r) - base.acceleration(r), axis=1)
        d1 = np.linalg.norm(g.velocity(r) - base.velocity(r), axis=1)
        d0 = np.linalg.norm(g.position(r) - base.position(r), axis=1)
        dist = math.sqrt(trapezoid(d0**2 + d1**2 + d2**2, r))
        ratios.append(abs(bending_energy(g) - bending_energy(base)) / dist)
    assert max(ratios) / min(ratios) < 10


def test_json_roundtrip(rng):
    g = random_arcspline(rng, 3)
    h = ArcSpline.from_json(g.to_json())
    assert np.array_equal(h.tangents, g.tangents) and np.array_equal(h.breakpoints, g.breakpoints)
    poly = g.to_polyline(per_segment=4)
    assert len(poly["params"]) == 4 * g.n_segments + 1


def test_reversed_and_rigid_motion(rng):
    g = random_arcspline(rng, 2)
    r = g.reversed()
    assert np.allclose(r.position(0.0), g.nodes[-1:])
    assert np.allclose(r.nodes[-1], g.x0)
    assert bending_energy(r) == pytest.approx(bending_energy(g))
    th = 1.1
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    assert bending_energy(g.transformed(R, [1, 1])) == pytest.approx(bending_energy(g))
