import math

import numpy as np
import pytest
from conftest import quarter_bd
from scipy.special import ellipj, ellipk

from elastica.errors import InvalidArgument, UndefinedRequest, UnsupportedDimension
from elastica.polygon import BoundaryData
from elastica.reference import (
    EllipticParams,
    ReferenceCurve,
    ToyPotentialSpec,
    complete_K,
    elastica_ode_residual,
    jacobi_am,
    jacobi_sn_cn_dn,
    mexican_hat_almost_min,
    shoot_clamped_elastica,
    tilted_potential,
)


def test_elliptic_limits():
    assert np.allclose(jacobi_sn_cn_dn(0.0, 0.5), (0, 1, 1))
    u = np.linspace(-3, 3, 11)
    assert np.allclose(np.array(jacobi_sn_cn_dn(u, 0.0)), [np.sin(u), np.cos(u), np.ones_like(u)])
    sn, cn, dn = jacobi_sn_cn_dn(u, 1.0)
    assert np.allclose(sn, np.tanh(u)) and np.allclose(cn, 1 / np.cosh(u)) and np.allclose(dn, cn)
    assert float(jacobi_sn_cn_dn(1.0, 1.0)[1]) == pytest.approx(0.648054, abs=1e-6)


@pytest.mark.parametrize("k", [0.1, 0.5, 0.714, 0.9, 0.9995])
def test_elliptic_against_scipy(k):
    u = np.linspace(-12, 12, 301)
    sn, cn, dn, ph = ellipj(u, k * k)
    ours = jacobi_sn_cn_dn(u, k)
    assert np.allclose(ours[0], sn, atol=1e-12)
    assert np.allclose(ours[1], cn, atol=1e-12)
    assert np.allclose(ours[2], dn, atol=1e-12)
    assert np.allclose(jacobi_am(u, k), ph, atol=1e-11)
    assert complete_K(k) == pytest.approx(ellipk(k * k), rel=1e-14)


def test_complete_K():
    assert complete_K(0.0) == pytest.approx(math.pi / 2)
    assert complete_K(0.999999) > 7
    with pytest.raises(UndefinedRequest):
        complete_K(1.0)
    with pytest.raises(InvalidArgument):
        complete_K(1.5)


def test_params_validation():
    with pytest.raises(InvalidArgument):
        EllipticParams("cn", 0.5, -1.0, 0, 0, (0, 0))
    with pytest.raises(InvalidArgument):
        EllipticParams("xx", 0.5, 1.0, 0, 0, (0, 0))
    p = EllipticParams.signed("dn", 0.5, -2.0, 0.1, 0.0, (0, 0))
    assert p.omega == 2.0 and p.orientation == -1


@pytest.mark.parametrize("family,k", [("cn", 0.6), ("dn", 0.4)])
def test_analytic_curves_solve_the_elastica_equation(family, k):
    c = ReferenceCurve(EllipticParams(family, k, 1.3, 0.2, 0.4, (0.0, 0.0)), 3.0)
    assert elastica_ode_residual(c)["residual"] < 1e-6
    # curvature is the derivative of the tangent angle
    s = np.linspace(0.1, 2.9, 50)
    e = 1e-5
    dth = (c.params.theta(s + e) - c.params.theta(s - e)) / (2 * e)
    assert np.allclose(dth, c.signed_curvature(s), atol=1e-8)


def test_reference_positions_follow_tangent():
    c = ReferenceCurve(EllipticParams("cn", 0.7, 1.0, 0.0, 0.0, (1.0, 2.0)), 4.0)
    s = np.linspace(0, 4, 40001)
    v = c.velocity(s)
    x = c.points[0] + np.vstack([np.zeros(2), np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(s)[:, None], axis=0)])
    assert np.allclose(c.position(s), x, atol=1e-8)


def test_shooting_recovers_circle():
    curve, params, info = shoot_clamped_elastica(quarter_bd())
    assert info["success"]
    s = np.linspace(0, math.pi / 2, 33)
    assert np.allclose(np.abs(curve.signed_curvature(s)), 1.0, atol=1e-6)
    assert curve.energy() == pytest.approx(math.pi / 4, abs=1e-6)


def test_shooting_recovers_its_own_data():
    p = EllipticParams("cn", 0.7, 1.1, 0.3, 0.0, (0.0, 0.0))
    c = ReferenceCurve(p, 3.0)
    th = c.velocity(3.0)[0]
    bd = BoundaryData(np.zeros(2), c.points[-1], c.velocity(0.0)[0], th, 3.0)
    curve, _, info = shoot_clamped_elastica(bd)
    assert info["success"]
    assert curve.energy() <= c.energy() + 1e-8


def test_shooting_is_planar_only():
    bd = BoundaryData(np.zeros(3), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]), 2.0)
    with pytest.raises(UnsupportedDimension):
        shoot_clamped_elastica(bd)


def test_tilted_potential_values():
    assert tilted_potential(np.array([1.0, 0.0]), None) == 0
    assert tilted_potential(np.array([1.0, 0.0]), 2) == pytest.approx(-0.25)
    assert tilted_potential(np.array([1.0, 0.0]), 3) == pytest.approx(1 / 6)


def test_untilted_almost_min_is_annulus():
    for n in (16, 64, 256):
        out = mexican_hat_almost_min(ToyPotentialSpec(n, resolution=801), 1 / n, tilted=False)
        assert out["hausdorff"] <= n**-0.5 + out["grid_step"]
        r = np.linalg.norm(out["points"], axis=1)
        assert np.all((1 - r**2) ** 2 <= 1 / n + 1e-12)
