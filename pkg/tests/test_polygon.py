import json
import math

import numpy as np
import pytest
from conftest import arc_polygon, quarter_bd, random_polygon, random_tame_polygon

from elastica.errors import ImmersionViolation, InvalidArgument, NearStraightConfiguration, SingularConfiguration
from elastica.mesh import Partition, uniform_partition
from elastica.polygon import (
    BoundaryData,
    ConstraintValue,
    Polygon,
    TameBounds,
    bending_energy,
    bending_energy_gradient,
    constraint_hessian_apply,
    constraint_jacobian_apply,
    constraint_jacobian_matrix,
    constraint_map,
    curvature,
    piecewise_linear_interpolant,
    regularity_seminorms,
    right_inverse_apply,
    strain,
    tame_membership,
    theta_matrix,
    turning_angles,
)
from elastica.transfer import restore_discrete


def _straight(n=4):
    T = uniform_partition(float(n), n)
    return Polygon(T, np.column_stack([T.vertex_params, np.zeros(n + 1)]))


def _corner():
    return Polygon(Partition(np.array([0.0, 1.0, 2.0])), np.array([[0, 0], [1, 0], [1, 1.0]]))


def test_straight_polygon_is_trivial():
    P = _straight()
    assert np.allclose(strain(P).values, 0)
    assert np.allclose(turning_angles(P).values, 0)
    assert np.allclose(curvature(P).values, 0)
    assert bending_energy(P) == 0
    assert np.allclose(bending_energy_gradient(P), 0)
    assert all(v == 0 for v in regularity_seminorms(P).values())
    with pytest.raises(NearStraightConfiguration):
        theta_matrix(P)


def test_strain_log_identity():
    P = _straight(3)
    X = P.positions.copy()
    X[2:] += [math.e - 1, 0]
    assert np.allclose(strain(P.with_positions(X)).values, [0, 1, 0])


def test_coincident_vertices_rejected():
    with pytest.raises(ImmersionViolation):
        Polygon(uniform_partition(1, 2), np.array([[0, 0], [0, 0], [1, 0.0]]))


def test_right_angle_corner():
    P = _corner()
    assert turning_angles(P).values[0] == pytest.approx(math.pi / 2)
    assert bending_energy(P) == pytest.approx(math.pi**2 / 8)


def test_regular_ngon_angles():
    n = 12
    t = np.linspace(0, 2 * math.pi, n + 1)
    X = np.column_stack([np.cos(t), np.sin(t)])
    P = Polygon(uniform_partition(1.0, n), X)
    assert np.allclose(turning_angles(P).values, 2 * math.pi / n)


def test_gradient_matches_finite_differences(rng):
    for _ in range(5):
        P = random_polygon(rng, m=int(rng.integers(2, 4)))
        g = bending_energy_gradient(P)
        X = P.positions
        fd = np.zeros_like(X)
        eps = 1e-6
        for idx in np.ndindex(X.shape):
            d = np.zeros_like(X)
            d[idx] = eps
            fd[idx] = (bending_energy(P.with_positions(X + d)) - bending_energy(P.with_positions(X - d))) / (2 * eps)
        assert np.allclose(g, fd, atol=1e-7 * max(1, np.abs(fd).max()))


def test_gradient_fold_guard():
    X = np.array([[0, 0], [1, 0], [1e-9, 1e-12]])
    with pytest.raises(SingularConfiguration):
        bending_energy_gradient(Polygon(uniform_partition(2.0, 2), X))


def test_constraint_map_feasible_and_equivariant():
    bd = quarter_bd()
    P, _ = restore_discrete(arc_polygon(16), bd)
    r = constraint_map(P, bd)
    assert r.max_norm() <= 1e-10
    v = np.array([0.3, -0.2])
    rv = constraint_map(P.with_positions(P.positions + v), bd)
    assert np.allclose(rv.pos0, v) and np.allclose(rv.posL, v)
    assert np.allclose(rv.tan0, r.tan0) and np.allclose(rv.strain, r.strain)
    re = constraint_map(P.with_positions(math.e * P.positions), bd)
    assert np.allclose(re.strain, r.strain + 1)


def test_jacobian_examples(rng):
    P = random_polygon(rng)
    v = np.array([1.5, -2.0])
    d = constraint_jacobian_apply(P, np.tile(v, (P.partition.n_vertices, 1)))
    assert np.allclose(d.pos0, v) and np.allclose(d.posL, v)
    assert np.allclose(d.to_vector()[2 * P.m:], 0)
    # stretch each edge along itself at rate c_I
    c = rng.uniform(-1, 1, P.n_edges)
    u = np.vstack([np.zeros(2), np.cumsum(c[:, None] * P.edge_vectors, axis=0)])
    assert np.allclose(constraint_jacobian_apply(P, u).strain, c)


def test_hessian_kills_translations(rng):
    P = random_polygon(rng, m=3)
    v = rng.normal(size=P.positions.shape)
    t = np.tile(rng.normal(size=3), (P.partition.n_vertices, 1))
    assert np.allclose(constraint_hessian_apply(P, t, v).to_vector(), 0)
    assert np.allclose(constraint_hessian_apply(P, v, t).to_vector(), 0)


def test_right_inverse_of_zero(rng):
    P = random_tame_polygon(rng)
    assert np.allclose(right_inverse_apply(P, ConstraintValue.zeros(2, P.n_edges)), 0)


@pytest.mark.parametrize("m", [2, 3])
def test_right_inverse_identity_on_range(rng, m):
    for _ in range(5):
        P = random_tame_polygon(rng, m=m)
        tau = P.tangents
        w = ConstraintValue.from_vector(rng.normal(size=4 * m + P.n_edges), m)
        # tangent blocks are only meaningful orthogonal to the end tangents
        w = ConstraintValue(w.pos0, w.posL, w.tan0 - (w.tan0 @ tau[0]) * tau[0], w.tanL - (w.tanL @ tau[-1]) * tau[-1], w.strain)
        back = constraint_jacobian_apply(P, right_inverse_apply(P, w))
        assert np.allclose(back.to_vector(), w.to_vector(), atol=1e-10)


def test_jacobian_matrix_matches_apply(rng):
    P = random_polygon(rng, n=4)
    u = rng.normal(size=P.positions.shape)
    assert np.allclose(constraint_jacobian_matrix(P) @ u.ravel(), constraint_jacobian_apply(P, u).to_vector())


def test_tame_membership_examples():
    assert not tame_membership(_straight(), TameBounds(10, 10, 1e-6))["in_set"]
    P = arc_polygon(32)
    r = tame_membership(P, TameBounds(10, 10, 0.11))
    assert r["length_ratio"] == pytest.approx(math.pi / (2 * math.sqrt(2)), rel=1e-3)
    assert r["in_set"]
    assert not tame_membership(P, TameBounds(10, 10, 0.12))["in_set"]


def test_circle_w2inf():
    n = 64
    t = np.linspace(0, 2 * math.pi, n + 1)
    P = Polygon(uniform_partition(2 * math.pi, n), np.column_stack([np.cos(t), np.sin(t)]))
    h = 2 * math.pi / n
    w2 = regularity_seminorms(P)["w2inf"]
    assert abs(w2 - 1) <= 1e-3
    ell = 2 * math.sin(h / 2)
    assert w2 == pytest.approx(2 * math.sin(h / 2) / ell)


def test_interpolant():
    P = _corner()
    c = piecewise_linear_interpolant(P)
    assert np.allclose(c.position(P.partition.vertex_params), P.positions)
    assert np.allclose(c.position(0.5), [[0.5, 0]])
    assert np.allclose(c.velocity(1.5), [[0, 1]])
    assert np.allclose(c.velocity(1.0, side=-1), [[1, 0]])
    with pytest.raises(InvalidArgument):
        c.position(3.0)


def test_serialization_roundtrip(rng):
    P = random_tame_polygon(rng, m=3)
    Q = Polygon.from_json(P.to_json())
    assert np.array_equal(Q.positions, P.positions)
    assert np.array_equal(Q.partition.vertex_params, P.partition.vertex_params)
    assert json.loads(P.to_json())
    R = Polygon.from_text(P.to_text())
    assert np.array_equal(R.positions, P.positions)


def test_boundary_validation():
    with pytest.raises(InvalidArgument, match="non-commensurable"):
        BoundaryData(np.zeros(2), np.array([1.0, 0]), np.array([1.0, 0]), np.array([1.0, 0]), 1.0)
    with pytest.raises(InvalidArgument):
        BoundaryData(np.zeros(2), np.ones(2), np.array([2.0, 0]), np.array([0, 1.0]), 2.0)
    assert quarter_bd().eta == pytest.approx(math.pi / (2 * math.sqrt(2)) - 1)
