import io
import json
import math

import numpy as np
import pytest
from conftest import quarter_bd

from elastica.errors import InvalidArgument
from elastica.mesh import graded_partition, uniform_partition
from elastica.polygon import bending_energy, bending_energy_gradient, constraint_jacobian_matrix, constraint_map
from elastica.solver import (
    SolveOptions,
    delta_minimizer_set,
    initial_guess,
    lagrange_multipliers,
    minimize,
    regularity_report,
)

Q = math.pi / 2


@pytest.fixture(scope="module")
def quarter16():
    bd = quarter_bd()
    P, rep = minimize(initial_guess(bd, uniform_partition(Q, 16)), bd)
    return bd, P, rep


def test_initial_guess_is_feasible():
    bd = quarter_bd()
    for T in (uniform_partition(Q, 8), graded_partition(np.array([0, 0.1, 0.5, 0.9, 1.2, Q]))):
        P = initial_guess(bd, T)
        assert constraint_map(P, bd).max_norm() <= 1e-10
    with pytest.raises(InvalidArgument):
        initial_guess(bd, uniform_partition(Q, 2))
    with pytest.raises(InvalidArgument):
        initial_guess(bd, uniform_partition(1.0, 8))


def test_minimize_reaches_kkt_point(quarter16):
    bd, P, rep = quarter16
    assert rep.kkt_residual <= 1e-7
    assert rep.feasibility <= 1e-10
    assert rep.energy == pytest.approx(bending_energy(P))
    E = np.array(rep.energies)
    assert np.all(np.diff(E) <= 1e-12 * max(1, E[0]))


def test_multipliers_agree_with_least_squares(quarter16):
    bd, P, rep = quarter16
    A = constraint_jacobian_matrix(P)
    g = bending_energy_gradient(P).ravel()
    mu = np.concatenate([rep.mu00, rep.mu10, rep.mu01, rep.mu11, rep.multipliers])
    assert np.linalg.norm(g + A.T @ mu) == pytest.approx(rep.kkt_residual, abs=1e-12)
    assert rep.kkt_residual <= 1e-7


def test_gradient_vanishes_on_feasible_directions(quarter16):
    _, P, _ = quarter16
    A = constraint_jacobian_matrix(P)
    # kernel of the differential restricted to the range of the tangent rows
    _, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > 1e-10 * s[0]))
    kernel = Vt[rank:]
    g = bending_energy_gradient(P).ravel()
    assert np.max(np.abs(kernel @ g)) <= 1e-7


def test_minimize_rejects_infeasible_start():
    bd = quarter_bd()
    P = initial_guess(bd, uniform_partition(Q, 8))
    with pytest.raises(InvalidArgument):
        minimize(P.with_positions(P.positions + 1e-3), bd)


def test_trace_is_json_lines():
    bd = quarter_bd()
    buf = io.StringIO()
    minimize(initial_guess(bd, uniform_partition(Q, 8)), bd, SolveOptions(trace=buf))
    rows = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert rows and rows[0]["iteration"] == 0
    assert set(rows[0]) == {"iteration", "energy", "kkt", "feasibility"}


@pytest.mark.parametrize(
    "kw", [dict(kkt_tol=0), dict(starts=0), dict(backtrack=1.0), dict(armijo=0), dict(max_iter=-1)]
)
def test_options_validation(kw):
    with pytest.raises(InvalidArgument):
        SolveOptions(**kw)


def test_delta_zero_keeps_only_minimizers():
    bd = quarter_bd()
    S = delta_minimizer_set(bd, uniform_partition(Q, 12), 0.0, SolveOptions(starts=3))
    assert len(S) == S.n_minimizers >= 1
    assert S.energies[0] == pytest.approx(S.best_energy)
    with pytest.raises(InvalidArgument):
        delta_minimizer_set(bd, uniform_partition(Q, 12), -1.0)


def test_delta_set_members_and_threads():
    bd = quarter_bd()
    T = uniform_partition(Q, 16)
    delta = T.h
    a = delta_minimizer_set(bd, T, delta, SolveOptions(starts=2, threads=1), perturbations=3)
    b = delta_minimizer_set(bd, T, delta, SolveOptions(starts=2, threads=2), perturbations=3)
    assert len(a) > a.n_minimizers
    for P, E in zip(a.members, a.energies):
        assert E <= a.best_energy + delta + 1e-9
        assert constraint_map(P, bd).max_norm() <= 1e-10
    assert a.energies == b.energies
    assert all(np.array_equal(p.positions, q.positions) for p, q in zip(a.members, b.members))


def test_regularity_report():
    bd = quarter_bd()
    r = regularity_report(initial_guess(bd, uniform_partition(Q, 8)))
    assert r["almost_uniform_defect"] == 0
    assert {"w2inf", "tv3", "w3inf"} <= set(r)
