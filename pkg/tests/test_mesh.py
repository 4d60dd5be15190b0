import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastica.errors import InvalidArgument, UndefinedRequest
from elastica.mesh import Partition, almost_uniformity_defect, graded_partition, refine_dyadic, uniform_partition


def test_uniform_vertices_and_h():
    T = uniform_partition(1.0, 4)
    assert np.allclose(T.vertex_params, [0, 0.25, 0.5, 0.75, 1])
    assert T.h == 0.25
    assert T.n_interior == 3


def test_single_edge_has_no_dual_lengths():
    T = uniform_partition(1.0, 1)
    assert T.n_edges == 1
    assert T.dual_lengths.size == 0


def test_uniform_quarter_arc_lengths():
    T = uniform_partition(math.pi / 2, 8)
    assert np.allclose(T.edge_lengths, math.pi / 16)
    assert np.allclose(T.dual_lengths, math.pi / 16)


@pytest.mark.parametrize("args", [(0.0, 4), (-1.0, 3), (1.0, 0)])
def test_uniform_rejects_bad_input(args):
    with pytest.raises(InvalidArgument):
        uniform_partition(*args)


def test_graded_lengths():
    T = graded_partition([0, 0.1, 0.4, 1.0])
    assert np.allclose(T.edge_lengths, [0.1, 0.3, 0.6])
    assert np.allclose(T.dual_lengths, [0.2, 0.45])
    assert graded_partition([0, 1]).n_edges == 1


@pytest.mark.parametrize("bp", [[0, 0.5, 0.5], [0, 0.6, 0.4], [0.1, 1.0], [0, float("nan")]])
def test_graded_rejects(bp):
    with pytest.raises(InvalidArgument):
        graded_partition(bp)


def test_refine_dyadic():
    assert refine_dyadic(uniform_partition(1, 2), 1) == uniform_partition(1, 4)
    T = graded_partition([0, 0.2, 1.0])
    assert refine_dyadic(T, 0) == T
    assert np.allclose(refine_dyadic(T, 1).vertex_params, [0, 0.1, 0.2, 0.6, 1.0])
    assert refine_dyadic(T, 3).h == pytest.approx(T.h / 8)


def test_almost_uniformity_defect():
    assert almost_uniformity_defect(uniform_partition(1, 8)) == 0
    T = graded_partition([0, 0.1, 0.3, 0.6])
    assert almost_uniformity_defect(T) == pytest.approx(math.log(2) / 0.1)
    with pytest.raises(UndefinedRequest):
        almost_uniformity_defect(uniform_partition(1, 1))


def test_partition_invariants(rng):
    for _ in range(20):
        gaps = rng.uniform(0.1, 2.0, rng.integers(2, 30))
        T = Partition(np.concatenate(([0.0], np.cumsum(gaps))))
        assert math.isclose(T.edge_lengths.sum(), T.length, rel_tol=1e-14)
        assert T.h == T.edge_lengths.max()
        l0 = T.edge_lengths
        assert np.allclose(T.dual_lengths, 0.5 * (l0[:-1] + l0[1:]))
        # dual edges tile [m(first), m(last)]
        assert math.isclose(T.dual_lengths.sum(), T.length - 0.5 * (l0[0] + l0[-1]), rel_tol=1e-12)
        for i in range(1, T.n_vertices - 1):
            a, b = T.dual_edge(i)
            assert math.isclose(b - a, T.dual_lengths[i - 1], rel_tol=1e-12)
            assert T.left_vertex(T.next_edge(i)) == i
            assert T.right_vertex(T.prev_edge(i)) == i


def test_shift_maps_check_bounds():
    T = uniform_partition(1, 3)
    with pytest.raises(InvalidArgument):
        T.prev_edge(0)
    with pytest.raises(InvalidArgument):
        T.next_edge(3)


def test_partition_is_hashable_value():
    a, b = uniform_partition(2.0, 5), uniform_partition(2.0, 5)
    assert a == b and hash(a) == hash(b)
    assert len({a, b}) == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.05, 5.0), min_size=1, max_size=20), st.integers(0, 3))
def test_refinement_preserves_length_and_halves_h(gaps, levels):
    T = Partition(np.concatenate(([0.0], np.cumsum(gaps))))
    R = refine_dyadic(T, levels)
    assert R.n_edges == T.n_edges * 2**levels
    assert math.isclose(R.length, T.length)
    assert math.isclose(R.h, T.h / 2**levels, rel_tol=1e-12)
    if T.n_edges > 1:
        # ratios across old vertices survive while dual lengths halve per level
        assert almost_uniformity_defect(R) <= almost_uniformity_defect(T) * 2**levels * (1 + 1e-9) + 1e-12
