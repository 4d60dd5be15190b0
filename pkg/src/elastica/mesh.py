"""Partitions of the parameter interval [0, L].

Vertices are indexed ``0..n`` and edges ``0..n-1``; edge ``I`` joins vertices
``I`` and ``I + 1``.  Interior vertex ``i`` (``1 <= i <= n - 1``) sits between
edge ``i - 1`` (its predecessor) and edge ``i`` (its successor).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgument, UndefinedRequest

__all__ = [
    "Partition",
    "uniform_partition",
    "graded_partition",
    "refine_dyadic",
    "almost_uniformity_defect",
]

_GAP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Partition:
    """Finite partition of ``[0, L]`` given by its vertex parameters."""

    vertex_params: np.ndarray

    def __post_init__(self):
        t = np.array(self.vertex_params, dtype=float).ravel()
        if t.size < 2:
            raise InvalidArgument("a partition needs at least two vertices")
        if not np.all(np.isfinite(t)):
            raise InvalidArgument("vertex parameters must be finite")
        if t[0] != 0.0:
            raise InvalidArgument("first vertex parameter must be 0")
        length = t[-1]
        if length <= 0:
            raise InvalidArgument("partition length must be positive")
        if np.any(np.diff(t) <= _GAP_TOL * length):
            raise InvalidArgument("vertex parameters must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "vertex_params", t)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.vertex_params, other.vertex_params)

    def __hash__(self):
        return hash(self.vertex_params.tobytes())

    def __repr__(self):
        return f"Partition(n_edges={self.n_edges}, length={self.length!r}, h={self.h!r})"

    @property
    def length(self) -> float:
        return float(self.vertex_params[-1])

    @property
    def n_vertices(self) -> int:
        return self.vertex_params.size

    @property
    def n_edges(self) -> int:
        return self.vertex_params.size - 1

    @property
    def n_interior(self) -> int:
        return self.vertex_params.size - 2

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """Reference edge lengths ``l0(I)``."""
        return np.diff(self.vertex_params)

    @cached_property
    def dual_lengths(self) -> np.ndarray:
        """Dual reference lengths ``(l0(prev) + l0(next)) / 2`` at interior vertices."""
        l0 = self.edge_lengths
        return 0.5 * (l0[:-1] + l0[1:])

    @cached_property
    def midpoints(self) -> np.ndarray:
        t = self.vertex_params
        return 0.5 * (t[:-1] + t[1:])

    @property
    def h(self) -> float:
        return float(self.edge_lengths.max())

    @property
    def interior_vertices(self) -> np.ndarray:
        return np.arange(1, self.n_vertices - 1)

    @property
    def boundary_edges(self) -> tuple[int, int]:
        return 0, self.n_edges - 1

    @property
    def interior_edges(self) -> np.ndarray:
        """Edges touching no boundary vertex."""
        return np.arange(1, self.n_edges - 1)

    def dual_edge(self, i: int) -> tuple[float, float]:
        """Parameter interval between the midpoints of the edges around vertex ``i``."""
        self._check_interior(i)
        return float(self.midpoints[i - 1]), float(self.midpoints[i])

    # shift maps; boundary cases raise instead of wrapping
    def prev_edge(self, i: int) -> int:
        self._check_interior(i)
        return i - 1

    def next_edge(self, i: int) -> int:
        self._check_interior(i)
        return i

    def left_vertex(self, edge: int) -> int:
        self._check_edge(edge)
        return edge

    def right_vertex(self, edge: int) -> int:
        self._check_edge(edge)
        return edge + 1

    def _check_interior(self, i):
        if not 1 <= i <= self.n_vertices - 2:
            raise InvalidArgument(f"vertex {i} is not interior")

    def _check_edge(self, edge):
        if not 0 <= edge < self.n_edges:
            raise InvalidArgument(f"edge {edge} out of range")


def uniform_partition(length: float, edge_count: int) -> Partition:
    if not length > 0:
        raise InvalidArgument("length must be positive")
    if int(edge_count) != edge_count or edge_count < 1:
        raise InvalidArgument("edge_count must be an integer >= 1")
    n = int(edge_count)
    t = length * np.arange(n + 1) / n
    t[-1] = length
    return Partition(t)


def graded_partition(breakpoints) -> Partition:
    return Partition(np.asarray(breakpoints, dtype=float))


def refine_dyadic(p: Partition, levels: int) -> Partition:
    """Split every edge into ``2**levels`` equal pieces."""
    if levels < 0:
        raise InvalidArgument("levels must be >= 0")
    if levels == 0:
        return p
    k = 2**levels
    t = p.vertex_params
    frac = np.arange(k) / k
    fine = (t[:-1, None] + frac[None, :] * p.edge_lengths[:, None]).ravel()
    return Partition(np.append(fine, t[-1]))


def almost_uniformity_defect(p: Partition) -> float:
    """max over interior vertices of ``|log(l_next / l_prev)| / min(l_prev, l_next)``."""
    if p.n_interior < 1:
        raise UndefinedRequest("partition has no interior vertex")
    l0 = p.edge_lengths
    prev, nxt = l0[:-1], l0[1:]
    return float(np.max(np.abs(np.log(nxt / prev)) / np.minimum(prev, nxt)))
