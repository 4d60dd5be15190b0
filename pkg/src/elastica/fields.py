"""Vertex and edge fields, discrete difference operators and discrete norms.

A field stores one value per vertex (or edge) for a contiguous index range
``start, start + 1, ...``.  Fields produced by differencing shrink: ``diff_v2e``
maps vertices ``[a, b)`` to edges ``[a, b - 1)`` and ``diff_e2v`` maps edges
``[a, b)`` to vertices ``[a + 1, b)``.  Values are either scalars (1-d array) or
vectors (2-d array, one row per index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, UndefinedRequest
from .mesh import Partition

__all__ = [
    "MetricWeights",
    "VertexField",
    "EdgeField",
    "diff_v2e",
    "diff_e2v",
    "discrete_norm",
    "lp_norm",
    "sobolev_semi",
    "tv_semi",
    "sobolev_norm",
]


@dataclass(frozen=True, eq=False)
class MetricWeights:
    """Edge lengths and dual lengths used by differences and norms."""

    partition: Partition
    edge: np.ndarray
    dual: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edge, dtype=float)
        d = np.asarray(self.dual, dtype=float)
        if e.shape != (self.partition.n_edges,) or d.shape != (self.partition.n_interior,):
            raise InvalidArgument("weight arrays do not match the partition")
        if np.any(e <= 0) or np.any(d <= 0):
            raise InvalidArgument("weights must be positive")
        object.__setattr__(self, "edge", e)
        object.__setattr__(self, "dual", d)

    @classmethod
    def reference(cls, partition: Partition) -> "MetricWeights":
        return cls(partition, partition.edge_lengths, partition.dual_lengths)

    @classmethod
    def from_edge_lengths(cls, partition: Partition, edge_lengths) -> "MetricWeights":
        e = np.asarray(edge_lengths, dtype=float)
        return cls(partition, e, 0.5 * (e[:-1] + e[1:]))

    def vertex_weights(self) -> np.ndarray:
        """Quadrature weights at all vertices: dual lengths inside, half edges at the ends."""
        e = self.edge
        return np.concatenate(([0.5 * e[0]], self.dual, [0.5 * e[-1]]))


@dataclass(frozen=True, eq=False)
class _Field:
    partition: Partition
    values: np.ndarray
    start: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2):
            raise InvalidArgument("field values must be 1-d or 2-d")
        if self.start < 0 or self.start + v.shape[0] > self._capacity():
            raise InvalidArgument("field index range exceeds the partition")
        object.__setattr__(self, "values", v)

    def _capacity(self):
        raise NotImplementedError

    @property
    def stop(self) -> int:
        return self.start + self.values.shape[0]

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.stop)

    def __len__(self):
        return self.values.shape[0]

    def magnitudes(self) -> np.ndarray:
        v = self.values
        return np.abs(v) if v.ndim == 1 else np.linalg.norm(v, axis=1)


class VertexField(_Field):
    """Values on vertices ``start .. stop-1``."""

    def _capacity(self):
        return self.partition.n_vertices


class EdgeField(_Field):
    """Values on edges ``start .. stop-1``."""

    def _capacity(self):
        return self.partition.n_edges


def _check(field, w):
    if w.partition != field.partition:
        raise InvalidArgument("field and weights live on different partitions")


def _divide(diff, lengths):
    return diff / lengths if diff.ndim == 1 else diff / lengths[:, None]


def diff_v2e(f: VertexField, w: MetricWeights) -> EdgeField:
    """Per edge ``(f(right) - f(left)) / l(I)``."""
    if not isinstance(f, VertexField):
        raise InvalidArgument("diff_v2e expects a VertexField")
    _check(f, w)
    if len(f) < 2:
        raise UndefinedRequest("need at least two vertices to difference")
    a, b = f.start, f.stop
    return EdgeField(f.partition, _divide(np.diff(f.values, axis=0), w.edge[a:b - 1]), a)


def diff_e2v(g: EdgeField, w: MetricWeights) -> VertexField:
    """Per interior vertex ``(g(next) - g(prev)) / lbar(i)``."""
    if not isinstance(g, EdgeField):
        raise InvalidArgument("diff_e2v expects an EdgeField")
    _check(g, w)
    if len(g) < 2:
        raise UndefinedRequest("need at least two edges (one interior vertex) to difference")
    a, b = g.start, g.stop
    # vertex i has dual index i - 1
    return VertexField(g.partition, _divide(np.diff(g.values, axis=0), w.dual[a:b - 1]), a + 1)


def _weights(field, w):
    if isinstance(field, VertexField):
        return w.vertex_weights()[field.start:field.stop]
    return w.edge[field.start:field.stop]


def lp_norm(field, w: MetricWeights, p: float = 2.0) -> float:
    _check(field, w)
    if not p >= 1:
        raise InvalidArgument("p must lie in [1, inf]")
    mags = field.magnitudes()
    if mags.size == 0:
        return 0.0
    if math.isinf(p):
        return float(mags.max())
    wt = _weights(field, w)
    if p == 1:
        return math.fsum(mags * wt)
    return math.fsum(mags**p * wt) ** (1.0 / p)


def _difference(field, w, k):
    for _ in range(k):
        field = diff_v2e(field, w) if isinstance(field, VertexField) else diff_e2v(field, w)
    return field


def sobolev_semi(field, w: MetricWeights, k: int, p: float = 2.0) -> float:
    """l^p norm of the k-fold discrete derivative."""
    if k < 0:
        raise InvalidArgument("k must be >= 0")
    try:
        d = _difference(field, w, k)
    except UndefinedRequest as exc:
        raise UndefinedRequest(f"order {k} too large for this field") from exc
    return lp_norm(d, w, p)


def tv_semi(field, w: MetricWeights, k: int) -> float:
    return sobolev_semi(field, w, k, 1.0)


def sobolev_norm(field, w: MetricWeights, k: int, p: float = 2.0) -> float:
    """Sum of the seminorms of orders ``0..k``; ``p = 1`` gives the tv^k norm."""
    return math.fsum(sobolev_semi(field, w, j, p) for j in range(k + 1))


def discrete_norm(field, spec, w: MetricWeights) -> float:
    """Dispatch on ``spec``: ``("lp", p)``, ``("sobolev_semi", k, p)`` or ``("tv_semi", k)``."""
    kind, *args = spec
    if kind == "lp":
        return lp_norm(field, w, *args)
    if kind == "sobolev_semi":
        return sobolev_semi(field, w, *args)
    if kind == "tv_semi":
        return tv_semi(field, w, *args)
    raise InvalidArgument(f"unknown norm kind {kind!r}")
