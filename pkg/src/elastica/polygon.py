"""Discrete immersions and their geometry.

Everything here works on plain arrays: a polygon with ``n`` edges stores an
``(n + 1, m)`` array of vertex positions.  Edge quantities (lengths, unit
tangents, strain) have ``n`` rows and interior-vertex quantities (turning
angles, curvature vectors) have ``n - 1`` rows, interior vertex ``i`` being row
``i - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    ImmersionViolation,
    InvalidArgument,
    NearStraightConfiguration,
    SingularConfiguration,
    UndefinedRequest,
)
from .fields import EdgeField, MetricWeights, VertexField, sobolev_norm, lp_norm, tv_semi
from .mesh import Partition

__all__ = [
    "Polygon",
    "BoundaryData",
    "ConstraintValue",
    "TameBounds",
    "PriorBounds",
    "PolylineCurve",
    "strain",
    "turning_angles",
    "curvature",
    "bending_energy",
    "bending_energy_gradient",
    "constraint_map",
    "constraint_jacobian_apply",
    "constraint_hessian_apply",
    "theta_matrix",
    "right_inverse_apply",
    "tame_membership",
    "regularity_seminorms",
    "piecewise_linear_interpolant",
    "polygon_from_curve",
]

THETA_COND_MAX = 1e12
FOLD_GUARD = 1e-6
JSON_VERSION = 1


def _angle(a, b):
    """Angle between unit row vectors ``a`` and ``b``, stable near 0 and pi."""
    dot = np.einsum("ij,ij->i", a, b)
    rej = b - dot[:, None] * a
    return np.arctan2(np.linalg.norm(rej, axis=1), dot)


def _perp(tau, x):
    """Project rows of ``x`` orthogonally to the unit rows of ``tau``."""
    return x - np.einsum("ij,ij->i", tau, x)[:, None] * tau


@dataclass(frozen=True, eq=False)
class Polygon:
    """Vertex positions over a partition."""

    partition: Partition
    positions: np.ndarray

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        if x.ndim != 2 or x.shape[0] != self.partition.n_vertices:
            raise InvalidArgument("positions must have one row per vertex")
        if x.shape[1] < 2:
            raise InvalidArgument("ambient dimension must be at least 2")
        if not np.all(np.isfinite(x)):
            raise InvalidArgument("positions must be finite")
        lengths = np.linalg.norm(np.diff(x, axis=0), axis=1)
        if np.any(lengths == 0):
            bad = int(np.flatnonzero(lengths == 0)[0])
            raise ImmersionViolation(f"vertices {bad} and {bad + 1} coincide")
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)

    @property
    def m(self) -> int:
        return self.positions.shape[1]

    @property
    def n_edges(self) -> int:
        return self.partition.n_edges

    @cached_property
    def edge_vectors(self) -> np.ndarray:
        return np.diff(self.positions, axis=0)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors, axis=1)

    @cached_property
    def tangents(self) -> np.ndarray:
        return self.edge_vectors / self.edge_lengths[:, None]

    @cached_property
    def dual_lengths(self) -> np.ndarray:
        e = self.edge_lengths
        return 0.5 * (e[:-1] + e[1:])

    @property
    def total_length(self) -> float:
        return math.fsum(self.edge_lengths)

    @cached_property
    def weights(self) -> MetricWeights:
        """Polygon-induced metric weights ``(l_P, lbar_P)``."""
        return MetricWeights(self.partition, self.edge_lengths, self.dual_lengths)

    def with_positions(self, positions) -> "Polygon":
        return Polygon(self.partition, positions)

    def transformed(self, rotation=None, translation=None) -> "Polygon":
        x = self.positions
        if rotation is not None:
            x = x @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            x = x + np.asarray(translation, dtype=float)
        return Polygon(self.partition, x)

    # serialization
    def to_text(self) -> str:
        rows = [
            " ".join(repr(float(v)) for v in (t, *x))
            for t, x in zip(self.partition.vertex_params, self.positions)
        ]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Polygon":
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
        if not rows:
            raise InvalidArgument("empty polygon table")
        widths = {len(r) for r in rows}
        if len(widths) != 1 or widths.pop() < 3:
            raise InvalidArgument("polygon table rows must all be 't x y [z]'")
        data = np.array([[float(v) for v in r] for r in rows])
        return cls(Partition(data[:, 0]), data[:, 1:])

    def to_json(self) -> str:
        doc = {
            "version": JSON_VERSION,
            "m": self.m,
            "partition": self.partition.vertex_params.tolist(),
            "positions": self.positions.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Polygon":
        doc = json.loads(text)
        if doc.get("version") != JSON_VERSION:
            raise InvalidArgument(f"unsupported polygon JSON version {doc.get('version')!r}")
        x = np.array(doc["positions"], dtype=float)
        if x.ndim != 2 or x.shape[1] != doc["m"]:
            raise InvalidArgument("positions do not match declared dimension m")
        return cls(Partition(doc["partition"]), x)


@dataclass(frozen=True)
class BoundaryData:
    """Clamped boundary conditions and the prescribed length."""

    p0: np.ndarray
    pL: np.ndarray
    N0: np.ndarray
    NL: np.ndarray
    L: float

    def __post_init__(self):
        vecs = [np.array(getattr(self, k), dtype=float).ravel() for k in ("p0", "pL", "N0", "NL")]
        if len({v.size for v in vecs}) != 1 or vecs[0].size < 2:
            raise InvalidArgument("boundary vectors must share one dimension m >= 2")
        for name, v in zip(("p0", "pL", "N0", "NL"), vecs):
            if not np.all(np.isfinite(v)):
                raise InvalidArgument(f"{name} must be finite")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        for name in ("N0", "NL"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > 1e-12:
                raise InvalidArgument(f"{name} must be a unit vector")
        if not (math.isfinite(self.L) and self.L > 0):
            raise InvalidArgument("L must be positive")
        object.__setattr__(self, "L", float(self.L))
        if not self.eta > 0:
            raise InvalidArgument("non-commensurable boundary data: need L > |pL - p0|")

    @property
    def m(self) -> int:
        return self.p0.size

    @property
    def chord(self) -> float:
        return float(np.linalg.norm(self.pL - self.p0))

    @property
    def eta(self) -> float:
        c = self.chord
        return math.inf if c == 0 else self.L / c - 1.0

    def transformed(self, rotation=None, translation=None) -> "BoundaryData":
        R = np.eye(self.m) if rotation is None else np.asarray(rotation, dtype=float)
        v = np.zeros(self.m) if translation is None else np.asarray(translation, dtype=float)
        return BoundaryData(R @ self.p0 + v, R @ self.pL + v, R @ self.N0, R @ self.NL, self.L)

    def to_dict(self) -> dict:
        return {
            "p0": self.p0.tolist(),
            "pL": self.pL.tolist(),
            "N0": self.N0.tolist(),
            "NL": self.NL.tolist(),
            "L": self.L,
        }


@dataclass(frozen=True, eq=False)
class ConstraintValue:
    """Residual blocks (or tangent vectors in the target space) of the constraint map."""

    pos0: np.ndarray
    posL: np.ndarray
    tan0: np.ndarray
    tanL: np.ndarray
    strain: np.ndarray

    def __post_init__(self):
        for name in ("pos0", "posL", "tan0", "tanL", "strain"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def m(self) -> int:
        return self.pos0.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.pos0, self.posL, self.tan0, self.tanL, self.strain])

    @classmethod
    def from_vector(cls, v, m: int) -> "ConstraintValue":
        v = np.asarray(v, dtype=float)
        return cls(v[:m], v[m:2 * m], v[2 * m:3 * m], v[3 * m:4 * m], v[4 * m:])

    @classmethod
    def zeros(cls, m: int, n_edges: int) -> "ConstraintValue":
        return cls.from_vector(np.zeros(4 * m + n_edges), m)

    def boundary_norm(self) -> float:
        return float(np.linalg.norm(np.concatenate([self.pos0, self.posL, self.tan0, self.tanL])))

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.to_vector())))

    def tv2_norm(self, partition: Partition) -> float:
        """Euclidean norm of the boundary blocks plus the reference tv^2 norm of the strain."""
        w = MetricWeights.reference(partition)
        return self.boundary_norm() + sobolev_norm(EdgeField(partition, self.strain), w, 2, 1.0)

    def w1p_norm(self, partition: Partition, p: float = 2.0) -> float:
        w = MetricWeights.reference(partition)
        return self.boundary_norm() + sobolev_norm(EdgeField(partition, self.strain), w, 1, p)

    def __add__(self, other):
        return ConstraintValue.from_vector(self.to_vector() + other.to_vector(), self.m)

    def __sub__(self, other):
        return ConstraintValue.from_vector(self.to_vector() - other.to_vector(), self.m)

    def __mul__(self, s):
        return ConstraintValue.from_vector(s * self.to_vector(), self.m)

    __rmul__ = __mul__


@dataclass(frozen=True)
class TameBounds:
    Lambda: float
    K: float
    eta: float
    k: int = 2
    p: float = math.inf

    def __post_init__(self):
        if self.Lambda < 0 or self.K < 0:
            raise InvalidArgument("Lambda and K must be nonnegative")
        if not self.eta > 0:
            raise InvalidArgument("eta must be positive")
        if self.k < 2 or not self.p >= 1:
            raise InvalidArgument("need k >= 2 and p >= 1")


@dataclass(frozen=True)
class PriorBounds:
    K1: float = math.inf
    K2: float = math.inf

    def __post_init__(self):
        if self.K1 < 0 or self.K2 < 0:
            raise InvalidArgument("prior constants must be nonnegative")


# --- basic geometry -------------------------------------------------------


def strain(P: Polygon) -> EdgeField:
    """Logarithmic strain ``log(l_P / l_0)`` per edge."""
    return EdgeField(P.partition, np.log(P.edge_lengths / P.partition.edge_lengths))


def _angles(P):
    tau = P.tangents
    return _angle(tau[:-1], tau[1:])


def turning_angles(P: Polygon) -> VertexField:
    if P.partition.n_interior < 1:
        raise UndefinedRequest("no interior vertex")
    return VertexField(P.partition, _angles(P), 1)


def curvature(P: Polygon) -> VertexField:
    """Curvature vectors ``(tau_next - tau_prev) / lbar_P`` at interior vertices."""
    if P.partition.n_interior < 1:
        raise UndefinedRequest("no interior vertex")
    tau = P.tangents
    return VertexField(P.partition, np.diff(tau, axis=0) / P.dual_lengths[:, None], 1)


def bending_energy(P: Polygon) -> float:
    if P.partition.n_interior < 1:
        return 0.0
    alpha = _angles(P)
    return 0.5 * math.fsum(alpha**2 / P.dual_lengths)


def _alpha_over_sin(alpha):
    out = np.ones_like(alpha)
    big = alpha > 1e-4
    out[big] = alpha[big] / np.sin(alpha[big])
    a2 = alpha[~big] ** 2
    out[~big] = 1.0 + a2 / 6.0 + 7.0 * a2**2 / 360.0
    return out


def bending_energy_gradient(P: Polygon) -> np.ndarray:
    """Gradient of the discrete energy with respect to the vertex positions, shape ``(n+1, m)``."""
    grad = np.zeros_like(P.positions)
    if P.partition.n_interior < 1:
        return grad
    tau = P.tangents
    ell = P.edge_lengths
    lbar = P.dual_lengths
    ta, tb = tau[:-1], tau[1:]
    la, lb = ell[:-1], ell[1:]
    alpha = _angle(ta, tb)
    if np.any(alpha >= math.pi - FOLD_GUARD):
        i = int(np.argmax(alpha)) + 1
        raise SingularConfiguration(f"turning angle at vertex {i} is too close to pi")
    f = _alpha_over_sin(alpha)
    rej_b = _perp(ta, tb)  # rejection of tb from ta
    rej_a = _perp(tb, ta)
    # E_i = alpha^2 / (2 lbar); a = P_i - P_{i-1}, b = P_{i+1} - P_i
    c1 = (f / lbar)[:, None]
    c2 = (0.25 * alpha**2 / lbar**2)[:, None]
    ga = -c1 * rej_b / la[:, None] - c2 * ta
    gb = -c1 * rej_a / lb[:, None] - c2 * tb
    grad[1:-1] += ga - gb
    grad[:-2] -= ga
    grad[2:] += gb
    return grad


# --- constraint map -------------------------------------------------------


def _as_vertex_array(P, u):
    u = u.values if isinstance(u, VertexField) else np.asarray(u, dtype=float)
    if u.shape != P.positions.shape:
        raise InvalidArgument("displacement must have one row per vertex and m columns")
    return u


def constraint_map(P: Polygon, bd: BoundaryData) -> ConstraintValue:
    if bd.m != P.m:
        raise InvalidArgument("boundary data dimension does not match the polygon")
    x = P.positions
    tau = P.tangents
    return ConstraintValue(
        x[0] - bd.p0,
        x[-1] - bd.pL,
        tau[0] - bd.N0,
        tau[-1] - bd.NL,
        strain(P).values,
    )


def constraint_jacobian_apply(P: Polygon, u) -> ConstraintValue:
    u = _as_vertex_array(P, u)
    tau = P.tangents
    du = np.diff(u, axis=0) / P.edge_lengths[:, None]
    return ConstraintValue(
        u[0].copy(),
        u[-1].copy(),
        du[0] - (tau[0] @ du[0]) * tau[0],
        du[-1] - (tau[-1] @ du[-1]) * tau[-1],
        np.einsum("ij,ij->i", tau, du),
    )


def constraint_jacobian_matrix(P: Polygon) -> np.ndarray:
    """Dense matrix of the differential on flattened vertex displacements."""
    m, nv = P.m, P.partition.n_vertices
    cols = []
    for j in range(nv * m):
        e = np.zeros(nv * m)
        e[j] = 1.0
        cols.append(constraint_jacobian_apply(P, e.reshape(nv, m)).to_vector())
    return np.array(cols).T


def constraint_hessian_apply(P: Polygon, u, v) -> ConstraintValue:
    """Second derivative of the constraint map, bilinear and symmetric in ``(u, v)``."""
    u = _as_vertex_array(P, u)
    v = _as_vertex_array(P, v)
    tau = P.tangents
    ell = P.edge_lengths
    x = np.diff(u, axis=0)
    y = np.diff(v, axis=0)
    tx = np.einsum("ij,ij->i", tau, x)
    ty = np.einsum("ij,ij->i", tau, y)
    xy = np.einsum("ij,ij->i", x, y)
    inv2 = 1.0 / ell**2
    d2sigma = (xy - 2.0 * tx * ty) * inv2

    def d2tau(I):
        px = x[I] - tx[I] * tau[I]
        py = y[I] - ty[I] * tau[I]
        return -(ty[I] * px + tx[I] * py + tau[I] * (xy[I] - tx[I] * ty[I])) * inv2[I]

    zero = np.zeros(P.m)
    return ConstraintValue(zero, zero.copy(), d2tau(0), d2tau(-1), d2sigma)


# --- right inverse --------------------------------------------------------


def _phi(P):
    # s_P(I) = sum of lbar_P over vertices 1..I; phi = s / s(last)
    s = np.concatenate(([0.0], np.cumsum(P.dual_lengths)))
    return s / s[-1]


def theta_matrix(P: Polygon) -> tuple[np.ndarray, float]:
    """Return ``(Theta_P, cond)``; raise if the condition number exceeds 1e12."""
    if P.n_edges < 2:
        raise UndefinedRequest("theta matrix needs at least two edges")
    phi = _phi(P)
    tau = P.tangents
    wgt = (1.0 - phi) * phi * P.edge_lengths
    theta = wgt.sum() * np.eye(P.m) - np.einsum("i,ij,ik->jk", wgt, tau, tau)
    theta = 0.5 * (theta + theta.T)
    cond = float(np.linalg.cond(theta))
    if not np.isfinite(cond) or cond > THETA_COND_MAX:
        raise NearStraightConfiguration(f"theta matrix is numerically singular (cond={cond:.3g})")
    return theta, cond


def right_inverse_apply(P: Polygon, w: ConstraintValue) -> np.ndarray:
    """Explicit right inverse of the differential; returns displacements ``(n+1, m)``.

    Only the components of the tangent blocks orthogonal to the end tangents
    lie in the range of the differential; the parallel parts are discarded.
    """
    theta, _ = theta_matrix(P)
    tau = P.tangents
    ell = P.edge_lengths
    phi = _phi(P)
    lam = np.asarray(w.strain, dtype=float)
    if lam.shape != (P.n_edges,):
        raise InvalidArgument("strain block must have one entry per edge")
    a0 = (1.0 - phi) ** 2
    a1 = phi**2
    fixed = lam[:, None] * tau + _perp(tau, a0[:, None] * w.tan0 + a1[:, None] * w.tanL)
    b = w.posL - w.pos0 - (fixed * ell[:, None]).sum(axis=0)
    V = np.linalg.solve(theta, b)
    mid = ((1.0 - phi) * phi)[:, None] * V
    rate = fixed + _perp(tau, mid)
    u = np.empty_like(P.positions)
    u[0] = w.pos0
    u[1:] = w.pos0 + np.cumsum(rate * ell[:, None], axis=0)
    return u


def right_inverse_matrix(P: Polygon) -> np.ndarray:
    """Dense matrix of ``right_inverse_apply`` on flattened constraint tangents."""
    k = 4 * P.m + P.n_edges
    cols = []
    for j in range(k):
        e = np.zeros(k)
        e[j] = 1.0
        cols.append(right_inverse_apply(P, ConstraintValue.from_vector(e, P.m)).ravel())
    return np.array(cols).T


# --- tame set and regularity ----------------------------------------------


def tame_membership(P: Polygon, b: TameBounds) -> dict:
    w = P.weights
    sig = sobolev_norm(EdgeField(P.partition, strain(P).values), w, b.k - 1, b.p)
    tau = sobolev_norm(EdgeField(P.partition, P.tangents), w, b.k - 1, b.p)
    chord = float(np.linalg.norm(P.positions[-1] - P.positions[0]))
    ratio = math.inf if chord == 0 else P.total_length / chord
    in_set = sig <= b.Lambda and tau <= b.K and ratio >= 1.0 + b.eta
    return {"in_set": bool(in_set), "strain_norm": sig, "tangent_norm": tau, "length_ratio": ratio}


def regularity_seminorms(P: Polygon) -> dict:
    """``w2inf = max |kappa|``, ``tv3 = sum |kappa jumps|``, ``w3inf = max |kappa jump| / l_P``."""
    if P.partition.n_interior < 2:
        raise UndefinedRequest("need at least two interior vertices")
    kappa = curvature(P)
    w = P.weights
    # interior edges carry the third difference of P
    return {
        "w2inf": lp_norm(kappa, w, math.inf),
        "tv3": tv_semi(kappa, w, 1),
        "w3inf": float(np.max(np.linalg.norm(np.diff(kappa.values, axis=0), axis=1) / P.edge_lengths[1:-1])),
    }


def prior_membership(P: Polygon, priors: PriorBounds) -> bool:
    r = regularity_seminorms(P)
    return r["w2inf"] <= priors.K2 and r["tv3"] <= priors.K2


# --- interpolation --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolylineCurve:
    """Piecewise linear interpolant of a polygon over its partition."""

    polygon: Polygon
    knots: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "knots", self.polygon.partition.vertex_params)

    @property
    def length(self) -> float:
        return self.polygon.partition.length

    def _segment(self, t, side):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.length):
            raise InvalidArgument("parameter outside [0, L]")
        right = np.searchsorted(self.knots, t, side="right") - 1
        left = np.searchsorted(self.knots, t, side="left") - 1
        seg = np.where(np.broadcast_to(side, t.shape) < 0, left, right)
        return t, np.clip(seg, 0, len(self.knots) - 2)

    def position(self, t, side=1):
        t, j = self._segment(t, side)
        x = self.polygon.positions
        lam = (t - self.knots[j]) / self.polygon.partition.edge_lengths[j]
        return x[j] + lam[:, None] * (x[j + 1] - x[j])

    def velocity(self, t, side=1):
        t, j = self._segment(t, side)
        return self.polygon.edge_vectors[j] / self.polygon.partition.edge_lengths[j][:, None]

    def acceleration(self, t, side=1):
        raise InvalidArgument("a polyline has no second derivative")

    def segment_bounds(self):
        """Per knot segment: bounds on ``|c'|``, ``|c''|`` (zero inside segments)."""
        speed = self.polygon.edge_lengths / self.polygon.partition.edge_lengths
        return speed, np.zeros_like(speed)

    @property
    def total_length(self) -> float:
        return self.polygon.total_length


def piecewise_linear_interpolant(P: Polygon) -> PolylineCurve:
    return PolylineCurve(P)


def polygon_from_curve(curve, partition: Partition) -> Polygon:
    """Pointwise samples of an evaluable curve at the vertex parameters."""
    return Polygon(partition, curve.position(partition.vertex_params))
