"""C1 piecewise circular curves parameterized by arc length.

An arc spline is stored as a start point, arc-length breakpoints
``0 = s_0 < ... < s_J = L`` and unit tangents ``t_j`` at the breakpoints.  On
``[s_j, s_j+1]`` the tangent rotates at constant speed along the great circle
from ``t_j`` to ``t_j+1``, so every segment is a circular arc (or a straight
piece when the two tangents agree).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgument, NearStraightConfiguration, SingularConfiguration
from .polygon import BoundaryData, ConstraintValue, THETA_COND_MAX

__all__ = [
    "ArcSpline",
    "SmoothTangent",
    "SampledField",
    "QuadraturePlan",
    "planar_arcspline",
    "evaluate",
    "bending_energy",
    "tv3_seminorm",
    "smooth_constraint_map",
    "theta_matrix",
    "smooth_right_inverse_apply",
    "norm_equivalence_check",
    "gauss_legendre",
]

JSON_VERSION = 1
GL_ORDER = 8
_GL = np.polynomial.legendre.leggauss(GL_ORDER)


def gauss_legendre(edges, order: int = GL_ORDER):
    """Composite Gauss-Legendre nodes and weights over consecutive ``edges``."""
    x, w = _GL if order == GL_ORDER else np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


def _sinc(x):
    return np.sinc(x / np.pi)


def _cosc(x):
    """``(1 - cos x) / x`` with the small-argument limit."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    out[small] = xs / 2 - xs**3 / 24
    xb = x[~small]
    out[~small] = 2.0 * np.sin(xb / 2) ** 2 / xb
    return out


@dataclass(frozen=True, eq=False)
class ArcSpline:
    x0: np.ndarray
    breakpoints: np.ndarray
    tangents: np.ndarray

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).ravel()
        s = np.array(self.breakpoints, dtype=float).ravel()
        t = np.array(self.tangents, dtype=float)
        if s.size < 2 or s[0] != 0.0 or np.any(np.diff(s) <= 0):
            raise InvalidArgument("breakpoints must start at 0 and increase strictly")
        if t.shape != (s.size, x0.size) or x0.size < 2:
            raise InvalidArgument("need one tangent in R^m per breakpoint, m >= 2")
        if np.any(np.abs(np.linalg.norm(t, axis=1) - 1.0) > 1e-12):
            raise InvalidArgument("tangents must be unit vectors")
        for a in (x0, s, t):
            a.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "breakpoints", s)
        object.__setattr__(self, "tangents", t)
        if np.any(self.seg_angles >= math.pi - 1e-9):
            raise SingularConfiguration("consecutive tangents are (nearly) antipodal")

    @property
    def m(self) -> int:
        return self.x0.size

    @property
    def length(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def knots(self) -> np.ndarray:
        return self.breakpoints

    @property
    def n_segments(self) -> int:
        return self.breakpoints.size - 1

    @cached_property
    def seg_lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @cached_property
    def _geometry(self):
        t = self.tangents
        a, b = t[:-1], t[1:]
        dot = np.einsum("ij,ij->i", a, b)
        rej = b - dot[:, None] * a
        r = np.linalg.norm(rej, axis=1)
        theta = np.arctan2(r, dot)
        normal = np.zeros_like(rej)
        ok = r > 0
        normal[ok] = rej[ok] / r[ok, None]
        return theta, normal

    @property
    def seg_angles(self) -> np.ndarray:
        return self._geometry[0]

    @property
    def seg_normals(self) -> np.ndarray:
        return self._geometry[1]

    @cached_property
    def seg_curvatures(self) -> np.ndarray:
        """Curvature magnitude ``theta_j / Delta_j`` per segment."""
        return self.seg_angles / self.seg_lengths

    @cached_property
    def nodes(self) -> np.ndarray:
        """Positions at the breakpoints."""
        th = self.seg_angles
        d = self.seg_lengths[:, None]
        chords = d * (_sinc(th)[:, None] * self.tangents[:-1] + _cosc(th)[:, None] * self.seg_normals)
        return self.x0 + np.vstack([np.zeros(self.m), np.cumsum(chords, axis=0)])

    # evaluation -----------------------------------------------------------

    def _locate(self, t, side):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        L = self.length
        if np.any(t < 0) or np.any(t > L):
            raise InvalidArgument("parameter outside [0, L]")
        s = self.breakpoints
        right = np.searchsorted(s, t, side="right") - 1
        left = np.searchsorted(s, t, side="left") - 1
        j = np.where(np.broadcast_to(side, t.shape) < 0, left, right)
        j = np.clip(j, 0, self.n_segments - 1)
        return j, t - s[j]

    def _frame(self, t, side):
        j, u = self._locate(t, side)
        c = self.seg_curvatures[j]
        return j, u, c, self.tangents[j], self.seg_normals[j]

    def position(self, t, side=1):
        j, u, c, t0, n0 = self._frame(t, side)
        x = c * u
        return self.nodes[j] + u[:, None] * (_sinc(x)[:, None] * t0 + _cosc(x)[:, None] * n0)

    def velocity(self, t, side=1):
        j, u, c, t0, n0 = self._frame(t, side)
        x = c * u
        return np.cos(x)[:, None] * t0 + np.sin(x)[:, None] * n0

    tangent = velocity

    def acceleration(self, t, side=1):
        j, u, c, t0, n0 = self._frame(t, side)
        x = c * u
        return c[:, None] * (-np.sin(x)[:, None] * t0 + np.cos(x)[:, None] * n0)

    curvature_vector = acceleration

    def segment_bounds(self):
        """Per segment bounds on ``|c'|``, ``|c''|`` and ``|c'''|``."""
        c = self.seg_curvatures
        return np.ones_like(c), c, c**2

    # serialization --------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": JSON_VERSION,
                "m": self.m,
                "x0": self.x0.tolist(),
                "breakpoints": self.breakpoints.tolist(),
                "tangents": self.tangents.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ArcSpline":
        doc = json.loads(text)
        if doc.get("version") != JSON_VERSION:
            raise InvalidArgument(f"unsupported arc spline JSON version {doc.get('version')!r}")
        out = cls(doc["x0"], doc["breakpoints"], doc["tangents"])
        if out.m != doc["m"]:
            raise InvalidArgument("declared m does not match the data")
        return out

    def to_polyline(self, per_segment: int = 16) -> dict:
        """Dense polyline export for plotting."""
        frac = np.arange(per_segment) / per_segment
        s = self.breakpoints
        t = np.append((s[:-1, None] + frac * self.seg_lengths[:, None]).ravel(), s[-1])
        return dense_polyline_dict(t, self.position(t), self.velocity(t, side=-1))

    def with_tangents(self, tangents, x0=None) -> "ArcSpline":
        return ArcSpline(self.x0 if x0 is None else x0, self.breakpoints, tangents)

    def transformed(self, rotation=None, translation=None) -> "ArcSpline":
        R = np.eye(self.m) if rotation is None else np.asarray(rotation, dtype=float)
        v = np.zeros(self.m) if translation is None else np.asarray(translation, dtype=float)
        return ArcSpline(R @ self.x0 + v, self.breakpoints, self.tangents @ R.T)

    def reversed(self) -> "ArcSpline":
        s = self.breakpoints
        return ArcSpline(self.nodes[-1], s[-1] - s[::-1], -self.tangents[::-1])


def dense_polyline_dict(params, positions, tangents=None) -> dict:
    doc = {
        "version": JSON_VERSION,
        "kind": "polyline",
        "params": np.asarray(params).tolist(),
        "positions": np.asarray(positions).tolist(),
    }
    if tangents is not None:
        doc["tangents"] = np.asarray(tangents).tolist()
    return doc


def planar_arcspline(x0, angle0: float, breakpoints, curvatures) -> ArcSpline:
    """Planar arc spline with signed curvature ``curvatures[j]`` on segment ``j``."""
    s = np.asarray(breakpoints, dtype=float)
    k = np.asarray(curvatures, dtype=float)
    ang = angle0 + np.concatenate(([0.0], np.cumsum(k * np.diff(s))))
    return ArcSpline(x0, s, np.column_stack([np.cos(ang), np.sin(ang)]))


def evaluate(gamma: ArcSpline, t):
    """Position, unit tangent and curvature vector at ``t`` (right limits at breakpoints)."""
    scalar = np.ndim(t) == 0
    out = gamma.position(t), gamma.velocity(t), gamma.acceleration(t)
    return tuple(o[0] for o in out) if scalar else out


def bending_energy(gamma: ArcSpline) -> float:
    return 0.5 * math.fsum(gamma.seg_curvatures**2 * gamma.seg_lengths)


def curvature_jumps(gamma: ArcSpline) -> np.ndarray:
    """Norm of the curvature-vector jump at each interior breakpoint."""
    if gamma.n_segments < 2:
        return np.zeros(0)
    s = gamma.breakpoints[1:-1]
    return np.linalg.norm(gamma.acceleration(s, 1) - gamma.acceleration(s, -1), axis=1)


def tv3_seminorm(gamma: ArcSpline) -> float:
    c = gamma.seg_curvatures
    return math.fsum(c**2 * gamma.seg_lengths) + math.fsum(curvature_jumps(gamma))


def smooth_constraint_map(gamma: ArcSpline, bd: BoundaryData) -> ConstraintValue:
    if abs(gamma.length - bd.L) > 1e-12 * bd.L:
        raise InvalidArgument("arc spline length differs from L; arc splines carry no strain")
    if gamma.m != bd.m:
        raise InvalidArgument("dimension mismatch")
    t = gamma.tangents
    return ConstraintValue(
        gamma.x0 - bd.p0,
        gamma.nodes[-1] - bd.pL,
        t[0] - bd.N0,
        t[-1] - bd.NL,
        np.zeros(gamma.n_segments),
    )


# --- right inverse B_gamma -------------------------------------------------


@dataclass(frozen=True)
class SmoothTangent:
    """Tangent vector of the smooth target space; ``lam`` is the strain rate (callable or None)."""

    U0: np.ndarray
    U1: np.ndarray
    V0: np.ndarray
    V1: np.ndarray
    lam: object = None


@dataclass(frozen=True, eq=False)
class QuadraturePlan:
    """Subinterval grid carrying order-8 Gauss-Legendre rules."""

    grid: np.ndarray

    @classmethod
    def for_curve(cls, gamma: ArcSpline, subdivisions: int = 1) -> "QuadraturePlan":
        s = gamma.breakpoints
        frac = np.arange(subdivisions) / subdivisions
        g = np.append((s[:-1, None] + frac * np.diff(s)[:, None]).ravel(), s[-1])
        return cls(g)

    def rule(self):
        return gauss_legendre(self.grid)


@dataclass(frozen=True, eq=False)
class SampledField:
    params: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    V: np.ndarray = None


def _perp_rows(tau, x):
    return x - np.einsum("ij,ij->i", tau, x)[:, None] * tau


def theta_matrix(gamma: ArcSpline, plan: QuadraturePlan | None = None) -> tuple[np.ndarray, float]:
    """``Theta_gamma = int (1 - phi) phi pr_perp`` with ``phi = r / L``."""
    plan = plan or QuadraturePlan.for_curve(gamma)
    r, w = plan.rule()
    tau = gamma.velocity(r)
    phi = r / gamma.length
    wt = w * (1 - phi) * phi
    theta = wt.sum() * np.eye(gamma.m) - np.einsum("i,ij,ik->jk", wt, tau, tau)
    theta = 0.5 * (theta + theta.T)
    cond = float(np.linalg.cond(theta))
    if not np.isfinite(cond) or cond > THETA_COND_MAX:
        raise NearStraightConfiguration(f"theta matrix is numerically singular (cond={cond:.3g})")
    return theta, cond


def _integrand_parts(gamma, w, r, side=1):
    """Split the B_gamma integrand at ``r`` into a fixed part and the V-coefficient matrix."""
    tau = gamma.velocity(r, side)
    phi = r / gamma.length
    lam = np.zeros_like(r) if w.lam is None else np.asarray(w.lam(r), dtype=float) * np.ones_like(r)
    V0 = np.asarray(w.V0, dtype=float)
    V1 = np.asarray(w.V1, dtype=float)
    mix = ((1 - phi) ** 2)[:, None] * V0 + (phi**2)[:, None] * V1
    fixed = lam[:, None] * tau + _perp_rows(tau, mix)
    g = ((1 - phi) * phi)[:, None, None] * (np.eye(gamma.m) - tau[:, :, None] * tau[:, None, :])
    return fixed, g


def smooth_right_inverse_apply(gamma: ArcSpline, w: SmoothTangent, plan: QuadraturePlan | None = None) -> SampledField:
    """Sample ``u = B_gamma w`` at the plan's grid points and Gauss nodes."""
    plan = plan or QuadraturePlan.for_curve(gamma)
    theta, _ = theta_matrix(gamma, plan)
    U0 = np.asarray(w.U0, dtype=float)
    U1 = np.asarray(w.U1, dtype=float)
    grid = plan.grid
    r, wq = plan.rule()
    fixed, g = _integrand_parts(gamma, w, r)
    k = grid.size - 1
    fixed_int = (wq[:, None] * fixed).reshape(k, GL_ORDER, -1).sum(axis=1)
    g_int = (wq[:, None, None] * g).reshape(k, GL_ORDER, gamma.m, gamma.m).sum(axis=1)
    b = U1 - U0 - fixed_int.sum(axis=0)
    V = np.linalg.solve(theta, b)

    cum_f = np.vstack([np.zeros(gamma.m), np.cumsum(fixed_int, axis=0)])
    cum_g = np.concatenate([np.zeros((1, gamma.m, gamma.m)), np.cumsum(g_int, axis=0)])

    # partial integrals from the left end of each subinterval to its Gauss nodes
    x, wx = _GL
    a = np.repeat(grid[:-1], GL_ORDER)
    sub = np.repeat(np.arange(k), GL_ORDER)
    nodes2 = 0.5 * (a[:, None] + r[:, None]) + 0.5 * (r - a)[:, None] * x
    w2 = 0.5 * (r - a)[:, None] * wx
    f2, g2 = _integrand_parts(gamma, w, nodes2.ravel())
    f2 = (w2.ravel()[:, None] * f2).reshape(r.size, GL_ORDER, -1).sum(axis=1)
    g2 = (w2.ravel()[:, None, None] * g2).reshape(r.size, GL_ORDER, gamma.m, gamma.m).sum(axis=1)
    u_nodes = U0 + cum_f[sub] + f2 + np.einsum("ijk,k->ij", cum_g[sub] + g2, V)
    u_grid = U0 + cum_f + np.einsum("ijk,k->ij", cum_g, V)

    params = np.concatenate([grid, r])
    order = np.argsort(params, kind="stable")
    values = np.vstack([u_grid, u_nodes])[order]
    # derivative: one-sided from the right except at L
    side = np.ones(params.size)
    side[params == gamma.length] = -1
    fixed_all, g_all = _integrand_parts(gamma, w, params, side)
    du = fixed_all + np.einsum("ijk,k->ij", g_all, V)
    return SampledField(params[order], values, du[order], V)


def norm_equivalence_check(gamma: ArcSpline, u, k: int, p: float = 2.0, subdivisions: int = 4) -> dict:
    """W^{k,p} seminorm of ``u`` along ``gamma``, with and without the line element.

    ``u(t)`` must return a sequence ``(u, u', u'')`` of arrays, one row per parameter.
    """
    if k not in (0, 1, 2):
        raise InvalidArgument("k must be 0, 1 or 2")
    plan = QuadraturePlan.for_curve(gamma, subdivisions)
    r, w = plan.rule()
    derivs = [np.asarray(d, dtype=float).reshape(r.size, -1) for d in u(r)]
    plain = derivs[k]
    speed_vec = gamma.velocity(r)
    speed = np.linalg.norm(speed_vec, axis=1)
    if k == 0:
        weighted = plain
    elif k == 1:
        weighted = derivs[1] / speed[:, None]
    else:
        dspeed = np.einsum("ij,ij->i", speed_vec, gamma.acceleration(r)) / speed
        weighted = (derivs[2] * speed[:, None] - derivs[1] * dspeed[:, None]) / speed[:, None] ** 3

    def integrate(vals, line):
        mag = np.linalg.norm(vals, axis=1)
        if math.isinf(p):
            return float(mag.max())
        return math.fsum(w * line * mag**p) ** (1 / p)

    return {"weighted": integrate(weighted, speed), "unweighted": integrate(plain, np.ones_like(r))}
