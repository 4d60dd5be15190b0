"""Transfer operators between polygons and arc splines.

``approx_reconstruct`` and ``approx_sample`` are explicit and only almost
feasible; ``restore_smooth`` and ``restore_discrete`` project back onto the
feasible sets by Newton-Kantorovich iteration.  Their compositions
``reconstruct`` and ``sample`` map feasible inputs to feasible outputs.
"""

from __future__ import annotations

import math

import numpy as np

from . import arcspline as arc
from . import kantorovich as nk
from . import metrics
from .errors import ImmersionViolation, InvalidArgument, SingularConfiguration
from .fields import MetricWeights, VertexField, sobolev_norm
from .mesh import Partition
from .polygon import (
    BoundaryData,
    ConstraintValue,
    Polygon,
    PriorBounds,
    bending_energy,
    constraint_map,
    curvature,
    piecewise_linear_interpolant,
    prior_membership,
    regularity_seminorms,
    right_inverse_apply,
)

__all__ = [
    "approx_reconstruct",
    "restore_smooth",
    "reconstruct",
    "approx_sample",
    "restore_discrete",
    "sample",
    "roundtrip_gap",
    "default_epsilon",
    "boundary_excess",
]

DEFAULT_TOL = 1e-12
STRAIN_TOL = 1e-8
MAX_NEWTON = 30


def default_epsilon(bd: BoundaryData) -> float:
    """Admissible constraint violation for the restorations."""
    return 0.1 * min(1.0, bd.eta)


# --- reconstruction -------------------------------------------------------


def _rotate_towards(t, target, angle):
    """Rotate unit ``t`` by ``angle`` in the plane spanned with ``target``, towards it."""
    rej = target - (t @ target) * t
    r = np.linalg.norm(rej)
    if r == 0 or angle == 0:
        return t.copy()
    n = rej / r
    out = math.cos(angle) * t + math.sin(angle) * n
    return out / np.linalg.norm(out)


def approx_reconstruct(P: Polygon) -> arc.ArcSpline:
    """Piecewise circular curve through the edge tangents of a polygon in arc-length form."""
    T = P.partition
    sig = np.abs(np.log(P.edge_lengths / T.edge_lengths))
    if np.max(sig) > STRAIN_TOL:
        raise InvalidArgument("approximate reconstruction needs l_P = l_0 (discrete arc length)")
    tau = P.tangents
    s = np.concatenate(([0.0], T.midpoints, [T.length]))
    if T.n_edges == 1:
        tangents = np.vstack([tau[0], tau[0], tau[0]])
        return arc.ArcSpline(P.positions[0], s, tangents)
    alpha = np.arctan2(
        np.linalg.norm(tau[1:] - np.einsum("ij,ij->i", tau[:-1], tau[1:])[:, None] * tau[:-1], axis=1),
        np.einsum("ij,ij->i", tau[:-1], tau[1:]),
    )
    if np.any(alpha >= math.pi - 1e-9):
        raise SingularConfiguration("fold-back angle; reconstruction undefined")
    lbar = T.dual_lengths
    l0 = T.edge_lengths
    # boundary segments continue the adjacent dual arc at the same curvature
    first = _rotate_towards(tau[0], tau[1], -alpha[0] / lbar[0] * 0.5 * l0[0])
    last = _rotate_towards(tau[-1], tau[-2], -alpha[-1] / lbar[-1] * 0.5 * l0[-1])
    tangents = np.vstack([first, tau, last])
    return arc.ArcSpline(P.positions[0], s, tangents)


def boundary_excess(P: Polygon) -> float:
    """Energy added by the two boundary segments of the approximate reconstruction."""
    if P.partition.n_interior < 1:
        return 0.0
    a = P.tangents
    alpha = np.arctan2(
        np.linalg.norm(a[1:] - np.einsum("ij,ij->i", a[:-1], a[1:])[:, None] * a[:-1], axis=1),
        np.einsum("ij,ij->i", a[:-1], a[1:]),
    )
    lbar = P.dual_lengths
    ell = P.edge_lengths
    return 0.25 * ((alpha[0] / lbar[0]) ** 2 * ell[0] + (alpha[-1] / lbar[-1]) ** 2 * ell[-1])


def _g(theta):
    """``tan(theta/2) / theta`` and ``g'(theta) / sin(theta)``."""
    small = theta < 1e-3
    th = np.where(small, 1.0, theta)
    g = np.where(small, 0.5 + theta**2 / 24, np.tan(th / 2) / th)
    dg = (th / (2 * np.cos(th / 2) ** 2) - np.tan(th / 2)) / th**2
    h = np.where(small, 1.0 / 12 + 11 * theta**2 / 360, dg / np.sin(th))
    return g, h


class _SmoothSystem:
    """Augmented boundary system over ``(x0, tangents, z0, z1)`` for a fixed breakpoint set."""

    def __init__(self, gamma: arc.ArcSpline, bd: BoundaryData):
        self.s = gamma.breakpoints
        self.m = gamma.m
        self.J = gamma.n_segments
        self.bd = bd

    def pack(self, gamma, z0=0.0, z1=0.0):
        return np.concatenate([gamma.x0, gamma.tangents.ravel(), [z0, z1]])

    def unpack(self, x):
        m = self.m
        x0 = x[:m]
        t = x[m:m + (self.J + 1) * m].reshape(self.J + 1, m)
        return x0, t, x[-2], x[-1]

    def curve(self, x):
        x0, t, _, _ = self.unpack(x)
        return arc.ArcSpline(x0, self.s, t / np.linalg.norm(t, axis=1)[:, None])

    def residual(self, x):
        bd = self.bd
        x0, t, z0, z1 = self.unpack(x)
        g = self.curve(x)
        return np.concatenate(
            [x0 - bd.p0, g.nodes[-1] - bd.pL, math.exp(z0) * t[0] - bd.N0, math.exp(z1) * t[-1] - bd.NL]
        )

    def jacobian(self, x):
        m, J = self.m, self.J
        x0, t, z0, z1 = self.unpack(x)
        a, b = t[:-1], t[1:]
        c = np.clip(np.einsum("ij,ij->i", a, b), -1.0, 1.0)
        theta = np.arctan2(np.linalg.norm(b - c[:, None] * a, axis=1), c)
        g, h = _g(theta)
        delta = np.diff(self.s)
        I = np.eye(m)
        A = np.zeros((4 * m, m + (J + 1) * m + 2))
        A[:m, :m] = I
        A[m:2 * m, :m] = I
        for j in range(J):
            Pa = I - np.outer(a[j], a[j])
            Pb = I - np.outer(b[j], b[j])
            apb = a[j] + b[j]
            da = delta[j] * (g[j] * Pa - h[j] * np.outer(apb, b[j]) @ Pa)
            db = delta[j] * (g[j] * Pb - h[j] * np.outer(apb, a[j]) @ Pb)
            A[m:2 * m, m + j * m:m + (j + 1) * m] += da
            A[m:2 * m, m + (j + 1) * m:m + (j + 2) * m] += db
        e0, e1 = math.exp(z0), math.exp(z1)
        A[2 * m:3 * m, m:2 * m] = e0 * (I - np.outer(t[0], t[0]))
        A[2 * m:3 * m, -2] = e0 * t[0]
        A[3 * m:, m + J * m:m + (J + 1) * m] = e1 * (I - np.outer(t[-1], t[-1]))
        A[3 * m:, -1] = e1 * t[-1]
        return A

    def differential(self, x, u):
        return self.jacobian(x) @ u

    def right_inverse(self, x, w):
        """B_gamma based step, corrected by a minimum-norm least-squares solve."""
        m = self.m
        x0, t, z0, z1 = self.unpack(x)
        gamma = self.curve(x)
        W = w.reshape(4, m)
        V0 = math.exp(-z0) * (W[2] - (t[0] @ W[2]) * t[0])
        V1 = math.exp(-z1) * (W[3] - (t[-1] @ W[3]) * t[-1])
        plan = arc.QuadraturePlan(self.s)
        field = arc.smooth_right_inverse_apply(gamma, arc.SmoothTangent(W[0], W[1], V0, V1), plan)
        # derivatives at the grid points (the breakpoints)
        idx = np.searchsorted(field.params, self.s)
        du = field.derivatives[idx]
        du = du - np.einsum("ij,ij->i", t, du)[:, None] * t
        u = np.concatenate(
            [W[0], du.ravel(), [math.exp(-z0) * (t[0] @ W[2]), math.exp(-z1) * (t[-1] @ W[3])]]
        )
        A = self.jacobian(x)
        u += np.linalg.lstsq(A, w - A @ u, rcond=None)[0]
        return u

    def retraction(self, x, u):
        y = x + u
        m = self.m
        t = y[m:m + (self.J + 1) * m].reshape(self.J + 1, m)
        y[m:m + (self.J + 1) * m] = (t / np.linalg.norm(t, axis=1)[:, None]).ravel()
        return y

    def sample_range(self, x, rng):
        # tangent blocks are unrestricted thanks to z0, z1
        return rng.standard_normal(4 * self.m)


def restore_smooth(gamma: arc.ArcSpline, bd: BoundaryData, tol: float = DEFAULT_TOL, max_iter: int = MAX_NEWTON):
    """Project an almost feasible arc spline onto the feasible set.

    Returns ``(curve, report)``; the report holds the initial violation, the
    Newton history, ``z0, z1`` and the W^{2,inf} distance moved.
    """
    if abs(gamma.length - bd.L) > 1e-12 * bd.L:
        raise InvalidArgument("arc spline length differs from L")
    sysm = _SmoothSystem(gamma, bd)
    prob = nk.NKProblem(
        residual=sysm.residual,
        differential=sysm.differential,
        right_inverse=sysm.right_inverse,
        retraction=sysm.retraction,
        sample_range=sysm.sample_range,
    )
    x0 = sysm.pack(gamma)
    violation = float(np.linalg.norm(sysm.residual(x0)))
    x, rep = nk.solve(prob, x0, tol, max_iter=max_iter)
    out = gamma if rep.iterations == 0 else sysm.curve(x)
    _, _, z0, z1 = sysm.unpack(x)
    report = {
        "violation": violation,
        "admissible": violation <= default_epsilon(bd),
        "feasibility_residual": rep.residual_norms[-1],
        "z0": float(z0),
        "z1": float(z1),
        "proximity_w2inf": 0.0 if out is gamma else metrics.dist_w2inf(out, gamma),
        "newton": rep.to_dict(),
    }
    return out, report


def _curvature_gap(gamma: arc.ArcSpline, P: Polygon) -> float:
    """sup over dual edges of ``|kappa_gamma - kappa_P(i)|``."""
    T = P.partition
    if T.n_interior < 1:
        return 0.0
    kappa = curvature(P).values
    mids = T.midpoints
    frac = np.linspace(0, 1, 9)
    t = mids[:-1, None] + np.diff(mids)[:, None] * frac
    side = np.ones_like(t)
    side[:, -1] = -1
    k = gamma.acceleration(t.ravel(), side.ravel()).reshape(t.shape + (P.m,))
    return float(np.max(np.linalg.norm(k - kappa[:, None, :], axis=2)))


def reconstruct(P: Polygon, bd: BoundaryData, tol: float = DEFAULT_TOL):
    """Feasible arc spline near a feasible polygon; returns ``(curve, report)``."""
    approx = approx_reconstruct(P)
    gamma, rrep = restore_smooth(approx, bd, tol)
    E_T = bending_energy(P)
    report = {
        "h": P.partition.h,
        "energy": arc.bending_energy(gamma),
        "energy_discrete": E_T,
        "energy_gap": abs(arc.bending_energy(gamma) - E_T),
        "w1inf_gap": metrics.dist_w1inf(gamma, piecewise_linear_interpolant(P)),
        "curvature_gap": _curvature_gap(gamma, P),
        "tv3": arc.tv3_seminorm(gamma),
        "feasibility_residual": rrep["feasibility_residual"],
        "restoration": rrep,
    }
    return gamma, report


# --- sampling -------------------------------------------------------------


def approx_sample(gamma, T: Partition) -> Polygon:
    """Sample a unit-speed curve at the vertices, then stretch edges to ``l_0``."""
    if abs(gamma.length - T.length) > 1e-12 * T.length:
        raise InvalidArgument("partition does not cover the curve's domain")
    Q = gamma.position(T.vertex_params)
    dQ = np.diff(Q, axis=0)
    lq = np.linalg.norm(dQ, axis=1)
    if np.any(lq == 0):
        raise ImmersionViolation("coincident samples; curve not immersed at this scale")
    steps = dQ * (T.edge_lengths / lq)[:, None]
    P = np.vstack([Q[0], Q[0] + np.cumsum(steps, axis=0)])
    return Polygon(T, P)


class _DiscreteSystem:
    """Augmented system ``F_T(P, z0, z1)`` on flattened positions plus ``z0, z1``."""

    def __init__(self, T: Partition, m: int, bd: BoundaryData):
        self.T = T
        self.m = m
        self.bd = bd

    def polygon(self, x):
        return Polygon(self.T, x[:-2].reshape(-1, self.m))

    def residual(self, x):
        P = self.polygon(x)
        phi = constraint_map(P, self.bd)
        tau = P.tangents
        return np.concatenate(
            [
                phi.pos0,
                phi.posL,
                math.exp(x[-2]) * tau[0] - self.bd.N0,
                math.exp(x[-1]) * tau[-1] - self.bd.NL,
                phi.strain,
            ]
        )

    def differential(self, x, u):
        P = self.polygon(x)
        m = self.m
        U = u[:-2].reshape(-1, m)
        tau = P.tangents
        du = np.diff(U, axis=0) / P.edge_lengths[:, None]
        e0, e1 = math.exp(x[-2]), math.exp(x[-1])
        t0 = e0 * (du[0] - (tau[0] @ du[0]) * tau[0] + u[-2] * tau[0])
        t1 = e1 * (du[-1] - (tau[-1] @ du[-1]) * tau[-1] + u[-1] * tau[-1])
        return np.concatenate([U[0], U[-1], t0, t1, np.einsum("ij,ij->i", tau, du)])

    def right_inverse(self, x, w):
        P = self.polygon(x)
        m = self.m
        tau = P.tangents
        cv = ConstraintValue.from_vector(w, m)
        e0, e1 = math.exp(-x[-2]), math.exp(-x[-1])
        V0 = e0 * (cv.tan0 - (tau[0] @ cv.tan0) * tau[0])
        V1 = e1 * (cv.tanL - (tau[-1] @ cv.tanL) * tau[-1])
        u = right_inverse_apply(P, ConstraintValue(cv.pos0, cv.posL, V0, V1, cv.strain))
        return np.concatenate([u.ravel(), [e0 * (tau[0] @ cv.tan0), e1 * (tau[-1] @ cv.tanL)]])

    def sample_range(self, x, rng):
        return rng.standard_normal(4 * self.m + self.T.n_edges)


def tv3_distance(P: Polygon, Q: Polygon) -> float:
    """Reference-weighted tv^3 norm of the vertex displacement ``Q - P``."""
    w = MetricWeights.reference(P.partition)
    return sobolev_norm(VertexField(P.partition, Q.positions - P.positions), w, 3, 1.0)


def restore_discrete(P: Polygon, bd: BoundaryData, tol: float = DEFAULT_TOL, max_iter: int = MAX_NEWTON):
    """Project an almost feasible polygon onto the discrete feasible set.

    Returns ``(polygon, report)``; the report holds the tv^2 violation, the
    tv^3 proximity, the energy change and the Newton history.
    """
    if bd.m != P.m:
        raise InvalidArgument("dimension mismatch")
    sysm = _DiscreteSystem(P.partition, P.m, bd)
    prob = nk.NKProblem(
        residual=sysm.residual,
        differential=sysm.differential,
        right_inverse=sysm.right_inverse,
        range_norm=lambda v: float(np.max(np.abs(v))),
        sample_range=sysm.sample_range,
    )
    x0 = np.concatenate([P.positions.ravel(), [0.0, 0.0]])
    violation = constraint_map(P, bd).tv2_norm(P.partition)
    x, rep = nk.solve(prob, x0, tol, max_iter=max_iter)
    out = P if rep.iterations == 0 else sysm.polygon(x)
    report = {
        "violation_tv2": violation,
        "admissible": violation <= default_epsilon(bd),
        "proximity_tv3": tv3_distance(P, out),
        "energy_change": abs(bending_energy(out) - bending_energy(P)),
        "feasibility_residual": rep.residual_norms[-1],
        "z0": float(x[-2]),
        "z1": float(x[-1]),
        "newton": rep.to_dict(),
    }
    return out, report


def _curve_energy(gamma):
    if isinstance(gamma, arc.ArcSpline):
        return arc.bending_energy(gamma)
    return float(gamma.energy())


def sample(gamma, bd: BoundaryData, T: Partition, tol: float = DEFAULT_TOL, priors: PriorBounds | None = None):
    """Feasible polygon near a feasible smooth curve; returns ``(polygon, report)``."""
    approx = approx_sample(gamma, T)
    P, rrep = restore_discrete(approx, bd, tol)
    E = _curve_energy(gamma)
    report = {
        "h": T.h,
        "energy": bending_energy(P),
        "energy_smooth": E,
        "energy_gap": abs(bending_energy(P) - E),
        "w1inf_gap": metrics.dist_w1inf(gamma, piecewise_linear_interpolant(P)),
        "curvature_gap": float(
            np.max(np.linalg.norm(curvature(P).values - gamma.acceleration(T.vertex_params[1:-1]), axis=1))
        )
        if T.n_interior
        else 0.0,
        "feasibility_residual": rrep["feasibility_residual"],
        "restoration": rrep,
    }
    if priors is not None and T.n_interior >= 2:
        report["in_priors"] = bool(prior_membership(P, priors))
        report.update({f"reg_{k}": v for k, v in regularity_seminorms(P).items()})
    return P, report


def roundtrip_gap(gamma, bd: BoundaryData, T: Partition, tol: float = DEFAULT_TOL) -> float:
    """W^{2,inf} distance between ``gamma`` and its sample-then-reconstruct image."""
    P, _ = sample(gamma, bd, T, tol)
    R, _ = reconstruct(P, bd, tol)
    return metrics.dist_w2inf(gamma, R)
