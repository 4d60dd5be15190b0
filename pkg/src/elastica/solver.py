"""Minimization of the discrete bending energy over the feasible polygons.

Each outer step solves a sparse KKT system for a Gauss-Newton direction in the
kernel of the linearized constraints, backtracks on the energy with a barrier
against fold-back angles, and maps the trial point back onto the feasible set
with ``restore_discrete``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import ElasticaError, InvalidArgument, LineSearchFailure, NonConvergence, UndefinedRequest
from .mesh import Partition, almost_uniformity_defect
from .polygon import (
    BoundaryData,
    ConstraintValue,
    Polygon,
    PriorBounds,
    bending_energy,
    bending_energy_gradient,
    constraint_jacobian_apply,
    constraint_map,
    prior_membership,
    regularity_seminorms,
    right_inverse_apply,
)
from .transfer import restore_discrete

__all__ = [
    "SolveOptions",
    "KKTReport",
    "MinimizerSet",
    "initial_guess",
    "minimize",
    "lagrange_multipliers",
    "delta_minimizer_set",
    "regularity_report",
]

FEAS_TOL = 1e-10
# relative energy changes below this are treated as rounding noise
ROUNDING = 1e-12


@dataclass
class SolveOptions:
    max_iter: int = 300
    kkt_tol: float = 1e-7
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 30
    starts: int = 4
    seed: int = 0
    barrier: float = 1e-3
    restore_tol: float = 1e-12
    threads: int = 1
    trace: object = None  # path or writable file for JSON-lines traces

    def __post_init__(self):
        if not (self.kkt_tol > 0 and self.restore_tol > 0 and self.barrier > 0):
            raise InvalidArgument("tolerances must be positive")
        if self.max_iter < 0 or self.starts < 1:
            raise InvalidArgument("need max_iter >= 0 and starts >= 1")
        if not (0 < self.backtrack < 1 and 0 < self.armijo < 1):
            raise InvalidArgument("line-search parameters must lie in (0, 1)")


@dataclass
class KKTReport:
    multipliers: np.ndarray  # per-edge strain multipliers
    mu00: np.ndarray
    mu10: np.ndarray
    mu01: np.ndarray
    mu11: np.ndarray
    kkt_residual: float
    energy: float
    feasibility: float
    iterations: int = 0
    energies: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "multipliers": self.multipliers.tolist(),
            "mu00": self.mu00.tolist(),
            "mu10": self.mu10.tolist(),
            "mu01": self.mu01.tolist(),
            "mu11": self.mu11.tolist(),
            "kkt_residual": self.kkt_residual,
            "energy": self.energy,
            "feasibility": self.feasibility,
            "iterations": self.iterations,
        }


@dataclass
class MinimizerSet:
    members: list
    energies: list
    delta: float
    best_energy: float
    n_minimizers: int = 0

    def __len__(self):
        return len(self.members)


# --- initial guess --------------------------------------------------------


class _HermiteArc:
    """Cubic Hermite curve with end tangents ``c N0, c NL``, sampled densely by arc length."""

    def __init__(self, bd: BoundaryData, c: float, samples: int = 4001):
        u = np.linspace(0.0, 1.0, samples)[:, None]
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        self.x = h00 * bd.p0 + h10 * c * bd.N0 + h01 * bd.pL + h11 * c * bd.NL
        seg = np.linalg.norm(np.diff(self.x, axis=0), axis=1)
        self.s = np.concatenate(([0.0], np.cumsum(seg)))
        self.length = float(self.s[-1])

    def at_fraction(self, frac):
        s = np.asarray(frac) * self.length
        return np.column_stack([np.interp(s, self.s, self.x[:, k]) for k in range(self.x.shape[1])])


def _hermite_for_length(bd: BoundaryData) -> _HermiteArc:
    lo, hi = 0.0, 1.0
    while _HermiteArc(bd, hi).length < bd.L:
        hi *= 2.0
        if hi > 1e6:
            raise InvalidArgument("cannot build an initial curve of length L")
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if _HermiteArc(bd, mid).length < bd.L:
            lo = mid
        else:
            hi = mid
    return _HermiteArc(bd, hi)


def initial_guess(bd: BoundaryData, T: Partition, tol: float = 1e-12) -> Polygon:
    """Deterministic feasible polygon: sample a length-matched Hermite curve, then restore."""
    if abs(T.length - bd.L) > 1e-12 * bd.L:
        raise InvalidArgument("partition length differs from L")
    if T.n_edges < 3:
        raise InvalidArgument("need at least three edges")
    Q = _hermite_for_length(bd).at_fraction(T.vertex_params / T.length)
    dQ = np.diff(Q, axis=0)
    steps = dQ * (T.edge_lengths / np.linalg.norm(dQ, axis=1))[:, None]
    P = Polygon(T, np.vstack([Q[0], Q[0] + np.cumsum(steps, axis=0)]))
    try:
        P, _ = restore_discrete(P, bd, tol, max_iter=60)
    except ElasticaError as exc:
        raise NonConvergence(f"initial guess could not be restored: {exc}") from exc
    return P


# --- sparse linear algebra ------------------------------------------------


def _normal_basis(t):
    """Orthonormal basis of the complement of unit ``t`` as rows."""
    _, _, vt = np.linalg.svd(t[None, :])
    return vt[1:]


def _constraint_matrix(P: Polygon) -> sp.csr_matrix:
    """Differential of the constraint map with tangent blocks written in a normal basis."""
    m, n = P.m, P.n_edges
    tau = P.tangents
    ell = P.edge_lengths
    rows, cols, vals = [], [], []

    def put(r, vertex, block):
        for a in range(block.shape[0]):
            for b in range(m):
                if block[a, b] != 0:
                    rows.append(r + a)
                    cols.append(vertex * m + b)
                    vals.append(block[a, b])

    I = np.eye(m)
    put(0, 0, I)
    put(m, n, I)
    r = 2 * m
    for edge, t in ((0, tau[0]), (n - 1, tau[-1])):
        B = _normal_basis(t) / ell[edge]
        put(r, edge + 1, B)
        put(r, edge, -B)
        r += m - 1
    # strain rows: <tau_I, u_{I+1} - u_I> / l_I
    idx = np.arange(n)
    for b in range(m):
        w = tau[:, b] / ell
        rows += list(r + idx) * 2
        cols += list((idx + 1) * m + b) + list(idx * m + b)
        vals += list(w) + list(-w)
    k = r + n
    return sp.csr_matrix((vals, (rows, cols)), shape=(k, (n + 1) * m))


def _gauss_newton_matrix(P: Polygon) -> sp.csr_matrix:
    """``J^T J`` for the residuals ``f(alpha) (tau_next - tau_prev) / sqrt(lbar)``."""
    m, n = P.m, P.n_edges
    tau = P.tangents
    ell = P.edge_lengths
    lbar = P.dual_lengths
    dot = np.clip(np.einsum("ij,ij->i", tau[:-1], tau[1:]), -1, 1)
    alpha = np.arctan2(np.linalg.norm(tau[1:] - dot[:, None] * tau[:-1], axis=1), dot)
    f = np.ones_like(alpha)
    big = alpha > 1e-6
    f[big] = alpha[big] / (2 * np.sin(alpha[big] / 2))
    I = np.eye(m)
    # d tau_I = pr_I (u_{I+1} - u_I) / l_I
    proj = (I[None] - tau[:, :, None] * tau[:, None, :]) / ell[:, None, None]
    rows, cols, vals = [], [], []
    for i in range(1, n):
        c = f[i - 1] / math.sqrt(lbar[i - 1])
        nxt, prv = c * proj[i], c * proj[i - 1]
        for vertex, block in ((i + 1, nxt), (i, -nxt - prv), (i - 1, prv)):
            for a in range(m):
                for b in range(m):
                    rows.append((i - 1) * m + a)
                    cols.append(vertex * m + b)
                    vals.append(block[a, b])
    J = sp.csr_matrix((vals, (rows, cols)), shape=((n - 1) * m, (n + 1) * m))
    return (J.T @ J).tocsr()


def _direction(P: Polygon, g: np.ndarray, residual: np.ndarray) -> np.ndarray:
    A = _constraint_matrix(P)
    H = _gauss_newton_matrix(P)
    N = H.shape[0]
    eps = 1e-10 * max(1.0, H.diagonal().max())
    H = H + eps * sp.identity(N)
    K = sp.bmat([[H, A.T], [A, None]], format="csc")
    rhs = np.concatenate([-g, -residual])
    sol = spsolve(K, rhs)
    return sol[:N]


def _reduced_residual(P: Polygon, bd: BoundaryData) -> np.ndarray:
    """Constraint residual in the row layout of ``_constraint_matrix``."""
    phi = constraint_map(P, bd)
    tan = []
    for t_edge, N in ((P.tangents[0], bd.N0), (P.tangents[-1], bd.NL)):
        # first-order tangent error, expressed in the normal basis of the current tangent
        tan.append(_normal_basis(t_edge) @ (t_edge - N))
    return np.concatenate([phi.pos0, phi.posL, *tan, phi.strain])


# --- multipliers ----------------------------------------------------------


def lagrange_multipliers(P: Polygon, bd: BoundaryData) -> KKTReport:
    """Multipliers ``-B_P^T grad E`` and the KKT residual ``|grad E + DPhi^T mu|``."""
    g = bending_energy_gradient(P).ravel()
    m, n = P.m, P.n_edges
    k = 4 * m + n
    mu = np.empty(k)
    e = np.zeros(k)
    for j in range(k):
        e[j] = 1.0
        mu[j] = -(right_inverse_apply(P, ConstraintValue.from_vector(e, m)).ravel() @ g)
        e[j] = 0.0
    # DPhi^T mu assembled edge by edge
    tau = P.tangents
    ell = P.edge_lengths
    cv = ConstraintValue.from_vector(mu, m)
    adj = np.zeros((n + 1, m))
    adj[0] += cv.pos0
    adj[-1] += cv.posL
    edge_force = cv.strain[:, None] * tau / ell[:, None]
    t0 = (cv.tan0 - (tau[0] @ cv.tan0) * tau[0]) / ell[0]
    t1 = (cv.tanL - (tau[-1] @ cv.tanL) * tau[-1]) / ell[-1]
    edge_force[0] += t0
    edge_force[-1] += t1
    adj[1:] += edge_force
    adj[:-1] -= edge_force
    resid = float(np.linalg.norm(g + adj.ravel()))
    return KKTReport(
        multipliers=cv.strain,
        mu00=cv.pos0,
        mu10=cv.posL,
        mu01=cv.tan0,
        mu11=cv.tanL,
        kkt_residual=resid,
        energy=bending_energy(P),
        feasibility=constraint_map(P, bd).max_norm(),
    )


# --- minimization ---------------------------------------------------------


def _max_angle(P):
    t = P.tangents
    dot = np.clip(np.einsum("ij,ij->i", t[:-1], t[1:]), -1, 1)
    return float(np.max(np.arctan2(np.linalg.norm(t[1:] - dot[:, None] * t[:-1], axis=1), dot)))


class _Trace:
    def __init__(self, target):
        self.fh = None
        self.own = False
        if target is None:
            return
        if hasattr(target, "write"):
            self.fh = target
        else:
            self.fh = open(target, "a", encoding="utf-8")
            self.own = True

    def log(self, **row):
        if self.fh is not None:
            self.fh.write(json.dumps(row) + "\n")

    def close(self):
        if self.own:
            self.fh.close()


def minimize(P0: Polygon, bd: BoundaryData, opts: SolveOptions | None = None):
    """Feasible descent from ``P0``; returns ``(polygon, KKTReport)``."""
    opts = opts or SolveOptions()
    if constraint_map(P0, bd).max_norm() > 1e-8:
        raise InvalidArgument("starting polygon is not feasible")
    P = P0
    if constraint_map(P, bd).max_norm() > FEAS_TOL:
        P, _ = restore_discrete(P, bd, opts.restore_tol)
    E = bending_energy(P)
    energies = [E]
    trace = _Trace(opts.trace)
    limit = math.pi - opts.barrier
    try:
        for it in range(opts.max_iter + 1):
            rep = lagrange_multipliers(P, bd)
            trace.log(iteration=it, energy=E, kkt=rep.kkt_residual, feasibility=rep.feasibility)
            if rep.kkt_residual <= opts.kkt_tol:
                rep.iterations = it
                rep.energies = energies
                return P, rep
            if it == opts.max_iter:
                break
            g = bending_energy_gradient(P).ravel()
            d = _direction(P, g, _reduced_residual(P, bd))
            slope = float(g @ d)
            t = 1.0
            accepted = False
            for _ in range(opts.max_backtracks if slope < 0 else 0):
                try:
                    trial = Polygon(P.partition, (P.positions.ravel() + t * d).reshape(P.positions.shape))
                    if _max_angle(trial) < limit:
                        Q, _ = restore_discrete(trial, bd, opts.restore_tol, max_iter=20)
                        if _max_angle(Q) < limit:
                            EQ = bending_energy(Q)
                            if EQ <= E + opts.armijo * t * slope:
                                accepted = True
                                break
                except ElasticaError:
                    pass
                t *= opts.backtrack
            if not accepted:
                # energy is flat to rounding: accept steps that shrink the KKT residual
                t = 1.0
                for _ in range(8):
                    try:
                        trial = Polygon(P.partition, (P.positions.ravel() + t * d).reshape(P.positions.shape))
                        Q, _ = restore_discrete(trial, bd, opts.restore_tol, max_iter=20)
                        EQ = bending_energy(Q)
                        if EQ <= E + ROUNDING * max(1.0, E) and _max_angle(Q) < limit:
                            if lagrange_multipliers(Q, bd).kkt_residual < rep.kkt_residual:
                                accepted = True
                                break
                    except ElasticaError:
                        pass
                    t *= 0.5
            if not accepted:
                raise LineSearchFailure(f"line search failed at iteration {it}", rep)
            P, E = Q, EQ
            energies.append(E)
    finally:
        trace.close()
    rep.iterations = opts.max_iter
    rep.energies = energies
    raise NonConvergence(f"no KKT convergence in {opts.max_iter} iterations", rep)


# --- delta-minimizer sets -------------------------------------------------


def _smooth_perturbation(T: Partition, m: int, rng, modes: int = 4) -> np.ndarray:
    """Random low-frequency displacement vanishing at both ends, unit sup norm."""
    t = T.vertex_params / T.length
    u = np.zeros((t.size, m))
    for k in range(1, modes + 1):
        u += np.outer(np.sin(k * math.pi * t), rng.standard_normal(m)) / k**2
    return u / np.max(np.linalg.norm(u, axis=1))


def _perturbed_start(P: Polygon, bd: BoundaryData, rng, amplitude: float, tol: float):
    u = _smooth_perturbation(P.partition, P.m, rng)
    Q = Polygon(P.partition, P.positions + amplitude * u)
    Q, _ = restore_discrete(Q, bd, tol, max_iter=40)
    return Q


def _order_key(P: Polygon, E: float, bd: BoundaryData):
    return (round(E, 10), tuple(np.round(P.positions[1] - bd.p0, 10)))


def delta_minimizer_set(
    bd: BoundaryData,
    T: Partition,
    delta: float,
    opts: SolveOptions | None = None,
    priors: PriorBounds | None = None,
    perturbations: int = 6,
    amplitude: float | None = None,
    extra_starts=(),
) -> MinimizerSet:
    """Multi-start minimizers plus restored perturbations whose energy is within ``delta`` of the best.

    Starts are the deterministic initial guess, ``opts.starts - 1`` restored
    random deformations of it and any feasible polygons in ``extra_starts``.
    Perturbed members use smooth displacements of size ``amplitude`` (default
    ``h``).
    """
    if delta < 0:
        raise InvalidArgument("delta must be nonnegative")
    opts = opts or SolveOptions()
    priors = priors or PriorBounds()
    rng = np.random.default_rng(opts.seed)
    base = initial_guess(bd, T, opts.restore_tol)
    # independent start data drawn up front so the merge is deterministic
    seeds = rng.integers(0, 2**32, size=opts.starts)
    extra = list(extra_starts)
    run_opts = replace(opts, trace=None)  # parallel runs must not share a trace file
    jobs = opts.starts + len(extra)

    def run(j):
        try:
            if j >= opts.starts:
                start = extra[j - opts.starts]
            elif j == 0:
                start = base
            else:
                r = np.random.default_rng(seeds[j])
                start = _perturbed_start(base, bd, r, 0.2 * bd.L, opts.restore_tol)
            P, rep = minimize(start, bd, run_opts)
            return P, rep.energy
        except ElasticaError:
            return None

    if opts.threads > 1:
        with ThreadPoolExecutor(opts.threads) as ex:
            results = list(ex.map(run, range(jobs)))
    else:
        results = [run(j) for j in range(jobs)]
    found = [r for r in results if r is not None]
    if not found:
        return MinimizerSet([], [], delta, math.nan, 0)
    best = min(E for _, E in found)
    slack = 1e-9 * max(1.0, abs(best))

    minimizers = []
    for P, E in sorted(found, key=lambda r: _order_key(r[0], r[1], bd)):
        if any(np.max(np.abs(P.positions - Q.positions)) < 1e-6 for Q, _ in minimizers):
            continue
        minimizers.append((P, E))
    members = [(P, E) for P, E in minimizers if E <= best + delta + slack]
    n_min = len(members)

    if delta > 0:
        amp = amplitude if amplitude is not None else T.h
        for P, E in list(members[:n_min]):
            for _ in range(perturbations):
                try:
                    Q = _perturbed_start(P, bd, rng, amp, opts.restore_tol)
                except ElasticaError:
                    continue
                EQ = bending_energy(Q)
                if EQ <= best + delta and constraint_map(Q, bd).max_norm() <= FEAS_TOL:
                    members.append((Q, EQ))

    if T.n_interior >= 2:
        members = [(P, E) for P, E in members if prior_membership(P, priors)]
    members.sort(key=lambda r: _order_key(r[0], r[1], bd))
    return MinimizerSet([P for P, _ in members], [E for _, E in members], delta, best, n_min)


def regularity_report(P: Polygon) -> dict:
    out = dict(regularity_seminorms(P))
    try:
        out["almost_uniform_defect"] = almost_uniformity_defect(P.partition)
    except UndefinedRequest:
        out["almost_uniform_defect"] = math.nan
    return out
