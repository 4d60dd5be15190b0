"""Ground truth: Jacobi elliptic functions, analytic planar elastica, a toy potential.

Planar elastica are written through their tangent angle.  The inflectional
family uses ``theta = theta0 + 2 asin(k sn(w (s - s0))) - (same at s = 0)``
with curvature ``2 k w cn``; the orbit-like family uses
``theta = theta0 + 2 am(W (s - s0)) - (same at s = 0)`` with curvature
``2 W dn``.  Both satisfy the pendulum equation ``theta'' + c sin(theta - psi) = 0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from .arcspline import dense_polyline_dict, gauss_legendre
from .errors import InvalidArgument, UndefinedRequest, UnsupportedDimension
from .polygon import BoundaryData

__all__ = [
    "jacobi_sn_cn_dn",
    "jacobi_am",
    "complete_K",
    "EllipticParams",
    "ReferenceCurve",
    "elastica_ode_residual",
    "shoot_clamped_elastica",
    "ToyPotentialSpec",
    "tilted_potential",
    "mexican_hat_almost_min",
]

DENSE_SAMPLES = 4096
SHOOT_TOL = 1e-10
SHOOT_ACCEPT = 1e-8
POLISH_PER_FAMILY = 16
_EPS = np.finfo(float).eps


# --- elliptic functions ---------------------------------------------------


def _check_modulus(k):
    if not 0.0 <= k <= 1.0:
        raise InvalidArgument("modulus k must lie in [0, 1]")


def _landen(u, k):
    """Amplitude and the first ascending phase by the descending Landen (AGM) scheme."""
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    a, b, c = [1.0], [kp], [k]
    while abs(c[-1]) > _EPS * a[-1] and len(a) < 30:
        an, bn = a[-1], b[-1]
        a.append(0.5 * (an + bn))
        b.append(math.sqrt(an * bn))
        c.append(0.5 * (an - bn))
    N = len(a) - 1
    phi = (2.0**N) * a[-1] * u
    prev = phi
    for n in range(N, 0, -1):
        prev = phi
        phi = 0.5 * (phi + np.arcsin(c[n] / a[n] * np.sin(phi)))
    return phi, prev


def jacobi_am(u, k: float):
    """Jacobi amplitude, continuous in ``u``."""
    _check_modulus(k)
    u = np.asarray(u, dtype=float)
    if k == 0.0:
        return u.copy()
    if k == 1.0:
        return 2.0 * np.arctan(np.tanh(0.5 * u))
    return _landen(u, k)[0]


def jacobi_sn_cn_dn(u, k: float):
    """``(sn, cn, dn)`` of ``u`` with modulus ``k``."""
    _check_modulus(k)
    u = np.asarray(u, dtype=float)
    if k == 0.0:
        return np.sin(u), np.cos(u), np.ones_like(u)
    if k == 1.0:
        sech = 1.0 / np.cosh(u)
        return np.tanh(u), sech, sech.copy()
    phi0, phi1 = _landen(u, k)
    sn, cn = np.sin(phi0), np.cos(phi0)
    if np.ndim(phi0) == 0 and phi0 == phi1:
        return sn, cn, np.sqrt(1 - k * k * sn * sn)
    dn = cn / np.cos(phi1 - phi0)
    # the ratio form is exact but degenerates where cn vanishes
    bad = np.abs(np.cos(phi1 - phi0)) < 1e-8
    dn = np.where(bad, np.sqrt(np.maximum(0.0, 1.0 - k * k * sn * sn)), dn)
    return sn, cn, dn


def complete_K(k: float) -> float:
    """Complete elliptic integral of the first kind, ``pi / (2 AGM(1, k'))``."""
    _check_modulus(k)
    if k == 1.0:
        raise UndefinedRequest("K(k) diverges at k = 1")
    a, b = 1.0, math.sqrt((1.0 - k) * (1.0 + k))
    for _ in range(30):
        if abs(a - b) <= 2 * _EPS * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (a + b)


# --- analytic elastica ----------------------------------------------------


@dataclass(frozen=True)
class EllipticParams:
    """Planar elastica data; ``family`` is ``"cn"`` (inflectional) or ``"dn"`` (orbit-like)."""

    family: str
    k: float
    omega: float
    s0: float
    rotation: float
    translation: tuple
    # +1 turns counterclockwise, -1 clockwise; only the dn family needs -1
    orientation: int = 1

    def __post_init__(self):
        if self.family not in ("cn", "dn"):
            raise InvalidArgument("family must be 'cn' or 'dn'")
        _check_modulus(self.k)
        if not self.omega > 0:
            raise InvalidArgument("omega must be positive")
        if self.orientation not in (1, -1):
            raise InvalidArgument("orientation must be +1 or -1")

    @classmethod
    def signed(cls, family, k, w, s0, rotation, translation):
        """Build from a signed frequency ``w``; the sign becomes the orientation."""
        return cls(family, k, abs(w), s0, rotation, translation, 1 if w >= 0 else -1)

    def theta(self, s):
        s = np.asarray(s, dtype=float)
        k, w, s0 = self.k, self.orientation * self.omega, self.s0
        if self.family == "cn":
            sn0 = jacobi_sn_cn_dn(-w * s0, k)[0]
            sn = jacobi_sn_cn_dn(w * (s - s0), k)[0]
            return self.rotation + 2.0 * (np.arcsin(k * sn) - np.arcsin(k * sn0))
        return self.rotation + 2.0 * (jacobi_am(w * (s - s0), k) - jacobi_am(-w * s0, k))

    def kappa(self, s):
        """Signed curvature and its arc-length derivative."""
        s = np.asarray(s, dtype=float)
        k, w = self.k, self.orientation * self.omega
        sn, cn, dn = jacobi_sn_cn_dn(w * (s - self.s0), k)
        if self.family == "cn":
            return 2 * k * w * cn, -2 * k * w * w * sn * dn
        return 2 * w * dn, -2 * w * w * k * k * sn * cn

    def multiplier(self) -> np.ndarray:
        """Constant vector ``mu`` of the tangent ODE ``tau'' = mu - <tau, mu> tau - |tau'|^2 tau``."""
        c = self.omega**2 * (1.0 if self.family == "cn" else self.k**2)
        if c == 0:
            return np.zeros(2)
        # theta'' = <n, mu> = -c sin(theta - psi), and theta(s0) = psi in both families
        psi = float(self.theta(np.array([self.s0]))[0])
        return c * np.array([math.cos(psi), math.sin(psi)])

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "k": self.k,
            "omega": self.omega,
            "orientation": self.orientation,
            "s0": self.s0,
            "rotation": self.rotation,
            "translation": list(self.translation),
        }


def _integrate_positions(params, s_edges, p0):
    """Positions at ``s_edges`` by cumulative order-8 Gauss quadrature between them."""
    t, w = gauss_legendre(s_edges)
    th = params.theta(t)
    v = np.column_stack([np.cos(th), np.sin(th)]) * w[:, None]
    steps = v.reshape(len(s_edges) - 1, -1, 2).sum(axis=1)
    return np.asarray(p0, float) + np.vstack([np.zeros(2), np.cumsum(steps, axis=0)])


class ReferenceCurve:
    """Dense unit-speed reference curve.

    Tangent and curvature are evaluated exactly from the tangent angle;
    positions use cubic Hermite interpolation between ``DENSE_SAMPLES`` samples.
    """

    def __init__(self, params: EllipticParams, length: float, samples: int = DENSE_SAMPLES):
        self.params = params
        self.length = float(length)
        self.samples = np.linspace(0.0, self.length, samples)
        self.samples[-1] = self.length
        self.points = _integrate_positions(params, self.samples, params.translation)
        th = params.theta(self.samples)
        kap, dkap = params.kappa(self.samples)
        self._tangents = np.column_stack([np.cos(th), np.sin(th)])
        self._kmax = float(np.max(np.abs(kap)))
        self._dkmax = float(np.max(np.abs(dkap)))
        self.knots = np.array([0.0, self.length])

    def _check(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.length):
            raise InvalidArgument("parameter outside [0, L]")
        return t

    def position(self, t, side=1):
        t = self._check(t)
        s = self.samples
        j = np.clip(np.searchsorted(s, t, side="right") - 1, 0, s.size - 2)
        d = s[j + 1] - s[j]
        x = ((t - s[j]) / d)[:, None]
        h00 = 2 * x**3 - 3 * x**2 + 1
        h10 = x**3 - 2 * x**2 + x
        h01 = -2 * x**3 + 3 * x**2
        h11 = x**3 - x**2
        P, T = self.points, self._tangents
        return h00 * P[j] + h10 * d[:, None] * T[j] + h01 * P[j + 1] + h11 * d[:, None] * T[j + 1]

    def velocity(self, t, side=1):
        th = self.params.theta(self._check(t))
        return np.column_stack([np.cos(th), np.sin(th)])

    tangent = velocity

    def acceleration(self, t, side=1):
        t = self._check(t)
        th = self.params.theta(t)
        kap = self.params.kappa(t)[0]
        return kap[:, None] * np.column_stack([-np.sin(th), np.cos(th)])

    def signed_curvature(self, t):
        return self.params.kappa(self._check(t))[0]

    def segment_bounds(self):
        k = 1.05 * self._kmax + 1e-12
        return np.ones(1), np.array([k]), np.array([1.05 * self._dkmax + k * k])

    def energy(self) -> float:
        edges = np.linspace(0.0, self.length, 257)
        t, w = gauss_legendre(edges)
        return 0.5 * math.fsum(w * self.params.kappa(t)[0] ** 2)

    def to_polyline(self) -> dict:
        return dense_polyline_dict(self.samples, self.points, self._tangents)


def elastica_ode_residual(curve, mu=None, step: float = 1e-3) -> dict:
    """Max residual of ``tau'' = mu - tau <tau, mu> - tau |tau'|^2`` by finite differences.

    ``mu`` is fitted by linear least squares when not supplied.
    """
    L = float(curve.length)
    n = max(int(round(L / step)), 8)
    s = np.linspace(0.0, L, n + 1)
    h = s[1] - s[0]
    tau = curve.velocity(s)
    # fourth-order central stencils
    f2, f1, f0, g1, g2 = tau[4:], tau[3:-1], tau[2:-2], tau[1:-3], tau[:-4]
    d1 = (-f2 + 8 * f1 - 8 * g1 + g2) / (12 * h)
    d2 = (-f2 + 16 * f1 - 30 * f0 + 16 * g1 - g2) / (12 * h * h)
    t = f0
    m = t.shape[1]
    lhs = d2 + t * np.einsum("ij,ij->i", d1, d1)[:, None]
    # lhs = (I - t t^T) mu
    proj = np.eye(m)[None] - t[:, :, None] * t[:, None, :]
    if mu is None:
        mu = np.linalg.lstsq(proj.reshape(-1, m), lhs.ravel(), rcond=None)[0]
    mu = np.asarray(mu, dtype=float)
    res = lhs - np.einsum("ijk,k->ij", proj, mu)
    return {"residual": float(np.max(np.linalg.norm(res, axis=1))), "mu": mu}


def _shoot_residual(family, x, bd, theta0, quad):
    k, w, s0 = x
    if w == 0:
        w = 1e-300
    p = EllipticParams.signed(family, min(max(k, 0.0), 1.0), w, s0, theta0, tuple(bd.p0))
    t, wq = quad
    th = p.theta(t)
    end = bd.p0 + np.array([wq @ np.cos(th), wq @ np.sin(th)])
    thL = float(p.theta(np.array([bd.L]))[0])
    return np.concatenate([end - bd.pL, [math.cos(thL) - bd.NL[0], math.sin(thL) - bd.NL[1]]])


def _starts(family, L, total_turn):
    scale = max(abs(total_turn), 0.5) / L
    out = []
    for k in (0.05, 0.3, 0.6, 0.85, 0.97):
        for wmul in (0.25, 0.5, 1.0, 2.0):
            w = wmul * scale if family == "cn" else wmul * scale * 0.5
            K = complete_K(k)
            period = 4 * K / abs(w)
            for frac in (0.0, 0.25, 0.5, 0.75):
                out.append((k, w, frac * period))
                if family == "dn":
                    out.append((k, -w, frac * period))
    return out


def _energy(params, L):
    edges = np.linspace(0.0, L, 129)
    t, w = gauss_legendre(edges)
    return 0.5 * float(w @ params.kappa(t)[0] ** 2)


def _polish(job, bd, theta0, quad):
    fam, x0 = job
    lo = [0.0, 1e-9, -np.inf] if fam == "cn" else [0.0, -np.inf, -np.inf]
    hi = [1.0, np.inf, np.inf] if fam == "cn" else [1.0 - 1e-12, np.inf, np.inf]
    try:
        sol = least_squares(
            lambda x: _shoot_residual(fam, x, bd, theta0, quad),
            x0,
            bounds=(lo, hi),
            method="trf",
            x_scale="jac",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=400,
        )
    except (ValueError, FloatingPointError):
        return None
    return fam, sol.x, float(np.linalg.norm(sol.fun))


def shoot_clamped_elastica(bd: BoundaryData, threads: int = 1, families=("cn", "dn")):
    """Fit an analytic planar elastica to clamped boundary data.

    Returns ``(curve, params, info)``; ``curve`` and ``params`` are ``None``
    when no start reaches the acceptance residual (``info["success"]`` is then
    false and callers should fall back to a fine-mesh reference).
    """
    if bd.m != 2:
        raise UnsupportedDimension("analytic elastica are planar only")
    theta0 = math.atan2(bd.N0[1], bd.N0[0])
    thetaL = math.atan2(bd.NL[1], bd.NL[0])
    turn = (thetaL - theta0 + math.pi) % (2 * math.pi) - math.pi
    nsub = 64
    quad = gauss_legendre(np.linspace(0.0, bd.L, nsub + 1))

    # cheap screen of the start grid, then polish the most promising starts per family
    jobs = []
    for fam in families:
        starts = _starts(fam, bd.L, turn)
        scores = [float(np.linalg.norm(_shoot_residual(fam, x, bd, theta0, quad))) for x in starts]
        order = np.argsort(scores, kind="stable")[:POLISH_PER_FAMILY]
        jobs += [(fam, starts[i]) for i in order]

    def run(job):
        return _polish(job, bd, theta0, quad)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    best = None
    best_res = math.inf
    for r in results:
        if r is None:
            continue
        fam, x, res = r
        best_res = min(best_res, res)
        if res > SHOOT_ACCEPT or not np.all(np.isfinite(x)):
            continue
        k, w, s0 = x
        if fam == "dn" and k <= 1e-6:
            k = 0.0
        params = EllipticParams.signed(fam, float(k), float(w), float(s0), theta0, tuple(bd.p0.tolist()))
        e = _energy(params, bd.L)
        # ties broken by family then parameters for determinism
        key = (round(e, 9), fam, round(float(k), 9), round(float(w), 9))
        if best is None or key < best[0]:
            best = (key, params, res)
    if best is None:
        return None, None, {"success": False, "residual": best_res}
    params = best[1]
    curve = ReferenceCurve(params, bd.L)
    th = curve.velocity(np.array([bd.L]))[0]
    bres = max(
        float(np.linalg.norm(curve.points[-1] - bd.pL)),
        float(np.linalg.norm(th - bd.NL)),
        float(np.linalg.norm(curve.points[0] - bd.p0)),
    )
    info = {"success": bres <= SHOOT_ACCEPT, "residual": bres, "energy": curve.energy()}
    return curve, params, info


# --- tilted Mexican hat ---------------------------------------------------


@dataclass(frozen=True)
class ToyPotentialSpec:
    n: int
    resolution: int = 1024
    box: float = 2.0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgument("n must be >= 1")


def tilted_potential(x, n: int | None):
    """``(1 - |x|^2)^2 - (-1)^n x_1 / (n (1 + |x|^2))``; ``n=None`` drops the tilt."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    F = (1 - r2) ** 2
    if n is not None:
        F = F - (-1) ** n / n * x[..., 0] / (1 + r2)
    return F


def mexican_hat_almost_min(spec: ToyPotentialSpec, delta: float, tilted: bool = True, circle_samples: int = 4096):
    """Brute-force ``{F_n <= min F_n + delta}`` on a grid and its Hausdorff distance to the unit circle."""
    g = np.linspace(-spec.box, spec.box, spec.resolution)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    F = tilted_potential(pts, spec.n if tilted else None)
    fmin = float(F.min())
    S = pts[F <= fmin + delta]
    radial = float(np.max(np.abs(np.linalg.norm(S, axis=1) - 1.0)))
    ang = 2 * np.pi * np.arange(circle_samples) / circle_samples
    circle = np.column_stack([np.cos(ang), np.sin(ang)])
    cover = float(cKDTree(S).query(circle)[0].max())
    return {
        "points": S,
        "hausdorff": max(radial, cover),
        "min_value": fmin,
        "argmin": pts[int(np.argmin(F))],
        "grid_step": float(g[1] - g[0]),
    }
