"""Distances between curves, convergence rates and consistency reports.

Curves are duck typed.  Every curve exposes ``length``, ``knots`` (parameters
where it may fail to be smooth), vectorized ``position``, ``velocity`` and
(optionally) ``acceleration`` taking ``(t, side)`` with ``side = -1`` selecting
left limits at knots, and ``segment_bounds()`` returning per-knot-segment upper
bounds of ``|c'|, |c''|[, |c'''|]``.
"""

from __future__ import annotations

import math

import numpy as np

from .arcspline import gauss_legendre
from .errors import InvalidArgument
from .mesh import Partition

__all__ = [
    "dist_w1inf",
    "dist_w2inf",
    "dist_w2p",
    "hausdorff",
    "fit_rate",
    "chord_arc_report",
    "second_difference_report",
]

SAMPLES_PER_SEGMENT = 16
CERTIFY_RTOL = 0.01
MAX_REFINE = 6


def _same_domain(a, b):
    La, Lb = float(a.length), float(b.length)
    if abs(La - Lb) > 1e-12 * max(La, Lb):
        raise InvalidArgument(f"curves live on different domains ({La!r} vs {Lb!r})")
    return La


def _union_knots(a, b, L):
    k = np.union1d(np.asarray(a.knots, float), np.asarray(b.knots, float))
    k = k[(k >= 0) & (k <= L)]
    k = np.union1d(k, [0.0, L])
    keep = np.concatenate(([True], np.diff(k) > 1e-13 * L))
    k = k[keep]
    k[-1] = L
    return k


def _segment_bound(curve, order, where):
    """Bound of ``|c^(order)|`` on the knot segments containing the points ``where``."""
    bounds = curve.segment_bounds()
    if order > len(bounds):
        return np.full(where.shape, math.inf)
    knots = np.asarray(curve.knots, float)
    j = np.clip(np.searchsorted(knots, where, side="right") - 1, 0, len(knots) - 2)
    return np.asarray(bounds[order - 1])[j]


def _sup_distance(a, b, order):
    L = _same_domain(a, b)
    knots = _union_knots(a, b, L)
    mids = 0.5 * (knots[:-1] + knots[1:])
    width = np.diff(knots)
    # Lipschitz constant of sum_k |a^(k) - b^(k)|, k = 0..order, per union segment
    lip = sum(_segment_bound(a, k, mids) + _segment_bound(b, k, mids) for k in range(1, order + 2))
    samples = SAMPLES_PER_SEGMENT
    for _ in range(MAX_REFINE + 1):
        frac = np.linspace(0.0, 1.0, samples + 1)
        t = knots[:-1, None] + width[:, None] * frac
        side = np.ones_like(t)
        side[:, -1] = -1
        t, side = t.ravel(), side.ravel()
        t[-1] = L
        t = np.clip(t, 0.0, L)
        vals = np.linalg.norm(a.position(t, side) - b.position(t, side), axis=1)
        vals = vals + np.linalg.norm(a.velocity(t, side) - b.velocity(t, side), axis=1)
        if order == 2:
            vals = vals + np.linalg.norm(a.acceleration(t, side) - b.acceleration(t, side), axis=1)
        per_seg = vals.reshape(len(width), samples + 1).max(axis=1)
        sampled = float(per_seg.max())
        certified = float(np.max(per_seg + 0.5 * lip * width / samples))
        if sampled == 0.0 or certified <= (1 + CERTIFY_RTOL) * sampled or not math.isfinite(certified):
            break
        samples *= 2
    return sampled


def dist_w1inf(a, b) -> float:
    """``sup |a - b| + |a' - b'|`` on a union-refined grid with certified sampling density."""
    return _sup_distance(a, b, 1)


def dist_w2inf(a, b) -> float:
    """W^{2,inf} analog of ``dist_w1inf``; uses one-sided limits at knots."""
    return _sup_distance(a, b, 2)


class _Rescaled:
    """Constant-speed reparameterization of a curve onto [0, 1]."""

    def __init__(self, curve):
        self.curve = curve
        self.L = float(curve.length)
        self.length = 1.0
        self.knots = np.asarray(curve.knots, float) / self.L

    def position(self, t, side=1):
        return self.curve.position(np.clip(np.asarray(t) * self.L, 0, self.L), side)

    def velocity(self, t, side=1):
        return self.L * self.curve.velocity(np.clip(np.asarray(t) * self.L, 0, self.L), side)

    def acceleration(self, t, side=1):
        return self.L**2 * self.curve.acceleration(np.clip(np.asarray(t) * self.L, 0, self.L), side)


def dist_w2p(a, b, p: float = 2.0, subdivisions: int = 2) -> float:
    """``(int |a-b|^p + |a'-b'|^p + |a''-b''|^p)^(1/p)`` by composite Gauss quadrature."""
    if not (2 <= p < math.inf):
        raise InvalidArgument("p must lie in [2, inf)")
    for c in (a, b):
        if not hasattr(c, "acceleration") or type(c).__name__ == "PolylineCurve":
            raise InvalidArgument("W^{2,p} distance needs curves with second derivatives")
    La, Lb = float(a.length), float(b.length)
    if abs(La - Lb) > 1e-12 * max(La, Lb):
        a, b = _Rescaled(a), _Rescaled(b)
    L = float(a.length)
    knots = _union_knots(a, b, L)
    frac = np.arange(subdivisions) / subdivisions
    grid = np.append((knots[:-1, None] + np.diff(knots)[:, None] * frac).ravel(), L)
    t, w = gauss_legendre(grid)
    total = 0.0
    for f in ("position", "velocity", "acceleration"):
        d = np.linalg.norm(getattr(a, f)(t) - getattr(b, f)(t), axis=1)
        total += math.fsum(w * d**p)
    return total ** (1.0 / p)


def hausdorff(A, B, metric) -> float:
    """Hausdorff distance between finite sets under ``metric(a, b)``."""
    A, B = list(A), list(B)
    if not A or not B:
        raise InvalidArgument("Hausdorff distance needs nonempty sets")
    D = np.array([[metric(a, b) for b in B] for a in A], dtype=float)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def fit_rate(samples, drop: int = 0) -> dict:
    """Least-squares fit of ``log err = slope log h + intercept``.

    ``drop`` removes that many of the coarsest samples (largest h) first.
    """
    data = sorted(((float(h), float(e)) for h, e in samples), key=lambda s: -s[0])[drop:]
    if len(data) < 3:
        raise InvalidArgument("rate fit needs at least three samples")
    h, e = np.array(data).T
    if np.any(h <= 0) or np.any(e <= 0):
        raise InvalidArgument("rate fit needs positive h and errors")
    x, y = np.log(h), np.log(e)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss == 0 else 1.0 - float(np.sum(resid**2)) / ss
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


def chord_arc_report(gamma, pairs) -> list[dict]:
    """Both chord/arc deviation forms for each parameter pair of a unit-speed curve."""
    out = []
    for a, b in pairs:
        lo, hi = sorted((float(a), float(b)))
        d = hi - lo
        if d <= 0:
            raise InvalidArgument("pairs need distinct parameters")
        chord = float(np.linalg.norm(gamma.position(hi, -1)[0] - gamma.position(lo)[0]))
        out.append(
            {
                "a": lo,
                "b": hi,
                "arc": d,
                "chord": chord,
                "deviation": abs(1.0 - chord / d),
                "inverse_deviation": abs(1.0 - d / chord),
            }
        )
    return out


def second_difference_report(gamma, f, T: Partition) -> np.ndarray:
    """Per interior vertex ``|D_P^2 F(i) - f''(t_i)|`` with chord-normalized differences.

    ``f(t)`` returns ``(f, f'')`` as arrays with one row per parameter; for a
    unit-speed curve ``f''`` is the arc-length second derivative.
    """
    t = T.vertex_params
    P = gamma.position(t)
    F, d2f = (np.asarray(v, dtype=float).reshape(t.size, -1) for v in f(t))
    chords = np.linalg.norm(np.diff(P, axis=0), axis=1)
    slopes = np.diff(F, axis=0) / chords[:, None]
    d2 = np.diff(slopes, axis=0) / (0.5 * (chords[:-1] + chords[1:]))[:, None]
    return np.linalg.norm(d2 - d2f[1:-1], axis=1)
