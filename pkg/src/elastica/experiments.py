"""Experiment pipelines shared by the CLI and the acceptance suite.

Each function returns plain dictionaries (JSON ready) so results can be
written as tables or reports without further conversion.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import arcspline as arc
from .errors import ElasticaError, InvalidArgument
from .mesh import Partition, uniform_partition
from .metrics import chord_arc_report, dist_w1inf, dist_w2p, fit_rate, hausdorff, second_difference_report
from .polygon import BoundaryData, Polygon, bending_energy, curvature
from .reference import ToyPotentialSpec, elastica_ode_residual, mexican_hat_almost_min, shoot_clamped_elastica
from .solver import SolveOptions, delta_minimizer_set, initial_guess, minimize, regularity_report
from .transfer import reconstruct, roundtrip_gap, sample

__all__ = [
    "PRESETS",
    "preset",
    "boundary_from_dict",
    "closed_polygon_energy",
    "circle_exactness",
    "corner_flip_boundary",
    "corner_flip_polygons",
    "corner_flip_study",
    "quarter_arc_check",
    "reference_solution",
    "reconstruction_energy_study",
    "roundtrip_study",
    "convergence_study",
    "regularity_study",
    "length_distortion_study",
    "second_difference_study",
    "tilted_demo",
    "safe_rate",
]

# "hairpin" is a looped clamped configuration chosen to give a nontrivial
# elastica; it is illustrative data, not a benchmark from elsewhere.
PRESETS = {
    "quarter-arc": dict(p0=(0.0, 0.0), pL=(1.0, 1.0), N0=(1.0, 0.0), NL=(0.0, 1.0), L=math.pi / 2),
    "arch": dict(p0=(0.0, 0.0), pL=(1.0, 0.0), N0=(0.0, 1.0), NL=(0.0, -1.0), L=2.0),
    "hairpin": dict(p0=(0.0, 0.0), pL=(0.4, 0.0), N0=(0.0, 1.0), NL=(0.0, 1.0), L=2.0),
}


def preset(name: str) -> BoundaryData:
    if name not in PRESETS:
        raise InvalidArgument(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return boundary_from_dict(PRESETS[name])


def boundary_from_dict(d: dict) -> BoundaryData:
    missing = [k for k in ("p0", "pL", "N0", "NL", "L") if k not in d]
    if missing:
        raise InvalidArgument(f"boundary data lacks {', '.join(missing)}")
    return BoundaryData(
        np.asarray(d["p0"], float), np.asarray(d["pL"], float), np.asarray(d["N0"], float), np.asarray(d["NL"], float), float(d["L"])
    )


def safe_rate(rows, drop: int = 0):
    """``fit_rate`` or ``None`` when there are too few usable samples."""
    try:
        return fit_rate(rows, drop)
    except InvalidArgument:
        return None


# --- closed polygons ------------------------------------------------------


def closed_polygon_energy(points) -> float:
    """Discrete energy of a closed polygon, every vertex counted as interior."""
    X = np.asarray(points, float)
    n = len(X)
    if n < 3:
        raise InvalidArgument("closed polygon needs three vertices")
    ext = np.vstack([X, X[:2]])
    params = np.concatenate(([0.0], np.cumsum(np.linalg.norm(np.diff(ext, axis=0), axis=1))))
    return bending_energy(Polygon(Partition(params), ext))


def circle_exactness(ns=(8, 64, 512), L: float = 2 * math.pi) -> list[dict]:
    rows = []
    exact = 2 * math.pi**2 / L
    for n in ns:
        r = L / (2 * n * math.sin(math.pi / n))  # circumradius giving perimeter L
        phi = 2 * math.pi * np.arange(n) / n
        E = closed_polygon_energy(r * np.column_stack([np.cos(phi), np.sin(phi)]))
        rows.append({"n": n, "h": L / n, "energy": E, "exact": exact, "rel_error": abs(E - exact) / exact})
    return rows


# --- the two polygon families with a threefold energy gap ------------------


def corner_flip_boundary(a: float = 1.0) -> BoundaryData:
    return BoundaryData(np.array([-a, 0.0]), np.array([a, 0.0]), np.array([0.0, 1.0]), np.array([0.0, -1.0]), 8 * a / 3)


def corner_flip_polygons(a: float, n: int) -> tuple[Polygon, Polygon]:
    """Subdivided rectangle of height ``a/3`` and the same polygon with both corners flipped inwards."""
    if n % 8 or n < 16:
        raise InvalidArgument("n must be a multiple of 8 and at least 16")
    L = 8 * a / 3
    T = uniform_partition(L, n)
    h = L / n
    side, top = n // 8, 6 * n // 8
    up = np.column_stack([np.full(side + 1, -a), h * np.arange(side + 1)])
    across = np.column_stack([-a + h * np.arange(1, top + 1), np.full(top, side * h)])
    down = np.column_stack([np.full(side, a), side * h - h * np.arange(1, side + 1)])
    X = np.vstack([up, across, down])
    X[-1] = (a, 0.0)
    rect = Polygon(T, X)
    Y = X.copy()
    Y[side] = (-a + h, (side - 1) * h)
    Y[side + top] = (a - h, (side - 1) * h)
    return rect, Polygon(T, Y)


def corner_flip_study(a: float = 1.0, ns=(32, 64, 128, 256)) -> dict:
    rows = []
    for n in ns:
        rect, flip = corner_flip_polygons(a, n)
        Er, Ef = bending_energy(rect), bending_energy(flip)
        rows.append({"n": n, "h": rect.partition.h, "energy_rect": Er, "energy_flipped": Ef, "ratio": Ef / Er})
    return {
        "rows": rows,
        "rate_rect": safe_rate([(r["h"], r["energy_rect"]) for r in rows]),
        "rate_flipped": safe_rate([(r["h"], r["energy_flipped"]) for r in rows]),
    }


# --- solver checks --------------------------------------------------------


def quarter_arc_check(n: int = 64, opts: SolveOptions | None = None) -> dict:
    bd = preset("quarter-arc")
    T = uniform_partition(bd.L, n)
    P, rep = minimize(initial_guess(bd, T), bd, opts)
    kappa = np.linalg.norm(np.atleast_2d(curvature(P).values), axis=-1).ravel()
    return {
        "n": n,
        "h": T.h,
        "energy": rep.energy,
        "energy_error": abs(rep.energy - math.pi / 4),
        "kappa_deviation": float(np.max(np.abs(np.abs(kappa) - 1.0))),
        "kkt_residual": rep.kkt_residual,
        "feasibility": rep.feasibility,
        "iterations": rep.iterations,
    }


def reference_solution(bd: BoundaryData, threads: int = 1) -> dict:
    curve, params, info = shoot_clamped_elastica(bd, threads=threads)
    out = {"curve": curve, "params": params, "info": info}
    if info["success"]:
        out["ode"] = elastica_ode_residual(curve)
    return out


def self_reference(bd: BoundaryData, n: int = 1024, opts: SolveOptions | None = None):
    T = uniform_partition(bd.L, n)
    P, _ = minimize(initial_guess(bd, T), bd, opts)
    gamma, _ = reconstruct(P, bd)
    return gamma


# --- transfer operators ---------------------------------------------------


def reconstruction_energy_study(bd: BoundaryData, curve, ns=(16, 32, 64, 128, 256)) -> dict:
    """``|E(R(P)) - E_T(P)|`` for polygons sampled from ``curve``."""
    rows = []
    for n in ns:
        T = uniform_partition(bd.L, n)
        P, _ = sample(curve, bd, T)
        _, rep = reconstruct(P, bd)
        rows.append({"n": n, "h": T.h, "energy_gap": rep["energy_gap"], "energy_discrete": rep["energy_discrete"]})
    return {"rows": rows, "rate": safe_rate([(r["h"], r["energy_gap"]) for r in rows])}


def roundtrip_study(bd: BoundaryData, curve, ns=(16, 32, 64, 128, 256)) -> dict:
    rows = []
    for n in ns:
        T = uniform_partition(bd.L, n)
        rows.append({"n": n, "h": T.h, "w2inf_gap": roundtrip_gap(curve, bd, T)})
    return {"rows": rows, "rate": safe_rate([(r["h"], r["w2inf_gap"]) for r in rows])}


# --- main convergence -----------------------------------------------------


def _resolution_row(bd, n, c, reference, opts, priors):
    T = uniform_partition(bd.L, n)
    S = delta_minimizer_set(bd, T, c * T.h, opts, priors)
    if not S.members:
        return {"n": n, "h": T.h, "members": 0, "min_energy": None, "w1inf": None, "w2p2": None, "w2p4": None}
    curves = [reconstruct(P, bd)[0] for P in S.members]
    ref = [reference]
    return {
        "n": n,
        "h": T.h,
        "members": len(S),
        "minimizers": S.n_minimizers,
        "delta": S.delta,
        "min_energy": S.best_energy,
        "w1inf": hausdorff(curves, ref, dist_w1inf),
        "w2p2": hausdorff(curves, ref, lambda a, b: dist_w2p(a, b, 2.0)),
        "w2p4": hausdorff(curves, ref, lambda a, b: dist_w2p(a, b, 4.0)),
    }


def convergence_study(
    bd: BoundaryData,
    ns=(8, 16, 32, 64, 128, 256),
    c: float = 1.0,
    reference: str = "analytic",
    opts: SolveOptions | None = None,
    threads: int = 1,
    self_n: int = 1024,
    priors=None,
) -> dict:
    """Hausdorff distances between reconstructed delta-minimizer sets (delta = c h) and the reference minimizer."""
    if reference not in ("analytic", "self"):
        raise InvalidArgument("reference must be 'analytic' or 'self'")
    opts = opts or SolveOptions()
    mode = reference
    ref_energy = None
    ref_curve = None
    if reference == "analytic":
        try:
            sol = reference_solution(bd, threads)
            if sol["info"]["success"]:
                ref_curve = sol["curve"]
                ref_energy = sol["info"]["energy"]
        except ElasticaError:
            pass
        if ref_curve is None:
            mode = "self (analytic shooting failed)"
    if ref_curve is None:
        ref_curve = self_reference(bd, self_n, opts)
        ref_energy = arc.bending_energy(ref_curve)

    def job(n):
        return _resolution_row(bd, n, c, ref_curve, opts, priors)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(job, ns))
    else:
        rows = [job(n) for n in ns]
    rates = {}
    for key in ("w1inf", "w2p2", "w2p4"):
        rates[key] = safe_rate([(r["h"], r[key]) for r in rows if r[key]])
    return {"reference_mode": mode, "reference_energy": ref_energy, "delta_c": c, "rows": rows, "rates": rates}


def regularity_study(bd: BoundaryData, ns=(16, 32, 64, 128, 256), opts: SolveOptions | None = None) -> dict:
    rows = []
    for n in ns:
        T = uniform_partition(bd.L, n)
        P, rep = minimize(initial_guess(bd, T), bd, opts)
        rows.append({"n": n, "h": T.h, "energy": rep.energy, **regularity_report(P)})
    spread = {}
    for key in ("w2inf", "tv3", "w3inf"):
        v = np.array([r[key] for r in rows])
        spread[key] = float((v.max() - v.min()) / v.min()) if v.min() > 0 else math.inf
    return {"rows": rows, "relative_spread": spread}


# --- chord/arc and second-difference checks on the unit circle -----------


def unit_circle(segments: int = 64) -> arc.ArcSpline:
    # a single arc cannot span a full turn: end tangents would coincide
    return arc.planar_arcspline(
        np.array([1.0, 0.0]), math.pi / 2, np.linspace(0.0, 2 * math.pi, segments + 1), np.ones(segments)
    )


def length_distortion_study(arcs=tuple(0.8 / 2**k for k in range(7))) -> dict:
    gamma = unit_circle()
    rep = chord_arc_report(gamma, [(0.0, s) for s in arcs])
    rows = [{"arc": r["arc"], "deviation": r["deviation"], "inverse_deviation": r["inverse_deviation"]} for r in rep]
    at = chord_arc_report(gamma, [(0.0, 0.1)])[0]["deviation"]
    return {
        "rows": rows,
        "rate": safe_rate([(r["arc"], r["deviation"]) for r in rows]),
        "deviation_at_0.1": at,
        "expected_at_0.1": 1.0 - 2.0 * math.sin(0.05) / 0.1,
    }


def second_difference_study(ns=(16, 32, 64, 128, 256)) -> dict:
    gamma = unit_circle()

    def f(t):
        return np.sin(3 * t), -9 * np.sin(3 * t)

    rows = []
    for n in ns:
        T = uniform_partition(2 * math.pi, n)
        err = float(np.max(second_difference_report(gamma, f, T)))
        rows.append({"n": n, "h": T.h, "error": err})
    return {"rows": rows, "rate": safe_rate([(r["h"], r["error"]) for r in rows])}


# --- toy potential --------------------------------------------------------


def tilted_demo(ns=(16, 64, 256), resolution: int = 1024, box: float = 2.0) -> list[dict]:
    rows = []
    for n in ns:
        spec = ToyPotentialSpec(n, resolution, box)
        near = mexican_hat_almost_min(spec, 3.0 / n)
        exact = mexican_hat_almost_min(spec, 0.0)
        rows.append(
            {
                "n": n,
                "delta": 3.0 / n,
                "hausdorff": near["hausdorff"],
                "bound": n**-0.5,
                "set_size": int(len(near["points"])),
                "argmin_x": float(exact["argmin"][0]),
                "argmin_y": float(exact["argmin"][1]),
                "grid_step": near["grid_step"],
            }
        )
    return rows
