"""Newton-Kantorovich iteration for underdetermined systems with a right inverse.

Unknowns and residuals are flat float arrays.  The caller provides the
residual ``F``, its differential, a right inverse ``R`` with ``DF R = id`` and
norms on both spaces.  Steps are ``x <- retract(x, -R(x) F(x))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolation, NonConvergence

__all__ = ["NKProblem", "NKReport", "certificate", "solve"]

CONTRACT_SAMPLES = 5
CONTRACT_RTOL = 1e-8
GROWTH_LIMIT = 10.0
MAX_HALVINGS = 8


def _euclid(v):
    return float(np.linalg.norm(v))


@dataclass
class NKProblem:
    residual: Callable
    differential: Callable
    right_inverse: Callable
    domain_norm: Callable = _euclid
    range_norm: Callable = _euclid
    retraction: Optional[Callable] = None
    # draws a valid range tangent (used for the contract check and for mu)
    sample_range: Optional[Callable] = None
    # draws a domain direction (used for nu)
    sample_domain: Optional[Callable] = None

    def retract(self, x, u):
        return x + u if self.retraction is None else self.retraction(x, u)


@dataclass
class NKReport:
    iterations: int = 0
    residual_norms: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    damping: list = field(default_factory=list)
    lam: float = math.nan
    mu: float = math.nan
    nu: float = math.nan
    r: float = math.nan
    r_minus: float = math.nan
    admissible: bool = False
    error_bound: float = math.nan
    converged: bool = False

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v

        return {
            "iterations": self.iterations,
            "residual_norms": [float(v) for v in self.residual_norms],
            "step_norms": [float(v) for v in self.step_norms],
            "damping": list(self.damping),
            "lambda": clean(self.lam),
            "mu": clean(self.mu),
            "nu": clean(self.nu),
            "r": clean(self.r),
            "r_minus": clean(self.r_minus),
            "admissible": self.admissible,
            "error_bound": clean(self.error_bound),
            "converged": self.converged,
            "estimates": "mu and nu are sampled estimates",
        }


def certificate(lam: float, mu: float, nu: float) -> dict:
    """Kantorovich radii; admissible iff ``2 lam mu nu < 1``."""
    if min(lam, mu, nu) < 0:
        raise ValueError("certificate constants must be nonnegative")
    h = lam * mu * nu
    admissible = 2.0 * h < 1.0
    r = math.inf if mu * nu == 0 else 1.0 / (mu * nu)
    # r (1 - sqrt(1 - 2h)) written without cancellation
    r_minus = 2.0 * lam / (1.0 + math.sqrt(1.0 - 2.0 * h)) if admissible else math.nan
    return {"admissible": admissible, "r": r, "r_minus": r_minus}


def _check_contract(prob, x0, rng, report):
    mu = 0.0
    for _ in range(CONTRACT_SAMPLES):
        w = prob.sample_range(x0, rng) if prob.sample_range else rng.standard_normal(np.shape(prob.residual(x0)))
        wn = prob.range_norm(w)
        if wn == 0:
            continue
        u = prob.right_inverse(x0, w)
        err = prob.range_norm(prob.differential(x0, u) - w)
        if not err <= CONTRACT_RTOL * wn:
            raise ContractViolation(f"right inverse fails the contract: relative error {err / wn:.3g}")
        mu = max(mu, prob.domain_norm(u) / wn)
    report.mu = mu


def _estimate_nu(prob, x0, x1, rng):
    step = x1 - x0
    sn = prob.domain_norm(step)
    if sn == 0:
        return 0.0
    dirs = [step / sn]
    for _ in range(3):
        d = prob.sample_domain(x0, rng) if prob.sample_domain else rng.standard_normal(np.shape(x0))
        dn = prob.domain_norm(d)
        if dn > 0:
            dirs.append(d / dn)
    return max(prob.range_norm(prob.differential(x1, d) - prob.differential(x0, d)) for d in dirs) / sn


def solve(prob: NKProblem, x0, tol: float, max_iter: int = 50, seed: int = 0, check_contract: bool = True):
    """Iterate until ``range_norm(F(x)) <= tol``; returns ``(x, NKReport)``."""
    rng = np.random.default_rng(seed)
    x = np.array(x0, dtype=float)
    report = NKReport()
    fx = prob.residual(x)
    res = prob.range_norm(fx)
    if not math.isfinite(res):
        raise NonConvergence("initial residual is not finite", report)
    report.residual_norms.append(res)
    # an already solved problem needs no right inverse at all
    if check_contract and res > tol:
        _check_contract(prob, x, rng, report)

    while res > tol:
        if report.iterations >= max_iter:
            raise NonConvergence(f"no convergence in {max_iter} iterations (residual {res:.3g})", report)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = -np.asarray(prob.right_inverse(x, fx), dtype=float)
        if not np.all(np.isfinite(step)):
            raise NonConvergence("right inverse returned a non-finite step", report)
        t = 1.0
        halvings = 0
        while True:
            x_new = prob.retract(x, t * step)
            f_new = prob.residual(x_new)
            res_new = prob.range_norm(f_new)
            if math.isfinite(res_new) and res_new <= GROWTH_LIMIT * res:
                break
            if halvings == MAX_HALVINGS:
                break
            t *= 0.5
            halvings += 1
        if not math.isfinite(res_new):
            raise NonConvergence("residual became non-finite", report)
        if report.iterations == 0:
            report.lam = prob.domain_norm(step)
            report.nu = _estimate_nu(prob, x, x + step, rng)
        report.step_norms.append(prob.domain_norm(x_new - x))
        report.damping.append(halvings)
        x, fx, res = x_new, f_new, res_new
        report.iterations += 1
        report.residual_norms.append(res)

    report.converged = True
    if report.iterations == 0:
        report.lam = 0.0
        report.nu = 0.0
    if math.isfinite(report.mu) and math.isfinite(report.nu):
        cert = certificate(report.lam, report.mu, report.nu)
        report.admissible = cert["admissible"]
        report.r = cert["r"]
        report.r_minus = cert["r_minus"]
        if cert["admissible"]:
            n = report.iterations
            if report.lam == 0:
                report.error_bound = 0.0
            else:
                q = report.r_minus / report.r
                # (r / 2^n) q^(2^n), evaluated in logs to avoid overflow of 2^n
                with np.errstate(divide="ignore"):
                    report.error_bound = float(
                        np.exp(np.log(report.r) - n * math.log(2) + (2.0**n) * np.log(q)) if q > 0 else 0.0
                    )
    return x, report
