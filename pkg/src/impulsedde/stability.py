"""A-priori bounds, the impulsive-ODE Cauchy matrix, and the stability
certificate.

Three executable pieces of theory live here.  First, the growth envelope

    ||X(t,s)|| <= prod_{s < tau_i <= t} (1 + ||B_i||) * exp(int_s^t sum_k ||A_k||),

evaluated exactly for piecewise-constant tables (with an optional tighter
product prod ||B_i|| available when every B_i is nonsingular).  Second, for
the ordinary impulsive equation x'(t) + a x(t) = 0 with jumps B_i, the
Cauchy matrix in closed form,

    C_0(t,s) = exp[-a (t-s)] B_m ... B_1,   s < tau_1 < ... < tau_m <= t,

together with the decay estimate claimed for it when the jump norms are
uniformly contracting: with gamma = sup_i ||B_i|| < 1, gaps in [zeta, rho],
and alpha = -(1/zeta) ln gamma,

    ||C_0(t,s)|| <= exp[-alpha (t-s)]  if t - s > rho,  else 1.

Third, the sufficient exponential-stability certificate for the delayed
impulsive system: with the same gamma, zeta, rho, alpha,

    lhs = (sum_k sup_t ||A_k(t)||) * [ (1/alpha) e^{-alpha rho} + rho ] < 1

certifies exponential stability; the converse is not claimed, so a failed
certificate never asserts instability.  An empirical counterpart fits
N e^{-nu (t-s)} to sampled fundamental-matrix norms and reports the decay
rate actually observed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .system import (
    ConstantLag,
    FrozenTime,
    ImpulseSchedule,
    MatrixTable,
    SystemSpec,
    _coefficient_pieces,
    mat_norm,
    validate,
)
from .integrate import FundamentalMatrix

__all__ = [
    "StabilityCertificate",
    "RateEstimate",
    "gronwall_bound",
    "c0_closed_form",
    "c0_estimate",
    "certify",
    "estimate_rate",
]


@dataclass(frozen=True)
class StabilityCertificate:
    """Outcome of the sufficient stability test.

    `verdict` is "Certified" when every condition holds and "NotCertified"
    otherwise, with `reasons` naming each failed condition.  NotCertified
    does not assert instability: the test is sufficient only.  Fields that
    cannot be evaluated (e.g. the margin when gamma >= 1) are NaN.
    """

    gamma: float
    zeta: float
    rho: float
    alpha: float
    lhs: float
    delta: float
    verdict: str
    reasons: tuple = ()


@dataclass(frozen=True)
class RateEstimate:
    """Log-linear fit ||X(t,s)|| ~= N exp(-nu (t-s)) over sampled pairs.

    `residual` is the max absolute log-domain fit deviation; `fit_slack`
    turns it into a usable envelope: every sampled pair satisfies
    ||X(t,s)|| <= N exp(-nu (t-s)) (1 + fit_slack).
    """

    N: float
    nu: float
    fit_window: tuple
    residual: float
    fit_slack: float
    n_samples: int


def _norm_integral(coef, s: float, t: float) -> float:
    """Exact int_s^t ||A(z)|| dz for a constant or piecewise-constant A."""
    if not isinstance(coef, MatrixTable):
        return float(mat_norm(coef)) * (t - s)
    cuts = [s] + [float(b) for b in coef.breaks if s < b < t] + [t]
    total = 0.0
    for u, v in zip(cuts[:-1], cuts[1:]):
        total += float(mat_norm(coef.value(0.5 * (u + v)))) * (v - u)
    return total


def gronwall_bound(spec: SystemSpec, s: float, t: float,
                   tight: bool = False) -> float:
    """Growth envelope prod_{s<tau_i<=t}(1+||B_i||) exp(int_s^t sum ||A_k||).

    With `tight=True` the product uses ||B_i|| instead of 1 + ||B_i||, a
    sharper variant meaningful when every B_i is nonsingular; it is exact
    for zero-lag systems but can be violated by delayed feedback, which
    re-injects pre-jump history that the pure product does not see.
    """
    if s > t:
        raise ValueError(f"s={s} > t={t}")
    sched = spec.impulses
    lo = int(np.searchsorted(sched.points, s, side="right"))
    hi = int(np.searchsorted(sched.points, t, side="right"))
    prod = 1.0
    for j in range(lo, hi):
        b = float(mat_norm(sched.matrices[j]))
        prod *= b if tight else 1.0 + b
    rate = sum(_norm_integral(term.coefficient, s, t) for term in spec.terms)
    return prod * math.exp(rate)


def c0_closed_form(a: float, schedule: ImpulseSchedule, s: float,
                   t: float) -> np.ndarray:
    """Cauchy matrix exp[-a(t-s)] B_m ... B_1 of x' + a x = 0 with jumps.

    The product runs over tau_i in (s, t] in chronological order with later
    impulses multiplying on the left, composing the jump maps along the
    flow; it is the identity when no jump point falls in (s, t].
    """
    if s > t:
        raise ValueError(f"s={s} > t={t}")
    out = np.eye(schedule.dim)
    lo = int(np.searchsorted(schedule.points, s, side="right"))
    hi = int(np.searchsorted(schedule.points, t, side="right"))
    for j in range(lo, hi):
        out = schedule.matrices[j] @ out
    return math.exp(-a * (t - s)) * out


def c0_estimate(schedule: ImpulseSchedule, s: float, t: float,
                zeta: float, rho: float) -> float:
    """Claimed decay bound for ||C_0(t,s)|| under contracting jumps.

    Evaluates exp[-alpha (t-s)] for t - s > rho and 1 otherwise, with
    alpha = -(1/zeta) ln gamma and gamma = sup_i ||B_i||.  Requires
    gamma < 1 and presumes every consecutive gap lies in [zeta, rho].
    """
    if s > t:
        raise ValueError(f"s={s} > t={t}")
    if not (0.0 < zeta <= rho):
        raise ValueError(f"need 0 < zeta <= rho, got zeta={zeta}, rho={rho}")
    gamma = max((float(mat_norm(b)) for b in schedule.matrices), default=0.0)
    if gamma >= 1.0:
        raise ValueError(f"bound inapplicable: gamma={gamma} >= 1")
    alpha = math.inf if gamma == 0.0 else -math.log(gamma) / zeta
    if t - s > rho:
        return math.exp(-alpha * (t - s))
    return 1.0


def certify(spec: SystemSpec) -> StabilityCertificate:
    """Sufficient exponential-stability test from coefficient sups and jumps.

    Computes gamma = sup_i ||B_i||, the gap range [zeta, rho], the derived
    rate alpha = -(1/zeta) ln gamma, and the margin
    lhs = (sum_k sup ||A_k||) ((1/alpha) e^{-alpha rho} + rho); Certified
    requires a valid spec, finite maximal lag, at least two jump points,
    gamma < 1 and lhs < 1.  A NotCertified verdict carries one reason per
    failed condition and never asserts instability.
    """
    reasons = []
    bad = validate(spec)
    if bad:
        reasons.append("invalid spec: " + "; ".join(bad))

    delta = 0.0
    for term in spec.terms:
        if isinstance(term.delay, FrozenTime):
            delta = math.inf
        else:
            delta = max(delta, term.delay.theta)
    if not math.isfinite(delta):
        reasons.append("frozen-time term: the lag t - c is unbounded, "
                       "no finite maximal lag exists")

    sched = spec.impulses
    gamma = max((float(mat_norm(b)) for b in sched.matrices),
                default=math.nan)
    if len(sched.points) < 2:
        zeta = rho = math.nan
        reasons.append("fewer than two jump points: the gap range "
                       "[zeta, rho] is undefined")
    else:
        gaps = np.diff(sched.points)
        zeta = float(gaps.min())
        rho = float(gaps.max())
    if not gamma < 1.0:
        reasons.append(f"gamma = sup ||B_i|| = {gamma:.6g} is not < 1")

    if gamma == 0.0:
        alpha = math.inf
    elif gamma > 0.0:
        alpha = -math.log(gamma) / zeta if math.isfinite(zeta) else math.nan
    else:
        alpha = math.nan

    sum_sup = 0.0
    for term in spec.terms:
        _, values = _coefficient_pieces(term.coefficient, spec.horizon)
        sum_sup += float(np.max(mat_norm(values)))

    if alpha > 0.0:
        bracket = (0.0 if math.isinf(alpha)
                   else (1.0 / alpha) * math.exp(-alpha * rho)) + rho
        lhs = sum_sup * bracket
    else:
        lhs = math.nan
    if not math.isnan(lhs) and not lhs < 1.0:
        reasons.append(f"stability margin lhs = {lhs:.6g} is not < 1")

    verdict = "Certified" if not reasons else "NotCertified"
    return StabilityCertificate(gamma=gamma, zeta=zeta, rho=rho, alpha=alpha,
                                lhs=lhs, delta=delta, verdict=verdict,
                                reasons=tuple(reasons))


def estimate_rate(fm: FundamentalMatrix, window) -> RateEstimate:
    """Least-squares exponential-rate fit over sampled (t, s) pairs.

    Fits ln ||X(t,s)|| = ln N - nu (t-s) over every grid pair with
    t - s inside `window = (t_min, t_max)`; pairs with zero norm are
    excluded from the log fit.  nu > 0 is the empirical stability signal;
    nu <= 0 is returned as-is with a warning.  Fitting across all s (not
    only s = 0) probes that one (N, nu) works uniformly in s.
    """
    t_min, t_max = float(window[0]), float(window[1])
    if not t_min <= t_max:
        raise ValueError(f"empty window [{t_min}, {t_max}]")
    d = fm.t_grid[:, None] - fm.s_grid[None, :]
    norms = mat_norm(fm.samples)
    in_window = (d >= max(t_min, 0.0)) & (d <= t_max)
    sel = in_window & (norms > 0.0)
    if np.any(in_window) and not np.any(sel):
        raise ValueError("all sampled norms in the window are zero")
    dd = d[sel]
    if dd.size < 20:
        raise ValueError(f"too few samples in window: {dd.size} < 20")
    if np.unique(dd).size < 2:
        raise ValueError("degenerate window: all pairs share one t - s")
    logs = np.log(norms[sel])
    slope, intercept = np.polyfit(dd, logs, 1)
    res = logs - (intercept + slope * dd)
    nu = -float(slope)
    if nu <= 0.0:
        warnings.warn(f"empirical rate nu = {nu:.6g} <= 0: no decay observed",
                      stacklevel=2)
    return RateEstimate(N=float(math.exp(intercept)), nu=nu,
                        fit_window=(t_min, t_max),
                        residual=float(np.max(np.abs(res))),
                        fit_slack=float(max(0.0, math.expm1(res.max()))),
                        n_samples=int(dd.size))
