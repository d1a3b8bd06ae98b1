"""Failure intensities, cumulative hazards and inverse-transform sampling.

The minor-failure baseline is piecewise linear between maintenance epochs,
so every integral below is closed form; the catastrophic intensity is a
Weibull hazard measured from the last overhaul (the segment origin).

Scalar functions take a :class:`HazardContext`. The ``*_batch`` functions
operate on arrays of paths whose covariates stay constant over the interval
being integrated, which is the case between two consecutive failures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import HazardParams, TariffPlan

MAX_HORIZON = 1.0e4
TIME_TOL = 1.0e-10


@dataclass(frozen=True)
class HazardContext:
    """Covariate state of one machine.

    ``tvc_breaks`` lists ``(time, value)`` pairs where x2 jumps; the value
    holds from that time on (right-continuous).
    """

    fixed_covariates: tuple[int, ...]
    tvc_initial: int = 0
    tvc_breaks: tuple[tuple[float, int], ...] = ()
    segment_origin: float = 0.0

    def __post_init__(self):
        times = [b[0] for b in self.tvc_breaks]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("tvc breakpoints must be strictly increasing")

    def tvc_at(self, t: float) -> int:
        value = self.tvc_initial
        for when, v in self.tvc_breaks:
            if t >= when:
                value = v
        return value

    def pieces(self, t0: float, t1: float) -> list[tuple[float, float, int]]:
        """Split [t0, t1] into sub-intervals with constant x2."""
        out = []
        start = t0
        for when, _ in self.tvc_breaks:
            if start < when < t1:
                out.append((start, when, self.tvc_at(start)))
                start = when
        out.append((start, t1, self.tvc_at(start)))
        return out


# -- baseline -----------------------------------------------------------------

def baseline_intensity(t, p: HazardParams):
    """Imperfect-maintenance baseline at age ``t`` (time since renewal)."""
    t = np.asarray(t, dtype=float)
    k = np.floor(t / p.pm_interval)
    r = t - k * p.pm_interval
    out = p.alpha0 * (r + (1.0 - p.kappa0) * k) + p.gamma0
    return out if out.ndim else float(out)


def cumulative_baseline(t, p: HazardParams):
    """Integral of :func:`baseline_intensity` over [0, t]."""
    t = np.asarray(t, dtype=float)
    d, a, g, imp = p.pm_interval, p.alpha0, p.gamma0, 1.0 - p.kappa0
    k = np.floor(t / d)
    r = t - k * d
    full = k * (a * d * d / 2.0 + g * d) + a * imp * d * k * (k - 1.0) / 2.0
    out = full + a * r * r / 2.0 + a * imp * k * r + g * r
    return out if out.ndim else float(out)


def _baseline_at(t, origin, p: HazardParams):
    t = np.asarray(t, dtype=float)
    origin = np.asarray(origin, dtype=float)
    if p.pm_phase == "reset":
        return np.asarray(baseline_intensity(t - origin, p))
    d = p.pm_interval
    first = (np.floor(origin / d) + 1.0) * d
    kt = np.floor(t / d)
    late = p.alpha0 * ((t - kt * d) + (1.0 - p.kappa0) * (kt - np.floor(origin / d))) + p.gamma0
    early = p.alpha0 * (t - origin) + p.gamma0
    return np.where(t < first, early, late)


def _baseline_integral(t0, t1, origin, p: HazardParams):
    """Integral of the baseline over [t0, t1] for a segment starting at ``origin``."""
    return _baseline_from_origin(t1, origin, p) - _baseline_from_origin(t0, origin, p)


def _baseline_from_origin(t, origin, p: HazardParams):
    t = np.asarray(t, dtype=float)
    origin = np.asarray(origin, dtype=float)
    if p.pm_phase == "reset":
        return np.asarray(cumulative_baseline(t - origin, p))
    d = p.pm_interval
    first = (np.floor(origin / d) + 1.0) * d
    s = np.minimum(t, first) - origin
    head = p.alpha0 * s * s / 2.0 + p.gamma0 * s
    x = np.maximum(t - first, 0.0)
    tail = np.asarray(cumulative_baseline(x, p)) + p.alpha0 * (1.0 - p.kappa0) * x
    return head + np.where(t > first, tail, 0.0)


def _pm_base(origin: float, p: HazardParams) -> float:
    """Epochs where the baseline jumps are ``base + k * pm_interval``."""
    return origin if p.pm_phase == "reset" else 0.0


# -- catastrophic ---------------------------------------------------------------

def catastrophic_intensity(t, p: HazardParams, origin=0.0):
    age = np.maximum(np.asarray(t, dtype=float) - origin, 0.0)
    if p.kappa_c == 1.0:
        out = np.full_like(age, p.alpha_c)
    else:
        with np.errstate(divide="ignore"):
            out = p.kappa_c * p.alpha_c**p.kappa_c * age ** (p.kappa_c - 1.0)
    return out if out.ndim else float(out)


def _weibull_cumulative(t, origin, p: HazardParams):
    age = np.maximum(np.asarray(t, dtype=float) - origin, 0.0)
    return (p.alpha_c * age) ** p.kappa_c


# -- context-level API -----------------------------------------------------------

def _eta(ctx: HazardContext, x2: int, p: HazardParams, plan: TariffPlan) -> float:
    return float(plan.linear_predictor(p, ctx.fixed_covariates, x2))


def minor_intensity(t: float, ctx: HazardContext, p: HazardParams, plan: TariffPlan) -> float:
    lam0 = float(_baseline_at(t, ctx.segment_origin, p))
    return lam0 * math.exp(_eta(ctx, ctx.tvc_at(t), p, plan))


def total_intensity(t: float, ctx: HazardContext, p: HazardParams, plan: TariffPlan) -> float:
    return minor_intensity(t, ctx, p, plan) + catastrophic_intensity(t, p, ctx.segment_origin)


def integrated_hazard(t0: float, t1: float, ctx: HazardContext, p: HazardParams,
                      plan: TariffPlan) -> float:
    """Cumulative total hazard over [t0, t1]."""
    if t1 < t0:
        raise ValueError(f"need t0 <= t1, got {t0} > {t1}")
    minor = 0.0
    for a, b, x2 in ctx.pieces(t0, t1):
        minor += math.exp(_eta(ctx, x2, p, plan)) * float(_baseline_integral(a, b, ctx.segment_origin, p))
    cat = float(_weibull_cumulative(t1, ctx.segment_origin, p) - _weibull_cumulative(t0, ctx.segment_origin, p))
    return minor + cat


def survival(t: float, t0: float, ctx: HazardContext, p: HazardParams, plan: TariffPlan) -> float:
    return math.exp(-integrated_hazard(t0, t, ctx, p, plan))


def sample_next_failure(t0: float, u: float, ctx: HazardContext, p: HazardParams,
                        plan: TariffPlan, max_horizon: float = MAX_HORIZON) -> float:
    """Invert the conditional survival: the t >= t0 with survival(t, t0) = u.

    The target cumulative hazard -log(u) is bracketed piece by piece (x2
    breakpoints, then maintenance epochs) before a bracketing root finder
    runs inside the final smooth piece. Returns ``math.inf`` when the hazard
    accumulated up to ``t0 + max_horizon`` stays below the target.
    """
    if not 0.0 < u <= 1.0:
        raise ValueError(f"u must lie in (0, 1], got {u}")
    remaining = -math.log(u)
    if remaining == 0.0:
        return t0
    end = t0 + max_horizon
    origin = ctx.segment_origin
    for a, b, x2 in ctx.pieces(t0, end):
        scale = math.exp(_eta(ctx, x2, p, plan))

        def cum(t, a=a, scale=scale):
            return (scale * float(_baseline_integral(a, t, origin, p))
                    + float(_weibull_cumulative(t, origin, p) - _weibull_cumulative(a, origin, p)))

        piece_total = cum(b)
        if piece_total < remaining:
            remaining -= piece_total
            continue
        lo, hi = _bracket_epoch(a, b, remaining, cum, origin, p)
        if cum(hi) == remaining:
            return hi
        return brentq(lambda t: cum(t) - remaining, lo, hi, xtol=TIME_TOL, rtol=4 * np.finfo(float).eps)
    return math.inf


def _bracket_epoch(a: float, b: float, target: float, cum, origin: float, p: HazardParams):
    """Smallest maintenance-epoch interval inside [a, b] where ``cum`` reaches ``target``."""
    d = p.pm_interval
    base = _pm_base(origin, p)
    k_lo = math.floor((a - base) / d) + 1  # first epoch strictly after a

    def epoch(k):
        return min(base + k * d, b)

    # exponential search for an epoch index past the root
    step = 1
    k_hi = k_lo
    while epoch(k_hi) < b and cum(epoch(k_hi)) < target:
        k_lo = k_hi + 1
        k_hi += step
        step *= 2
    # binary search for the first epoch index reaching the target
    while k_lo < k_hi:
        mid = (k_lo + k_hi) // 2
        if epoch(mid) < b and cum(epoch(mid)) < target:
            k_lo = mid + 1
        else:
            k_hi = mid
    hi = epoch(k_hi)
    lo = max(a, base + (k_hi - 1) * d)
    return min(lo, hi), hi


# -- batch API (constant covariates per path) -----------------------------------------

def cumulative_hazard_batch(t0, t1, eta, origin, p: HazardParams):
    """Vectorized cumulative total hazard with a fixed linear predictor per path."""
    minor = np.exp(eta) * _baseline_integral(t0, t1, origin, p)
    return minor + _weibull_cumulative(t1, origin, p) - _weibull_cumulative(t0, origin, p)


def total_intensity_batch(t, eta, origin, p: HazardParams):
    return np.exp(eta) * _baseline_at(t, origin, p) + np.asarray(catastrophic_intensity(t, p, origin))


def invert_batch(t0, target, eta, origin, p: HazardParams, max_horizon: float = MAX_HORIZON,
                 tol: float = TIME_TOL, max_iter: int = 200) -> np.ndarray:
    """Solve cumulative_hazard_batch(t0, t) = target for every path.

    Safeguarded Newton: each iterate stays inside a shrinking bracket and
    falls back to bisection whenever the Newton step leaves it, which keeps
    the method robust across the intensity jumps at maintenance epochs.
    """
    t0 = np.asarray(t0, dtype=float)
    target = np.asarray(target, dtype=float)
    eta = np.broadcast_to(np.asarray(eta, dtype=float), t0.shape)
    origin = np.broadcast_to(np.asarray(origin, dtype=float), t0.shape)
    out = np.full(t0.shape, np.inf)

    def H(idx, t):
        return cumulative_hazard_batch(t0[idx], t, eta[idx], origin[idx], p)

    idx = np.flatnonzero(H(np.arange(t0.size), t0 + max_horizon) >= target)
    if idx.size == 0:
        return out
    lo = t0[idx].copy()
    hi = lo + 1.0
    while True:
        short = H(idx, hi) < target[idx]
        if not short.any():
            break
        hi[short] = lo[short] + np.minimum(2.0 * (hi[short] - lo[short]), max_horizon)
    x = 0.5 * (lo + hi)
    active = np.arange(idx.size)
    for _ in range(max_iter):
        sel = idx[active]
        xa = x[active]
        f = H(sel, xa) - target[sel]
        below = f < 0
        lo[active] = np.where(below, xa, lo[active])
        hi[active] = np.where(below, hi[active], xa)
        slope = total_intensity_batch(xa, eta[sel], origin[sel], p)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = xa - f / slope
        ok = np.isfinite(newton) & (newton > lo[active]) & (newton < hi[active])
        nxt = np.where(ok, newton, 0.5 * (lo[active] + hi[active]))
        done = (np.abs(nxt - xa) < tol) | (hi[active] - lo[active] < tol) | (f == 0)
        x[active] = np.where(f == 0, xa, nxt)
        active = active[~done]
        if active.size == 0:
            break
    out[idx] = x
    return out
