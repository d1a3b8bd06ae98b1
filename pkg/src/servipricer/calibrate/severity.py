"""Severity block: gamma margins per cost class and the Frank dependence of f3 pairs.

An f3 repair is one type-1 plus one type-2 repair, so the type-1 margin is
fitted on f1 costs together with the first f3 sub-cost (likewise for
type 2). The copula parameter is then fitted on the f3 pairs with the
margins held at their estimates.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special, stats

from ..copula import frank_logpdf
from ..model import CATASTROPHIC, F1, F2, F3, MAINTENANCE, GammaCost, PortfolioDataset, SeverityParams
from .optim import Param, maximize
from .result import FitResult

_U_CLIP = 1e-12


def severity_samples(dataset: PortfolioDataset) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Costs per gamma class and the (type-1, type-2) sub-cost pairs of f3 repairs."""
    costs = {MAINTENANCE: [], F1: [], F2: [], CATASTROPHIC: []}
    pairs = []
    for tl in sorted(dataset.timelines, key=lambda tl: tl.machine_id):
        for e in tl.events:
            if e.event_type in costs:
                costs[e.event_type].append(e.cost)
            elif e.event_type == F3 and e.sub_costs is not None:
                pairs.append(e.sub_costs)
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    costs[F1].extend(pairs[:, 0])
    costs[F2].extend(pairs[:, 1])
    return {k: np.sort(np.asarray(v, dtype=float)) for k, v in costs.items()}, pairs


def gamma_loglik(shape: float, scale: float, x: np.ndarray) -> float:
    return math.fsum(stats.gamma.logpdf(x, shape, scale=scale))


def fit_gamma(x: np.ndarray, label: str) -> FitResult:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return FitResult.failed(label, f"{x.size} cost observation(s); gamma unidentifiable")
    if np.any(x <= 0):
        return FitResult.failed(label, "costs must be positive")
    mean, var = float(np.mean(x)), float(np.var(x))
    if var <= 1e-12 * mean * mean:
        return FitResult.failed(label, "zero cost variance: gamma shape diverges")
    specs = [Param(f"{label}.shape", "log"), Param(f"{label}.scale", "log")]
    # sufficient statistics make each evaluation O(1)
    n, s, slog = x.size, math.fsum(x), math.fsum(np.log(x))

    def loglik(z):
        k, th = math.exp(z[0]), math.exp(z[1])
        return (k - 1.0) * slog - s / th - n * (special.gammaln(k) + k * math.log(th))

    start = np.log([mean * mean / var, var / mean])
    res = maximize(loglik, start, specs, n)
    k, th = (float(v) for v in np.exp(res.x))
    return FitResult(
        estimates=GammaCost(k, th),
        standard_errors=res.std_errors(),
        ci95=res.ci95(),
        point=res.natural,
        loglik_at_optimum=res.loglik,
        loglik_start=res.loglik_start,
        converged=res.converged,
        iterations=res.iterations,
        errors={} if res.converged else {label: res.message},
    )


def fit_frank(pairs: np.ndarray, margin1: GammaCost, margin2: GammaCost) -> FitResult:
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if len(pairs) < 2:
        return FitResult.failed("theta", "fewer than two f3 cost pairs; copula parameter unidentifiable")
    u = np.clip(stats.gamma.cdf(pairs[:, 0], margin1.shape, scale=margin1.scale), _U_CLIP, 1 - _U_CLIP)
    v = np.clip(stats.gamma.cdf(pairs[:, 1], margin2.shape, scale=margin2.scale), _U_CLIP, 1 - _U_CLIP)

    def loglik(z):
        return math.fsum(frank_logpdf(u, v, float(z[0])))

    res = maximize(loglik, np.zeros(1), [Param("theta")], len(pairs))
    return FitResult(
        estimates=float(res.x[0]),
        standard_errors=res.std_errors(),
        ci95=res.ci95(),
        point=res.natural,
        loglik_at_optimum=res.loglik,
        loglik_start=res.loglik_start,
        converged=res.converged,
        iterations=res.iterations,
        errors={} if res.converged else {"theta": res.message},
    )


_LABELS = {MAINTENANCE: "gamma_m", F1: "gamma_1", F2: "gamma_2", CATASTROPHIC: "gamma_c"}


def fit_severity(dataset: PortfolioDataset) -> FitResult:
    costs, pairs = severity_samples(dataset)
    parts = {label: fit_gamma(costs[cls], label) for cls, label in _LABELS.items()}
    if parts["gamma_1"].estimates is not None and parts["gamma_2"].estimates is not None:
        parts["theta"] = fit_frank(pairs, parts["gamma_1"].estimates, parts["gamma_2"].estimates)
    else:
        parts["theta"] = FitResult.failed("theta", "type-1 or type-2 margin not identified")
    return _combine(parts)


def _combine(parts: dict[str, FitResult]) -> FitResult:
    errors, se, ci, point = {}, {}, {}, {}
    for part in parts.values():
        errors.update(part.errors)
        se.update(part.standard_errors)
        ci.update(part.ci95)
        point.update(part.point)
    estimates = None
    if all(p.estimates is not None for p in parts.values()):
        estimates = SeverityParams(
            maintenance=parts["gamma_m"].estimates,
            minor1=parts["gamma_1"].estimates,
            minor2=parts["gamma_2"].estimates,
            catastrophic=parts["gamma_c"].estimates,
            frank_theta=parts["theta"].estimates,
        )
    return FitResult(
        estimates=estimates,
        standard_errors=se,
        ci95=ci,
        point=point,
        loglik_at_optimum=math.fsum(p.loglik_at_optimum for p in parts.values()),
        loglik_start=math.fsum(p.loglik_start for p in parts.values()),
        converged=all(p.converged for p in parts.values()),
        iterations=max(p.iterations for p in parts.values()),
        errors=errors,
        blocks=parts,
    )
