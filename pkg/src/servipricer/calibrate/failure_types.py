"""Failure-type block: multinomial logit over minor failures, f3 as reference."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from ..model import F1, F2, F3, N_FIXED, PortfolioDataset, TariffPlan, TypeLogitParams
from .optim import Param, maximize
from .result import FitResult

_CLASS = {F1: 0, F2: 1, F3: 2}


def type_design(dataset: PortfolioDataset, plan: TariffPlan) -> tuple[np.ndarray, np.ndarray]:
    """Design rows ``[1, x1[z]]`` and class labels (0=f1, 1=f2, 2=f3).

    Rows are in canonical machine/time order.
    """
    X, y = [], []
    for tl in sorted(dataset.timelines, key=lambda tl: tl.machine_id):
        for e in tl.events:
            if e.event_type in _CLASS:
                X.append([1.0, *(float(e.x1[j]) for j in plan.z)])
                y.append(_CLASS[e.event_type])
    return np.asarray(X, dtype=float).reshape(-1, 1 + len(plan.z)), np.asarray(y, dtype=np.int64)


def logit_param_specs(plan: TariffPlan) -> list[Param]:
    specs = []
    for k in (1, 2):
        specs.append(Param(f"alpha{k}[0]"))
        specs += [Param(f"alpha{k}[{j + 1}]") for j in plan.z]
    return specs


def unpack(x, plan: TariffPlan) -> TypeLogitParams:
    x = np.asarray(x, dtype=float)
    width = 1 + len(plan.z)
    vectors = []
    for k in range(2):
        block = x[k * width:(k + 1) * width]
        full = np.zeros(1 + N_FIXED)
        full[0] = block[0]
        for pos, j in enumerate(plan.z):
            full[1 + j] = block[1 + pos]
        vectors.append(tuple(full))
    return TypeLogitParams(tuple(vectors))


def type_loglik(x, X: np.ndarray, y: np.ndarray) -> float:
    width = X.shape[1]
    a1, a2 = x[:width], x[width:2 * width]
    scores = np.column_stack([X @ a1, X @ a2, np.zeros(len(y))])
    ll = scores[np.arange(len(y)), y] - special.logsumexp(scores, axis=1)
    return math.fsum(ll)


def fit_failure_types(dataset: PortfolioDataset, plan: TariffPlan) -> FitResult:
    X, y = type_design(dataset, plan)
    if len(y) == 0:
        return FitResult.failed("failure_types", "no minor failures observed")
    missing = [name for k, name in enumerate((F1, F2, F3)) if not np.any(y == k)]
    if missing:
        return FitResult.failed("failure_types", f"no {', '.join(missing)} failures observed; logit unidentifiable")
    specs = logit_param_specs(plan)
    res = maximize(lambda x: type_loglik(x, X, y), np.zeros(len(specs)), specs, len(y))
    # separation drives coefficients off to infinity without a finite optimum
    separated = np.any(np.abs(res.x) > 25.0)
    converged = res.converged and not separated
    errors = {}
    if not converged:
        errors["failure_types"] = "quasi-separation: coefficients diverge" if separated else res.message
    return FitResult(
        estimates=unpack(res.x, plan),
        standard_errors=res.std_errors(),
        ci95=res.ci95(),
        point=res.natural,
        loglik_at_optimum=res.loglik,
        loglik_start=res.loglik_start,
        converged=converged,
        iterations=res.iterations,
        errors=errors,
    )
