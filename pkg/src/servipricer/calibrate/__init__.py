"""Maximum-likelihood calibration.

The joint likelihood factorizes into a time-to-failure block, a failure-type
block and a severity block, which are fitted independently and then
assembled into one :class:`~servipricer.model.ModelParams`.
"""

from __future__ import annotations

import math

from ..model import ModelParams, PortfolioDataset, TariffPlan
from .failure_types import fit_failure_types
from .result import FitResult
from .severity import fit_severity
from .time_to_failure import FailureRows, fit_time_to_failure, time_to_failure_loglik

BLOCKS = ("time_to_failure", "failure_types", "severity")


def fit_severities(dataset: PortfolioDataset, plan: TariffPlan | None = None) -> FitResult:
    """Severity block. ``plan`` is accepted for symmetry; cost models carry no covariates."""
    return fit_severity(dataset)


def fit_all(dataset: PortfolioDataset, plan: TariffPlan, *, pm_interval: float = 1.0,
            pm_phase: str = "reset", tvc_reset_on_overhaul: bool = True) -> FitResult:
    if dataset.n_machines == 0 or not any(tl.events for tl in dataset.timelines):
        return FitResult.failed("dataset", "no events")
    blocks = {
        "time_to_failure": fit_time_to_failure(dataset, plan, pm_interval=pm_interval, pm_phase=pm_phase,
                                               tvc_reset_on_overhaul=tvc_reset_on_overhaul),
        "failure_types": fit_failure_types(dataset, plan),
        "severity": fit_severities(dataset, plan),
    }
    errors, se, ci, point = {}, {}, {}, {}
    for block in blocks.values():
        errors.update(block.errors)
        se.update(block.standard_errors)
        ci.update(block.ci95)
        point.update(block.point)
    estimates = None
    if all(b.estimates is not None for b in blocks.values()):
        estimates = ModelParams(blocks["time_to_failure"].estimates, blocks["failure_types"].estimates,
                                blocks["severity"].estimates)
    return FitResult(
        estimates=estimates,
        standard_errors=se,
        ci95=ci,
        point=point,
        loglik_at_optimum=math.fsum(b.loglik_at_optimum for b in blocks.values()),
        loglik_start=math.fsum(b.loglik_start for b in blocks.values()),
        converged=all(b.converged for b in blocks.values()),
        iterations=sum(b.iterations for b in blocks.values()),
        errors=errors,
        blocks=blocks,
    )


__all__ = [
    "BLOCKS", "FailureRows", "FitResult", "fit_all", "fit_failure_types", "fit_severities",
    "fit_severity", "fit_time_to_failure", "time_to_failure_loglik",
]
