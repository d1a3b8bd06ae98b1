"""Time-to-failure block: minor failures aggregated, catastrophic failures apart.

Each failure or censor row contributes ``c * log(intensity of its kind at t)``
plus the log survival from the previous failure ``t_prev`` to ``t``.
Maintenance rows carry no timing information here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import hazard
from ..model import CATASTROPHIC, CENSOR, MINOR_TYPES, HazardParams, PortfolioDataset, TariffPlan
from .optim import Param, maximize
from .result import FitResult

CENSORED, MINOR, CAT = 0, 1, 2


@dataclass(frozen=True)
class FailureRows:
    """Columnar view of the failure and censor rows, in canonical order."""

    t: np.ndarray
    t_prev: np.ndarray
    origin: np.ndarray
    kind: np.ndarray
    x1: np.ndarray
    x2: np.ndarray

    @classmethod
    def from_dataset(cls, dataset: PortfolioDataset) -> "FailureRows":
        cols = {k: [] for k in ("t", "t_prev", "origin", "kind", "x1", "x2")}
        for tl in sorted(dataset.timelines, key=lambda tl: tl.machine_id):
            origin = 0.0
            for e in tl.events:
                if e.event_type in MINOR_TYPES:
                    kind = MINOR
                elif e.event_type == CATASTROPHIC:
                    kind = CAT
                elif e.event_type == CENSOR:
                    kind = CENSORED
                else:
                    continue
                cols["t"].append(e.t)
                cols["t_prev"].append(max(e.t_prev, origin))
                cols["origin"].append(origin)
                cols["kind"].append(kind)
                cols["x1"].append(e.x1)
                cols["x2"].append(e.x2)
                if kind == CAT:
                    origin = e.t
        return cls(
            t=np.asarray(cols["t"], dtype=float),
            t_prev=np.asarray(cols["t_prev"], dtype=float),
            origin=np.asarray(cols["origin"], dtype=float),
            kind=np.asarray(cols["kind"], dtype=np.int8),
            x1=np.asarray(cols["x1"], dtype=float).reshape(-1, 4),
            x2=np.asarray(cols["x2"], dtype=float),
        )

    def __len__(self) -> int:
        return self.t.size

    @property
    def n_minor(self) -> int:
        return int(np.sum(self.kind == MINOR))

    @property
    def n_catastrophic(self) -> int:
        return int(np.sum(self.kind == CAT))

    @property
    def time_at_risk(self) -> float:
        return math.fsum(self.t - self.t_prev)


def hazard_param_specs(plan: TariffPlan) -> list[Param]:
    specs = [Param("alpha0", "log"), Param("kappa0", "logit"), Param("gamma0", "log")]
    specs += [Param(f"beta1[{j + 1}]") for j in plan.chi1]
    if plan.chi2:
        specs.append(Param("beta2"))
    specs += [Param("alpha_c", "log"), Param("kappa_c", "log")]
    return specs


def unpack(x, plan: TariffPlan, pm_interval: float = 1.0, pm_phase: str = "reset",
           tvc_reset_on_overhaul: bool = True) -> HazardParams:
    specs = hazard_param_specs(plan)
    values = {p.name: float(p.to_natural(v)) for p, v in zip(specs, x)}
    beta1 = [values.get(f"beta1[{j + 1}]", 0.0) for j in range(4)]
    return HazardParams(
        alpha0=values["alpha0"],
        kappa0=min(max(values["kappa0"], 0.0), 1.0),
        gamma0=values["gamma0"],
        beta1=tuple(beta1),
        beta2=values.get("beta2", 0.0),
        pm_interval=pm_interval,
        alpha_c=values["alpha_c"],
        kappa_c=values["kappa_c"],
        pm_phase=pm_phase,
        tvc_reset_on_overhaul=tvc_reset_on_overhaul,
    )


def pack(p: HazardParams, plan: TariffPlan) -> np.ndarray:
    values = {
        "alpha0": p.alpha0, "kappa0": p.kappa0, "gamma0": p.gamma0, "beta2": p.beta2,
        "alpha_c": p.alpha_c, "kappa_c": p.kappa_c,
        **{f"beta1[{j + 1}]": b for j, b in enumerate(p.beta1)},
    }
    return np.array([s.to_free(values[s.name]) for s in hazard_param_specs(plan)], dtype=float)


def _loglik_rows(p: HazardParams, plan: TariffPlan, rows: FailureRows) -> float:
    if len(rows) == 0:
        return 0.0
    eta = plan.linear_predictor(p, rows.x1, rows.x2)
    minor = rows.kind == MINOR
    cat = rows.kind == CAT
    with np.errstate(divide="ignore", invalid="ignore"):
        log_minor = np.log(hazard._baseline_at(rows.t[minor], rows.origin[minor], p)) + eta[minor]
        age = rows.t[cat] - rows.origin[cat]
        log_cat = math.log(p.kappa_c) + p.kappa_c * math.log(p.alpha_c) + (p.kappa_c - 1.0) * np.log(age)
    cum = hazard.cumulative_hazard_batch(rows.t_prev, rows.t, eta, rows.origin, p)
    # canonical row order keeps the sum order-independent; fsum removes rounding drift
    total = math.fsum(log_minor) + math.fsum(log_cat) - math.fsum(cum)
    return total if np.isfinite(total) else -math.inf


def time_to_failure_loglik(p: HazardParams, plan: TariffPlan, dataset: PortfolioDataset | FailureRows) -> float:
    rows = dataset if isinstance(dataset, FailureRows) else FailureRows.from_dataset(dataset)
    return _loglik_rows(p, plan, rows)


def _start(rows: FailureRows, plan: TariffPlan, **structure) -> np.ndarray:
    exposure = max(rows.time_at_risk, 1e-12)
    rate = rows.n_minor / exposure
    start = HazardParams(
        alpha0=rate / 2.0, kappa0=0.5, gamma0=rate / 4.0, beta1=(0.0,) * 4, beta2=0.0,
        pm_interval=structure.get("pm_interval", 1.0), alpha_c=rows.n_catastrophic / exposure,
        kappa_c=1.0,
    )
    return pack(start, plan)


def fit_time_to_failure(dataset: PortfolioDataset | FailureRows, plan: TariffPlan, *,
                        pm_interval: float = 1.0, pm_phase: str = "reset",
                        tvc_reset_on_overhaul: bool = True) -> FitResult:
    rows = dataset if isinstance(dataset, FailureRows) else FailureRows.from_dataset(dataset)
    if len(rows) == 0:
        return FitResult.failed("time_to_failure", "no events")
    if rows.n_minor == 0:
        return FitResult.failed("time_to_failure", "no minor failures observed; baseline unidentifiable")
    if rows.n_catastrophic == 0:
        return FitResult.failed("weibull", "no catastrophic failures observed; Weibull block unidentifiable")
    structure = dict(pm_interval=pm_interval, pm_phase=pm_phase, tvc_reset_on_overhaul=tvc_reset_on_overhaul)
    specs = hazard_param_specs(plan)

    def loglik(x):
        try:
            p = unpack(x, plan, **structure)
        except ValueError:
            return -math.inf
        return _loglik_rows(p, plan, rows)

    res = maximize(loglik, _start(rows, plan, **structure), specs, len(rows))
    errors = {} if res.converged else {"time_to_failure": res.message}
    return FitResult(
        estimates=unpack(res.x, plan, **structure),
        standard_errors=res.std_errors(),
        ci95=res.ci95(),
        point=res.natural,
        loglik_at_optimum=res.loglik,
        loglik_start=res.loglik_start,
        converged=res.converged,
        iterations=res.iterations,
        errors=errors,
    )
