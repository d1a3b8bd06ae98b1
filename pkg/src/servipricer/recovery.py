"""Parameter-recovery study: repeated simulate-then-calibrate at known parameters."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .calibrate import fit_all
from .model import ModelParams, TariffPlan, ValidationError
from .simulate import ObservationLaw, SimulationConfig, simulate_portfolio

log = logging.getLogger(__name__)

# parameters with |truth| below this are judged on absolute error
SMALL_TRUTH = 0.2
REL_TOL = 0.05
ABS_TOL = 0.02


def truth_values(p: ModelParams, plan: TariffPlan) -> dict[str, float]:
    """Parameter values under the names a fit of ``plan`` reports."""
    h, s = p.hazard, p.severity
    out = {"alpha0": h.alpha0, "kappa0": h.kappa0, "gamma0": h.gamma0}
    out.update({f"beta1[{j + 1}]": h.beta1[j] for j in plan.chi1})
    if plan.chi2:
        out["beta2"] = h.beta2
    out.update({"alpha_c": h.alpha_c, "kappa_c": h.kappa_c})
    for k, vec in enumerate(p.type_logit.alpha_vectors, start=1):
        out[f"alpha{k}[0]"] = vec[0]
        out.update({f"alpha{k}[{j + 1}]": vec[1 + j] for j in plan.z})
    for label, g in (("gamma_m", s.maintenance), ("gamma_1", s.minor1), ("gamma_2", s.minor2),
                     ("gamma_c", s.catastrophic)):
        out[f"{label}.shape"] = g.shape
        out[f"{label}.scale"] = g.scale
    out["theta"] = s.frank_theta
    return out


def within_tolerance(estimate: float, truth: float) -> bool:
    if abs(truth) < SMALL_TRUTH:
        return abs(estimate - truth) <= ABS_TOL
    return abs(estimate - truth) <= REL_TOL * abs(truth)


def replication_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(1, r)).generate_state(1)[0])


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    truth: float
    mean: float
    std: float
    coverage: float
    within_tolerance: bool


@dataclass(frozen=True)
class RecoverySummary:
    replications: int
    succeeded: int
    failed: int
    n: int
    t_obs: str
    plan: str
    seed: int
    parameters: tuple[ParameterSummary, ...]
    estimates: dict[str, list[float]] = field(default_factory=dict, repr=False)
    failures: tuple[str, ...] = ()

    def by_name(self) -> dict[str, ParameterSummary]:
        return {p.name: p for p in self.parameters}

    def to_dict(self) -> dict:
        return {
            "replications": self.replications, "succeeded": self.succeeded, "failed": self.failed,
            "n": self.n, "t_obs": self.t_obs, "plan": self.plan, "seed": self.seed,
            "failures": list(self.failures),
            "parameters": [vars(p) for p in self.parameters],
            "estimates": self.estimates,
        }


def run_recovery(params: ModelParams, replications: int, n: int = 1000, t_obs: ObservationLaw | None = None,
                 seed: int = 1, plan: TariffPlan | None = None) -> RecoverySummary:
    if replications < 2:
        raise ValidationError("a recovery study needs at least 2 replications")
    t_obs = t_obs or ObservationLaw("fixed", 5.0)
    plan = plan or TariffPlan.named("c")
    truth = truth_values(params, plan)
    estimates = {k: [] for k in truth}
    covered = {k: 0 for k in truth}
    failures = []
    for r in range(replications):
        data = simulate_portfolio(SimulationConfig(n, t_obs, replication_seed(seed, r), params, plan))
        fit = fit_all(data, plan, pm_interval=params.hazard.pm_interval, pm_phase=params.hazard.pm_phase,
                      tvc_reset_on_overhaul=params.hazard.tvc_reset_on_overhaul)
        if not fit.ok:
            reason = "; ".join(f"{k}: {v}" for k, v in fit.errors.items()) or "did not converge"
            failures.append(f"replication {r}: {reason}")
            log.warning("replication %d excluded: %s", r, reason)
            continue
        for name, value in truth.items():
            estimates[name].append(fit.point[name])
            lo, hi = fit.ci95[name]
            covered[name] += int(lo <= value <= hi)
        log.info("replication %d/%d done", r + 1, replications)
    ok = replications - len(failures)
    rows = []
    for name, value in truth.items():
        vals = np.asarray(estimates[name])
        mean = float(np.mean(vals)) if ok else math.nan
        rows.append(ParameterSummary(
            name=name, truth=value, mean=mean,
            std=float(np.std(vals, ddof=1)) if ok > 1 else math.nan,
            coverage=covered[name] / ok if ok else math.nan,
            within_tolerance=bool(ok and within_tolerance(mean, value)),
        ))
    return RecoverySummary(replications, ok, len(failures), n, str(t_obs), plan.id, seed, tuple(rows),
                           estimates, tuple(failures))
