"""End-to-end experiment: simulate, calibrate per tariff plan, price, evaluate out of time."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .calibrate import FitResult, fit_all
from .evaluate import DEFAULT_BINS, EvaluationReport, build_report, contract_outcomes
from .model import CENSOR, MachineProfile, ModelParams, PortfolioDataset, TariffPlan, ValidationError
from .pricing import DEFAULT_PATHS, price_table
from .simulate import ObservationLaw, SimulationConfig, simulate_portfolio

log = logging.getLogger(__name__)

OUT_OF_TIME_YEARS = 5.0


@dataclass(frozen=True)
class PipelineConfig:
    params: ModelParams
    n: int = 5000
    t_obs: ObservationLaw = field(default_factory=lambda: ObservationLaw("fixed", 5.0))
    seed: int = 1
    plans: tuple[str, ...] = ("a", "b", "c")
    duration: float = 2.0
    n_paths: int = DEFAULT_PATHS
    n_bins: int = DEFAULT_BINS
    # "fresh": new data for the same machines; "continuation": the in-time paths carried on
    out_of_time: str = "fresh"

    def __post_init__(self):
        if self.out_of_time not in ("fresh", "continuation"):
            raise ValidationError(f"unknown out-of-time protocol {self.out_of_time!r}")
        if not self.duration > 0:
            raise ValidationError("duration must be positive")


@dataclass(frozen=True)
class PipelineResult:
    in_time: PortfolioDataset
    out_of_time: PortfolioDataset
    fits: dict[str, FitResult]
    prices: dict[str, dict[tuple, object]]
    report: EvaluationReport


def derived_seed(seed: int, purpose: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(0, purpose)).generate_state(1)[0])


def final_profiles(dataset: PortfolioDataset) -> dict[int, MachineProfile]:
    """Each machine's fixed covariates with x2 as it stands at the end of observation."""
    out = {}
    for tl in dataset.timelines:
        censor = tl.events[-1]
        assert censor.event_type == CENSOR
        out[tl.machine_id] = MachineProfile(tl.profile.fixed_covariates, int(censor.x2))
    return out


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    in_cfg = SimulationConfig(cfg.n, cfg.t_obs, cfg.seed, cfg.params)
    in_time = simulate_portfolio(in_cfg)
    log.info("in-time data: %d machines, %d rows", in_time.n_machines, len(in_time.events()))

    fits = {}
    for plan_id in cfg.plans:
        fits[plan_id] = fit_all(in_time, TariffPlan.named(plan_id), pm_interval=cfg.params.hazard.pm_interval,
                                pm_phase=cfg.params.hazard.pm_phase,
                                tvc_reset_on_overhaul=cfg.params.hazard.tvc_reset_on_overhaul)
        if fits[plan_id].estimates is None:
            raise RuntimeError(f"calibration of plan {plan_id} failed: {fits[plan_id].errors}")

    pricing_profiles = final_profiles(in_time)
    if cfg.out_of_time == "fresh":
        ids = sorted(pricing_profiles)
        oot_cfg = SimulationConfig(
            cfg.n, ObservationLaw("fixed", OUT_OF_TIME_YEARS), derived_seed(cfg.seed, 1), cfg.params,
            profiles=tuple(pricing_profiles[i] for i in ids),
            observation_lengths=(max(OUT_OF_TIME_YEARS, cfg.duration),) * cfg.n,
        )
        out_of_time = simulate_portfolio(oot_cfg)
        outcomes = contract_outcomes(out_of_time, cfg.duration, profiles=pricing_profiles)
    else:
        starts = {tl.machine_id: tl.observation_length for tl in in_time.timelines}
        long_cfg = SimulationConfig(
            cfg.n, cfg.t_obs, cfg.seed, cfg.params,
            observation_lengths=tuple(starts[i] + cfg.duration for i in sorted(starts)),
        )
        out_of_time = simulate_portfolio(long_cfg)
        outcomes = contract_outcomes(out_of_time, cfg.duration, start_times=starts, profiles=pricing_profiles)

    prices, tariff_prices, maintenance = {}, {}, {}
    for plan_id, fit in fits.items():
        table = price_table(fit.estimates, TariffPlan.named(plan_id), cfg.duration, cfg.n_paths, cfg.seed)
        prices[plan_id] = {profile.as_tuple(): quote for profile, quote in table}
        quotes = [prices[plan_id][o.profile.as_tuple()] for o in outcomes]
        tariff_prices[plan_id] = [q.price for q in quotes]
        maintenance[plan_id] = [q.components[2] for q in quotes]
    report = build_report(outcomes, tariff_prices, cfg.n_bins, maintenance_premium=maintenance,
                          pm_interval=cfg.params.hazard.pm_interval, meta={
        "n": cfg.n, "seed": cfg.seed, "t_obs": str(cfg.t_obs), "duration": cfg.duration,
        "n_paths": cfg.n_paths, "out_of_time": cfg.out_of_time,
    })
    return PipelineResult(in_time, out_of_time, fits, prices, report)
