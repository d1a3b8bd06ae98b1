"""Event-history simulation of a machine portfolio.

Each machine follows the loop: draw the next failure time by inverse
transform, decide minor versus catastrophic from the intensity ratio, draw
the minor subtype from the type logit, draw the cost, update x2 (set by an
f3, cleared by an overhaul) and the renewal origin (moved by an overhaul).
Preventive maintenance rows at multiples of the maintenance interval and a
final censor row are added afterwards.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import hazard
from .copula import frank_sample
from .hazard import HazardContext
from .model import (
    CATASTROPHIC, CENSOR, F1, F2, F3, MAINTENANCE, EventRecord, MachineProfile,
    ModelParams, PortfolioDataset, TariffPlan, Timeline, ValidationError,
)

THREADS_ENV = "SERVIPRICER_THREADS"


@dataclass(frozen=True)
class ObservationLaw:
    """Distribution of the observation window length.

    ``kind`` is ``fixed`` (always ``high``), ``uniform`` (U(low, high)) or
    ``mixed`` (``high`` with probability ``weight``, otherwise U(low, high)).
    """

    kind: str
    high: float
    low: float | None = None
    weight: float | None = None

    @classmethod
    def parse(cls, text: str) -> "ObservationLaw":
        parts = str(text).split(":")
        try:
            if parts[0] == "fixed" and len(parts) == 2:
                law = cls("fixed", float(parts[1]))
            elif parts[0] == "uniform" and len(parts) == 3:
                law = cls("uniform", float(parts[2]), low=float(parts[1]))
            elif parts[0] == "mixed" and len(parts) == 4:
                law = cls("mixed", float(parts[3]), low=float(parts[2]), weight=float(parts[1]))
            else:
                raise ValueError
        except ValueError:
            raise ValidationError(
                f"bad t_obs law {text!r}; use fixed:T, uniform:LO:HI or mixed:P:LO:HI") from None
        law.validate()
        return law

    def validate(self) -> None:
        if not self.high > 0:
            raise ValidationError("observation length must be positive")
        if self.low is not None and not 0 < self.low <= self.high:
            raise ValidationError("need 0 < low <= high for the observation window")
        if self.weight is not None and not 0 <= self.weight <= 1:
            raise ValidationError("mixture weight must be in [0, 1]")

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "fixed":
            return self.high
        if self.kind == "mixed" and rng.random() < self.weight:
            return self.high
        return float(rng.uniform(self.low, self.high))

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.high:g}"
        if self.kind == "uniform":
            return f"uniform:{self.low:g}:{self.high:g}"
        return f"mixed:{self.weight:g}:{self.low:g}:{self.high:g}"


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    t_obs: ObservationLaw
    seed: int
    params: ModelParams
    plan: TariffPlan = field(default_factory=lambda: TariffPlan.named("c"))
    # optional per-machine profiles (machine i uses profiles[i-1]); drawn at random otherwise
    profiles: tuple[MachineProfile, ...] | None = None
    # optional per-machine observation lengths overriding the law
    observation_lengths: tuple[float, ...] | None = None
    workers: int | None = None

    def __post_init__(self):
        problems = []
        if not isinstance(self.n, int) or self.n < 1:
            problems.append(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            problems.append(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.profiles is not None and len(self.profiles) != self.n:
            problems.append("profiles must list one profile per machine")
        if self.observation_lengths is not None:
            if len(self.observation_lengths) != self.n:
                problems.append("observation_lengths must list one value per machine")
            elif any(not t > 0 for t in self.observation_lengths):
                problems.append("observation lengths must be positive")
        if problems:
            raise ValidationError("invalid simulation config: " + "; ".join(problems))


# Independent streams are keyed with spawn keys; plain entropy lists would
# collide because trailing zeros do not change a SeedSequence.
EVENT_STREAM, SETUP_STREAM = 0, 1


def machine_seed(master: int, machine_id: int, stream: int = EVENT_STREAM) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=(int(machine_id), int(stream)))


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# -- single draws ------------------------------------------------------------------

def get_failure_time(ctx: HazardContext, t_previous: float, p: ModelParams, plan: TariffPlan,
                     rng: np.random.Generator) -> float:
    u = 1.0 - rng.random()  # in (0, 1]
    return hazard.sample_next_failure(t_previous, u, ctx, p.hazard, plan)


def get_failure_type(ctx: HazardContext, t: float, p: ModelParams, plan: TariffPlan,
                     rng: np.random.Generator) -> str:
    """Two-stage type draw: minor vs catastrophic, then the minor subtype."""
    lam_minor = hazard.minor_intensity(t, ctx, p.hazard, plan)
    lam_cat = hazard.catastrophic_intensity(t, p.hazard, ctx.segment_origin)
    total = lam_minor + lam_cat
    assert total > 0, "a failure cannot occur where the total intensity vanishes"
    if rng.random() * total >= lam_minor:
        return CATASTROPHIC
    probs = p.type_logit.probabilities(ctx.fixed_covariates, plan.z)
    return (F1, F2, F3)[_categorical(probs, rng.random())]


def _categorical(probs, u: float) -> int:
    cum = np.cumsum(probs)
    return int(min(np.searchsorted(cum, u * cum[-1], side="right"), len(probs) - 1))


def get_failure_costs(profile: MachineProfile, y: str, p: ModelParams,
                      rng: np.random.Generator) -> tuple[float, tuple[float, float] | None]:
    """Cost of one failure; for an f3 also the (type-1, type-2) cost pair."""
    sev = p.severity
    if y == F3:
        u, v = frank_sample(rng.random(), rng.random(), sev.frank_theta)
        c1 = float(stats.gamma.ppf(u, sev.minor1.shape, scale=sev.minor1.scale))
        c2 = float(stats.gamma.ppf(v, sev.minor2.shape, scale=sev.minor2.scale))
        return c1 + c2, (c1, c2)
    if y not in (F1, F2, CATASTROPHIC):
        raise ValueError(f"{y!r} is not a failure type")
    g = sev.for_class(y)
    return float(rng.gamma(g.shape, g.scale)), None


def get_maintenance_costs(profile: MachineProfile, p: ModelParams, rng: np.random.Generator) -> float:
    g = p.severity.maintenance
    return float(rng.gamma(g.shape, g.scale))


# -- machine and portfolio -------------------------------------------------------------

def simulate_machine(profile: MachineProfile, t_obs: float, p: ModelParams, plan: TariffPlan,
                     seed, machine_id: int = 1) -> Timeline:
    if not t_obs > 0:
        raise ValidationError("t_obs must be positive")
    rng = np.random.default_rng(seed)
    hp = p.hazard
    x1 = profile.fixed_covariates
    x2 = profile.initial_tvc
    origin = 0.0
    t = 0.0
    failures: list[EventRecord] = []
    # (time, x2 after the event, origin after the event) for maintenance bookkeeping
    states: list[tuple[float, int, float]] = []
    while True:
        ctx = HazardContext(x1, x2, (), origin)
        t_next = get_failure_time(ctx, t, p, plan, rng)
        if t_next > t_obs:
            break
        y = get_failure_type(ctx, t_next, p, plan, rng)
        cost, pair = get_failure_costs(profile, y, p, rng)
        failures.append(EventRecord(machine_id, t_next, t, 1, y, cost, x1, x2, pair))
        if y == F3:
            x2 = 1
        elif y == CATASTROPHIC:
            origin = t_next
            if hp.tvc_reset_on_overhaul:
                x2 = 0
        states.append((t_next, x2, origin))
        t = t_next
    censor = EventRecord(machine_id, t_obs, t, 0, CENSOR, 0.0, x1, x2)

    maintenance = []
    last_pm = 0.0
    for j in range(1, math.floor(t_obs / hp.pm_interval + 1e-12) + 1):
        s = j * hp.pm_interval
        x2_s, origin_s = profile.initial_tvc, 0.0
        for when, x2_after, origin_after in states:
            if when >= s:
                break
            x2_s, origin_s = x2_after, origin_after
        cost = get_maintenance_costs(profile, p, rng)
        maintenance.append(EventRecord(machine_id, s, max(last_pm, origin_s), 1, MAINTENANCE, cost, x1, x2_s))
        last_pm = s

    events = sorted([*failures, *maintenance], key=EventRecord.sort_key) + [censor]
    return Timeline(machine_id, profile, t_obs, tuple(events))


def _machine_setup(config: SimulationConfig, machine_id: int) -> tuple[MachineProfile, float]:
    rng = np.random.default_rng(machine_seed(config.seed, machine_id, SETUP_STREAM))
    if config.profiles is not None:
        profile = config.profiles[machine_id - 1]
    else:
        profile = MachineProfile(tuple(int(b) for b in rng.integers(0, 2, size=4)), 0)
    if config.observation_lengths is not None:
        t_obs = float(config.observation_lengths[machine_id - 1])
    else:
        t_obs = config.t_obs.draw(rng)
    return profile, t_obs


def _simulate_range(config: SimulationConfig, ids: range) -> list[Timeline]:
    out = []
    for i in ids:
        profile, t_obs = _machine_setup(config, i)
        out.append(simulate_machine(profile, t_obs, config.params, config.plan, machine_seed(config.seed, i), i))
    return out


def simulate_portfolio(config: SimulationConfig) -> PortfolioDataset:
    """Simulate ``config.n`` independent machines.

    Machine ``i`` draws everything from streams keyed by ``(seed, i)``, so the
    result does not depend on the number of workers.
    """
    workers = worker_count(config.workers)
    ids = range(1, config.n + 1)
    if workers == 1 or config.n < 2 * workers:
        return PortfolioDataset(tuple(_simulate_range(config, ids)))
    chunk = math.ceil(config.n / workers)
    chunks = [ids[k:k + chunk] for k in range(0, config.n, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_simulate_range, [config] * len(chunks), chunks)
    return PortfolioDataset(tuple(tl for part in parts for tl in part))
