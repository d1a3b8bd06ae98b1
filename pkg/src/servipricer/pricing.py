"""Break-even prices of full-service contracts by Monte Carlo.

Contract paths start at virtual age 0 with the profile's initial x2. Failure
times use antithetic pairs of uniforms. Every simulation step draws arrays
of a fixed size, so two profiles priced with the same seed see common random
numbers and their price difference has a small paired standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from . import hazard
from .copula import frank_sample
from .model import ContractQuote, MachineProfile, ModelParams, TariffPlan, ValidationError, enumerate_profiles

DEFAULT_PATHS = 100_000
MAX_STEPS = 100_000


@dataclass(frozen=True)
class PathSummary:
    """Per-path outcomes of one contract simulation (antithetic partners adjacent in halves)."""

    n_minor: np.ndarray
    n_catastrophic: np.ndarray
    failure_cost: np.ndarray
    maintenance_cost: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.n_minor.size


def _pair_means(x: np.ndarray) -> np.ndarray:
    half = x.size // 2
    return 0.5 * (x[:half] + x[half:])


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    pairs = _pair_means(np.asarray(x, dtype=float))
    se = float(np.std(pairs, ddof=1) / math.sqrt(pairs.size)) if pairs.size > 1 else math.nan
    return float(np.mean(pairs)), se


def maintenance_count(duration: float, pm_interval: float) -> int:
    return int(math.floor(duration / pm_interval + 1e-12))


def simulate_contract_paths(profile: MachineProfile, duration: float, p: ModelParams, plan: TariffPlan,
                            n_paths: int = DEFAULT_PATHS, seed: int = 0) -> PathSummary:
    if not duration > 0:
        raise ValidationError(f"duration must be positive, got {duration}")
    if n_paths < 1:
        raise ValidationError("n_paths must be at least 1")
    hp = p.hazard
    half = max(1, math.ceil(n_paths / 2))
    size = 2 * half
    event_seq, pm_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(event_seq)

    x1 = np.asarray(profile.fixed_covariates, dtype=float)
    probs = p.type_logit.probabilities(profile.fixed_covariates, plan.z)
    cum_probs = np.cumsum(probs)
    eta_by_x2 = (plan.linear_predictor(hp, x1, 0), plan.linear_predictor(hp, x1, 1))
    sev = p.severity

    t = np.zeros(size)
    origin = np.zeros(size)
    x2 = np.full(size, profile.initial_tvc, dtype=np.int8)
    n_minor = np.zeros(size, dtype=np.int64)
    n_cat = np.zeros(size, dtype=np.int64)
    cost = np.zeros(size)
    active = np.arange(size)

    for _ in range(MAX_STEPS):
        if active.size == 0:
            break
        # fixed-size draws keep the random streams aligned across profiles
        u = 1.0 - rng.random(half)
        u_kind, u_type, u_cost, w_cost = rng.random((4, size))
        with np.errstate(divide="ignore"):
            target = -np.log(np.concatenate([u, 1.0 - u]))
        eta = np.where(x2[active] == 1, eta_by_x2[1], eta_by_x2[0])
        t_next = hazard.invert_batch(t[active], target[active], eta, origin[active], hp)
        hit = t_next <= duration
        idx = active[hit]
        tn = t_next[hit]
        eta_hit = eta[hit]
        active = idx
        if idx.size == 0:
            break
        lam_minor = np.exp(eta_hit) * hazard._baseline_at(tn, origin[idx], hp)
        lam_cat = np.asarray(hazard.catastrophic_intensity(tn, hp, origin[idx]), dtype=float)
        is_cat = u_kind[idx] * (lam_minor + lam_cat) >= lam_minor

        cat = idx[is_cat]
        cost[cat] += stats.gamma.ppf(u_cost[cat], sev.catastrophic.shape, scale=sev.catastrophic.scale)
        n_cat[cat] += 1
        origin[cat] = tn[is_cat]
        if hp.tvc_reset_on_overhaul:
            x2[cat] = 0

        minor = idx[~is_cat]
        n_minor[minor] += 1
        kind = np.minimum(np.searchsorted(cum_probs, u_type[minor] * cum_probs[-1], side="right"), 2)
        f1, f2, f3 = minor[kind == 0], minor[kind == 1], minor[kind == 2]
        cost[f1] += stats.gamma.ppf(u_cost[f1], sev.minor1.shape, scale=sev.minor1.scale)
        cost[f2] += stats.gamma.ppf(u_cost[f2], sev.minor2.shape, scale=sev.minor2.scale)
        if f3.size:
            a, b = frank_sample(u_cost[f3], w_cost[f3], sev.frank_theta)
            cost[f3] += (stats.gamma.ppf(a, sev.minor1.shape, scale=sev.minor1.scale)
                         + stats.gamma.ppf(b, sev.minor2.shape, scale=sev.minor2.scale))
            x2[f3] = 1
        t[idx] = tn
    else:
        raise RuntimeError("contract simulation did not terminate; hazard too large for the horizon")

    n_m = maintenance_count(duration, hp.pm_interval)
    pm_rng = np.random.default_rng(pm_seq)
    m = sev.maintenance
    pm_cost = pm_rng.gamma(m.shape, m.scale, size=(n_m, size)).sum(axis=0) if n_m else np.zeros(size)
    return PathSummary(n_minor, n_cat, cost, pm_cost)


def expected_counts(profile: MachineProfile, duration: float, p: ModelParams, plan: TariffPlan,
                    n_paths: int = DEFAULT_PATHS, seed: int = 0) -> tuple[float, float, float, float]:
    """Monte-Carlo ``(E[N_minor], E[N_fc], se_minor, se_fc)`` over the contract horizon."""
    paths = simulate_contract_paths(profile, duration, p, plan, n_paths, seed)
    m, se_m = _mean_se(paths.n_minor)
    c, se_c = _mean_se(paths.n_catastrophic)
    return m, c, se_m, se_c


def _quote(profile: MachineProfile, duration: float, p: ModelParams, plan: TariffPlan,
           paths: PathSummary) -> ContractQuote:
    sev = p.severity
    probs = p.type_logit.probabilities(profile.fixed_covariates, plan.z)
    mean_minor_cost = float(probs[0] * sev.minor1.mean + probs[1] * sev.minor2.mean
                            + probs[2] * (sev.minor1.mean + sev.minor2.mean))
    per_path = paths.n_catastrophic * sev.catastrophic.mean + paths.n_minor * mean_minor_cost
    n_minor, _ = _mean_se(paths.n_minor)
    n_cat, _ = _mean_se(paths.n_catastrophic)
    _, se = _mean_se(per_path)
    cat_term = n_cat * sev.catastrophic.mean
    minor_term = n_minor * mean_minor_cost
    maint_term = maintenance_count(duration, p.hazard.pm_interval) * sev.maintenance.mean
    full, full_se = _mean_se(paths.failure_cost + paths.maintenance_cost)
    return ContractQuote(
        profile=profile,
        duration=float(duration),
        price=cat_term + minor_term + maint_term,
        mc_paths=paths.n_paths,
        mc_std_error=se,
        components=(cat_term, minor_term, maint_term),
        expected_minor=n_minor,
        expected_catastrophic=n_cat,
        full_path_price=full,
        full_path_std_error=full_se,
        path_values=_pair_means(per_path),
    )


def break_even_price(profile: MachineProfile, duration: float, p: ModelParams, plan: TariffPlan,
                     n_paths: int = DEFAULT_PATHS, seed: int = 0) -> ContractQuote:
    """Expected covered cost of a contract: failure terms plus the maintenance term.

    The failure terms multiply Monte-Carlo expected counts by analytic mean
    costs; ``full_path_price`` is the plain mean of simulated contract costs
    on the same paths, kept as a cross-check.
    """
    paths = simulate_contract_paths(profile, duration, p, plan, n_paths, seed)
    return _quote(profile, duration, p, plan, paths)


def price_table(p: ModelParams, plan: TariffPlan, duration: float, n_paths: int = DEFAULT_PATHS,
                seed: int = 0, profiles=None) -> list[tuple[MachineProfile, ContractQuote]]:
    """Quotes for every profile; profiles the plan cannot tell apart share one simulation."""
    if not duration > 0:
        raise ValidationError(f"duration must be positive, got {duration}")
    profiles = list(enumerate_profiles() if profiles is None else profiles)
    cache: dict[tuple, ContractQuote] = {}
    out = []
    for profile in profiles:
        key = plan.pricing_key(profile)
        if key not in cache:
            cache[key] = break_even_price(profile, duration, p, plan, n_paths, seed)
        out.append((profile, replace(cache[key], profile=profile)))
    return out


def prices_differ(a: ContractQuote, b: ContractQuote, n_se: float = 3.0) -> bool:
    """Whether two quotes differ beyond ``n_se`` standard errors.

    With common random numbers the paired per-path differences give the
    standard error; otherwise the two errors are combined independently.
    """
    diff = a.price - b.price
    if a.path_values is not None and b.path_values is not None and a.path_values.shape == b.path_values.shape:
        d = a.path_values - b.path_values
        se = float(np.std(d, ddof=1) / math.sqrt(d.size)) if d.size > 1 else math.nan
    else:
        se = math.hypot(a.mc_std_error, b.mc_std_error)
    if not math.isfinite(se):
        return diff != 0.0
    return abs(diff) > n_se * se


def count_distinct_prices(quotes, n_se: float = 3.0) -> int:
    """Number of groups of quotes that cannot be told apart at ``n_se`` standard errors.

    Groups are the connected components of the "not significantly different"
    relation.
    """
    quotes = [q[1] if isinstance(q, tuple) else q for q in quotes]
    parent = list(range(len(quotes)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(quotes)):
        for j in range(i):
            if not prices_differ(quotes[i], quotes[j], n_se):
                parent[find(i)] = find(j)
    return len({find(i) for i in range(len(quotes))})
