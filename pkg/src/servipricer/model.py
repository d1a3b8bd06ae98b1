"""Domain types shared across the package.

Event-type codes follow the dataset layout: ``m`` for preventive
maintenance, ``f1``/``f2``/``f3`` for the minor failure types (``f3`` is the
co-occurrence of a type-1 and a type-2 failure), ``fc`` for a catastrophic
failure and ``censor`` for the end-of-observation record.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Literal, Sequence

import numpy as np

N_FIXED = 4

MAINTENANCE = "m"
F1, F2, F3 = "f1", "f2", "f3"
CATASTROPHIC = "fc"
CENSOR = "censor"

MINOR_TYPES = (F1, F2, F3)
FAILURE_TYPES = (F1, F2, F3, CATASTROPHIC)
EVENT_TYPES = (MAINTENANCE, F1, F2, F3, CATASTROPHIC, CENSOR)

# maintenance first on ties, censor always last
_TIE_ORDER = {MAINTENANCE: 0, F1: 1, F2: 1, F3: 1, CATASTROPHIC: 1, CENSOR: 2}


class ValidationError(ValueError):
    """Raised when a domain object violates one of its invariants."""


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def _binary(values: Sequence[int], what: str) -> tuple[int, ...]:
    out = tuple(int(v) for v in values)
    _check(all(v in (0, 1) for v in out), f"{what} must be 0/1, got {values!r}")
    return out


@dataclass(frozen=True)
class MachineProfile:
    fixed_covariates: tuple[int, ...]
    initial_tvc: int = 0

    def __post_init__(self):
        fixed = _binary(self.fixed_covariates, "fixed covariates")
        _check(len(fixed) == N_FIXED, f"expected {N_FIXED} fixed covariates, got {len(fixed)}")
        object.__setattr__(self, "fixed_covariates", fixed)
        _check(self.initial_tvc in (0, 1), "initial_tvc must be 0 or 1")

    def as_tuple(self) -> tuple[int, ...]:
        return (*self.fixed_covariates, self.initial_tvc)


def enumerate_profiles() -> list[MachineProfile]:
    """All 32 profiles, lexicographic in (x1_1, ..., x1_4, x2)."""
    return [
        MachineProfile(combo[:N_FIXED], combo[N_FIXED])
        for combo in itertools.product((0, 1), repeat=N_FIXED + 1)
    ]


@dataclass(frozen=True)
class EventRecord:
    """One dataset row.

    ``x2`` is the time-varying covariate just before the event, so the row of
    the first ``f3`` failure still carries ``x2 = 0``. ``sub_costs`` holds the
    (type-1, type-2) cost pair behind an ``f3`` cost and is ``None`` otherwise.
    """

    machine_id: int
    t: float
    t_prev: float
    censored: int
    event_type: str
    cost: float
    x1: tuple[int, ...]
    x2: int
    sub_costs: tuple[float, float] | None = None

    def __post_init__(self):
        _check(self.machine_id >= 1, "machine_id must be positive")
        _check(self.event_type in EVENT_TYPES, f"unknown event type {self.event_type!r}")
        _check(0.0 <= self.t_prev <= self.t, f"need 0 <= t_prev <= t, got t_prev={self.t_prev}, t={self.t}")
        _check(self.censored in (0, 1), "censored flag must be 0 or 1")
        _check((self.censored == 0) == (self.event_type == CENSOR), "censored=0 exactly on censor rows")
        _check(self.cost >= 0.0, "cost must be non-negative")
        if self.event_type == CENSOR:
            _check(self.cost == 0.0, "censor rows carry zero cost")
        object.__setattr__(self, "x1", _binary(self.x1, "x1"))
        _check(len(self.x1) == N_FIXED, "x1 must have 4 entries")
        _check(self.x2 in (0, 1), "x2 must be 0 or 1")
        if self.sub_costs is not None:
            _check(self.event_type == F3, "sub_costs only apply to f3 rows")
            a, b = (float(c) for c in self.sub_costs)
            _check(a >= 0 and b >= 0, "sub_costs must be non-negative")
            object.__setattr__(self, "sub_costs", (a, b))

    @property
    def is_failure(self) -> bool:
        return self.event_type in FAILURE_TYPES

    def sort_key(self) -> tuple[float, int]:
        return (self.t, _TIE_ORDER[self.event_type])


@dataclass(frozen=True)
class Timeline:
    machine_id: int
    profile: MachineProfile
    observation_length: float
    events: tuple[EventRecord, ...]

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        _check(self.observation_length > 0, "observation_length must be positive")
        _check(len(events) > 0, "a timeline needs at least its censor record")
        keys = [e.sort_key() for e in events]
        _check(keys == sorted(keys), f"machine {self.machine_id}: events not sorted")
        _check(all(e.machine_id == self.machine_id for e in events), "foreign event in timeline")
        last = events[-1]
        _check(last.event_type == CENSOR and math.isclose(last.t, self.observation_length),
               f"machine {self.machine_id}: timeline must end with a censor row at t_obs")
        _check(sum(e.event_type == CENSOR for e in events) == 1, "exactly one censor row per timeline")
        # x2 is non-decreasing inside a renewal segment
        x2 = None
        for e in events:
            if x2 is not None and e.x2 < x2:
                raise ValidationError(f"machine {self.machine_id}: x2 decreases inside a segment")
            x2 = e.x2
            if e.event_type == CATASTROPHIC:
                x2 = None

    @property
    def failures(self) -> tuple[EventRecord, ...]:
        return tuple(e for e in self.events if e.is_failure)


@dataclass(frozen=True)
class PortfolioDataset:
    timelines: tuple[Timeline, ...]

    def __post_init__(self):
        object.__setattr__(self, "timelines", tuple(self.timelines))
        ids = sorted(tl.machine_id for tl in self.timelines)
        _check(ids == list(range(1, len(ids) + 1)), "machine ids must be unique and run 1..n")

    @property
    def n_machines(self) -> int:
        return len(self.timelines)

    def by_id(self) -> dict[int, Timeline]:
        return {tl.machine_id: tl for tl in self.timelines}

    def events(self) -> list[EventRecord]:
        """All rows, ordered by machine id then time."""
        return [e for tl in sorted(self.timelines, key=lambda tl: tl.machine_id) for e in tl.events]

    @cached_property
    def total_exposure(self) -> float:
        return math.fsum(tl.observation_length for tl in self.timelines)


PmPhase = Literal["reset", "calendar"]


@dataclass(frozen=True)
class HazardParams:
    """Minor-failure baseline, covariate effects and catastrophic Weibull.

    ``pm_phase`` and ``tvc_reset_on_overhaul`` are structural switches, not
    estimated quantities. With ``pm_phase="reset"`` the maintenance clock of
    the baseline restarts at each overhaul; ``"calendar"`` keeps maintenance
    epochs at multiples of ``pm_interval`` and only counts those after the
    last overhaul.
    """

    alpha0: float
    kappa0: float
    gamma0: float
    beta1: tuple[float, ...]
    beta2: float
    pm_interval: float
    alpha_c: float
    kappa_c: float
    pm_phase: PmPhase = "reset"
    tvc_reset_on_overhaul: bool = True

    def __post_init__(self):
        object.__setattr__(self, "beta1", tuple(float(b) for b in self.beta1))
        _check(len(self.beta1) == N_FIXED, "beta1 must have 4 entries")
        # alpha0 = 0 is admitted: it is the constant-hazard reduction
        _check(self.alpha0 >= 0, f"alpha0 must be >= 0, got {self.alpha0}")
        _check(0.0 <= self.kappa0 <= 1.0, f"kappa0 must lie in [0, 1], got {self.kappa0}")
        _check(self.gamma0 >= 0, f"gamma0 must be >= 0, got {self.gamma0}")
        _check(self.pm_interval > 0, "pm_interval must be positive")
        _check(self.alpha_c > 0, f"alpha_c must be positive, got {self.alpha_c}")
        _check(self.kappa_c > 0, f"kappa_c must be positive, got {self.kappa_c}")
        _check(self.pm_phase in ("reset", "calendar"), f"unknown pm_phase {self.pm_phase!r}")
        for name in ("alpha0", "kappa0", "gamma0", "beta2", "alpha_c", "kappa_c"):
            _check(math.isfinite(getattr(self, name)), f"{name} must be finite")


@dataclass(frozen=True)
class TypeLogitParams:
    """Multinomial-logit coefficients for f1 and f2; f3 is the reference class."""

    alpha_vectors: tuple[tuple[float, ...], tuple[float, ...]]

    def __post_init__(self):
        vecs = tuple(tuple(float(a) for a in v) for v in self.alpha_vectors)
        _check(len(vecs) == 2, "need exactly two coefficient vectors (f3 is the reference)")
        _check(all(len(v) == 1 + N_FIXED for v in vecs), "each vector holds an intercept and 4 coefficients")
        object.__setattr__(self, "alpha_vectors", vecs)

    def probabilities(self, x1: Sequence[int], z: Sequence[int] = range(N_FIXED)) -> np.ndarray:
        """P(f1), P(f2), P(f3) for fixed covariates ``x1``; only indices in ``z`` enter."""
        design = np.zeros(1 + N_FIXED)
        design[0] = 1.0
        for j in z:
            design[1 + j] = x1[j]
        scores = np.array([0.0, *(np.dot(v, design) for v in self.alpha_vectors)])
        # f3 is first in ``scores`` so reorder after normalising
        scores -= scores.max()
        w = np.exp(scores)
        w /= w.sum()
        return np.array([w[1], w[2], w[0]])


SEVERITY_CLASSES = (MAINTENANCE, F1, F2, CATASTROPHIC)


@dataclass(frozen=True)
class GammaCost:
    shape: float
    scale: float

    def __post_init__(self):
        _check(self.shape > 0 and self.scale > 0, f"gamma shape and scale must be positive, got {self}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def variance(self) -> float:
        return self.shape * self.scale**2


@dataclass(frozen=True)
class SeverityParams:
    maintenance: GammaCost
    minor1: GammaCost
    minor2: GammaCost
    catastrophic: GammaCost
    frank_theta: float

    def __post_init__(self):
        _check(math.isfinite(self.frank_theta), "frank_theta must be finite")

    def for_class(self, event_type: str) -> GammaCost:
        return {
            MAINTENANCE: self.maintenance,
            F1: self.minor1,
            F2: self.minor2,
            CATASTROPHIC: self.catastrophic,
        }[event_type]

    def mean_cost(self, event_type: str) -> float:
        """Expected cost of one event; an f3 costs one type-1 plus one type-2 repair."""
        if event_type == F3:
            return self.minor1.mean + self.minor2.mean
        return self.for_class(event_type).mean


@dataclass(frozen=True)
class ModelParams:
    hazard: HazardParams
    type_logit: TypeLogitParams
    severity: SeverityParams


@dataclass(frozen=True)
class TariffPlan:
    """Covariate sets used by each sub-model.

    ``chi1`` and ``z`` hold indices (0-based) into the four fixed covariates.
    Severity covariate sets must stay empty: the cost models carry no
    regression coefficients.
    """

    id: str
    chi1: tuple[int, ...] = ()
    chi2: bool = False
    z: tuple[int, ...] = ()
    w: tuple[int, ...] = ()
    w_y: tuple[int, ...] = ()
    w_c: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("chi1", "z", "w", "w_y", "w_c"):
            idx = tuple(sorted(set(int(j) for j in getattr(self, name))))
            _check(all(0 <= j < N_FIXED for j in idx), f"{name} indices must be in 0..3")
            object.__setattr__(self, name, idx)
        _check(not (self.w or self.w_y or self.w_c), "severity covariates are not supported")

    @classmethod
    def named(cls, plan_id: str) -> "TariffPlan":
        everything = tuple(range(N_FIXED))
        plans = {
            "a": cls("a"),
            "b": cls("b", chi1=everything, z=everything),
            "c": cls("c", chi1=everything, chi2=True, z=everything),
        }
        try:
            return plans[plan_id]
        except KeyError:
            raise ValidationError(f"unknown tariff plan {plan_id!r}; expected a, b or c") from None

    def chi1_mask(self) -> np.ndarray:
        mask = np.zeros(N_FIXED, dtype=bool)
        mask[list(self.chi1)] = True
        return mask

    def linear_predictor(self, hazard: HazardParams, x1, x2) -> np.ndarray:
        """beta1'chi1 + beta2*chi2 for (possibly stacked) covariates."""
        x1 = np.asarray(x1, dtype=float)
        eta = x1[..., list(self.chi1)] @ np.asarray(hazard.beta1)[list(self.chi1)]
        if self.chi2:
            eta = eta + hazard.beta2 * np.asarray(x2, dtype=float)
        return np.asarray(eta, dtype=float)

    def pricing_key(self, profile: MachineProfile) -> tuple:
        """Profiles with equal keys are indistinguishable under this plan."""
        used = sorted(set(self.chi1) | set(self.z))
        key = tuple(profile.fixed_covariates[j] for j in used)
        return key + ((profile.initial_tvc,) if self.chi2 else ())


@dataclass(frozen=True)
class ContractQuote:
    """Break-even price of one profile plus Monte-Carlo diagnostics.

    ``components`` is (catastrophic term, minor term, maintenance term).
    ``full_path_price`` is the mean simulated contract cost on the same paths.
    ``path_values`` (per antithetic pair) is kept for paired comparisons and
    left out of serialized output.
    """

    profile: MachineProfile
    duration: float
    price: float
    mc_paths: int
    mc_std_error: float
    components: tuple[float, float, float]
    expected_minor: float = 0.0
    expected_catastrophic: float = 0.0
    full_path_price: float = math.nan
    full_path_std_error: float = math.nan
    path_values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        _check(math.isclose(self.price, sum(self.components), rel_tol=1e-9, abs_tol=1e-9),
               "price must equal the sum of its components")
        _check(self.price >= self.components[2] - 1e-9, "price below the maintenance term")

    def to_dict(self) -> dict:
        cat, minor, maint = self.components
        return {
            "profile": list(self.profile.as_tuple()),
            "duration": self.duration,
            "price": self.price,
            "mc_paths": self.mc_paths,
            "mc_std_error": self.mc_std_error,
            "catastrophic_term": cat,
            "minor_term": minor,
            "maintenance_term": maint,
            "expected_minor": self.expected_minor,
            "expected_catastrophic": self.expected_catastrophic,
            "full_path_price": self.full_path_price,
            "full_path_std_error": self.full_path_std_error,
        }


def table3_params(**hazard_overrides) -> ModelParams:
    """Ground-truth simulation parameters of the reference experiment."""
    hazard = HazardParams(
        alpha0=0.5,
        kappa0=0.623,
        gamma0=0.1,
        beta1=(-0.2, 0.3, 0.4, -0.1),
        beta2=0.1,
        pm_interval=1.0,
        alpha_c=0.2,
        kappa_c=2.0,
    )
    if hazard_overrides:
        hazard = replace(hazard, **hazard_overrides)
    return ModelParams(
        hazard=hazard,
        type_logit=TypeLogitParams(((0.9, 0.4, 0.1, 0.0, 0.1), (0.9, 0.5, 0.0, 0.2, 0.2))),
        severity=SeverityParams(
            maintenance=GammaCost(20.0, 3.0),
            minor1=GammaCost(20.0, 3.0),
            minor2=GammaCost(30.0, 5.0),
            catastrophic=GammaCost(20.0, 10.0),
            frank_theta=0.5,
        ),
    )
