"""Out-of-time tariff evaluation: loss ratios, quantile bins, Lorenz and ordered Lorenz curves."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import CENSOR, FAILURE_TYPES, MINOR_TYPES, MachineProfile, PortfolioDataset, ValidationError

DEFAULT_BINS = 10


def _fsum(x) -> float:
    return math.fsum(np.asarray(x, dtype=float).ravel())


def _as_arrays(prices, costs) -> tuple[np.ndarray, np.ndarray]:
    prices = np.asarray(prices, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if prices.shape != costs.shape or prices.ndim != 1:
        raise ValidationError("prices and costs must be 1-d arrays of equal length")
    if prices.size == 0:
        raise ValidationError("need at least one contract")
    return prices, costs


def _ids(ids, n: int) -> np.ndarray:
    return np.arange(1, n + 1) if ids is None else np.asarray(ids)


# -- loss ratio ------------------------------------------------------------------

def loss_ratio(prices, costs) -> float:
    """Total realized cost over total collected premium."""
    prices, costs = _as_arrays(prices, costs)
    total = _fsum(prices)
    if not total > 0:
        raise ValidationError("total premium must be positive")
    return _fsum(costs) / total


@dataclass(frozen=True)
class ContractOutcome:
    """Realized costs of one contract; ``times`` are measured from contract start."""

    machine_id: int
    profile: MachineProfile
    duration: float
    times: tuple[float, ...]
    costs: tuple[float, ...]

    @property
    def total_cost(self) -> float:
        return math.fsum(self.costs)

    def cost_until(self, t: float) -> float:
        return math.fsum(c for s, c in zip(self.times, self.costs) if s <= t)


def contract_outcomes(dataset: PortfolioDataset, duration: float, start_times: Mapping[int, float] | None = None,
                      profiles: Mapping[int, MachineProfile] | None = None) -> list[ContractOutcome]:
    """Cut each timeline to the contract window ``(start, start + duration]``.

    All non-censor rows (maintenance and failures) are covered costs.
    """
    out = []
    for tl in sorted(dataset.timelines, key=lambda tl: tl.machine_id):
        start = 0.0 if start_times is None else float(start_times[tl.machine_id])
        end = start + duration
        if tl.observation_length + 1e-9 < end:
            raise ValidationError(f"machine {tl.machine_id} is observed for less than the contract window")
        rows = [e for e in tl.events if e.event_type != CENSOR and start < e.t <= end + 1e-12]
        out.append(ContractOutcome(
            machine_id=tl.machine_id,
            profile=tl.profile if profiles is None else profiles[tl.machine_id],
            duration=float(duration),
            times=tuple(e.t - start for e in rows),
            costs=tuple(e.cost for e in rows),
        ))
    return out


def loss_ratio_over_time(outcomes: Sequence[ContractOutcome], prices, grid, maintenance_premium=None,
                         pm_interval: float = 1.0) -> list[tuple[float, float]]:
    """Cumulative cost up to each grid time over premium earned so far.

    Premium is earned linearly over the contract duration. When
    ``maintenance_premium`` (the maintenance part of each price) is given,
    that part is earned in equal slices at the maintenance epochs instead,
    matching the timing of the maintenance costs.
    """
    prices = np.asarray(prices, dtype=float)
    if prices.size != len(outcomes):
        raise ValidationError("need one price per contract")
    maint = np.zeros_like(prices) if maintenance_premium is None else np.asarray(maintenance_premium, dtype=float)

    def earned_share(g: float, o: ContractOutcome, p: float, m: float) -> float:
        linear = (p - m) * min(max(g / o.duration, 0.0), 1.0)
        if m == 0.0:
            return linear
        n_m = math.floor(o.duration / pm_interval + 1e-12)
        done = min(math.floor(g / pm_interval + 1e-12), n_m)
        return linear + m * done / n_m

    series = []
    for g in np.asarray(grid, dtype=float):
        earned = math.fsum(earned_share(g, o, p, m) for p, m, o in zip(prices, maint, outcomes))
        cost = math.fsum(o.cost_until(g) for o in outcomes)
        series.append((float(g), cost / earned if earned > 0 else math.nan))
    return series


# -- quantile plot -----------------------------------------------------------------

def quantile_bins(prices, costs, n_bins: int = DEFAULT_BINS, ids=None) -> list[tuple[float, float]]:
    """Average price and cost in equal-count bins of contracts sorted by price.

    Ties in price are broken by id; when the count does not divide evenly the
    first bins get one contract more.
    """
    prices, costs = _as_arrays(prices, costs)
    if n_bins < 2:
        raise ValidationError("need at least 2 bins")
    if prices.size < n_bins:
        raise ValidationError("need at least as many contracts as bins")
    order = np.lexsort((_ids(ids, prices.size), prices))
    return [(_fsum(prices[b]) / b.size, _fsum(costs[b]) / b.size) for b in np.array_split(order, n_bins)]


def quantile_bin_sizes(n: int, n_bins: int = DEFAULT_BINS) -> list[int]:
    return [b.size for b in np.array_split(np.arange(n), n_bins)]


# -- Lorenz curves ------------------------------------------------------------------

def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return _fsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))


def lorenz_gini(prices, costs, ids=None) -> tuple[list[tuple[float, float]], float]:
    """Lorenz curve of costs with contracts ordered by price, and its Gini index."""
    prices, costs = _as_arrays(prices, costs)
    total = _fsum(costs)
    if not total > 0:
        raise ValidationError("total cost must be positive")
    order = np.lexsort((_ids(ids, prices.size), prices))
    n = prices.size
    x = np.arange(n + 1) / n
    y = np.concatenate([[0.0], np.cumsum(costs[order]) / total])
    y[-1] = 1.0
    gini = 2.0 * _trapezoid(x - y, x)
    return list(zip(x.tolist(), y.tolist())), gini


def ordered_lorenz(prices_x, prices_y, costs) -> tuple[list[tuple[float, float]], float]:
    """Ordered Lorenz curve of an alternative tariff ``y`` against the base tariff ``x``.

    Contracts are ordered by the relativity ``prices_y / prices_x``; contracts
    with equal relativity enter together. The abscissa is the cumulative
    share of base premium, the ordinate the cumulative share of cost. The
    ordered Gini index is twice the signed area between diagonal and curve.
    """
    px, costs = _as_arrays(prices_x, costs)
    py = np.asarray(prices_y, dtype=float)
    if py.shape != px.shape:
        raise ValidationError("both tariffs must price every contract")
    if np.any(px <= 0):
        raise ValidationError("base prices must be positive")
    total_p, total_c = _fsum(px), _fsum(costs)
    if not total_c > 0:
        raise ValidationError("total cost must be positive")
    rel = py / px
    levels, group = np.unique(rel, return_inverse=True)
    fp = np.concatenate([[0.0], np.cumsum(np.bincount(group, weights=px, minlength=levels.size)) / total_p])
    fc = np.concatenate([[0.0], np.cumsum(np.bincount(group, weights=costs, minlength=levels.size)) / total_c])
    fp[-1] = fc[-1] = 1.0
    gini = 2.0 * _trapezoid(fp - fc, fp)
    return list(zip(fp.tolist(), fc.tolist())), gini


def is_convex(points, tol: float = 0.0) -> bool:
    """Whether successive slopes of a piecewise-linear curve never decrease (beyond ``tol``)."""
    pts = np.asarray(points, dtype=float)
    dx, dy = np.diff(pts[:, 0]), np.diff(pts[:, 1])
    keep = dx > 0
    slopes = dy[keep] / dx[keep]
    return bool(np.all(np.diff(slopes) >= -tol))


def ordered_lorenz_slopes(prices_x, prices_y, costs) -> tuple[np.ndarray, np.ndarray]:
    """Segment slopes of the ordered Lorenz curve and their sampling standard errors.

    The slope of a relativity group is its cost share over its premium
    share; its error treats the group's costs as an i.i.d. sample. Groups
    of a single contract borrow the spread of all costs.
    """
    px, costs = _as_arrays(prices_x, costs)
    rel = np.asarray(prices_y, dtype=float) / px
    levels, group = np.unique(rel, return_inverse=True)
    total_p, total_c = _fsum(px), _fsum(costs)
    overall_sd = float(np.std(costs, ddof=1)) if costs.size > 1 else 0.0
    slopes, errors = np.empty(levels.size), np.empty(levels.size)
    for k in range(levels.size):
        members = group == k
        share_p = _fsum(px[members]) / total_p
        c = costs[members]
        slopes[k] = _fsum(c) / total_c / share_p
        sd = float(np.std(c, ddof=1)) if c.size > 1 else overall_sd
        errors[k] = sd * math.sqrt(c.size) / total_c / share_p
    return slopes, errors


def convex_within_noise(prices_x, prices_y, costs, n_se: float = 3.0) -> bool:
    """Whether no slope of the ordered Lorenz curve drops by more than ``n_se`` standard errors.

    Realized costs are noisy, so the strict check of :func:`is_convex`
    fails on finite samples even when the expected curve is convex.
    """
    slopes, errors = ordered_lorenz_slopes(prices_x, prices_y, costs)
    drops = np.diff(slopes)
    allowed = n_se * np.hypot(errors[1:], errors[:-1])
    return bool(np.all(drops >= -allowed))


def below_diagonal(points, tol: float = 1e-12) -> bool:
    pts = np.asarray(points, dtype=float)
    return bool(np.all(pts[:, 1] <= pts[:, 0] + tol))


# -- exposure and empirical frequencies -------------------------------------------------------

def _x2_exposure(tl) -> tuple[float, float]:
    """Time spent with x2 = 0 and with x2 = 1."""
    spent = [0.0, 0.0]
    prev = 0.0
    for e in tl.events:
        spent[int(e.x2)] += e.t - prev
        prev = e.t
    return spent[0], spent[1]


def relative_exposure(dataset: PortfolioDataset, group_by: str = "contract_length") -> dict:
    """Share of total observed exposure per group.

    ``group_by`` is ``contract_length`` (whole years of observation),
    ``x1_1`` … ``x1_4`` (fixed covariate level) or ``x2`` (time spent at each
    level of the time-varying covariate).
    """
    totals: dict = {}
    if group_by == "x2":
        for tl in dataset.timelines:
            for level, spent in enumerate(_x2_exposure(tl)):
                totals[level] = totals.get(level, []) + [spent]
    elif group_by == "contract_length":
        for tl in dataset.timelines:
            key = int(math.floor(tl.observation_length + 1e-9))
            totals.setdefault(key, []).append(tl.observation_length)
    elif group_by in ("x1_1", "x1_2", "x1_3", "x1_4"):
        j = int(group_by[-1]) - 1
        for tl in dataset.timelines:
            totals.setdefault(tl.profile.fixed_covariates[j], []).append(tl.observation_length)
    else:
        raise ValidationError(f"unknown grouping {group_by!r}")
    grand = math.fsum(math.fsum(v) for v in totals.values())
    if not grand > 0:
        raise ValidationError("dataset has no exposure")
    return {k: math.fsum(totals[k]) / grand for k in sorted(totals)}


def _profile_matcher(profile_filter) -> Callable[[MachineProfile], bool]:
    if profile_filter is None:
        return lambda profile: True
    if callable(profile_filter):
        return profile_filter
    wanted = dict(profile_filter)

    def match(profile: MachineProfile) -> bool:
        return all(profile.fixed_covariates[j] == v for j, v in wanted.items())

    return match


def empirical_failure_frequency(dataset: PortfolioDataset, profile_filter=None, failure_type: str = "any") -> float:
    """Failures of ``failure_type`` per year of exposure among the matching machines.

    ``profile_filter`` is ``None``, a predicate on :class:`MachineProfile` or a
    mapping ``{covariate index: level}``. ``failure_type`` is one of the event
    codes, ``minor`` or ``any``.
    """
    if failure_type == "any":
        types = set(FAILURE_TYPES)
    elif failure_type == "minor":
        types = set(MINOR_TYPES)
    elif failure_type in FAILURE_TYPES:
        types = {failure_type}
    else:
        raise ValidationError(f"unknown failure type {failure_type!r}")
    match = _profile_matcher(profile_filter)
    machines = [tl for tl in dataset.timelines if match(tl.profile)]
    if not machines:
        raise ValidationError("profile filter matches no machine")
    count = sum(1 for tl in machines for e in tl.events if e.event_type in types)
    return count / math.fsum(tl.observation_length for tl in machines)


# -- report -------------------------------------------------------------------------------

@dataclass(frozen=True)
class EvaluationReport:
    """Per-tariff metrics plus pairwise ordered Lorenz results.

    ``tariffs`` maps a tariff id to its loss ratio, loss-ratio series,
    quantile bins, Lorenz points and Gini index. ``ordered`` maps
    ``"x_vs_y"`` to the ordered Lorenz points and Gini index.
    """

    tariffs: dict
    ordered: dict
    n_contracts: int
    duration: float
    meta: dict = field(default_factory=dict)

    def loss_ratio(self, tariff: str) -> float:
        return self.tariffs[tariff]["loss_ratio"]

    def gini(self, tariff: str) -> float:
        return self.tariffs[tariff]["gini"]

    def ordered_gini(self, x: str, y: str) -> float:
        return self.ordered[f"{x}_vs_{y}"]["ordered_gini"]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def build_report(outcomes: Sequence[ContractOutcome], tariff_prices: Mapping[str, Sequence[float]],
                 n_bins: int = DEFAULT_BINS, grid=None, meta: dict | None = None,
                 maintenance_premium: Mapping[str, Sequence[float]] | None = None,
                 pm_interval: float = 1.0) -> EvaluationReport:
    costs = np.array([o.total_cost for o in outcomes])
    ids = np.array([o.machine_id for o in outcomes])
    duration = max(o.duration for o in outcomes)
    if grid is None:
        grid = np.linspace(duration / 24.0, duration, 24)
    tariffs = {}
    for name, prices in tariff_prices.items():
        prices = np.asarray(prices, dtype=float)
        lorenz, gini = lorenz_gini(prices, costs, ids)
        tariffs[name] = {
            "loss_ratio": loss_ratio(prices, costs),
            "loss_ratio_series": loss_ratio_over_time(outcomes, prices, grid),
            "loss_ratio_series_matched": (
                loss_ratio_over_time(outcomes, prices, grid, maintenance_premium[name], pm_interval)
                if maintenance_premium is not None else None),
            "quantile_bins": quantile_bins(prices, costs, n_bins, ids),
            "lorenz": lorenz,
            "gini": gini,
        }
    names = list(tariff_prices)
    ordered = {}
    for i, x in enumerate(names):
        for y in names[i + 1:]:
            points, g = ordered_lorenz(tariff_prices[x], tariff_prices[y], costs)
            ordered[f"{x}_vs_{y}"] = {
                "points": points,
                "ordered_gini": g,
                "below_diagonal": below_diagonal(points),
                "convex": is_convex(points),
                "convex_within_noise": convex_within_noise(tariff_prices[x], tariff_prices[y], costs),
            }
    return EvaluationReport(tariffs, ordered, len(outcomes), float(duration), dict(meta or {}))
