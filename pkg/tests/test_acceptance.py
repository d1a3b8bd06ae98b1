"""Acceptance criteria of the reference experiment, each reported as one pass/fail line.

Slow: the full pipeline and the recovery study together take several minutes.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from servipricer.hazard import HazardContext, sample_next_failure, total_intensity
from servipricer.model import CATASTROPHIC, F1, F2, F3, MAINTENANCE, MachineProfile, TariffPlan
from servipricer.pipeline import PipelineConfig, run_pipeline
from servipricer.pricing import break_even_price, count_distinct_prices, price_table
from servipricer.recovery import run_recovery, truth_values
from servipricer.simulate import get_failure_costs, get_maintenance_costs

pytestmark = pytest.mark.slow

SEED = 1


@pytest.fixture(scope="module")
def pipeline(truth):
    return run_pipeline(PipelineConfig(truth, n=5000, seed=SEED))


def test_parameter_recovery(truth, acceptance_log):
    summary = run_recovery(truth, replications=25, n=1000, seed=SEED)
    misses = [p for p in summary.parameters if not p.within_tolerance]
    detail = (f"{summary.succeeded}/25 replications fitted, "
              f"{len(summary.parameters) - len(misses)}/{len(summary.parameters)} means within tolerance")
    if misses:
        detail += "; misses: " + ", ".join(f"{p.name} {p.mean:.4f} vs {p.truth:g}" for p in misses)
    passed = not misses and summary.failed == 0
    acceptance_log("parameter recovery", passed, detail)
    assert passed, detail


def test_single_fit_confidence_intervals(pipeline, truth, plan_c, acceptance_log):
    fit = pipeline.fits["c"]
    values = truth_values(truth, plan_c)
    covered = {name: fit.ci95[name][0] <= v <= fit.ci95[name][1] for name, v in values.items()}
    logit = [k for k in values if k.startswith("alpha1[") or k.startswith("alpha2[")]
    severity = [k for k in values if k.startswith("gamma_") or k == "theta"]
    hazard = [k for k in values if k not in logit and k not in severity]
    n_h, n_l, n_s = (sum(covered[k] for k in group) for group in (hazard, logit, severity))
    missed = [k for k, ok in covered.items() if not ok]
    passed = n_h >= len(hazard) - 1 and n_l >= len(logit) - 1 and n_s == len(severity)
    detail = (f"covered hazard {n_h}/{len(hazard)}, logit {n_l}/{len(logit)}, severity {n_s}/{len(severity)}; "
              f"alpha0 {fit.point['alpha0']:.3f}; missed {missed or 'none'}")
    acceptance_log("single-fit confidence intervals", passed, detail)
    assert passed, detail


def test_loss_ratios(pipeline, acceptance_log):
    ratios = {name: pipeline.report.loss_ratio(name) for name in "abc"}
    passed = all(0.95 <= r <= 1.05 for r in ratios.values())
    acceptance_log("loss ratios", passed, ", ".join(f"{k} {v:.4f}" for k, v in ratios.items()))
    assert passed, ratios


def test_model_lift(pipeline, acceptance_log):
    report = pipeline.report
    gini = {name: report.gini(name) for name in "abc"}
    ab = report.ordered["a_vs_b"]
    bc = report.ordered_gini("b", "c")
    checks = {
        "gini b > a": gini["b"] > gini["a"],
        "gini c > a": gini["c"] > gini["a"],
        "ordered a vs b > 0": ab["ordered_gini"] > 0,
        "below diagonal": ab["below_diagonal"],
        "convex within noise": ab["convex_within_noise"],
        "|ordered b vs c| <= 0.03": abs(bc) <= 0.03,
    }
    passed = all(checks.values())
    detail = (f"gini a {gini['a']:.4f} b {gini['b']:.4f} c {gini['c']:.4f}; ordered a_vs_b "
              f"{ab['ordered_gini']:.4f} (strictly convex {ab['convex']}), b_vs_c {bc:.4f}; "
              f"failed {[k for k, v in checks.items() if not v] or 'none'}")
    acceptance_log("model lift", passed, detail)
    assert passed, detail


def test_price_structure(pipeline, acceptance_log):
    distinct = {name: count_distinct_prices(list(pipeline.prices[name].values())) for name in "abc"}
    averages = {}
    for name in "abc":
        table = pipeline.prices[name]
        averages[name] = float(np.mean([table[p.as_tuple()].price for p in _portfolio_profiles(pipeline)]))
    spread = max(averages.values()) / min(averages.values()) - 1.0

    params = pipeline.fits["c"].estimates
    plan = TariffPlan.named("c")
    two = dict(price_table(params, plan, 2.0, seed=SEED))
    four = dict(price_table(params, plan, 4.0, seed=SEED))
    z = [abs(four[p].price - 2 * two[p].price) / math.hypot(four[p].mc_std_error, 2 * two[p].mc_std_error)
         for p in two]

    checks = {
        "distinct 1/16/32": (distinct["a"], distinct["b"], distinct["c"]) == (1, 16, 32),
        "averages within 2%": spread <= 0.02,
        "4-year != 2 x 2-year": min(z) > 3.0,
    }
    passed = all(checks.values())
    detail = (f"distinct {distinct['a']}/{distinct['b']}/{distinct['c']}; portfolio averages "
              + "/".join(f"{averages[k]:.2f}" for k in "abc")
              + f" (spread {spread:.4f}); 4-year vs 2 x 2-year smallest z {min(z):.1f}")
    acceptance_log("price structure", passed, detail)
    assert passed, detail


def _portfolio_profiles(pipeline):
    last = {tl.machine_id: tl.events[-1].x2 for tl in pipeline.in_time.timelines}
    return [MachineProfile(tl.profile.fixed_covariates, int(last[tl.machine_id]))
            for tl in pipeline.in_time.timelines]


def _quadrature_cdf(ctx, hp, plan):
    """First-failure CDF from adaptive quadrature of the total intensity, split at maintenance epochs."""

    def cdf(x):
        x = np.asarray(x, dtype=float)
        order = np.argsort(x)
        epochs = np.arange(hp.pm_interval, x.max() + hp.pm_interval, hp.pm_interval)
        knots = np.union1d(x, epochs[epochs < x.max()])
        acc, prev, cum = 0.0, 0.0, {}
        for k in knots:
            acc += integrate.quad(lambda s: total_intensity(s, ctx, hp, plan), prev, k,
                                  epsabs=1e-13, epsrel=1e-12)[0]
            cum[k] = acc
            prev = k
        out = np.empty_like(x)
        out[order] = -np.expm1(-np.array([cum[v] for v in x[order]]))
        return out

    return cdf


def test_sampler_validity(truth, acceptance_log):
    hp, plan = truth.hazard, TariffPlan.named("c")
    ctx = HazardContext((1, 0, 1, 1), tvc_initial=1)
    rng = np.random.default_rng(SEED)
    u = 1.0 - rng.random(100_000)
    samples = np.array([sample_next_failure(0.0, v, ctx, hp, plan) for v in u])
    ks = stats.kstest(samples, _quadrature_cdf(ctx, hp, plan)).statistic
    passed = ks < 0.01
    acceptance_log("sampler validity", passed, f"KS {ks:.5f} on {samples.size} first-failure times")
    assert passed


def test_component_vs_full_path_price(truth, acceptance_log):
    from dataclasses import replace

    rng = np.random.default_rng(SEED)
    worst = 0.0
    for i in range(20):
        hp = replace(truth.hazard, alpha0=rng.uniform(0.2, 1.0), kappa0=rng.uniform(0.2, 0.9),
                     alpha_c=rng.uniform(0.1, 0.4))
        params = replace(truth, hazard=hp)
        profile = MachineProfile(tuple(int(v) for v in rng.integers(0, 2, 4)), int(rng.integers(0, 2)))
        plan = TariffPlan.named(str(rng.choice(["a", "b", "c"])))
        q = break_even_price(profile, float(rng.uniform(0.5, 5.0)), params, plan, 20_000, seed=i)
        z = abs(q.price - q.full_path_price) / math.hypot(q.mc_std_error, q.full_path_std_error)
        worst = max(worst, z)
    passed = worst <= 3.0
    acceptance_log("component vs full-path price", passed, f"largest gap {worst:.2f} combined SE over 20 configurations")
    assert passed


def test_severity_means(truth, acceptance_log):
    rng = np.random.default_rng(SEED)
    profile = MachineProfile((0, 0, 0, 0))
    n = 100_000
    means = {MAINTENANCE: np.mean([get_maintenance_costs(profile, truth, rng) for _ in range(n)])}
    for y in (F1, F2, CATASTROPHIC, F3):
        means[y] = np.mean([get_failure_costs(profile, y, truth, rng)[0] for _ in range(n)])
    expected = {MAINTENANCE: 60.0, F1: 60.0, F2: 150.0, CATASTROPHIC: 200.0, F3: 210.0}
    rel = {y: abs(means[y] / expected[y] - 1) for y in expected}
    passed = all(r <= 0.01 for r in rel.values())
    acceptance_log("severity means", passed,
                   ", ".join(f"{y} {means[y]:.2f} (target {expected[y]:g})" for y in expected))
    assert passed
