import math

import numpy as np
import pytest

from servipricer.model import MachineProfile, TariffPlan, enumerate_profiles, table3_params
from servipricer.pricing import (
    break_even_price, count_distinct_prices, expected_counts, maintenance_count, price_table, prices_differ,
)

ZERO = MachineProfile((0, 0, 0, 0), 0)


def test_no_hazard_means_no_failures_and_maintenance_only_price():
    p = table3_params(alpha0=0.0, gamma0=0.0, alpha_c=1e-12)
    n_minor, n_cat, _, _ = expected_counts(ZERO, 2.0, p, TariffPlan.named("c"), 1000, 1)
    assert (n_minor, n_cat) == (0.0, 0.0)
    q = break_even_price(ZERO, 2.0, p, TariffPlan.named("c"), 1000, 1)
    assert q.price == 120.0
    assert q.components == (0.0, 0.0, 120.0)


def test_poisson_reduction_count():
    p = table3_params(alpha0=0.0, gamma0=0.8, alpha_c=1e-12)
    n_minor, _, se, _ = expected_counts(ZERO, 3.0, p, TariffPlan.named("a"), 20000, 2)
    assert abs(n_minor - 2.4) < 3 * se


def test_maintenance_term_is_exact():
    p = table3_params()
    for duration, n_m in ((0.5, 0), (1.0, 1), (2.0, 2), (3.7, 3)):
        assert maintenance_count(duration, 1.0) == n_m
        q = break_even_price(ZERO, duration, p, TariffPlan.named("c"), 400, 3)
        cat, minor, maint = q.components
        assert abs(q.price - cat - minor - n_m * 20.0 * 3.0) <= 1e-12 * q.price
        assert maint == n_m * 60.0


def test_price_is_deterministic_given_seed():
    p = table3_params()
    a = break_even_price(ZERO, 2.0, p, TariffPlan.named("c"), 3000, 7)
    b = break_even_price(ZERO, 2.0, p, TariffPlan.named("c"), 3000, 7)
    assert a == b


def test_price_grows_with_baseline_intercept():
    plan = TariffPlan.named("c")
    prices = [break_even_price(ZERO, 2.0, table3_params(gamma0=g), plan, 4000, 5) for g in (0.0, 0.05, 0.1, 0.2, 0.4)]
    for lo, hi in zip(prices, prices[1:]):
        assert hi.price >= lo.price - 3 * math.hypot(lo.mc_std_error, hi.mc_std_error)
        assert prices_differ(hi, lo) or hi.price >= lo.price


def test_component_and_full_path_estimators_agree():
    q = break_even_price(MachineProfile((1, 0, 1, 1), 1), 3.0, table3_params(), TariffPlan.named("c"), 20000, 9)
    assert abs(q.price - q.full_path_price) <= 3 * math.hypot(q.mc_std_error, q.full_path_std_error)


def test_plan_a_prices_every_profile_the_same():
    table = price_table(table3_params(), TariffPlan.named("a"), 2.0, 2000, 1)
    assert len(table) == 32
    assert len({q.price for _, q in table}) == 1
    assert count_distinct_prices(table) == 1
    assert [p for p, _ in table] == enumerate_profiles()


def test_duration_must_be_positive():
    with pytest.raises(ValueError):
        price_table(table3_params(), TariffPlan.named("a"), 0.0, 10, 1)


def test_common_random_numbers_make_small_differences_detectable():
    p = table3_params()
    plan = TariffPlan.named("b")
    a = break_even_price(MachineProfile((0, 0, 0, 0), 0), 2.0, p, plan, 4000, 3)
    b = break_even_price(MachineProfile((0, 0, 0, 1), 0), 2.0, p, plan, 4000, 3)
    assert prices_differ(a, b)
    assert not prices_differ(a, a)
    assert count_distinct_prices([a, a, b]) == 2
