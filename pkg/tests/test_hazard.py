import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from servipricer import hazard
from servipricer.hazard import HazardContext
from servipricer.model import TariffPlan, table3_params

P = table3_params().hazard
PLAN = TariffPlan.named("c")


def _quad_piecewise(f, a, b, breaks):
    pts = sorted({a, b, *(x for x in breaks if a < x < b)})
    return math.fsum(integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12)[0] for lo, hi in zip(pts, pts[1:]))


def test_baseline_hand_values():
    # within the first interval the baseline is alpha*t + gamma
    assert hazard.baseline_intensity(0.5, P) == pytest.approx(0.35)
    # after two maintenances: alpha*(r + 2*(1 - kappa)) + gamma
    assert hazard.baseline_intensity(2.5, P) == pytest.approx(0.5 * (0.5 + 2 * 0.377) + 0.1)


def test_cumulative_baseline_hand_value():
    # piecewise: 0.35 + 0.5385 + 0.301
    assert hazard.cumulative_baseline(2.5, P) == pytest.approx(1.1895, abs=1e-12)
    assert hazard.cumulative_baseline(0.0, P) == 0.0


def test_jump_at_maintenance_epoch():
    before = hazard.baseline_intensity(1.0 - 1e-12, P)
    after = hazard.baseline_intensity(1.0, P)
    assert before - after == pytest.approx(P.alpha0 * (P.pm_interval - (1 - P.kappa0)), abs=1e-9)


def test_perfect_and_useless_maintenance():
    perfect = replace(P, kappa0=1.0)
    useless = replace(P, kappa0=0.0)
    assert hazard.baseline_intensity(3.4, perfect) == pytest.approx(hazard.baseline_intensity(0.4, perfect))
    # with kappa0 = 0 maintenance leaves the linear trend untouched
    assert hazard.baseline_intensity(3.4, useless) == pytest.approx(0.5 * 3.4 + 0.1)


@settings(max_examples=40, deadline=None)
@given(t=st.floats(0.0, 9.0), alpha=st.floats(0.0, 2.0), kappa=st.floats(0.0, 1.0), gamma=st.floats(0.0, 1.0),
       delta=st.floats(0.3, 2.0))
def test_cumulative_baseline_matches_quadrature(t, alpha, kappa, gamma, delta):
    p = replace(P, alpha0=alpha, kappa0=kappa, gamma0=gamma, pm_interval=delta)
    breaks = np.arange(1, 40) * delta
    expected = _quad_piecewise(lambda s: hazard.baseline_intensity(s, p), 0.0, t, breaks)
    assert hazard.cumulative_baseline(t, p) == pytest.approx(expected, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(origin=st.floats(0.0, 4.0), span=st.floats(0.0, 5.0), a=st.floats(0.0, 1.0))
def test_calendar_phase_integral_matches_quadrature(origin, span, a):
    p = replace(P, pm_phase="calendar")
    t0 = origin + a * span
    t1 = origin + span
    breaks = np.arange(1, 20) * p.pm_interval
    expected = _quad_piecewise(lambda s: float(hazard._baseline_at(s, origin, p)), t0, t1, breaks)
    got = float(hazard._baseline_integral(t0, t1, origin, p))
    assert got == pytest.approx(expected, abs=1e-9)


def test_calendar_phase_counts_only_maintenances_after_overhaul():
    p = replace(P, pm_phase="calendar")
    # overhaul at 1.5: the next maintenance is at 2.0, not at 2.5
    assert float(hazard._baseline_at(1.9, 1.5, p)) == pytest.approx(0.5 * 0.4 + 0.1)
    assert float(hazard._baseline_at(2.2, 1.5, p)) == pytest.approx(0.5 * (0.2 + 0.377) + 0.1)


def test_weibull_catastrophic_intensity():
    assert hazard.catastrophic_intensity(2.0, P) == pytest.approx(2 * 0.2**2 * 2.0)
    assert hazard.catastrophic_intensity(3.0, P, origin=1.0) == pytest.approx(2 * 0.2**2 * 2.0)


def _ctx(breaks=()):
    return HazardContext((1, 0, 1, 0), 0, breaks, 0.0)


@pytest.mark.parametrize("breaks", [(), ((1.3, 1),), ((0.2, 1), (2.7, 1))])
def test_integrated_hazard_matches_quadrature(breaks):
    ctx = _ctx(tuple((t, v) for t, v in breaks))
    pm = np.arange(1, 10.0)
    pts = [*pm, *(b[0] for b in breaks)]
    expected = _quad_piecewise(lambda s: hazard.total_intensity(s, ctx, P, PLAN), 0.1, 4.3, pts)
    assert hazard.integrated_hazard(0.1, 4.3, ctx, P, PLAN) == pytest.approx(expected, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(u=st.floats(1e-9, 1.0), t0=st.floats(0.0, 6.0), origin_frac=st.floats(0.0, 1.0))
def test_sampler_inverts_survival(u, t0, origin_frac):
    ctx = HazardContext((0, 1, 1, 0), 0, ((t0 + 0.7, 1),), origin_frac * t0)
    t = hazard.sample_next_failure(t0, u, ctx, P, PLAN)
    assert t >= t0
    assert hazard.integrated_hazard(t0, t, ctx, P, PLAN) == pytest.approx(-math.log(u), abs=1e-8)


def test_sampler_edge_cases():
    ctx = _ctx()
    assert hazard.sample_next_failure(2.0, 1.0, ctx, P, PLAN) == 2.0
    dead = replace(P, alpha0=0.0, gamma0=0.0, alpha_c=1e-12)
    assert hazard.sample_next_failure(0.0, 0.5, ctx, dead, PLAN) == math.inf
    with pytest.raises(ValueError):
        hazard.sample_next_failure(0.0, 0.0, ctx, P, PLAN)


def test_constant_hazard_sampler_is_exponential():
    p = replace(P, alpha0=0.0, gamma0=0.7, alpha_c=1e-9, kappa_c=1.0)
    ctx = HazardContext((0, 0, 0, 0))
    t = hazard.sample_next_failure(1.0, math.exp(-1.4), ctx, p, TariffPlan.named("a"))
    assert t == pytest.approx(3.0, abs=1e-8)


def test_batch_inversion_agrees_with_scalar():
    rng = np.random.default_rng(0)
    u = 1.0 - rng.random(300)
    t0 = rng.uniform(0, 4, 300)
    origin = t0 * rng.random(300)
    eta = rng.normal(0, 0.3, 300)
    batch = hazard.invert_batch(t0, -np.log(u), eta, origin, P)
    for i in range(0, 300, 7):
        cum = float(hazard.cumulative_hazard_batch(t0[i], batch[i], eta[i], origin[i], P))
        assert cum == pytest.approx(-math.log(u[i]), abs=1e-8)


def test_survival_is_monotone():
    ctx = _ctx()
    s = [hazard.survival(t, 0.0, ctx, P, PLAN) for t in np.linspace(0, 5, 50)]
    assert s[0] == 1.0
    assert all(b <= a for a, b in zip(s, s[1:]))
