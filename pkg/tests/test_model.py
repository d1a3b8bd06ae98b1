import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from servipricer.model import (
    ContractQuote, EventRecord, GammaCost, HazardParams, MachineProfile, SeverityParams, TariffPlan,
    Timeline, TypeLogitParams, ValidationError, enumerate_profiles, table3_params,
)


def test_profiles_enumerate_all_32_in_order():
    profiles = enumerate_profiles()
    assert len(profiles) == 32
    assert len(set(profiles)) == 32
    assert profiles[0].as_tuple() == (0, 0, 0, 0, 0)
    assert profiles[-1].as_tuple() == (1, 1, 1, 1, 1)
    assert [p.as_tuple() for p in profiles] == sorted(p.as_tuple() for p in profiles)


def test_profile_rejects_non_binary():
    with pytest.raises(ValidationError):
        MachineProfile((0, 2, 0, 0), 0)
    with pytest.raises(ValidationError):
        MachineProfile((0, 1, 0), 0)


@pytest.mark.parametrize("plan_id, expected", [("a", 1), ("b", 16), ("c", 32)])
def test_pricing_keys_separate_profiles_by_plan(plan_id, expected):
    plan = TariffPlan.named(plan_id)
    assert len({plan.pricing_key(p) for p in enumerate_profiles()}) == expected


def test_unknown_plan_and_severity_covariates_rejected():
    with pytest.raises(ValidationError):
        TariffPlan.named("d")
    with pytest.raises(ValidationError):
        TariffPlan("x", w=(0,))


def test_linear_predictor_uses_only_plan_covariates():
    hp = table3_params().hazard
    x1 = np.array([[1, 1, 1, 1]])
    assert TariffPlan.named("a").linear_predictor(hp, x1, 1)[0] == 0.0
    assert TariffPlan.named("b").linear_predictor(hp, x1, 1)[0] == pytest.approx(0.4)
    assert TariffPlan.named("c").linear_predictor(hp, x1, 1)[0] == pytest.approx(0.5)


@given(st.lists(st.integers(0, 1), min_size=4, max_size=4),
       st.lists(st.floats(-20, 20), min_size=10, max_size=10))
def test_type_probabilities_sum_to_one(x1, coefs):
    logit = TypeLogitParams((tuple(coefs[:5]), tuple(coefs[5:])))
    probs = logit.probabilities(x1)
    assert abs(probs.sum() - 1.0) < 1e-12
    assert np.all(probs >= 0)


def test_type_probabilities_reference_class():
    logit = TypeLogitParams(((0.0,) * 5, (math.log(2.0),) + (0.0,) * 4))
    np.testing.assert_allclose(logit.probabilities((0, 0, 0, 0)), [0.25, 0.5, 0.25])


def test_hazard_params_validation():
    base = table3_params().hazard
    with pytest.raises(ValidationError):
        HazardParams(**{**vars(base), "kappa0": 1.5})
    with pytest.raises(ValidationError):
        HazardParams(**{**vars(base), "alpha_c": 0.0})
    with pytest.raises(ValidationError):
        HazardParams(**{**vars(base), "pm_phase": "weekly"})
    # the constant-hazard reduction is admitted
    HazardParams(**{**vars(base), "alpha0": 0.0})


def test_severity_means_follow_shape_times_scale():
    sev = table3_params().severity
    assert [sev.mean_cost(k) for k in ("m", "f1", "f2", "f3", "fc")] == [60.0, 60.0, 150.0, 210.0, 200.0]
    assert GammaCost(20.0, 3.0).variance == 180.0
    with pytest.raises(ValidationError):
        GammaCost(0.0, 1.0)
    with pytest.raises(ValidationError):
        SeverityParams(sev.maintenance, sev.minor1, sev.minor2, sev.catastrophic, math.nan)


def _row(t, t_prev, kind, x2=0, cost=1.0):
    return EventRecord(1, t, t_prev, 0 if kind == "censor" else 1, kind, 0.0 if kind == "censor" else cost,
                       (0, 0, 0, 0), x2)


def test_event_record_validation():
    with pytest.raises(ValidationError):
        _row(1.0, 2.0, "f1")
    with pytest.raises(ValidationError):
        EventRecord(1, 1.0, 0.0, 1, "censor", 0.0, (0, 0, 0, 0), 0)
    with pytest.raises(ValidationError):
        EventRecord(1, 1.0, 0.0, 1, "f1", 1.0, (0, 0, 0, 0), 0, sub_costs=(1.0, 2.0))


def test_timeline_validation():
    profile = MachineProfile((0, 0, 0, 0), 0)
    ok = (_row(0.5, 0.0, "f3"), _row(1.0, 0.0, "m", x2=1), _row(2.0, 0.5, "censor", x2=1))
    Timeline(1, profile, 2.0, ok)
    with pytest.raises(ValidationError):
        Timeline(1, profile, 2.0, (ok[1], ok[0], ok[2]))
    with pytest.raises(ValidationError):
        Timeline(1, profile, 3.0, ok)
    with pytest.raises(ValidationError):
        # x2 may only drop after an overhaul
        Timeline(1, profile, 2.0, (_row(0.5, 0.0, "f1", x2=1), _row(2.0, 0.5, "censor", x2=0)))
    Timeline(1, profile, 2.0, (_row(0.5, 0.0, "fc", x2=1), _row(2.0, 0.5, "censor", x2=0)))


def test_contract_quote_components_must_add_up():
    profile = MachineProfile((0, 0, 0, 0), 0)
    ContractQuote(profile, 2.0, 130.0, 10, 1.0, (4.0, 6.0, 120.0))
    with pytest.raises(ValidationError):
        ContractQuote(profile, 2.0, 131.0, 10, 1.0, (4.0, 6.0, 120.0))
    d = ContractQuote(profile, 2.0, 130.0, 10, 1.0, (4.0, 6.0, 120.0)).to_dict()
    assert d["maintenance_term"] == 120.0 and d["profile"] == [0, 0, 0, 0, 0]
