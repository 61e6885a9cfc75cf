import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aemod import ConfigError, DecisionSet, InstabilityError, ZoneConfig
from aemod.zone_model import (
    analytic_response_times,
    check_stability,
    effective_service_rates,
    fleet_rate_bound,
    vehicle_class_rates,
)

from conftest import reference_zone, pinned_optimum, random_decisions, random_zone


def zone(n, lv, p, lam=None, mu_c=1.0, c=10):
    lam = lam if lam is not None else [0.1] * n
    return ZoneConfig(n=n, lambda_v=lv, p=p, lambda_c=lam, mu_c=mu_c, c_points=c)


# -- class rates ------------------------------------------------------------

def test_class_rates_all_partial():
    cfg = zone(2, 1.0, (0.5, 0.5))
    np.testing.assert_allclose(vehicle_class_rates(cfg, DecisionSet.same_class([0, 0])), [0.5, 0.5])


def test_class_rates_hand_example():
    cfg = zone(3, 8.0, (0.2, 0.5, 0.3))
    d = DecisionSet.same_class([0.5, 0.4, 0.6])
    np.testing.assert_allclose(vehicle_class_rates(cfg, d), [2.4, 3.84, 1.76], atol=1e-12)


def test_class_rates_independent_loop(rng):
    # straight transcription of the flow rules, one vehicle class at a time
    for _ in range(50):
        cfg = random_zone(rng)
        d = random_decisions(rng, cfg.n)
        n, p, q = cfg.n, cfg.p, d.q
        expect = np.zeros(n)
        for i in range(n):  # SoC class of arriving vehicles
            rate = cfg.lambda_v * p[i]
            if i == 0:
                expect[0] += rate * (1 - q[0])  # partial charge to class 1
                expect[n - 1] += rate * q[0]  # full charge
            else:
                expect[i - 1] += rate * q[i]  # serve as is
                expect[i] += rate * (1 - q[i])  # one class up
        np.testing.assert_allclose(vehicle_class_rates(cfg, d), expect, rtol=1e-12, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_conservation(seed):
    rng = np.random.default_rng(seed)
    cfg = random_zone(rng)
    d = random_decisions(rng, cfg.n)
    rates = effective_service_rates(cfg, d)
    assert math.isclose(sum(rates.lambda_v_class), cfg.lambda_v, rel_tol=0, abs_tol=1e-9)
    assert math.isclose(sum(rates.lambda_vs), cfg.lambda_v, rel_tol=0, abs_tol=1e-9)


def test_more_full_charging_moves_flow_to_top_class():
    cfg = zone(3, 8.0, (0.2, 0.5, 0.3))
    lo = vehicle_class_rates(cfg, DecisionSet.same_class([0.1, 0.4, 0.6]))
    hi = vehicle_class_rates(cfg, DecisionSet.same_class([0.9, 0.4, 0.6]))
    assert hi[-1] > lo[-1] and hi[0] < lo[0]


def test_dimension_mismatch():
    cfg = zone(3, 8.0, (0.2, 0.5, 0.3))
    with pytest.raises(ConfigError):
        vehicle_class_rates(cfg, DecisionSet.same_class([0.5, 0.5]))


# -- dispatch ---------------------------------------------------------------

def test_identity_dispatch_passes_class_rates_through(rng):
    cfg = random_zone(rng, n=5)
    d = DecisionSet.same_class(rng.uniform(0, 1, 5))
    rates = effective_service_rates(cfg, d)
    np.testing.assert_allclose(rates.lambda_vs, rates.lambda_v_class)


def test_dispatch_hand_example():
    cfg = zone(2, 1.0, (0.5, 0.5), lam=(0.5, 0.6))
    d = DecisionSet(np.zeros(2), np.array([[1.0, 0.0], [0.3, 0.7]]))
    rates = effective_service_rates(cfg, d)
    np.testing.assert_allclose(rates.lambda_vs, [0.65, 0.35])
    np.testing.assert_allclose(rates.margins, [0.15, -0.25])


@pytest.mark.parametrize("pi", [
    [[0.9, 0.0], [0.3, 0.7]],  # row short of 1
    [[1.0, 0.0], [0.3, 0.8]],  # row over 1
    [[0.5, 0.5], [0.3, 0.7]],  # above diagonal
])
def test_bad_dispatch_rejected(pi):
    with pytest.raises(ConfigError) as exc:
        DecisionSet(np.zeros(2), np.array(pi))
    assert exc.value.field == "pi"


def test_decision_round_trip(rng):
    d = random_decisions(rng, 4)
    assert DecisionSet.from_dict(d.to_dict()).allclose(d)


# -- stability --------------------------------------------------------------

def test_all_partial_fits_reference_capacity():
    cfg = reference_zone()
    d = DecisionSet.same_class(np.zeros(7))
    rep = check_stability(cfg, d)
    assert rep.partial_charging_stable
    assert rep.partial_charging_load == pytest.approx(8.0)
    assert cfg.partial_capacity == pytest.approx(9.24)


def test_full_station_boundary_is_unstable():
    cfg = zone(2, 2.0, (0.4, 0.6), mu_c=0.4)
    d = DecisionSet.same_class([0.5, 0.5])  # 2 * 0.4 * 0.5 = 0.4 = mu_c
    assert not check_stability(cfg, d, eps=0.0).full_station_stable
    assert not check_stability(cfg, d).full_station_stable


def test_response_limit(pinned):
    d = pinned_optimum()
    assert all(check_stability(pinned, d, r=0.44).response_limit_met)
    assert not all(check_stability(pinned, d, r=0.46).response_limit_met)


def test_binding_constraint_named():
    cfg = ZoneConfig(n=2, lambda_v=2.0, p=(0.4, 0.6), lambda_c=(0.5, 0.6), mu_c=0.05, c_points=2)
    rep = check_stability(cfg, DecisionSet.same_class([1.0, 1.0]))
    assert not rep.partial_charging_stable or not rep.full_station_stable
    assert rep.binding_charging_constraint is not None


# -- fleet bound and response times -----------------------------------------

def test_fleet_bound_reference_constants():
    cfg = ZoneConfig(n=7, lambda_v=8.0, p=[1 / 7] * 7, lambda_c=[7.3 / 7] * 7, mu_c=0.033, c_points=40)
    assert fleet_rate_bound(cfg) == pytest.approx(0.1)


def test_fleet_bound_signs():
    assert fleet_rate_bound(zone(2, 1.0, (0.5, 0.5), lam=(0.5, 0.5))) == pytest.approx(0.0)
    assert fleet_rate_bound(zone(2, 1.0, (0.5, 0.5), lam=(0.6, 0.5))) < 0


def test_response_times_pinned(pinned):
    rt = analytic_response_times(pinned, pinned_optimum())
    np.testing.assert_allclose(rt.per_class, [1 / 0.45, 1 / 0.45])
    assert rt.max == pytest.approx(2.2222, abs=1e-4)
    assert rt.argmax_class == 1  # tie goes to the lowest index


def test_response_time_zero_margin_names_class():
    cfg = zone(2, 1.0, (0.5, 0.5), lam=(0.5, 0.4))
    with pytest.raises(InstabilityError) as exc:
        analytic_response_times(cfg, DecisionSet.same_class([0, 0]))
    assert exc.value.klass == 1


def test_response_times_argmax_is_min_margin(rng):
    for _ in range(30):
        cfg = random_zone(rng)
        d = random_decisions(rng, cfg.n)
        m = np.asarray(effective_service_rates(cfg, d).margins)
        if np.all(m > 0):
            rt = analytic_response_times(cfg, d)
            assert rt.argmax_class == int(np.argmin(m)) + 1
            assert rt.max == pytest.approx(1 / m.min())


@pytest.mark.parametrize("kwargs, field", [
    (dict(p=(0.5, 0.6)), "p"),
    (dict(lambda_c=(0.0, 0.5)), "lambda_c"),
    (dict(n=1, p=(1.0,), lambda_c=(0.5,)), "n"),
    (dict(mu_c=0.0), "mu_c"),
    (dict(lambda_v=-1.0), "lambda_v"),
])
def test_zone_validation(kwargs, field):
    base = dict(n=2, lambda_v=2.0, p=(0.4, 0.6), lambda_c=(0.5, 0.6), mu_c=0.5, c_points=2)
    base.update(kwargs)
    with pytest.raises(ConfigError) as exc:
        ZoneConfig(**base)
    assert exc.value.field == field
