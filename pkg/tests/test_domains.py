"""Unit tests for the stochastic domain-switching kernel."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import weibull_min

from ferrosyn.domains import (
    FerroelectricLayer,
    Kinetics,
    advance_history,
    switching_probability,
    switching_rate,
)

from conftest import make_layer

KIN = Kinetics(tau0_s=1e-8, alpha=3.0)


# ---------------------------------------------------------------- probability

def test_probability_no_growth_is_zero():
    assert switching_probability(0.7, 0.7, beta=2.0) == pytest.approx(0.0, abs=1e-12)


def test_probability_unit_history_beta_one():
    assert switching_probability(0.0, 1.0, beta=1.0) == pytest.approx(
        1.0 - math.exp(-1.0), abs=1e-12
    )


def test_probability_conditional_form():
    # 1 - exp(1^2 - 2^2) = 1 - e^-3
    assert switching_probability(1.0, 2.0, beta=2.0) == pytest.approx(
        1.0 - math.exp(-3.0), abs=1e-12
    )


def test_probability_rejects_decreasing_history():
    with pytest.raises(ValueError):
        switching_probability(1.0, 0.5, beta=2.0)


def test_probability_rejects_negative_history():
    with pytest.raises(ValueError):
        switching_probability(-0.1, 0.5, beta=2.0)


def test_probability_rejects_bad_beta():
    with pytest.raises(ValueError):
        switching_probability(0.0, 1.0, beta=0.0)


def test_probability_vectorized():
    p = switching_probability(np.zeros(3), np.array([0.0, 1.0, 2.0]), beta=1.0)
    assert p.shape == (3,)
    assert p[0] == 0.0 and not np.signbit(p[0])
    np.testing.assert_allclose(p[1], 1.0 - math.exp(-1.0), atol=1e-12)


def test_probability_matches_weibull_conditional():
    """The per-interval probability is the Weibull conditional CDF.

    Under a constant field h(t) = t/tau, so P(flip in (t, t+dt] | alive)
    must equal the hazard of a Weibull(beta, scale=tau) computed by scipy.
    """
    beta, tau = 2.4, 3.7e-7
    for t, dt in [(0.0, 1e-7), (2e-7, 5e-8), (1e-6, 1e-6)]:
        ours = switching_probability(t / tau, (t + dt) / tau, beta)
        surv = weibull_min.sf([t, t + dt], beta, scale=tau)
        assert ours == pytest.approx(1.0 - surv[1] / surv[0], rel=1e-10)


@given(
    h=st.floats(0.0, 50.0),
    dh=st.floats(0.0, 50.0),
    beta=st.floats(0.1, 8.0),
)
def test_probability_stays_in_unit_interval(h, dh, beta):
    p = switching_probability(h, h + dh, beta)
    assert 0.0 <= p <= 1.0


@given(
    h=st.floats(0.0, 10.0),
    beta=st.floats(0.1, 6.0),
    steps=st.lists(st.floats(0.0, 5.0), min_size=2, max_size=6),
)
def test_probability_monotone_in_endpoint(h, beta, steps):
    ends = h + np.cumsum(steps)
    p = switching_probability(np.full_like(ends, h), ends, beta)
    assert np.all(np.diff(p) >= -1e-15)


# ----------------------------------------------------------------------- rate

def test_rate_zero_field_is_zero():
    assert switching_rate(0.0, 1.5, KIN) == 0.0


def test_rate_merz_value():
    # exp(-(1/2)^3) / 1e-8
    assert switching_rate(2.0, 1.0, KIN) == pytest.approx(
        math.exp(-0.125) / 1e-8, rel=1e-12
    )


def test_rate_uses_field_magnitude():
    assert switching_rate(-2.0, 1.0, KIN) == switching_rate(2.0, 1.0, KIN)


def test_rate_broadcasts():
    r = switching_rate(2.0, np.array([1.0, 2.0, 4.0]), KIN)
    assert r.shape == (3,)
    assert np.all(np.diff(r) < 0)  # higher barrier, slower


# -------------------------------------------------------------------- history

def test_history_unit_increment():
    # tau0 = 100 ns and zero barrier make tau exactly 100 ns
    kin = Kinetics(tau0_s=1e-7, alpha=3.0)
    assert advance_history(0.0, 1.0, 0.0, 1e-7, kin) == pytest.approx(1.0, abs=1e-12)


def test_history_zero_dt_is_identity():
    assert advance_history(0.5, 1.0, 0.8, 0.0, KIN) == 0.5


def test_history_unfavorable_field_frozen():
    assert advance_history(0.5, -1.0, 0.8, 1e-7, KIN) == 0.5
    assert advance_history(0.5, 0.0, 0.8, 1e-7, KIN) == 0.5


def test_history_additive_over_subintervals():
    h1 = advance_history(0.0, 1.8, 1.0, 100e-9, KIN)
    h2 = advance_history(advance_history(0.0, 1.8, 1.0, 50e-9, KIN), 1.8, 1.0, 50e-9, KIN)
    assert h2 == pytest.approx(h1, abs=1e-12)


def test_history_piecewise_quadrature():
    # two different field segments accumulate rate1*dt1 + rate2*dt2
    h = advance_history(0.0, 1.2, 1.0, 50e-9, KIN)
    h = advance_history(h, 2.5, 1.0, 30e-9, KIN)
    expect = 50e-9 * switching_rate(1.2, 1.0, KIN) + 30e-9 * switching_rate(2.5, 1.0, KIN)
    assert h == pytest.approx(expect, rel=1e-12)


def test_history_rejects_negative_dt():
    with pytest.raises(ValueError):
        advance_history(0.0, 1.0, 1.0, -1e-9, KIN)


def test_history_rejects_negative_start():
    with pytest.raises(ValueError):
        advance_history(-0.1, 1.0, 1.0, 1e-9, KIN)


def test_kinetics_validation():
    with pytest.raises(ValueError):
        Kinetics(tau0_s=0.0, alpha=3.0)
    with pytest.raises(ValueError):
        Kinetics(tau0_s=1e-8, alpha=-1.0)


# ---------------------------------------------------------------------- layer

def test_polarization_all_aligned():
    layer = make_layer(n=4, p_r=30.0, initial_state=1)
    assert layer.total_polarization() == pytest.approx(30.0)


def test_polarization_alternating_cancels():
    layer = make_layer(n=4, p_r=30.0)
    layer.set_states([1, -1, 1, -1])
    assert layer.total_polarization() == pytest.approx(0.0)


def test_polarization_partial():
    layer = make_layer(n=5, p_r=10.0)
    layer.set_states([1, 1, 1, -1, -1])
    assert layer.total_polarization() == pytest.approx(2.0)


@given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_polarization_bounds(states):
    layer = make_layer(n=len(states), p_r=2.5, ea_std=0.0)
    layer.set_states(states)
    p = layer.total_polarization()
    assert -2.5 - 1e-12 <= p <= 2.5 + 1e-12
    if abs(p) == pytest.approx(2.5, abs=1e-12):
        assert len(set(states)) == 1


def test_set_states_validates():
    layer = make_layer(n=4)
    with pytest.raises(ValueError):
        layer.set_states([1, -1, 1])  # wrong length
    with pytest.raises(ValueError):
        layer.set_states([1, -1, 0, 1])  # not +-1


def test_constructor_validation():
    with pytest.raises(ValueError):
        make_layer(n=0)
    with pytest.raises(ValueError):
        make_layer(p_r=-1.0)
    with pytest.raises(ValueError):
        make_layer(beta=0.0)
    with pytest.raises(ValueError):
        make_layer(initial_state=0)


def test_zero_field_step_does_nothing():
    layer = make_layer()
    before = layer.states
    assert layer.step(0.0, 1e-7) == 0
    np.testing.assert_array_equal(layer.states, before)


def test_aligned_field_never_flips():
    layer = make_layer(initial_state=1)
    assert layer.step(2.0, 1e-6) == 0
    assert np.all(layer.states == 1)


def test_strong_long_pulse_saturates():
    layer = make_layer(n=100, ea=1.5, ea_std=0.1)
    flips = layer.step(4.0, 1e-5)
    assert flips == 100
    assert layer.total_polarization() == pytest.approx(layer.remnant_polarization)


def test_zero_std_gives_uniform_activation():
    layer = make_layer(ea=1.3, ea_std=0.0)
    np.testing.assert_array_equal(layer.activation_fields, np.full(64, 1.3))


def test_activation_fields_truncated():
    layer = make_layer(n=5000, ea=1.5, ea_std=0.2)
    a = layer.activation_fields
    assert a.min() >= 1.5 - 0.6 - 1e-12
    assert a.max() <= 1.5 + 0.6 + 1e-12


def test_field_reversal_clears_history():
    layer = make_layer(ea=3.0, ea_std=0.0)
    layer.step(1.0, 1e-6)  # opposing but far below the barrier: h grows, no flips
    assert np.all(layer.histories > 0)
    layer.step(-1.0, 1e-9)
    assert np.all(layer.histories == 0.0)


def test_zero_field_freezes_history():
    layer = make_layer(ea=3.0, ea_std=0.0)
    layer.step(1.0, 1e-6)
    h = layer.histories
    rows = layer.run_waveform([(0.0, 5e-6)])
    assert rows[0][3] == 0
    np.testing.assert_array_equal(layer.histories, h)


def test_run_waveform_times_accumulate():
    layer = make_layer()
    rows = layer.run_waveform([(1.0, 1e-7), (0.0, 2e-7), (1.0, 1e-7)])
    assert [r[0] for r in rows] == pytest.approx([1e-7, 3e-7, 4e-7])


def test_same_seed_reproduces_trajectory():
    waveform = [(2.2, 5e-8)] * 8
    a = make_layer(seed=42).run_waveform(waveform)
    b = make_layer(seed=42).run_waveform(waveform)
    assert a == b


def test_different_dynamics_seed_same_disorder():
    a = make_layer(seed=1, disorder_seed=7)
    b = make_layer(seed=2, disorder_seed=7)
    np.testing.assert_array_equal(a.activation_fields, b.activation_fields)
    # one partial-switching step: 64 domains at p ~ 0.25 each make a
    # state-pattern collision between the two seeds essentially impossible
    a.step(2.0, 8e-9)
    b.step(2.0, 8e-9)
    assert not np.array_equal(a.states, b.states)


def test_clone_reset_keeps_disorder():
    layer = make_layer(seed=3)
    layer.step(3.0, 1e-6)
    clone = layer.clone_reset(rng_seed=99)
    np.testing.assert_array_equal(clone.activation_fields, layer.activation_fields)
    assert np.all(clone.states == -1)
    assert np.all(clone.histories == 0.0)


def test_step_flip_count_matches_expectation():
    """Mean flips over many reruns tracks sum(p_i) from the analytic rule."""
    template = make_layer(n=20, ea=1.5, ea_std=0.15, beta=2.0, seed=0)
    field, dt = 1.9, 4e-9
    rate = switching_rate(field, template.activation_fields, KIN)
    p = switching_probability(np.zeros(20), rate * dt, 2.0)
    assert p.max() <= 0.2  # single step, no internal subdivision
    n_trials = 1500
    flips = [template.clone_reset(rng_seed=k).step(field, dt) for k in range(n_trials)]
    mean = np.mean(flips)
    sigma = math.sqrt(np.sum(p * (1 - p)) / n_trials)
    assert abs(mean - p.sum()) <= 3 * sigma + 1e-9


def test_subdivided_step_still_saturates():
    # dt so large every domain would flip with p ~ 1 in one shot; the
    # internal subdivision must still land on the fully switched state
    layer = make_layer(n=32, ea=1.0, ea_std=0.05)
    assert layer.step(5.0, 1e-3) == 32
