"""Self-consistent bias partition, pulse stepping, and the read path."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ferrosyn.device import (
    DeviceState,
    SolverError,
    TransistorModel,
    apply_pulse,
    drain_current,
    solve_bias,
)

from conftest import make_device, make_layer

EPS = np.finfo(float).eps


def linear_device(c_mos=1.0, c_fe=1.0, p_r=1.0, state=1, vth0=0.6):
    layer = make_layer(n=8, p_r=p_r, ea=1.82, ea_std=0.0, initial_state=state)
    tr = TransistorModel(
        vth0_V=vth0,
        k_uA_V2=100.0,
        subthreshold_swing_mV_dec=85.0,
        c_mos_uF_cm2=c_mos,
        v_ds_read_V=0.1,
        charge_model="linear",
    )
    return DeviceState(layer=layer, transistor=tr, c_fe_uF_cm2=c_fe, area_um2=1.0)


def divider_oracle(c_mos, c_fe, p_fe, v_g):
    v_mos = (p_fe + c_fe * v_g) / (c_mos + c_fe)
    return v_g - v_mos, v_mos


# ------------------------------------------------------------------ bias solve

def test_equal_capacitors_split_evenly():
    dev = linear_device(c_mos=1.0, c_fe=1.0, p_r=1.0, state=1)
    dev.layer.set_states([1, -1] * 4)  # P = 0
    v_fe, v_mos, _ = solve_bias(dev, 2.0)
    assert v_fe == pytest.approx(1.0, abs=1e-9)
    assert v_mos == pytest.approx(1.0, abs=1e-9)


def test_polarization_skews_the_divider():
    # C_MOS=2, C_FE=1, P=+1: V_FE = (2*2 - 1)/3 = 1
    dev = linear_device(c_mos=2.0, c_fe=1.0, p_r=1.0, state=1)
    v_fe, _, _ = solve_bias(dev, 2.0)
    assert v_fe == pytest.approx(1.0, abs=1e-9)


def test_zero_bias_zero_polarization_is_trivial():
    dev = linear_device()
    dev.layer.set_states([1, -1] * 4)
    v_fe, v_mos, q = solve_bias(dev, 0.0)
    assert v_fe == pytest.approx(0.0, abs=1e-9)
    assert v_mos == pytest.approx(0.0, abs=1e-9)
    assert q == pytest.approx(0.0, abs=1e-9)


def test_linear_case_matches_divider_oracle_over_sweep():
    for state, p in ((1, 1.0), (-1, -1.0)):
        dev = linear_device(c_mos=3.45, c_fe=2.2, p_r=1.0, state=state)
        for v_g in np.linspace(-4.0, 4.0, 33):
            v_fe, v_mos, _ = solve_bias(dev, float(v_g))
            oe_fe, oe_mos = divider_oracle(3.45, 2.2, p, float(v_g))
            assert v_fe == pytest.approx(oe_fe, abs=1e-9)
            assert v_mos == pytest.approx(oe_mos, abs=1e-9)


def test_partition_identity_and_residual(device):
    for v_g in np.linspace(-4.0, 4.0, 41):
        v_fe, v_mos, q = solve_bias(device, float(v_g))
        assert abs(v_fe + v_mos - v_g) <= 4 * EPS * max(1.0, abs(v_g))
        res = abs(device.transistor.gate_charge(v_mos) - q)
        assert res <= 1e-6


def test_negatively_poled_film_brackets_below_ground():
    # P = -P_r pulls the internal node negative even at V_G = 0; the
    # solver must expand its bracket instead of failing
    dev = linear_device(c_mos=1.0, c_fe=1.0, p_r=3.0, state=-1)
    v_fe, v_mos, _ = solve_bias(dev, 0.0)
    assert v_mos < 0.0
    assert v_fe == pytest.approx(-v_mos, abs=1e-12)


@given(
    v_g=st.floats(-5.0, 5.0),
    frac=st.integers(0, 8),
)
@settings(max_examples=50, deadline=None)
def test_solve_bias_property(v_g, frac):
    dev = make_device(n=8, ea_std=0.0)
    states = [1] * frac + [-1] * (8 - frac)
    dev.layer.set_states(states)
    v_fe, v_mos, q = solve_bias(dev, v_g)
    assert abs(v_fe + v_mos - v_g) <= 4 * EPS * max(1.0, abs(v_g))
    assert abs(dev.transistor.gate_charge(v_mos) - q) <= 1e-6


# ---------------------------------------------------------------- gate charge

def test_smooth_charge_is_nondecreasing():
    tr = make_device().transistor
    v = np.linspace(-3.0, 3.0, 400)
    q = np.array([tr.gate_charge(x) for x in v])
    assert np.all(np.diff(q) >= 0)


def test_smooth_charge_nearly_floats_between_onsets():
    tr = make_device().transistor
    # midway between v_off and v_on both softplus tails are tiny
    assert abs(tr.gate_charge(0.1)) < 0.05 * tr.c_mos_uF_cm2


def test_linear_charge_value():
    tr = linear_device().transistor
    assert tr.gate_charge(1.25) == pytest.approx(1.25)


def test_transistor_validation():
    with pytest.raises(ValueError):
        TransistorModel(0.0, 100.0, 85.0, 3.45, 0.1)
    with pytest.raises(ValueError):
        TransistorModel(0.6, 100.0, 85.0, 3.45, 0.1, charge_model="cubic")
    with pytest.raises(ValueError):
        TransistorModel(0.6, 100.0, 85.0, 3.45, 0.1, v_on_V=-0.5, v_off_V=0.5)


# --------------------------------------------------------------------- pulses

def test_zero_amplitude_pulse_is_a_no_op(device):
    states = device.layer.states
    out = apply_pulse(device, 0.0, 1e-7)
    assert out is device
    np.testing.assert_array_equal(device.layer.states, states)


def test_deep_reset_saturates_negative():
    dev = make_device(initial_state=1)
    apply_pulse(dev, -4.0, 1e-6)
    p_r = dev.layer.remnant_polarization
    assert dev.layer.total_polarization() == pytest.approx(-p_r, rel=0.02)


def test_repeated_set_pulses_monotone(device):
    apply_pulse(device, -4.0, 1e-6)
    p = [device.layer.total_polarization()]
    for _ in range(6):
        apply_pulse(device, 3.0, 1e-7)
        p.append(device.layer.total_polarization())
    assert np.all(np.diff(p) >= 0)
    assert p[-1] > p[0]


def test_pulse_rejects_nonpositive_width(device):
    with pytest.raises(ValueError):
        apply_pulse(device, 3.0, 0.0)


def test_pulse_trajectory_recording(device):
    rows = apply_pulse(device, 3.0, 1e-7, n_substeps=10, record=True)
    assert len(rows) == 10
    times = [r[0] for r in rows]
    assert times[-1] == pytest.approx(1e-7)
    assert np.all(np.diff(times) > 0)
    p_r = device.layer.remnant_polarization
    assert all(-p_r - 1e-12 <= r[2] <= p_r + 1e-12 for r in rows)


def test_pulse_updates_threshold(device):
    vth_reset = device.vth
    apply_pulse(device, 4.0, 1e-6)
    assert device.vth < vth_reset  # potentiated: threshold drops
    window = device.memory_window_V()
    assert device.vth == pytest.approx(vth_reset - window, rel=0.03)


# ------------------------------------------------------------------ read path

def test_subthreshold_read_is_dark():
    dev = linear_device(vth0=0.6, state=-1)  # vth = vth0, overdrive -0.5
    dev.vth = dev.transistor.vth0_V
    assert drain_current(dev, 0.1) < 1e-6


def test_square_law_overdrive_steps():
    # lowering vth by 0.1 V at 0.5 V overdrive: 25 -> 36 uA square law;
    # the softplus correction at 85 mV/dec is under 0.05%
    lo = linear_device(vth0=0.4, state=-1)
    hi = linear_device(vth0=0.3, state=-1)
    assert drain_current(lo, 0.9) == pytest.approx(25.0, rel=5e-3)
    assert drain_current(hi, 0.9) == pytest.approx(36.0, rel=5e-3)


def test_lower_threshold_conducts_more(device):
    i_low = device.read_current()
    apply_pulse(device, 4.0, 1e-6)  # potentiate -> vth drops
    assert device.read_current() > i_low


def test_read_does_not_disturb(device):
    apply_pulse(device, 2.8, 1e-7)
    states = device.layer.states
    hist = device.layer.histories
    for _ in range(50):
        device.read_current()
    np.testing.assert_array_equal(device.layer.states, states)
    np.testing.assert_array_equal(device.layer.histories, hist)


def test_drain_current_monotone_in_gate():
    dev = make_device()
    v = np.linspace(-1.0, 2.0, 100)
    i = np.array([drain_current(dev, float(x)) for x in v])
    assert np.all(np.diff(i) > 0)


# ------------------------------------------------------------------- plumbing

def test_clone_reset_preserves_disorder_and_resets_state(device):
    apply_pulse(device, 4.0, 1e-6)
    clone = device.clone_reset(rng_seed=5)
    np.testing.assert_array_equal(
        clone.layer.activation_fields, device.layer.activation_fields
    )
    assert np.all(clone.layer.states == -1)
    assert clone.transistor is not device.transistor
    assert clone.vth == pytest.approx(device.transistor.vth0_V)


def test_device_validation():
    layer = make_layer(n=4)
    tr = make_device().transistor
    with pytest.raises(ValueError):
        DeviceState(layer=layer, transistor=tr, c_fe_uF_cm2=0.0, area_um2=1.0)
    with pytest.raises(ValueError):
        DeviceState(layer=layer, transistor=tr, c_fe_uF_cm2=2.2, area_um2=-1.0)


def test_pulse_determinism():
    a = make_device(seed=11)
    b = make_device(seed=11)
    ra = apply_pulse(a, 3.2, 1e-7, record=True)
    rb = apply_pulse(b, 3.2, 1e-7, record=True)
    assert ra == rb
    assert a.read_current() == b.read_current()