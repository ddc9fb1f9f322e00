"""Sweep harness: grids, protocols, CSV round trips, calibration plumbing."""

import numpy as np
import pytest

from ferrosyn.characterization import (
    CalibrationError,
    PulseScheme,
    SweepRecord,
    VoltageSweep,
    calibrate,
    read_sweep_csv,
    records_to_grids,
    run_protocol,
    write_sweep_csv,
)

from conftest import make_device


def tiny_scheme(polarity="potentiation"):
    if polarity == "potentiation":
        return PulseScheme(
            reset_amplitude_V=-4.0,
            reset_width_s=1e-6,
            set_sweep=VoltageSweep(2.4, 3.2, 0.4, 1e-7),
            program_sweep=VoltageSweep(2.4, 3.6, 0.3, 1e-7),
            polarity=polarity,
        )
    return PulseScheme(
        reset_amplitude_V=4.0,
        reset_width_s=1e-6,
        set_sweep=VoltageSweep(-3.2, -2.4, 0.4, 1e-7),
        program_sweep=VoltageSweep(-3.6, -2.4, 0.3, 1e-7),
        polarity=polarity,
    )


@pytest.fixture(scope="module")
def small_sweep():
    dev = make_device(n=48, seed=0)
    return run_protocol(dev, tiny_scheme(), trials=4, seed=3)


# --------------------------------------------------------------------- sweeps

def test_voltage_ladder_inclusive():
    v = VoltageSweep(2.0, 4.0, 0.05, 1e-7).voltages()
    assert v.size == 41
    assert v[0] == 2.0 and v[-1] == 4.0
    np.testing.assert_allclose(np.diff(v), 0.05)


def test_voltage_ladder_paper_grid_shape():
    assert VoltageSweep(2.0, 3.5, 0.1, 1e-7).voltages().size == 16


def test_voltage_sweep_validation():
    with pytest.raises(ValueError):
        VoltageSweep(2.0, 4.0, 0.0, 1e-7)
    with pytest.raises(ValueError):
        VoltageSweep(4.0, 2.0, 0.1, 1e-7)
    with pytest.raises(ValueError):
        VoltageSweep(2.0, 4.0, 0.1, 0.0)


def test_scheme_validation():
    sweep = VoltageSweep(2.0, 3.0, 0.5, 1e-7)
    with pytest.raises(ValueError):
        PulseScheme(-4.0, 1e-6, sweep, sweep, polarity="sideways")
    with pytest.raises(ValueError):
        PulseScheme(-4.0, 0.0, sweep, sweep)


def test_protocol_covers_grid(small_sweep):
    assert len(small_sweep) == 3 * 5
    assert all(r.polarity == "potentiation" for r in small_sweep)
    assert all(r.trials == 4 for r in small_sweep)


def test_protocol_deterministic():
    dev = make_device(n=48, seed=0)
    again = run_protocol(dev, tiny_scheme(), trials=4, seed=3)
    base = run_protocol(dev, tiny_scheme(), trials=4, seed=3)
    assert again == base


def test_protocol_seed_matters():
    dev = make_device(n=48, seed=0)
    a = run_protocol(dev, tiny_scheme(), trials=4, seed=3)
    b = run_protocol(dev, tiny_scheme(), trials=4, seed=4)
    assert a != b


def test_protocol_rejects_bad_trials():
    with pytest.raises(ValueError):
        run_protocol(make_device(n=8), tiny_scheme(), trials=0)


def test_record_consistency(small_sweep):
    for r in small_sweep:
        assert r.delta_i_d == pytest.approx(r.i_d_read - r.i_d_set, abs=1e-12)
        assert r.i_d_read_std >= 0.0
        assert r.i_d_set_std >= 0.0


def test_single_trial_has_zero_std():
    dev = make_device(n=16, seed=0)
    recs = run_protocol(dev, tiny_scheme(), trials=1, seed=0)
    assert all(r.i_d_read_std == 0.0 and r.i_d_set_std == 0.0 for r in recs)


def test_protocol_does_not_mutate_template():
    dev = make_device(n=48, seed=0)
    states = dev.layer.states
    run_protocol(dev, tiny_scheme(), trials=2, seed=1)
    np.testing.assert_array_equal(dev.layer.states, states)


# ---------------------------------------------------------------------- grids

def test_grids_shape_and_order(small_sweep):
    g = records_to_grids(small_sweep)
    assert g.i_set.shape == (3, 5)
    assert np.all(np.diff(g.v_sets) > 0)
    assert np.all(np.diff(g.v_programs) > 0)
    # row 0 column 0 corresponds to the lowest (v_set, v_program) pair
    first = next(
        r for r in small_sweep
        if r.v_set == g.v_sets[0] and r.v_program == g.v_programs[0]
    )
    assert g.i_set[0, 0] == first.i_d_set
    assert g.i_read[0, 0] == first.i_d_read


def test_grids_ignore_record_order(small_sweep):
    shuffled = list(small_sweep)
    rng = np.random.default_rng(0)
    rng.shuffle(shuffled)
    a = records_to_grids(small_sweep)
    b = records_to_grids(shuffled)
    np.testing.assert_array_equal(a.i_set, b.i_set)
    np.testing.assert_array_equal(a.i_read_std, b.i_read_std)


def test_grids_reject_holes(small_sweep):
    with pytest.raises(ValueError):
        records_to_grids(small_sweep[:-1])


# ------------------------------------------------------------------------ csv

def test_csv_round_trip(tmp_path, small_sweep):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(path, small_sweep, header_lines=["seed=3", "card=test"])
    back = read_sweep_csv(path)
    assert len(back) == len(small_sweep)
    for a, b in zip(small_sweep, back):
        assert b.polarity == a.polarity
        assert b.trials == a.trials
        for name in ("v_set", "v_program", "i_d_set", "i_d_read",
                     "delta_i_d", "i_d_read_std", "i_d_set_std"):
            assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-8, abs=1e-12)


def test_csv_header_comments_survive(tmp_path, small_sweep):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(path, small_sweep, header_lines=["anything goes"])
    text = path.read_text()
    assert text.startswith("# anything goes\n")


def test_csv_missing_column_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("polarity,v_set_V\npotentiation,2.0\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_sweep_csv(path)


# ---------------------------------------------------------------- calibration

def test_calibrate_validates_inputs(small_sweep):
    dev = make_device(n=16)
    # the tiny sweep has only 5 program voltages; calibration wants >= 10
    with pytest.raises(ValueError, match=">= 10 program"):
        calibrate(small_sweep, {"ea_mean_MV_cm": 1.8}, dev, tiny_scheme())


def test_calibrate_rejects_unknown_parameter(small_sweep):
    dev = make_device(n=16)
    with pytest.raises(ValueError, match="unknown calibration"):
        calibrate(small_sweep, {"thickness_nm": 12.0}, dev, tiny_scheme())


def test_calibrate_requires_free_params(small_sweep):
    dev = make_device(n=16)
    with pytest.raises(ValueError, match="at least one"):
        calibrate(small_sweep, {}, dev, tiny_scheme())
