"""Built-in parameter cards and constructors from config sections.

``paper-defaults`` bundles the reference device card, the published
pulse protocol, the update-rule coefficients extracted from that card,
and the timing map anchored at the 3.4 V saturation voltage, so the
full pipeline runs with one flag.  Kinetic and electrostatic values of
the card are calibration products: they were tuned until the virtual
measurements reproduce the published characterization structure (flat
set currents, state-ordered responses, the 3.4 V knee) rather than
copied from any table.
"""

from __future__ import annotations

from .characterization import PulseScheme, VoltageSweep
from .crossbar import AdditiveBackend, CompactBackend, CrossbarArray, MonteCarloBackend
from .device import DeviceState, TransistorModel
from .domains import FerroelectricLayer, Kinetics
from .network import SnnConfig
from .plasticity import PlasticityParams, TimingMap, delta_g

DEVICE_CARD = {
    "n_domains": 500,
    "remnant_polarization": 0.5,
    "beta": 3.0,
    "thickness_nm": 10.0,
    "tau0_s": 1e-8,
    "alpha": 3.0,
    "ea_mean_MV_cm": 1.82,
    "ea_std_MV_cm": 0.1456,
    "vth0_V": 0.6,
    "k_uA_V2": 100.0,
    "subthreshold_swing_mV_dec": 85.0,
    "c_mos_uF_cm2": 3.45,
    "v_ds_read_V": 0.1,
    "c_fe_uF_cm2": 2.2,
    "area_um2": 1.0,
    "vth_scale": 4.0,
    "v_g_read_V": 0.9,
    "charge_model": "smooth",
    "v_on_V": 0.4,
    "v_off_V": -0.2,
    "q_smooth_V": 0.15,
    "disorder_seed": 7,
}

# Extracted once from the reference card's full characterization sweep
# (32 trials/point); frozen here so downstream stages do not depend on
# rerunning the fit.  Regenerate with scripts/extract_defaults.py.
PLASTICITY_CARD = {
    "a_plus": 1.0537890084,
    "a_minus": -1.0199652956,
    "mu_plus": 0.9716885676,
    "mu_minus": 1.0235814189,
    "tau_plus": (0.2954449531, 0.0),
    "tau_minus": (0.2551647917, 0.0),
    "v0_plus": 3.35,
    "v0_minus": 2.95,
    "shift_plus": (0.860250062, 0.0, 0.0),
    "shift_minus": (0.7261692244, 0.3034004313, -0.1517002156),
    "fit_rmse": 0.0143157125,
}

# Saturated read-current range of the reference device (all domains one
# way vs the other); the potentiation sweep touches the top, the
# depression sweep the bottom.  Anchors conductance normalization for
# Monte Carlo array cells.
READ_SPAN_UA = {
    "i_min_uA": 9.0756627391,
    "i_max_uA": 146.1900840232,
}

# The published timing map peaks at the potentiation saturation voltage
# and reaches the bottom of the programming range at the window edge.
TIMING_CARD = {
    "v_max": 3.4,
    "slope_V_per_ms": 0.07,
    "window_ms": 20.0,
}


def device_from_config(section: dict, rng_seed: int = 0) -> DeviceState:
    layer = FerroelectricLayer(
        n_domains=section["n_domains"],
        remnant_polarization=section["remnant_polarization"],
        beta=section["beta"],
        thickness_nm=section["thickness_nm"],
        kinetics=Kinetics(tau0_s=section["tau0_s"], alpha=section["alpha"]),
        ea_mean_MV_cm=section["ea_mean_MV_cm"],
        ea_std_MV_cm=section["ea_std_MV_cm"],
        rng_seed=rng_seed,
        disorder_seed=section["disorder_seed"],
    )
    transistor = TransistorModel(
        vth0_V=section["vth0_V"],
        k_uA_V2=section["k_uA_V2"],
        subthreshold_swing_mV_dec=section["subthreshold_swing_mV_dec"],
        c_mos_uF_cm2=section["c_mos_uF_cm2"],
        v_ds_read_V=section["v_ds_read_V"],
        charge_model=section["charge_model"],
        v_on_V=section["v_on_V"],
        v_off_V=section["v_off_V"],
        q_smooth_V=section["q_smooth_V"],
    )
    return DeviceState(
        layer=layer,
        transistor=transistor,
        c_fe_uF_cm2=section["c_fe_uF_cm2"],
        area_um2=section["area_um2"],
        vth_scale=section["vth_scale"],
        v_g_read_V=section["v_g_read_V"],
    )


def scheme_from_config(section: dict) -> PulseScheme:
    return PulseScheme(
        reset_amplitude_V=section["reset_amplitude_V"],
        reset_width_s=section["reset_width_s"],
        set_sweep=VoltageSweep(
            section["set_v_min_V"],
            section["set_v_max_V"],
            section["set_step_V"],
            section["set_width_s"],
        ),
        program_sweep=VoltageSweep(
            section["program_v_min_V"],
            section["program_v_max_V"],
            section["program_step_V"],
            section["program_width_s"],
        ),
        polarity=section["polarity"],
    )


def params_from_config(section: dict) -> PlasticityParams:
    return PlasticityParams(
        a_plus=section["a_plus"],
        a_minus=section["a_minus"],
        mu_plus=section["mu_plus"],
        mu_minus=section["mu_minus"],
        tau_plus=tuple(section["tau_plus"]),
        tau_minus=tuple(section["tau_minus"]),
        v0_plus=section["v0_plus"],
        v0_minus=section["v0_minus"],
        shift_plus=section["shift_plus"],
        shift_minus=section["shift_minus"],
        fit_rmse=section["fit_rmse"],
    )


def timing_from_config(section: dict) -> TimingMap:
    return TimingMap(
        v_max=section["v_max"],
        slope_V_per_ms=section["slope_V_per_ms"],
        window_ms=section["window_ms"],
    )


def snn_from_config(section: dict) -> SnnConfig:
    fields = {
        k: section[k]
        for k in (
            "n_excitatory",
            "sim_duration_ms",
            "dt_ms",
            "input_rate_max_hz",
            "inhibition",
            "stdp_window_ms",
            "learning_rule",
            "quantization_bits",
            "tau_m_ms",
            "v_rest",
            "v_reset",
            "base_threshold",
            "refractory_ms",
            "inhibit_ms",
            "gain",
            "theta_increment",
            "tau_theta_ms",
            "w_init_low",
            "w_init_high",
            "batch_size",
        )
    }
    return SnnConfig(**fields)


def paper_default_device(rng_seed: int = 0) -> DeviceState:
    return device_from_config(DEVICE_CARD, rng_seed=rng_seed)


def paper_default_scheme(polarity: str = "potentiation") -> PulseScheme:
    if polarity == "potentiation":
        return PulseScheme(
            reset_amplitude_V=-4.0,
            reset_width_s=1e-6,
            set_sweep=VoltageSweep(2.0, 3.5, 0.1, 1e-7),
            program_sweep=VoltageSweep(2.0, 4.0, 0.05, 1e-7),
            polarity="potentiation",
        )
    return PulseScheme(
        reset_amplitude_V=4.0,
        reset_width_s=1e-6,
        set_sweep=VoltageSweep(-3.5, -2.0, 0.1, 1e-7),
        program_sweep=VoltageSweep(-4.0, -2.0, 0.05, 1e-7),
        polarity="depression",
    )


def paper_default_plasticity() -> PlasticityParams:
    return params_from_config(PLASTICITY_CARD)


def paper_default_timing() -> TimingMap:
    return timing_from_config(TIMING_CARD)


def desk_snn_config(**overrides) -> SnnConfig:
    base = dict(n_excitatory=100)
    base.update(overrides)
    return SnnConfig(**base)


def full_snn_config(**overrides) -> SnnConfig:
    base = dict(n_excitatory=225)
    base.update(overrides)
    return SnnConfig(**base)


def build_backend(
    snn_section: dict,
    params: PlasticityParams,
    device_template: DeviceState | None = None,
    i_min_uA: float | None = None,
    i_max_uA: float | None = None,
    seed: int = 0,
):
    """Backend for the configured learning rule.

    The additive baseline's step sizes default to matching the compact
    rule at (G = 0.5, dt = 0) so the two rules are compared at equal
    update scale; config can override them explicitly.  The Monte Carlo
    backend's read-current span defaults to the frozen card range.
    """
    rule = snn_section["learning_rule"]
    q_swing = snn_section["q_swing_fC"]
    if rule == "fefet-compact":
        return CompactBackend(params, q_swing_fC=q_swing)
    if rule == "standard-additive":
        eta_plus = snn_section["additive_eta_plus"]
        eta_minus = snn_section["additive_eta_minus"]
        if eta_plus <= 0.0:
            eta_plus = delta_g(0.5, 0.0, "potentiation", params)
        if eta_minus <= 0.0:
            eta_minus = abs(delta_g(0.5, 0.0, "depression", params))
        return AdditiveBackend(
            eta_plus, eta_minus, snn_section["additive_tau_ms"], q_swing_fC=q_swing
        )
    if rule == "fefet-montecarlo":
        if device_template is None:
            raise ValueError("fefet-montecarlo needs a device template")
        if i_min_uA is None:
            i_min_uA = READ_SPAN_UA["i_min_uA"]
        if i_max_uA is None:
            i_max_uA = READ_SPAN_UA["i_max_uA"]
        return MonteCarloBackend(device_template, i_min_uA, i_max_uA, seed=seed)
    raise ValueError(f"unknown learning rule {rule!r}")


def build_array(rows: int, snn_config: SnnConfig, backend, seed: int) -> CrossbarArray:
    return CrossbarArray.uniform(
        rows,
        snn_config.n_excitatory,
        backend,
        low=snn_config.w_init_low,
        high=snn_config.w_init_high,
        seed=seed,
        quantization_bits=snn_config.quantization_bits,
    )
