"""Config files, validation, hashing, and artifact provenance headers.

Configs are INI files read with configparser.  Every section has a
declared schema; unknown sections or keys are rejected outright and
missing required keys are reported with their full dotted path, so a
typo never silently falls back to a default.  A canonical hash of the
parsed config is embedded in every artifact together with the seed that
produced it.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid, unknown, or missing configuration content."""


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_float_list(raw: str) -> tuple:
    return tuple(float(part) for part in raw.split(",") if part.strip())


def _parse_optional_int(raw: str):
    stripped = raw.strip().lower()
    if stripped in ("", "none"):
        return None
    return int(raw)


def _parse_optional_float(raw: str):
    stripped = raw.strip().lower()
    if stripped in ("", "none"):
        return None
    return float(raw)


_REQUIRED = object()


@dataclass(frozen=True)
class Key:
    parse: type | object
    default: object = _REQUIRED

    @property
    def required(self) -> bool:
        return self.default is _REQUIRED


DEVICE_SCHEMA = {
    "n_domains": Key(int),
    "remnant_polarization": Key(float),
    "beta": Key(float),
    "thickness_nm": Key(float),
    "tau0_s": Key(float),
    "alpha": Key(float),
    "ea_mean_MV_cm": Key(float),
    "ea_std_MV_cm": Key(float),
    "vth0_V": Key(float),
    "k_uA_V2": Key(float),
    "subthreshold_swing_mV_dec": Key(float),
    "c_mos_uF_cm2": Key(float),
    "v_ds_read_V": Key(float),
    "c_fe_uF_cm2": Key(float),
    "area_um2": Key(float),
    "vth_scale": Key(float, 1.0),
    "v_g_read_V": Key(float, 0.9),
    "charge_model": Key(str, "smooth"),
    "v_on_V": Key(float, 0.4),
    "v_off_V": Key(float, -0.2),
    "q_smooth_V": Key(float, 0.15),
    "disorder_seed": Key(int, 7),
}

SCHEME_SCHEMA = {
    "reset_amplitude_V": Key(float),
    "reset_width_s": Key(float),
    "set_v_min_V": Key(float),
    "set_v_max_V": Key(float),
    "set_step_V": Key(float),
    "set_width_s": Key(float),
    "program_v_min_V": Key(float),
    "program_v_max_V": Key(float),
    "program_step_V": Key(float),
    "program_width_s": Key(float),
    "polarity": Key(str, "potentiation"),
}

PLASTICITY_SCHEMA = {
    "a_plus": Key(float),
    "a_minus": Key(float),
    "mu_plus": Key(float),
    "mu_minus": Key(float),
    "tau_plus": Key(_parse_float_list),
    "tau_minus": Key(_parse_float_list),
    "v0_plus": Key(float),
    "v0_minus": Key(float),
    "shift_plus": Key(_parse_float_list, (0.0,)),
    "shift_minus": Key(_parse_float_list, (0.0,)),
    "fit_rmse": Key(float, 0.0),
}

TIMING_SCHEMA = {
    "v_max": Key(float),
    "slope_V_per_ms": Key(float),
    "window_ms": Key(float),
}

SNN_SCHEMA = {
    "n_excitatory": Key(int),
    "sim_duration_ms": Key(float, 350.0),
    "dt_ms": Key(float, 0.5),
    "input_rate_max_hz": Key(float, 63.75),
    "inhibition": Key(_parse_bool, True),
    "stdp_window_ms": Key(float, 20.0),
    "learning_rule": Key(str, "fefet-compact"),
    "quantization_bits": Key(_parse_optional_int, None),
    "tau_m_ms": Key(float, 100.0),
    "v_rest": Key(float, 0.0),
    "v_reset": Key(float, 0.0),
    "base_threshold": Key(float, 1.0),
    "refractory_ms": Key(float, 5.0),
    "inhibit_ms": Key(float, 2.0),
    "gain": Key(float, 0.025),
    "theta_increment": Key(float, 0.05),
    "tau_theta_ms": Key(float, 1e7),
    "w_init_low": Key(float, 0.1),
    "w_init_high": Key(float, 0.4),
    "batch_size": Key(int, 250),
    "n_train": Key(int, 10000),
    "n_test": Key(int, 10000),
    "n_label": Key(int, 10000),
    "q_swing_fC": Key(float, 10.0),
    "additive_eta_plus": Key(float, 0.0),
    "additive_eta_minus": Key(float, 0.0),
    "additive_tau_ms": Key(float, 20.0),
    "i_min_uA": Key(_parse_optional_float, None),
    "i_max_uA": Key(_parse_optional_float, None),
}

RUN_SCHEMA = {
    "schema_version": Key(int, SCHEMA_VERSION),
    "trials": Key(int, 32),
}

SECTION_SCHEMAS = {
    "device": DEVICE_SCHEMA,
    "scheme": SCHEME_SCHEMA,
    "plasticity": PLASTICITY_SCHEMA,
    "timing": TIMING_SCHEMA,
    "snn": SNN_SCHEMA,
    "run": RUN_SCHEMA,
}


def parse_sections(
    parser: configparser.ConfigParser,
    required_sections: tuple,
    optional_sections: tuple = (),
    source: str = "<config>",
) -> dict:
    allowed = set(required_sections) | set(optional_sections)
    present = set(parser.sections())
    unknown = present - allowed
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")
    missing = set(required_sections) - present
    if missing:
        raise ConfigError(f"{source}: missing required section(s) {sorted(missing)}")

    out: dict = {}
    for section in sorted(present):
        schema = SECTION_SCHEMAS[section]
        seen = dict(parser.items(section))
        unknown_keys = set(seen) - set(schema)
        if unknown_keys:
            paths = [f"{section}.{k}" for k in sorted(unknown_keys)]
            raise ConfigError(f"{source}: unknown key(s) {paths}")
        values = {}
        for name, key in schema.items():
            if name in seen:
                try:
                    values[name] = key.parse(seen[name])
                except (ValueError, TypeError) as exc:
                    raise ConfigError(
                        f"{source}: bad value for {section}.{name}: {exc}"
                    ) from exc
            elif key.required:
                raise ConfigError(f"{source}: missing required key {section}.{name}")
            else:
                values[name] = key.default
        out[section] = values
    return out


def load_config(path, required_sections: tuple, optional_sections: tuple = ()) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    # Schema keys carry unit suffixes with mixed case (slope_V_per_ms, i_min_uA);
    # the default optionxform would fold them to lowercase and break lookup.
    parser.optionxform = str
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    return parse_sections(parser, required_sections, optional_sections, source=str(path))


def config_hash(config: dict) -> str:
    """Order-independent short hash of a parsed config tree."""
    canonical = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def artifact_header(seed: int, cfg_hash: str, **extra) -> list:
    """Comment lines embedded at the top of every artifact."""
    lines = [f"seed={seed}", f"config_hash={cfg_hash}", f"schema_version={SCHEMA_VERSION}"]
    lines.extend(f"{k}={v}" for k, v in sorted(extra.items()))
    return lines


def dump_config(config: dict, path) -> None:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    for section, values in config.items():
        parser[section] = {}
        for name, value in values.items():
            if isinstance(value, (tuple, list)):
                parser[section][name] = ", ".join(repr(v) for v in value)
            elif value is None:
                parser[section][name] = "none"
            else:
                parser[section][name] = str(value)
    with open(path, "w") as fh:
        parser.write(fh)


def params_to_config(params) -> dict:
    """PlasticityParams -> config section (drops the degenerate flag)."""
    d = asdict(params)
    d.pop("degenerate", None)
    for key in ("tau_plus", "tau_minus", "shift_plus", "shift_minus"):
        d[key] = tuple(d[key])
    return d
