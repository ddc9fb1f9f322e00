"""Self-consistent ferroelectric / transistor coupling.

The gate stack is a ferroelectric capacitor in series with the MOS gate.
Charge continuity ties the two (all densities per unit area):

    Q_MOS(V_MOS) = Q_FE = P_FE + C_FE * V_FE,      V_FE + V_MOS = V_G

Given the instantaneous polarization P_FE, the shared charge equation is
strictly monotone in V_MOS, so a safeguarded bisection finds the unique
bias partition. During a pulse the solved V_FE sets the field that drives
domain switching, and the updated polarization feeds back into the next
solve. Polarization shifts the effective threshold voltage through an
affine map, which is what makes the device a nonvolatile analog synapse.

The transistor itself is a minimal square-law model with an exponential
subthreshold region, blended C1-continuously through a softplus overdrive
so the drain current is smooth and strictly increasing in gate bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .domains import FerroelectricLayer

__all__ = ["TransistorModel", "DeviceState", "SolverError",
           "solve_bias", "apply_pulse", "drain_current"]

# Bias-solver constants: bisection tolerance on V_MOS, iteration cap,
# and the acceptable charge-continuity residual at a solved point.
V_TOL = 1e-9            # V
MAX_ITER = 200
CHARGE_TOL = 1e-6       # uC/cm^2
DEFAULT_SUBSTEPS = 25   # field refreshes per pulse


class SolverError(RuntimeError):
    """Bias solver failed; carries the last charge residual in uC/cm^2."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e} uC/cm^2)")
        self.residual = residual


@dataclass
class TransistorModel:
    """Underlying MOSFET: current model plus gate charge model.

    charge_model selects how gate charge depends on the internal node
    voltage: "linear" is the ideal capacitor Q = C_MOS * V_MOS (closed
    form exists, used as a solver oracle); "smooth" adds inversion and
    accumulation onsets so the gate looks nearly floating between v_off
    and v_on, concentrating read bias across the MOS rather than the
    ferroelectric.
    """

    vth0_V: float
    k_uA_V2: float
    subthreshold_swing_mV_dec: float
    c_mos_uF_cm2: float
    v_ds_read_V: float
    charge_model: str = "smooth"
    v_on_V: float = 0.4
    v_off_V: float = -0.2
    q_smooth_V: float = 0.15

    def __post_init__(self):
        for name in ("vth0_V", "k_uA_V2", "subthreshold_swing_mV_dec", "c_mos_uF_cm2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.v_ds_read_V <= 0:
            raise ValueError("v_ds_read_V must be > 0")
        if self.charge_model not in ("linear", "smooth"):
            raise ValueError(f"unknown charge_model {self.charge_model!r}")
        if self.charge_model == "smooth" and self.v_off_V >= self.v_on_V:
            raise ValueError("v_off_V must be below v_on_V")

    def gate_charge(self, v_mos: float) -> float:
        """Gate charge density in uC/cm^2; strictly nondecreasing in v_mos."""
        if self.charge_model == "linear":
            return self.c_mos_uF_cm2 * v_mos
        s = self.q_smooth_V
        # softplus(x) = s*ln(1+exp(x/s)), computed overflow-safe
        inv = s * np.logaddexp(0.0, (v_mos - self.v_on_V) / s)
        acc = s * np.logaddexp(0.0, (self.v_off_V - v_mos) / s)
        return self.c_mos_uF_cm2 * float(inv - acc)


@dataclass
class DeviceState:
    """One FeFET: ferroelectric layer, transistor, and solved bias point.

    v_g / v_fe / v_mos / q / vth describe the most recent solve; the
    partition identity v_fe + v_mos = v_g holds exactly at every solved
    point and the charge residual stays below CHARGE_TOL.
    """

    layer: FerroelectricLayer
    transistor: TransistorModel
    c_fe_uF_cm2: float
    area_um2: float
    vth_scale: float = 1.0
    v_g_read_V: float = 0.9
    v_g: float = 0.0
    v_fe: float = 0.0
    v_mos: float = 0.0
    q: float = 0.0
    vth: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.c_fe_uF_cm2 <= 0:
            raise ValueError("c_fe_uF_cm2 must be > 0")
        if self.area_um2 <= 0:
            raise ValueError("area_um2 must be > 0")
        self.refresh_vth()

    def refresh_vth(self) -> None:
        """Affine polarization-to-threshold map.

        Fully depressed (P = -P_r) sits at the intrinsic vth0; the full
        polarization swing lowers the threshold by the memory window
        vth_scale * P_r / C_FE.
        """
        p_r = self.layer.remnant_polarization
        p = self.layer.total_polarization()
        self.vth = self.transistor.vth0_V - self.vth_scale * (p + p_r) / (2.0 * self.c_fe_uF_cm2)

    def memory_window_V(self) -> float:
        return self.vth_scale * self.layer.remnant_polarization / self.c_fe_uF_cm2

    def read_current(self) -> float:
        """I_D at the configured read bias; never disturbs the layer."""
        solve_bias(self, self.v_g_read_V)
        return drain_current(self, self.v_g_read_V)

    def clone_reset(self, rng_seed: int | None = None) -> "DeviceState":
        """Same device (same disorder), fresh dynamics, unbiased state."""
        return DeviceState(
            layer=self.layer.clone_reset(rng_seed),
            transistor=replace(self.transistor),
            c_fe_uF_cm2=self.c_fe_uF_cm2,
            area_um2=self.area_um2,
            vth_scale=self.vth_scale,
            v_g_read_V=self.v_g_read_V,
        )


def solve_bias(device: DeviceState, v_g: float) -> tuple[float, float, float]:
    """Partition v_g across the ferroelectric and the MOS gate.

    Solves Q_MOS(V_MOS) = P_FE + C_FE*(V_G - V_MOS) by safeguarded
    bisection. The nominal bracket [min(0, V_G), max(0, V_G)] is expanded
    geometrically when remnant polarization pushes the internal node
    outside it (e.g. a negatively poled film biases the node below
    ground even at V_G = 0). Returns (v_fe, v_mos, q) and stores them.
    """
    p_fe = device.layer.total_polarization()
    c_fe = device.c_fe_uF_cm2
    charge = device.transistor.gate_charge

    def residual(v_mos: float) -> float:
        return charge(v_mos) - (p_fe + c_fe * (v_g - v_mos))

    lo, hi = min(0.0, v_g), max(0.0, v_g)
    f_lo, f_hi = residual(lo), residual(hi)
    pad = 0.5
    while f_lo > 0.0:
        lo -= pad
        pad *= 2.0
        f_lo = residual(lo)
        if pad > 1e4:
            raise SolverError("could not bracket the bias solution from below", f_lo)
    pad = 0.5
    while f_hi < 0.0:
        hi += pad
        pad *= 2.0
        f_hi = residual(hi)
        if pad > 1e4:
            raise SolverError("could not bracket the bias solution from above", f_hi)

    v_mos, f_mid = lo, f_lo
    for _ in range(MAX_ITER):
        v_mos = 0.5 * (lo + hi)
        f_mid = residual(v_mos)
        if f_mid > 0.0:
            hi = v_mos
        else:
            lo = v_mos
        if hi - lo < V_TOL:
            break
    else:
        raise SolverError("bias solver exceeded the iteration budget", abs(f_mid))

    v_mos = 0.5 * (lo + hi)
    v_fe = v_g - v_mos
    q = p_fe + c_fe * v_fe
    res = abs(charge(v_mos) - q)
    if res > CHARGE_TOL:
        raise SolverError("bias solver converged outside the charge tolerance", res)
    device.v_g, device.v_fe, device.v_mos, device.q = v_g, v_fe, v_mos, q
    return v_fe, v_mos, q


def apply_pulse(
    device: DeviceState,
    amplitude: float,
    width: float,
    n_substeps: int = DEFAULT_SUBSTEPS,
    record: bool = False,
):
    """Apply a rectangular gate pulse and time-step the coupled system.

    The width is cut into n_substeps field refreshes: each refresh
    re-solves the bias for the current polarization, converts V_FE to a
    field, and advances the domain kinetics (which subdivide further to
    keep per-step flip probabilities small). Afterwards the device is
    re-solved at 0 V and the threshold voltage refreshed.

    Returns the trajectory rows (time_s, field_MV_per_cm,
    P_total_uC_per_cm2, flips) when record=True, else the device.
    """
    if width <= 0:
        raise ValueError(f"width must be > 0, got {width}")
    rows = []
    if amplitude == 0.0:
        if record:
            rows.append((width, 0.0, device.layer.total_polarization(), 0))
        return rows if record else device

    dt = width / int(n_substeps)
    t = 0.0
    for _ in range(int(n_substeps)):
        v_fe, _, _ = solve_bias(device, amplitude)
        # V over nm -> MV/cm carries a factor of 10
        field_MV_cm = 10.0 * v_fe / device.layer.thickness_nm
        flips = device.layer.step(field_MV_cm, dt) if field_MV_cm != 0.0 else 0
        t += dt
        if record:
            rows.append((t, field_MV_cm, device.layer.total_polarization(), flips))
    solve_bias(device, 0.0)
    device.refresh_vth()
    return rows if record else device


def drain_current(device: DeviceState, v_g_read: float) -> float:
    """I_D in uA: square law above threshold, exponential below.

    Uses a softplus overdrive F = s*ln(1+exp((V_G - V_TH)/s)) with the
    smoothing s set by the subthreshold swing, giving I_D = k * F^2.
    Strictly increasing in v_g_read and strictly decreasing in vth.
    """
    s = 2.0 * device.transistor.subthreshold_swing_mV_dec / (1000.0 * math.log(10.0))
    overdrive = v_g_read - device.vth
    f = s * np.logaddexp(0.0, overdrive / s)
    return device.transistor.k_uA_V2 * float(f) ** 2
