"""Synapse array: Kirchhoff-sum reads and timing-driven writes.

Cells hold normalized conductances in [0, 1].  Reads are pure column
sums of conductances gated by the input spike vector; the read path
never touches cell state.  Writes map a per-row spike-timing delay to a
programming voltage, evaluate the conductance update through one of two
backends, clamp, optionally quantize, and book the pulse energy:

* ``compact``: the fitted update-rule surface; energy from the
  displacement-charge coefficient calibrated once from the device card
  (charge moved x voltage).
* ``montecarlo``: a full stochastic device per cell; the update and the
  charge actually moved come from the pulse simulation itself.

Write energy for one event is V_P x I_write x width with I_write the
gate-stack displacement current, which reduces to |moved charge| x V_P.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

from .device import DeviceState, apply_pulse
from .plasticity import PlasticityParams, TimingMap, _delta_g_dep, _delta_g_pot, timing_to_voltage
from .rng import spawn_seed
from .validation import check_matrix, check_scalar

# 1 uC/cm^2 across 1 um^2 is 10 fC of switched charge.
_FC_PER_UC_CM2_UM2 = 10.0


@dataclass(frozen=True)
class WriteEvent:
    row: int
    col: int
    dt_ms: float
    v_p: float
    dg_applied: float
    energy_fJ: float


class CompactBackend:
    """Closed-form update rule plus a calibrated energy coefficient."""

    uses_dt = False

    def __init__(
        self,
        params: PlasticityParams,
        pulse_width_s: float = 1e-7,
        q_swing_fC: float = 10.0,
    ):
        check_scalar(pulse_width_s, "pulse_width_s", minimum=0.0, strict_min=True)
        check_scalar(q_swing_fC, "q_swing_fC", minimum=0.0, strict_min=True)
        self.params = params
        self.pulse_width_s = float(pulse_width_s)
        self.q_swing_fC = float(q_swing_fC)

    @classmethod
    def energy_coefficient(cls, device_template: DeviceState) -> float:
        """Full-swing displacement charge of the card, in fC."""
        layer = device_template.layer
        return (
            2.0
            * layer.remnant_polarization
            * device_template.area_um2
            * _FC_PER_UC_CM2_UM2
        )

    def propose(self, g: np.ndarray, v_p: float, sign: str) -> np.ndarray:
        p = self.params
        if sign == "potentiation":
            return _delta_g_pot(g, abs(v_p) - p.v0_plus, p)
        return _delta_g_dep(g, abs(v_p) - p.v0_minus, p)

    def energy(self, v_p: float, dg_applied: np.ndarray) -> np.ndarray:
        return np.abs(v_p) * np.abs(dg_applied) * self.q_swing_fC


class AdditiveBackend:
    """Weight-independent exponential STDP kernel (comparison baseline).

    dG = +eta_plus  * exp(-|dt| / tau_ms)   for dt >= 0
    dG = -eta_minus * exp(-|dt| / tau_ms)   for dt <  0

    The update ignores the current conductance entirely; energy uses the
    same displacement coefficient as the compact backend so the two
    rules are compared on identical hardware assumptions.
    """

    uses_dt = True

    def __init__(
        self,
        eta_plus: float,
        eta_minus: float,
        tau_ms: float,
        pulse_width_s: float = 1e-7,
        q_swing_fC: float = 10.0,
    ):
        check_scalar(eta_plus, "eta_plus", minimum=0.0, strict_min=True)
        check_scalar(eta_minus, "eta_minus", minimum=0.0, strict_min=True)
        check_scalar(tau_ms, "tau_ms", minimum=0.0, strict_min=True)
        self.eta_plus = float(eta_plus)
        self.eta_minus = float(eta_minus)
        self.tau_ms = float(tau_ms)
        self.pulse_width_s = float(pulse_width_s)
        self.q_swing_fC = float(q_swing_fC)

    def propose_dt(self, g: np.ndarray, dt_ms: np.ndarray, sign: str) -> np.ndarray:
        kernel = np.exp(-np.abs(dt_ms) / self.tau_ms)
        if sign == "potentiation":
            return self.eta_plus * kernel
        return -self.eta_minus * kernel

    def energy(self, v_p, dg_applied) -> np.ndarray:
        return np.abs(v_p) * np.abs(dg_applied) * self.q_swing_fC


class MonteCarloBackend:
    """One stochastic device per cell; updates come from real pulses.

    Conductance maps linearly onto the device's read current between
    the calibration extremes (i_min, i_max).  Writing a cell applies
    the actual gate pulse to its device, so the conductance change and
    the switched charge carry full Monte Carlo variability.
    """

    def __init__(
        self,
        device_template: DeviceState,
        i_min_uA: float,
        i_max_uA: float,
        pulse_width_s: float = 1e-7,
        seed: int = 0,
    ):
        if not i_max_uA > i_min_uA:
            raise ValueError("i_max_uA must exceed i_min_uA")
        self.device_template = device_template
        self.i_min_uA = float(i_min_uA)
        self.i_max_uA = float(i_max_uA)
        self.pulse_width_s = float(pulse_width_s)
        self.seed = int(seed)
        self._cells: dict[tuple[int, int], DeviceState] = {}

    def _device(self, row: int, col: int) -> DeviceState:
        key = (row, col)
        dev = self._cells.get(key)
        if dev is None:
            dev = self.device_template.clone_reset(
                rng_seed=spawn_seed(self.seed, row, col)
            )
            self._cells[key] = dev
        return dev

    def g_of(self, row: int, col: int) -> float:
        dev = self._device(row, col)
        g = (dev.read_current() - self.i_min_uA) / (self.i_max_uA - self.i_min_uA)
        return float(np.clip(g, 0.0, 1.0))

    def write_cell(self, row: int, col: int, v_p: float) -> tuple[float, float]:
        """Pulse one cell; returns (new g, energy fJ)."""
        dev = self._device(row, col)
        p_before = dev.layer.total_polarization()
        apply_pulse(dev, v_p, self.pulse_width_s)
        p_after = dev.layer.total_polarization()
        moved_fC = abs(p_after - p_before) * dev.area_um2 * _FC_PER_UC_CM2_UM2
        return self.g_of(row, col), abs(v_p) * moved_fC

    def state_bytes(self) -> bytes:
        chunks = []
        for key in sorted(self._cells):
            chunks.append(self._cells[key].layer.states.tobytes())
        return b"".join(chunks)


class CrossbarArray:
    """rows x cols array of synapse cells with decoupled read/write paths."""

    def __init__(
        self,
        rows: int,
        cols: int,
        backend,
        quantization_bits: int | None = None,
        cells: np.ndarray | None = None,
    ):
        if rows < 1 or cols < 1:
            raise ValueError("rows and cols must be >= 1")
        if quantization_bits is not None and quantization_bits < 1:
            raise ValueError("quantization_bits must be >= 1 when set")
        self.rows = int(rows)
        self.cols = int(cols)
        self.backend = backend
        self.quantization_bits = quantization_bits
        self.levels = None if quantization_bits is None else 2**quantization_bits
        if cells is None:
            cells = np.zeros((rows, cols))
        cells = check_matrix(cells, "cells", shape=(rows, cols)).astype(float).copy()
        if cells.min() < 0.0 or cells.max() > 1.0:
            raise ValueError("cells must lie in [0, 1]")
        if self.levels is not None:
            cells = self._quantize(cells)
        self.cells = cells
        self.energy_fJ = np.zeros((rows, cols))
        self.cell_max_fJ = np.zeros((rows, cols))
        self.write_count = np.zeros((rows, cols), dtype=np.int64)
        self.max_event_fJ = 0.0
        self.total_events = 0
        self._sync_mc_cells()

    @classmethod
    def uniform(
        cls,
        rows: int,
        cols: int,
        backend,
        low: float = 0.1,
        high: float = 0.4,
        seed: int = 0,
        quantization_bits: int | None = None,
    ) -> "CrossbarArray":
        from .rng import substream

        cells = substream(seed, 3).uniform(low, high, size=(rows, cols))
        return cls(rows, cols, backend, quantization_bits, cells)

    def _quantize(self, g):
        return np.round(g * (self.levels - 1)) / (self.levels - 1)

    def _sync_mc_cells(self) -> None:
        # Monte Carlo cells materialize lazily; stored conductances are
        # authoritative only for the compact backend.  For the Monte
        # Carlo backend the devices themselves are, and self.cells
        # mirrors their last read.
        if isinstance(self.backend, MonteCarloBackend):
            for i in range(self.rows):
                for j in range(self.cols):
                    self.cells[i, j] = self.backend.g_of(i, j)

    def read(self, spikes: np.ndarray) -> np.ndarray:
        """Column currents for a binary row spike vector (pure)."""
        spikes = np.asarray(spikes, dtype=float)
        if spikes.shape != (self.rows,):
            raise ValueError(f"spikes must have shape ({self.rows},)")
        return spikes @ self.cells

    def write(
        self,
        col: int,
        spike_timings,
        timing_map: TimingMap,
        record_events: bool = True,
    ):
        """Program one column from per-row spike-timing delays.

        ``spike_timings`` is either a dict {row: dt_ms} or a length-rows
        array with NaN marking rows without a spike pairing.  Rows whose
        |dt| exceeds the window are untouched.  Returns the list of
        WriteEvent (or the event count when record_events is False).
        """
        if not 0 <= col < self.cols:
            raise IndexError(f"col {col} out of range")
        if isinstance(spike_timings, dict):
            rows = np.fromiter(spike_timings.keys(), dtype=np.int64, count=len(spike_timings))
            dts = np.fromiter(spike_timings.values(), dtype=float, count=len(spike_timings))
        else:
            arr = np.asarray(spike_timings, dtype=float)
            if arr.shape != (self.rows,):
                raise ValueError(f"spike_timings must have shape ({self.rows},)")
            rows = np.nonzero(~np.isnan(arr))[0]
            dts = arr[rows]
        if rows.size and (rows.min() < 0 or rows.max() >= self.rows):
            raise IndexError("row index out of range")
        inside = np.abs(dts) <= timing_map.window_ms
        rows, dts = rows[inside], dts[inside]
        if rows.size == 0:
            return [] if record_events else 0

        if isinstance(self.backend, MonteCarloBackend):
            return self._write_montecarlo(col, rows, dts, timing_map, record_events)
        return self._write_compact(col, rows, dts, timing_map, record_events)

    def _write_compact(self, col, rows, dts, timing_map, record_events):
        v_abs = timing_map.v_max - timing_map.slope_V_per_ms * np.abs(dts)
        pot = dts >= 0.0
        g_old = self.cells[rows, col]
        dg = np.empty_like(g_old)
        if getattr(self.backend, "uses_dt", False):
            if pot.any():
                dg[pot] = self.backend.propose_dt(g_old[pot], dts[pot], "potentiation")
            if (~pot).any():
                dg[~pot] = self.backend.propose_dt(g_old[~pot], dts[~pot], "depression")
        else:
            if pot.any():
                dg[pot] = self.backend.propose(g_old[pot], v_abs[pot], "potentiation")
            if (~pot).any():
                dg[~pot] = self.backend.propose(g_old[~pot], v_abs[~pot], "depression")
        g_new = np.clip(g_old + dg, 0.0, 1.0)
        if self.levels is not None:
            g_new = self._quantize(g_new)
        dg_applied = g_new - g_old
        v_signed = np.where(pot, v_abs, -v_abs)
        energy = self.backend.energy(v_signed, dg_applied)
        self.cells[rows, col] = g_new
        self._book(rows, col, energy)
        if not record_events:
            return int(rows.size)
        return [
            WriteEvent(int(r), int(col), float(dt), float(v), float(d), float(e))
            for r, dt, v, d, e in zip(rows, dts, v_signed, dg_applied, energy)
        ]

    def _write_montecarlo(self, col, rows, dts, timing_map, record_events):
        events = []
        energies = np.empty(rows.size)
        for k, (row, dt) in enumerate(zip(rows, dts)):
            v_p, _sign = timing_to_voltage(float(dt), timing_map)
            g_old = self.cells[row, col]
            g_new, e_fJ = self.backend.write_cell(int(row), int(col), v_p)
            if self.levels is not None:
                g_new = float(self._quantize(np.asarray(g_new)))
            self.cells[row, col] = g_new
            energies[k] = e_fJ
            if record_events:
                events.append(
                    WriteEvent(int(row), int(col), float(dt), float(v_p),
                               float(g_new - g_old), float(e_fJ))
                )
        self._book(rows, col, energies)
        return events if record_events else int(rows.size)

    def _book(self, rows, col, energy) -> None:
        self.energy_fJ[rows, col] += energy
        self.cell_max_fJ[rows, col] = np.maximum(self.cell_max_fJ[rows, col], energy)
        self.write_count[rows, col] += 1
        self.total_events += int(rows.size)
        if energy.size:
            self.max_event_fJ = max(self.max_event_fJ, float(energy.max()))

    def max_write_energy(self) -> float:
        """Largest single write-event energy seen so far, in fJ."""
        if self.total_events == 0:
            raise RuntimeError("no write events recorded")
        return self.max_event_fJ

    def state_hash(self) -> str:
        h = hashlib.sha256(self.cells.tobytes())
        if isinstance(self.backend, MonteCarloBackend):
            h.update(self.backend.state_bytes())
        return h.hexdigest()

    def save_conductances_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow([f"col_{j}" for j in range(self.cols)])
            for i in range(self.rows):
                writer.writerow([f"{v:.9g}" for v in self.cells[i]])

    def save_energy_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "events", "total_fJ", "max_single_event_fJ"])
            for i in range(self.rows):
                for j in range(self.cols):
                    if self.write_count[i, j]:
                        writer.writerow(
                            [i, j, int(self.write_count[i, j]),
                             f"{self.energy_fJ[i, j]:.9g}", f"{self.cell_max_fJ[i, j]:.9g}"]
                        )
