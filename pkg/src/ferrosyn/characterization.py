"""Virtual measurement harness: reset/set/program pulse protocols.

Each grid point runs the same three-pulse sequence on a fresh copy of a
template device: a deep reset pulse, a set pulse that prepares an
intermediate conductance state, a drain-current read, a programming
pulse, and a second read.  The change in drain current between the two
reads is the raw signal every downstream fit consumes.

Reads go through the static transistor model only and never advance the
domain kinetics, so the read path is disturb-free by construction.
Trials share the template's quenched disorder (same physical device) and
differ only in the dynamic switching noise, each trial/point pair drawing
from its own counter-based substream.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .device import DeviceState, SolverError, apply_pulse
from .rng import spawn_seed
from .validation import check_scalar

SWEEP_CSV_COLUMNS = (
    "polarity",
    "v_set_V",
    "v_program_V",
    "i_d_set_uA",
    "i_d_read_uA",
    "delta_i_d_uA",
    "trials",
    "i_d_read_std_uA",
    "i_d_set_std_uA",
)

# Calibration knobs the optimizer is allowed to touch.
CALIBRATABLE = ("tau0_s", "alpha", "ea_mean_MV_cm", "ea_std_MV_cm")


@dataclass(frozen=True)
class VoltageSweep:
    """Inclusive linear voltage ladder with a fixed pulse width."""

    v_min_V: float
    v_max_V: float
    step_V: float
    width_s: float

    def __post_init__(self) -> None:
        check_scalar(self.step_V, "step_V", minimum=0.0, strict_min=True)
        check_scalar(self.width_s, "width_s", minimum=0.0, strict_min=True)
        if not self.v_min_V < self.v_max_V:
            raise ValueError("v_min_V must be < v_max_V")

    def voltages(self) -> np.ndarray:
        n = int(round((self.v_max_V - self.v_min_V) / self.step_V)) + 1
        return np.round(self.v_min_V + self.step_V * np.arange(n), 9)


@dataclass(frozen=True)
class PulseScheme:
    """Full three-pulse protocol definition for one polarity."""

    reset_amplitude_V: float
    reset_width_s: float
    set_sweep: VoltageSweep
    program_sweep: VoltageSweep
    polarity: str = "potentiation"

    def __post_init__(self) -> None:
        check_scalar(self.reset_width_s, "reset_width_s", minimum=0.0, strict_min=True)
        if self.polarity not in ("potentiation", "depression"):
            raise ValueError("polarity must be 'potentiation' or 'depression'")


@dataclass(frozen=True)
class SweepRecord:
    """Trial-averaged measurement at one (v_set, v_program) grid point.

    Both read currents carry their across-trial standard deviation; the
    set-current spread is what separates real program-axis structure
    from Monte Carlo noise when judging flatness.
    """

    polarity: str
    v_set: float
    v_program: float
    i_d_set: float
    i_d_read: float
    delta_i_d: float
    trials: int
    i_d_read_std: float
    i_d_set_std: float = 0.0


class ProtocolError(RuntimeError):
    """Solver failure during a sweep, annotated with the grid point."""


def _measure_point(
    device_template: DeviceState,
    scheme: PulseScheme,
    v_set: float,
    v_program: float,
    point_index: int,
    trial: int,
    base_seed: int,
) -> tuple[float, float]:
    dev = device_template.clone_reset(
        rng_seed=spawn_seed(base_seed, point_index, trial)
    )
    try:
        apply_pulse(dev, scheme.reset_amplitude_V, scheme.reset_width_s)
        apply_pulse(dev, v_set, scheme.set_sweep.width_s)
        i_set = dev.read_current()
        apply_pulse(dev, v_program, scheme.program_sweep.width_s)
        i_read = dev.read_current()
    except SolverError as exc:
        raise ProtocolError(
            f"solver failed at v_set={v_set} V, v_program={v_program} V, "
            f"trial {trial}: {exc}"
        ) from exc
    return i_set, i_read


def _point_worker(args) -> tuple[int, float, float, float, float, float]:
    device_template, scheme, v_set, v_program, point_index, trials, base_seed = args
    i_sets = np.empty(trials)
    i_reads = np.empty(trials)
    for t in range(trials):
        i_sets[t], i_reads[t] = _measure_point(
            device_template, scheme, v_set, v_program, point_index, t, base_seed
        )
    return (
        point_index,
        float(i_sets.mean()),
        float(i_reads.mean()),
        float((i_reads - i_sets).mean()),
        float(i_reads.std(ddof=1)) if trials > 1 else 0.0,
        float(i_sets.std(ddof=1)) if trials > 1 else 0.0,
    )


def run_protocol(
    device_template: DeviceState,
    scheme: PulseScheme,
    trials: int = 32,
    seed: int = 0,
    n_jobs: int = 1,
) -> list[SweepRecord]:
    """Run the full (set x program) grid, averaged over trials.

    Points are independent given their substreams; with ``n_jobs > 1``
    they run in a process pool.  Output order is fixed by grid index
    regardless of completion order.  ``delta_i_d`` is averaged per
    trial before the mean, so it equals ``i_d_read - i_d_set`` of the
    same trial, not of the averages (identical after averaging, but the
    std columns refer to the per-trial read and set distributions).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    v_sets = scheme.set_sweep.voltages()
    v_programs = scheme.program_sweep.voltages()
    tasks = []
    idx = 0
    for v_set in v_sets:
        for v_program in v_programs:
            tasks.append(
                (device_template, scheme, float(v_set), float(v_program), idx, trials, seed)
            )
            idx += 1
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_point_worker, tasks, chunksize=8))
    else:
        results = [_point_worker(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    records = []
    for task, (_, i_set, i_read, delta, std, set_std) in zip(tasks, results):
        records.append(
            SweepRecord(
                polarity=scheme.polarity,
                v_set=task[2],
                v_program=task[3],
                i_d_set=i_set,
                i_d_read=i_read,
                delta_i_d=delta,
                trials=trials,
                i_d_read_std=std,
                i_d_set_std=set_std,
            )
        )
    return records


@dataclass(frozen=True)
class SweepGrids:
    """Record list reshaped onto the (v_set, v_program) grid.

    All current grids have shape (n_set, n_program); rows follow
    ascending v_set, columns ascending v_program.
    """

    v_sets: np.ndarray
    v_programs: np.ndarray
    i_set: np.ndarray
    i_read: np.ndarray
    i_read_std: np.ndarray
    i_set_std: np.ndarray


def records_to_grids(records: list[SweepRecord]) -> SweepGrids:
    """Reshape a record list into aligned grids, one row per set state."""
    v_sets = np.array(sorted({r.v_set for r in records}))
    v_programs = np.array(sorted({r.v_program for r in records}))
    shape = (v_sets.size, v_programs.size)
    i_set = np.full(shape, np.nan)
    i_read = np.full(shape, np.nan)
    read_std = np.full(shape, np.nan)
    set_std = np.full(shape, np.nan)
    si = {v: i for i, v in enumerate(v_sets)}
    pi = {v: i for i, v in enumerate(v_programs)}
    for r in records:
        i, j = si[r.v_set], pi[r.v_program]
        i_set[i, j] = r.i_d_set
        i_read[i, j] = r.i_d_read
        read_std[i, j] = r.i_d_read_std
        set_std[i, j] = r.i_d_set_std
    if np.isnan(i_set).any():
        raise ValueError("records do not cover the full (v_set, v_program) grid")
    return SweepGrids(v_sets, v_programs, i_set, i_read, read_std, set_std)


def write_sweep_csv(path, records: list[SweepRecord], header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.polarity,
                    f"{r.v_set:.6g}",
                    f"{r.v_program:.6g}",
                    f"{r.i_d_set:.9g}",
                    f"{r.i_d_read:.9g}",
                    f"{r.delta_i_d:.9g}",
                    r.trials,
                    f"{r.i_d_read_std:.9g}",
                    f"{r.i_d_set_std:.9g}",
                ]
            )


def read_sweep_csv(path) -> list[SweepRecord]:
    with open(path, "r", newline="") as fh:
        body = "".join(line for line in fh if not line.startswith("#"))
    reader = csv.DictReader(io.StringIO(body))
    missing = set(SWEEP_CSV_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"sweep CSV missing columns: {sorted(missing)}")
    records = []
    for row in reader:
        records.append(
            SweepRecord(
                polarity=row["polarity"],
                v_set=float(row["v_set_V"]),
                v_program=float(row["v_program_V"]),
                i_d_set=float(row["i_d_set_uA"]),
                i_d_read=float(row["i_d_read_uA"]),
                delta_i_d=float(row["delta_i_d_uA"]),
                trials=int(row["trials"]),
                i_d_read_std=float(row["i_d_read_std_uA"]),
                i_d_set_std=float(row["i_d_set_std_uA"]),
            )
        )
    return records


@dataclass
class CalibrationResult:
    params: dict
    rmse: float
    residuals: np.ndarray = field(repr=False)
    n_evaluations: int = 0
    converged: bool = True


class CalibrationError(RuntimeError):
    """Optimizer did not converge; carries the best-so-far result."""

    def __init__(self, message: str, result: CalibrationResult):
        super().__init__(message)
        self.result = result


def _normalized_read(records: list[SweepRecord]) -> np.ndarray:
    i_read = records_to_grids(records).i_read
    peak = i_read.max()
    if peak <= 0:
        raise ValueError("sweep has no positive read current to normalize by")
    return i_read / peak


def _with_params(device_template: DeviceState, candidate: dict) -> DeviceState:
    layer = device_template.layer
    kin = layer.kinetics
    kin = replace(
        kin,
        tau0_s=float(candidate.get("tau0_s", kin.tau0_s)),
        alpha=float(candidate.get("alpha", kin.alpha)),
    )
    new_layer = type(layer)(
        n_domains=layer.n_domains,
        remnant_polarization=layer.remnant_polarization,
        beta=layer.beta,
        thickness_nm=layer.thickness_nm,
        kinetics=kin,
        ea_mean_MV_cm=float(candidate.get("ea_mean_MV_cm", layer.ea_mean_MV_cm)),
        ea_std_MV_cm=float(candidate.get("ea_std_MV_cm", layer.ea_std_MV_cm)),
        rng_seed=layer.rng_seed,
        initial_state=-1,
        disorder_seed=layer.disorder_seed,
    )
    return replace(device_template, layer=new_layer)


def calibrate(
    records: list[SweepRecord],
    free_params: dict,
    device_template: DeviceState,
    scheme: PulseScheme,
    trials: int = 8,
    seed: int = 0,
    max_evaluations: int = 400,
) -> CalibrationResult:
    """Fit kinetic parameters so simulated sweeps match the target reads.

    Objective: sum of squared differences between normalized I_D,read
    grids (target vs. candidate simulation).  Common random numbers --
    every candidate evaluation reuses the same seed -- make the noisy
    Monte Carlo surface deterministic, so a derivative-free simplex
    search (Nelder-Mead) converges without gradient estimates.  tau0 is
    searched in log space since it is a scale parameter.
    """
    unknown = set(free_params) - set(CALIBRATABLE)
    if unknown:
        raise ValueError(f"unknown calibration parameters: {sorted(unknown)}")
    if not free_params:
        raise ValueError("free_params must name at least one parameter")
    v_sets = {r.v_set for r in records}
    v_programs = {r.v_program for r in records}
    if len(v_sets) < 3:
        raise ValueError("calibration needs records from >= 3 set states")
    if len(v_programs) < 10:
        raise ValueError("calibration needs records from >= 10 program voltages")

    target = _normalized_read(records)
    names = sorted(free_params)
    log_scale = {"tau0_s"}

    def encode(values: dict) -> np.ndarray:
        return np.array(
            [math.log(values[n]) if n in log_scale else values[n] for n in names]
        )

    def decode(x: np.ndarray) -> dict:
        return {
            n: (math.exp(v) if n in log_scale else float(v))
            for n, v in zip(names, x)
        }

    eval_count = 0

    def objective(x: np.ndarray) -> float:
        nonlocal eval_count
        eval_count += 1
        candidate = decode(x)
        if candidate.get("alpha", 1.0) <= 0 or candidate.get("ea_mean_MV_cm", 1.0) <= 0:
            return 1e6
        if candidate.get("ea_std_MV_cm", 0.0) < 0:
            return 1e6
        sim = run_protocol(_with_params(device_template, candidate), scheme, trials, seed)
        return float(((_normalized_read(sim) - target) ** 2).sum())

    x0 = encode(free_params)
    opt = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "maxfev": max_evaluations,
            "xatol": 1e-3,
            "fatol": 1e-5,
            "adaptive": True,
        },
    )
    best = decode(opt.x)
    sim = run_protocol(_with_params(device_template, best), scheme, trials, seed)
    residuals = _normalized_read(sim) - target
    result = CalibrationResult(
        params=best,
        rmse=float(np.sqrt((residuals**2).mean())),
        residuals=residuals,
        n_evaluations=eval_count,
        converged=bool(opt.success),
    )
    if not opt.success:
        raise CalibrationError(
            f"calibration did not converge after {eval_count} evaluations "
            f"(rmse={result.rmse:.4g})",
            result,
        )
    return result
