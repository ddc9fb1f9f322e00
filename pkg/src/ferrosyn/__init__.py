"""FeFET synaptic device simulation, from domain kinetics to network learning.

Layers, bottom up: stochastic domain switching (domains), the
self-consistent ferroelectric/transistor stack (device), virtual
pulse-protocol measurement and kinetic calibration (characterization),
the multiplicative conductance-update compact model (plasticity),
crossbar synapse arrays with three interchangeable write backends
(crossbar), and an unsupervised spiking classifier over MNIST
(network, estimator).  The cli module exposes the whole pipeline as
subcommands.
"""

__version__ = "0.1.0"

from .characterization import (
    CalibrationError,
    CalibrationResult,
    ProtocolError,
    PulseScheme,
    SweepRecord,
    VoltageSweep,
    calibrate,
    read_sweep_csv,
    run_protocol,
    write_sweep_csv,
)
from .crossbar import (
    AdditiveBackend,
    CompactBackend,
    CrossbarArray,
    MonteCarloBackend,
    WriteEvent,
)
from .device import DeviceState, SolverError, TransistorModel, apply_pulse
from .domains import FerroelectricLayer, Kinetics, switching_probability
from .estimator import SpikingDigitClassifier
from .network import SnnConfig, TrainReport, assign_labels_and_eval, train
from .plasticity import (
    PlasticityParams,
    TimingMap,
    delta_g,
    fit_compact_model,
    timing_to_voltage,
)

__all__ = [
    "__version__",
    "AdditiveBackend",
    "CalibrationError",
    "CalibrationResult",
    "CompactBackend",
    "CrossbarArray",
    "DeviceState",
    "FerroelectricLayer",
    "Kinetics",
    "MonteCarloBackend",
    "PlasticityParams",
    "ProtocolError",
    "PulseScheme",
    "SnnConfig",
    "SolverError",
    "SpikingDigitClassifier",
    "SweepRecord",
    "TimingMap",
    "TrainReport",
    "TransistorModel",
    "VoltageSweep",
    "WriteEvent",
    "apply_pulse",
    "assign_labels_and_eval",
    "calibrate",
    "delta_g",
    "fit_compact_model",
    "read_sweep_csv",
    "run_protocol",
    "switching_probability",
    "timing_to_voltage",
    "train",
    "write_sweep_csv",
]
