"""Scikit-learn style wrapper around the spiking-network pipeline.

The estimator bundles array construction, unsupervised training,
rate-based neuron labeling and voting into fit/predict so the network
can sit in sklearn model-selection tooling.  Only the estimator API is
adopted; the underlying simulation keeps its own functional interface
and nothing here imports sklearn.
"""

from __future__ import annotations

import numpy as np

from . import presets
from .configio import SNN_SCHEMA
from .network import (
    _ENCODE_ASSIGN,
    _ENCODE_EVAL,
    assign_labels,
    predict_from_counts,
    simulate_counts,
    train,
)


class SpikingDigitClassifier:
    """Unsupervised spiking classifier over a synaptic crossbar.

    Parameters mirror the [snn] config section; anything not exposed
    directly can be overridden through ``config_overrides``.  Fitted
    state lives in trailing-underscore attributes per sklearn
    convention: weights_, theta_, assignment_, report_.
    """

    def __init__(
        self,
        n_neurons: int = 100,
        learning_rule: str = "fefet-compact",
        quantization_bits: int | None = None,
        seed: int = 0,
        config_overrides: dict | None = None,
    ):
        self.n_neurons = n_neurons
        self.learning_rule = learning_rule
        self.quantization_bits = quantization_bits
        self.seed = seed
        self.config_overrides = config_overrides

    def get_params(self, deep: bool = True) -> dict:
        return {
            "n_neurons": self.n_neurons,
            "learning_rule": self.learning_rule,
            "quantization_bits": self.quantization_bits,
            "seed": self.seed,
            "config_overrides": self.config_overrides,
        }

    def set_params(self, **params) -> "SpikingDigitClassifier":
        for name, value in params.items():
            if name not in self.get_params():
                raise ValueError(f"unknown parameter {name!r}")
            setattr(self, name, value)
        return self

    def _build(self):
        snn_section = {k: v.default for k, v in SNN_SCHEMA.items()}
        snn_section.update(
            n_excitatory=self.n_neurons,
            learning_rule=self.learning_rule,
            quantization_bits=self.quantization_bits,
        )
        snn_section.update(self.config_overrides or {})
        config = presets.snn_from_config(snn_section)
        params = presets.paper_default_plasticity()
        timing = presets.paper_default_timing()
        backend = presets.build_backend(snn_section, params, seed=self.seed)
        return config, timing, backend

    def fit(self, X, y) -> "SpikingDigitClassifier":
        X = np.asarray(X)
        y = np.asarray(y)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y disagree in length")
        n_pixels = int(np.prod(X.shape[1:]))
        config, timing, backend = self._build()
        array = presets.build_array(n_pixels, config, backend, self.seed)
        report, array = train(config, X, y, array, timing, seed=self.seed)
        counts = simulate_counts(
            config, array.cells, report.theta, X, self.seed, _ENCODE_ASSIGN
        )
        self.config_ = config
        self.weights_ = array.cells
        self.theta_ = report.theta
        self.assignment_ = assign_labels(counts, y)
        self.report_ = report
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "weights_"):
            raise RuntimeError("fit must be called before predict")
        counts = simulate_counts(
            self.config_, self.weights_, self.theta_, np.asarray(X),
            self.seed, _ENCODE_EVAL,
        )
        return predict_from_counts(counts, self.assignment_)

    def score(self, X, y) -> float:
        return float((self.predict(X) == np.asarray(y)).mean())
