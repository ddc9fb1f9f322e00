"""Unsupervised spiking network over the synapse crossbar.

Pixels are rate-coded into Poisson spike trains; one excitatory layer of
leaky integrate-and-fire neurons reads the crossbar columns, fires under
winner-take-all lateral inhibition, and adapts a per-neuron threshold so
no neuron dominates.  Every post-synaptic spike triggers timing-driven
writes back into the crossbar: rows whose last input spike preceded the
post spike are potentiated immediately, and rows whose input arrived
after a post spike are depressed when the image presentation ends.

Training runs one image at a time (writes serialize on the array);
evaluation runs with learning off and batches many images through a
sparse input product, which is exact because nothing mutates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .crossbar import CrossbarArray
from .plasticity import TimingMap
from .rng import spawn_seed, substream
from .validation import check_scalar

NO_LABEL = -1  # assignment for neurons that never spike

# Sub-stream tags so train/assign/eval never share draws.
_ENCODE_TRAIN, _ENCODE_ASSIGN, _ENCODE_EVAL, _INIT_W = 0, 1, 2, 3


def encode_poisson(
    image: np.ndarray,
    duration_ms: float,
    rate_max_hz: float,
    seed: int,
    dt_ms: float = 0.5,
) -> np.ndarray:
    """Rate-code one image into a (n_steps, n_pixels) boolean spike raster.

    Each pixel fires as an independent Poisson process with rate
    (pixel/255) * rate_max; a simulation bin spikes with probability
    1 - exp(-rate * dt), the exact binarization of the process.
    """
    check_scalar(duration_ms, "duration_ms", minimum=0.0, strict_min=True)
    check_scalar(rate_max_hz, "rate_max_hz", minimum=0.0)
    pixels = np.asarray(image, dtype=float).ravel()
    if pixels.min() < 0 or pixels.max() > 255:
        raise ValueError("pixel values must lie in [0, 255]")
    n_steps = int(round(duration_ms / dt_ms))
    rate_per_bin = (pixels / 255.0) * rate_max_hz * (dt_ms * 1e-3)
    p = -np.expm1(-rate_per_bin)
    rng = substream(seed, 0)
    return rng.random((n_steps, pixels.size)) < p


@dataclass(frozen=True)
class SnnConfig:
    """Network, neuron, and learning-rule settings (all config-exposed)."""

    n_excitatory: int = 100
    sim_duration_ms: float = 350.0
    dt_ms: float = 0.5
    input_rate_max_hz: float = 63.75
    inhibition: bool = True
    stdp_window_ms: float = 20.0
    learning_rule: str = "fefet-compact"
    quantization_bits: int | None = None
    # LIF constants
    tau_m_ms: float = 100.0
    v_rest: float = 0.0
    v_reset: float = 0.0
    base_threshold: float = 1.0
    refractory_ms: float = 5.0
    inhibit_ms: float = 2.0
    gain: float = 0.025
    # homeostasis
    theta_increment: float = 0.05
    tau_theta_ms: float = 1e7
    # weight init and telemetry
    w_init_low: float = 0.1
    w_init_high: float = 0.4
    batch_size: int = 250

    def __post_init__(self) -> None:
        if self.n_excitatory < 1:
            raise ValueError("n_excitatory must be >= 1")
        check_scalar(self.dt_ms, "dt_ms", minimum=0.0, strict_min=True)
        steps = self.sim_duration_ms / self.dt_ms
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("sim_duration_ms must be a multiple of dt_ms")
        if self.learning_rule not in (
            "fefet-compact",
            "fefet-montecarlo",
            "standard-additive",
        ):
            raise ValueError(f"unknown learning rule {self.learning_rule!r}")
        if not 0.0 <= self.w_init_low < self.w_init_high <= 1.0:
            raise ValueError("weight init range must satisfy 0 <= low < high <= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.sim_duration_ms / self.dt_ms))


@dataclass
class NetworkState:
    """Mutable simulation state of the excitatory layer."""

    config: SnnConfig
    array: CrossbarArray
    timing_map: TimingMap
    v: np.ndarray
    theta: np.ndarray
    refractory_until: np.ndarray
    inhibited_until: np.ndarray
    last_pre_ms: np.ndarray
    last_post_ms: np.ndarray
    time_ms: float = 0.0
    learning: bool = True

    @classmethod
    def fresh(cls, config, array, timing_map) -> "NetworkState":
        n = config.n_excitatory
        return cls(
            config=config,
            array=array,
            timing_map=timing_map,
            v=np.full(n, config.v_rest),
            theta=np.zeros(n),
            refractory_until=np.full(n, -np.inf),
            inhibited_until=np.full(n, -np.inf),
            last_pre_ms=np.full(array.rows, -np.inf),
            last_post_ms=np.full(n, -np.inf),
        )

    def begin_image(self) -> None:
        cfg = self.config
        self.v.fill(cfg.v_rest)
        self.refractory_until.fill(-np.inf)
        self.inhibited_until.fill(-np.inf)
        self.last_pre_ms.fill(-np.inf)
        self.last_post_ms.fill(-np.inf)
        self.time_ms = 0.0


def step_network(state: NetworkState, input_spikes: np.ndarray) -> np.ndarray:
    """Advance one time step; returns indices of post spikes (0 or 1).

    The crossbar read drives leak-integrated membranes; the neuron with
    the largest threshold overshoot fires, resets, becomes refractory,
    raises its adaptive threshold, and (with inhibition on) suppresses
    every other neuron for the inhibition period.  With learning on, a
    post spike immediately issues potentiation writes for rows whose
    last input spike falls inside the timing window.
    """
    cfg = state.config
    dt = cfg.dt_ms
    t = state.time_ms
    decay = np.exp(-dt / cfg.tau_m_ms)
    state.v = cfg.v_rest + (state.v - cfg.v_rest) * decay

    rows = np.nonzero(input_spikes)[0]
    if rows.size:
        state.v += cfg.gain * state.array.cells[rows].sum(axis=0)
        state.last_pre_ms[rows] = t

    state.theta *= np.exp(-dt / cfg.tau_theta_ms)

    eligible = (t >= state.refractory_until) & (t >= state.inhibited_until)
    overshoot = state.v - (cfg.base_threshold + state.theta)
    candidates = eligible & (overshoot > 0.0)
    fired = np.empty(0, dtype=np.int64)
    if candidates.any():
        masked = np.where(candidates, overshoot, -np.inf)
        winner = int(masked.argmax())
        fired = np.array([winner])
        state.v[winner] = cfg.v_reset
        state.refractory_until[winner] = t + cfg.refractory_ms
        state.theta[winner] += cfg.theta_increment
        state.last_post_ms[winner] = t
        if cfg.inhibition:
            others = np.arange(cfg.n_excitatory) != winner
            state.inhibited_until[others] = np.maximum(
                state.inhibited_until[others], t + cfg.inhibit_ms
            )
        else:
            # Without winner-take-all every eligible neuron above
            # threshold fires this step.
            extra = np.nonzero(candidates)[0]
            extra = extra[extra != winner]
            if extra.size:
                state.v[extra] = cfg.v_reset
                state.refractory_until[extra] = t + cfg.refractory_ms
                state.theta[extra] += cfg.theta_increment
                state.last_post_ms[extra] = t
                fired = np.concatenate([fired, extra])
        if state.learning:
            for j in fired:
                _potentiate(state, int(j), t)
    state.time_ms = t + dt
    return fired


def _potentiate(state: NetworkState, col: int, t: float) -> None:
    dts = t - state.last_pre_ms
    dts[np.isinf(dts)] = np.nan
    state.array.write(col, dts, state.timing_map, record_events=False)


def _flush_depression(state: NetworkState) -> None:
    """End-of-image negative-branch writes: input spikes that arrived
    after a neuron's last post spike, inside the window."""
    for j in np.nonzero(np.isfinite(state.last_post_ms))[0]:
        dt = state.last_post_ms[j] - state.last_pre_ms
        dts = np.where(np.isfinite(dt) & (dt < 0.0), dt, np.nan)
        if np.isnan(dts).all():
            continue
        state.array.write(int(j), dts, state.timing_map, record_events=False)


@dataclass
class TrainReport:
    batch_samples: list = field(default_factory=list)
    batch_accuracies: list = field(default_factory=list)
    samples_to_convergence: int | None = None
    final_test_accuracy: float | None = None
    total_energy_fJ: float = 0.0
    max_event_energy_fJ: float = 0.0
    write_events: int = 0
    theta: np.ndarray | None = None
    spike_counts: np.ndarray | None = None


def train(
    config: SnnConfig,
    images: np.ndarray,
    labels: np.ndarray,
    array: CrossbarArray,
    timing_map: TimingMap,
    seed: int = 0,
) -> tuple[TrainReport, CrossbarArray]:
    """Online unsupervised training over the image stream.

    Returns the telemetry report and the (mutated) array.  The report's
    accuracy curve is computed every ``batch_size`` images by assigning
    labels from that window's own spike counts and scoring the window.
    """
    images = _flatten(images, array.rows)
    labels = np.asarray(labels)
    if images.shape[0] != labels.shape[0]:
        raise ValueError("images and labels disagree in length")
    report = TrainReport()
    state = NetworkState.fresh(config, array, timing_map)
    n_classes = 10
    counts_all = np.zeros((images.shape[0], config.n_excitatory), dtype=np.int32)

    batch_counts: list[np.ndarray] = []
    batch_labels: list[int] = []
    for idx in range(images.shape[0]):
        raster = encode_poisson(
            images[idx],
            config.sim_duration_ms,
            config.input_rate_max_hz,
            spawn_seed(seed, _ENCODE_TRAIN, idx),
            config.dt_ms,
        )
        state.begin_image()
        counts = np.zeros(config.n_excitatory, dtype=np.int32)
        for t_idx in range(config.n_steps):
            fired = step_network(state, raster[t_idx])
            if fired.size:
                counts[fired] += 1
        _flush_depression(state)
        counts_all[idx] = counts
        batch_counts.append(counts)
        batch_labels.append(int(labels[idx]))
        if len(batch_counts) == config.batch_size:
            acc = _window_accuracy(
                np.array(batch_counts), np.array(batch_labels), n_classes
            )
            report.batch_samples.append(idx + 1)
            report.batch_accuracies.append(acc)
            batch_counts.clear()
            batch_labels.clear()

    report.total_energy_fJ = float(array.energy_fJ.sum())
    report.max_event_energy_fJ = array.max_event_fJ
    report.write_events = int(array.total_events)
    report.theta = state.theta.copy()
    report.spike_counts = counts_all
    return report, array


def _window_accuracy(counts, labels, n_classes) -> float:
    assignment = assign_labels(counts, labels, n_classes)
    return evaluate_counts(counts, labels, assignment, n_classes)


def _flatten(images, n_pixels) -> np.ndarray:
    images = np.asarray(images)
    if images.shape[0] == 0:
        return images.reshape(0, n_pixels)
    flat = images.reshape(images.shape[0], -1)
    if flat.shape[1] != n_pixels:
        raise ValueError(f"images have {flat.shape[1]} pixels, array has {n_pixels} rows")
    return flat


def simulate_counts(
    config: SnnConfig,
    weights: np.ndarray,
    theta: np.ndarray,
    images: np.ndarray,
    seed: int,
    stream_tag: int,
    batch_images: int = 100,
) -> np.ndarray:
    """Spike counts per (image, neuron) with learning off.

    Batches images through one sparse raster-by-weights product; the
    LIF/WTA recurrence then runs vectorized across the batch.  Exact
    with respect to the sequential path because nothing mutates during
    inference.
    """
    images = _flatten(images, weights.shape[0])
    n_imgs = images.shape[0]
    n = config.n_excitatory
    counts = np.zeros((n_imgs, n), dtype=np.int32)
    decay = np.exp(-config.dt_ms / config.tau_m_ms)
    n_steps = config.n_steps

    for start in range(0, n_imgs, batch_images):
        stop = min(start + batch_images, n_imgs)
        b = stop - start
        rasters = np.empty((b, n_steps, weights.shape[0]), dtype=bool)
        for k in range(b):
            rasters[k] = encode_poisson(
                images[start + k],
                config.sim_duration_ms,
                config.input_rate_max_hz,
                spawn_seed(seed, stream_tag, start + k),
                config.dt_ms,
            )
        flat = sparse.csr_matrix(rasters.reshape(b * n_steps, -1))
        drive = (flat @ weights).reshape(b, n_steps, n) * config.gain

        v = np.full((b, n), config.v_rest)
        refrac = np.full((b, n), -np.inf)
        inhib = np.full((b, n), -np.inf)
        thresh = config.base_threshold + theta[None, :]
        rows = np.arange(b)
        for t_idx in range(n_steps):
            t = t_idx * config.dt_ms
            v = config.v_rest + (v - config.v_rest) * decay + drive[:, t_idx]
            eligible = (t >= refrac) & (t >= inhib)
            overshoot = v - thresh
            cand = eligible & (overshoot > 0.0)
            has = cand.any(axis=1)
            if not has.any():
                continue
            masked = np.where(cand, overshoot, -np.inf)
            winners = masked.argmax(axis=1)
            bi = rows[has]
            wj = winners[has]
            counts[start + bi, wj] += 1
            v[bi, wj] = config.v_reset
            refrac[bi, wj] = t + config.refractory_ms
            if config.inhibition:
                prev = inhib[bi]
                inhib[bi] = np.maximum(prev, t + config.inhibit_ms)
                inhib[bi, wj] = prev[np.arange(bi.size), wj]
    return counts


def assign_labels(counts: np.ndarray, labels: np.ndarray, n_classes: int = 10) -> np.ndarray:
    """Assign each neuron the class with the highest mean firing rate.

    Neurons that never spike get NO_LABEL and are excluded from voting.
    """
    counts = np.asarray(counts, dtype=float)
    labels = np.asarray(labels)
    n = counts.shape[1]
    rates = np.zeros((n_classes, n))
    for c in range(n_classes):
        sel = labels == c
        if sel.any():
            rates[c] = counts[sel].mean(axis=0)
    assignment = rates.argmax(axis=0).astype(np.int64)
    assignment[counts.sum(axis=0) == 0] = NO_LABEL
    return assignment


def predict_from_counts(
    counts: np.ndarray,
    assignment: np.ndarray,
    n_classes: int = 10,
) -> np.ndarray:
    """Class predictions by rate voting.

    An image's vote for class c is the mean spike count of neurons
    assigned to c; images that elicit no spikes anywhere predict -1
    (no-vote policy, always scored as incorrect).
    """
    counts = np.asarray(counts, dtype=float)
    votes = np.full((counts.shape[0], n_classes), -np.inf)
    for c in range(n_classes):
        sel = assignment == c
        if sel.any():
            votes[:, c] = counts[:, sel].mean(axis=1)
    predicted = votes.argmax(axis=1)
    predicted[counts.sum(axis=1) == 0] = -1
    return predicted


def evaluate_counts(
    counts: np.ndarray,
    labels: np.ndarray,
    assignment: np.ndarray,
    n_classes: int = 10,
) -> float:
    """Fraction of images whose class vote matches the label."""
    predicted = predict_from_counts(counts, assignment, n_classes)
    return float((predicted == np.asarray(labels)).mean())


def assign_labels_and_eval(
    array: CrossbarArray,
    config: SnnConfig,
    label_images: np.ndarray,
    label_labels: np.ndarray,
    test_images: np.ndarray,
    test_labels: np.ndarray,
    theta: np.ndarray | None = None,
    seed: int = 0,
) -> float:
    """Label neurons on a labeled subset, then score the test set."""
    if len(label_images) == 0:
        raise ValueError("labeled subset must be nonempty")
    theta = np.zeros(config.n_excitatory) if theta is None else theta
    counts_lab = simulate_counts(
        config, array.cells, theta, label_images, seed, _ENCODE_ASSIGN
    )
    assignment = assign_labels(counts_lab, label_labels)
    counts_test = simulate_counts(
        config, array.cells, theta, test_images, seed, _ENCODE_EVAL
    )
    return evaluate_counts(counts_test, test_labels, assignment)


def samples_to_reach(report: TrainReport, target_accuracy: float) -> int | None:
    """First cumulative sample count whose batch accuracy meets target."""
    for s, a in zip(report.batch_samples, report.batch_accuracies):
        if a >= target_accuracy:
            return int(s)
    return None


def finalize_report(report: TrainReport, final_test_accuracy: float) -> TrainReport:
    report.final_test_accuracy = float(final_test_accuracy)
    report.samples_to_convergence = samples_to_reach(
        report, 0.9 * final_test_accuracy
    )
    return report
