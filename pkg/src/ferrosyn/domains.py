"""Stochastic multi-domain polarization kinetics.

The ferroelectric film is modeled as N independent domains, each with a
binary polarization state s_i in {-1, +1} and its own activation field
E_a,i drawn from a truncated normal distribution (spatial inhomogeneity
of the coercive field across grains). Under an applied field E_fe each
domain opposing the field accumulates a dimensionless switching history

    h_i(t) = integral dt' / tau_i(E_fe(t'), E_a,i)

and flips with conditional probability

    p_i(t_s < t+dt | t_s > t) = 1 - exp(h_i(t)^beta - h_i(t+dt)^beta)

which makes the switching-time distribution under a constant field an
exact Weibull law with shape beta and scale tau_i. The characteristic
time follows the Merz form

    tau_i = tau0 * exp((E_a,i / |E_fe|)^alpha)

so weak fields give astronomically slow switching and the read path can
be biased without disturbing the stored state.

History bookkeeping: h_i grows only while the field opposes the domain's
current state. It resets to zero when the domain flips and when the
applied field reverses sign (a reversal abandons the partially formed
nuclei of the previous direction). A zero field freezes h_i in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import truncnorm

from .rng import substream

__all__ = [
    "Kinetics",
    "Domain",
    "FerroelectricLayer",
    "switching_probability",
    "switching_rate",
    "advance_history",
]

# Per-step switching probability above which the discrete-event
# approximation of the conditional-probability update degrades; step()
# subdivides its time interval until every domain is at or below this.
MAX_STEP_PROBABILITY = 0.2


@dataclass(frozen=True)
class Kinetics:
    """Merz-law parameters: tau_i = tau0_s * exp((E_a,i/|E|)^alpha)."""

    tau0_s: float
    alpha: float

    def __post_init__(self):
        if self.tau0_s <= 0:
            raise ValueError(f"tau0_s must be > 0, got {self.tau0_s}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")


@dataclass
class Domain:
    """State snapshot of a single switchable region.

    state is exactly +1 or -1; history is the accumulated integral for
    the currently pending switching direction and is nonnegative.
    """

    state: int
    activation_field: float  # MV/cm
    history: float = 0.0


def switching_rate(field, activation, kinetics: Kinetics):
    """Return 1/tau_i in 1/s for the given field magnitude.

    Computed as exp(-(E_a/|E|)^alpha)/tau0 so that vanishing fields give
    a clean zero rate instead of overflowing exp().
    """
    scalar = np.ndim(field) == 0 and np.ndim(activation) == 0
    f = np.atleast_1d(np.abs(np.asarray(field, dtype=float)))
    a = np.atleast_1d(np.asarray(activation, dtype=float))
    f, a = np.broadcast_arrays(f, a)
    rate = np.zeros(f.shape)
    live = f > 0.0
    rate[live] = np.exp(-np.power(a[live] / f[live], kinetics.alpha)) / kinetics.tau0_s
    return float(rate[0]) if scalar else rate


def advance_history(h, field, activation, dt: float, kinetics: Kinetics):
    """Advance h by dt/tau_i for a piecewise-constant favorable field.

    field is the component driving the pending switching direction; a
    nonpositive (unfavorable or zero) field contributes no increment.
    Additive over subintervals by construction.
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr < 0):
        raise ValueError("history must be nonnegative")
    field = np.asarray(field, dtype=float)
    increment = np.where(field > 0.0,
                         dt * switching_rate(field, activation, kinetics), 0.0)
    out = h_arr + increment
    return out if out.ndim else float(out)


def switching_probability(h_now, h_next, beta: float):
    """Conditional flip probability over one interval: 1 - exp(h_now^beta - h_next^beta).

    Requires h_next >= h_now (history cannot decrease without a flip).
    Mathematically in [0, 1]; clamped only against floating-point
    underflow at the boundaries.
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    h_now_arr = np.asarray(h_now, dtype=float)
    h_next_arr = np.asarray(h_next, dtype=float)
    if np.any(h_now_arr < 0):
        raise ValueError("h_now must be nonnegative")
    if np.any(h_next_arr < h_now_arr):
        raise ValueError("h_next must be >= h_now (history cannot decrease)")
    p = -np.expm1(np.power(h_now_arr, beta) - np.power(h_next_arr, beta))
    p = np.clip(p, 0.0, 1.0) + 0.0  # normalize -0.0 from the zero-interval case
    return p if p.ndim else float(p)


class FerroelectricLayer:
    """N independent switchable domains with seeded Monte Carlo dynamics.

    Parameters
    ----------
    n_domains : number of domains N (>= 1).
    remnant_polarization : P_r in uC/cm^2; each domain contributes
        +-P_r/N to the total.
    beta : Weibull shape of the switching-time distribution.
    thickness_nm : film thickness, used by callers to map voltage to field.
    kinetics : Merz-law (tau0_s, alpha).
    ea_mean_MV_cm, ea_std_MV_cm : activation-field distribution; domains
        sample from a normal truncated at +-3 sigma and at > 0.
    rng_seed : 64-bit seed; layers built with identical parameters and
        seed produce bit-identical trajectories under identical waveforms.
    initial_state : starting polarization sign for every domain.
    disorder_seed : optional separate seed for the quenched disorder
        (activation fields). Defaults to rng_seed. Rerunning one physical
        device with fresh switching stochasticity means keeping
        disorder_seed fixed while varying rng_seed.
    """

    def __init__(
        self,
        n_domains: int,
        remnant_polarization: float,
        beta: float,
        thickness_nm: float,
        kinetics: Kinetics,
        ea_mean_MV_cm: float,
        ea_std_MV_cm: float,
        rng_seed: int,
        initial_state: int = -1,
        disorder_seed: int | None = None,
    ):
        if n_domains < 1:
            raise ValueError(f"n_domains must be >= 1, got {n_domains}")
        if remnant_polarization <= 0:
            raise ValueError("remnant_polarization must be > 0")
        if beta <= 0:
            raise ValueError("beta must be > 0")
        if thickness_nm <= 0:
            raise ValueError("thickness_nm must be > 0")
        if ea_mean_MV_cm <= 0 or ea_std_MV_cm < 0:
            raise ValueError("activation-field distribution must have positive "
                             "mean and nonnegative std")
        if initial_state not in (-1, 1):
            raise ValueError("initial_state must be -1 or +1")

        self.n_domains = int(n_domains)
        self.remnant_polarization = float(remnant_polarization)
        self.beta = float(beta)
        self.thickness_nm = float(thickness_nm)
        self.kinetics = kinetics
        self.ea_mean_MV_cm = float(ea_mean_MV_cm)
        self.ea_std_MV_cm = float(ea_std_MV_cm)
        self.rng_seed = int(rng_seed)
        self.disorder_seed = self.rng_seed if disorder_seed is None else int(disorder_seed)

        # Substream 0 fixes the quenched disorder (activation fields);
        # substream 1 drives the switching dynamics. Keeping them apart
        # means replaying a waveform re-samples the dynamics only.
        self._rng = substream(self.rng_seed, 1)
        disorder = substream(self.disorder_seed, 0)
        if ea_std_MV_cm == 0.0:
            fields = np.full(self.n_domains, self.ea_mean_MV_cm)
        else:
            lo = max(ea_mean_MV_cm - 3.0 * ea_std_MV_cm, 1e-9)
            hi = ea_mean_MV_cm + 3.0 * ea_std_MV_cm
            a = (lo - ea_mean_MV_cm) / ea_std_MV_cm
            b = (hi - ea_mean_MV_cm) / ea_std_MV_cm
            fields = truncnorm.rvs(a, b, loc=ea_mean_MV_cm, scale=ea_std_MV_cm,
                                   size=self.n_domains, random_state=disorder)
        self._activation = np.asarray(fields, dtype=float)
        self._states = np.full(self.n_domains, initial_state, dtype=np.int8)
        self._history = np.zeros(self.n_domains)
        self._last_field_sign = 0

    # -- read-only views -------------------------------------------------

    @property
    def states(self) -> np.ndarray:
        return self._states.copy()

    @property
    def activation_fields(self) -> np.ndarray:
        return self._activation.copy()

    @property
    def histories(self) -> np.ndarray:
        return self._history.copy()

    @property
    def domains(self) -> list[Domain]:
        """Materialize per-domain snapshots (diagnostic view)."""
        return [Domain(int(s), float(a), float(h))
                for s, a, h in zip(self._states, self._activation, self._history)]

    def total_polarization(self) -> float:
        """P_total = (P_r/N) * sum_i s_i, always within [-P_r, +P_r]."""
        return self.remnant_polarization * float(self._states.mean())

    def set_states(self, states) -> None:
        """Force domain states (testing hook); clears all histories."""
        states = np.asarray(states, dtype=np.int8)
        if states.shape != (self.n_domains,) or not np.all(np.abs(states) == 1):
            raise ValueError("states must be length-N with entries +-1")
        self._states = states.copy()
        self._history[:] = 0.0

    # -- dynamics --------------------------------------------------------

    def step(self, field: float, dt: float) -> int:
        """Advance the layer by dt seconds under a constant field (MV/cm).

        Domains opposing the field accumulate history and flip with the
        conditional probability; flipped domains reset history. The
        interval is subdivided internally whenever any per-step flip
        probability would exceed MAX_STEP_PROBABILITY. Returns the number
        of flips.
        """
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        field = float(field)
        if field == 0.0:
            return 0

        sign = 1 if field > 0 else -1
        if self._last_field_sign != 0 and sign != self._last_field_sign:
            # Reversal abandons partially formed nuclei of the old direction.
            self._history[:] = 0.0
        self._last_field_sign = sign

        field_abs = abs(field)
        beta = self.beta
        flips = 0
        remaining = dt
        while remaining > 0.0:
            opposing = np.flatnonzero(self._states != sign)
            if opposing.size == 0:
                break
            h_now = self._history[opposing]
            rate = (np.exp(-np.power(self._activation[opposing] / field_abs,
                                     self.kinetics.alpha))
                    / self.kinetics.tau0_s)
            h_now_b = np.power(h_now, beta)
            sub_dt = remaining
            while True:
                h_next = h_now + sub_dt * rate
                p = -np.expm1(h_now_b - np.power(h_next, beta))
                if p.max() <= MAX_STEP_PROBABILITY or sub_dt <= 1e-18:
                    break
                sub_dt *= 0.5
            u = self._rng.random(opposing.size)
            flipped = u < p
            idx = opposing[flipped]
            self._states[idx] = sign
            self._history[idx] = 0.0
            self._history[opposing[~flipped]] = h_next[~flipped]
            flips += idx.size
            remaining = 0.0 if sub_dt >= remaining else remaining - sub_dt
        return flips

    def run_waveform(self, segments) -> list[tuple[float, float, float, int]]:
        """Apply (field_MV_per_cm, dt_s) segments in order.

        Returns trajectory rows (time_s, field_MV_per_cm,
        P_total_uC_per_cm2, flips), one per segment, sampled at the
        segment end. Zero-field segments advance time without dynamics.
        """
        rows = []
        t = 0.0
        for field, dt in segments:
            if dt < 0:
                raise ValueError("segment duration must be >= 0")
            flips = self.step(field, dt) if (field != 0.0 and dt > 0) else 0
            t += dt
            rows.append((t, float(field), self.total_polarization(), flips))
        return rows

    def clone_reset(self, rng_seed: int | None = None) -> "FerroelectricLayer":
        """Fresh layer with identical parameters and quenched disorder.

        Passing a new rng_seed re-rolls the switching stochasticity of
        the same physical device.
        """
        return FerroelectricLayer(
            self.n_domains, self.remnant_polarization, self.beta,
            self.thickness_nm, self.kinetics, self.ea_mean_MV_cm,
            self.ea_std_MV_cm, self.rng_seed if rng_seed is None else rng_seed,
            disorder_seed=self.disorder_seed,
        )
