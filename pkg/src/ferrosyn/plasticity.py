"""Multiplicative conductance-update compact model and its extraction.

The update rule is a double-exponential (Gompertz) saturation curve in
the programming voltage, scaled by a power of the remaining headroom:

    potentiation:  dG = (1 - G)^mu_plus  * A_plus  * exp(-exp(-x))
    depression:    dG =      G^mu_minus  * A_minus * exp(-exp(-x))

with x = (dv + shift(G)) / tau(G), tau and shift low-order polynomials
in the normalized conductance, and dv the programming voltage measured
from the saturation voltage v0 of that branch.

``shift`` separates the stored saturation voltage (the knee where the
measured response flattens, which also anchors the timing map) from the
Gompertz location parameter.  A raw Gompertz pinned at the knee sits at
37% of its plateau right where the data is already flat, so it cannot
track any device that truly saturates there; the fitted shift moves the
location below the knee while keeping v0 itself at the physically
meaningful flattening voltage.  The shift varies with state for the
same reason tau does: partially switched devices see a slightly
different onset because the already-reversed polarization changes the
internal field split.  shift = 0 recovers the plain two-parameter form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .characterization import SweepRecord, records_to_grids
from .validation import check_scalar, check_unit_interval

# Fraction of the peak slope below which the response counts as flat.
KNEE_SLOPE_FRACTION = 0.02
# States whose total response is under this fraction of the global
# maximum carry no shape information (already saturated by the set
# pulse) and are excluded from knee statistics.
DEGENERATE_STATE_FRACTION = 0.05

_SIGNS = ("potentiation", "depression")


def _polyval(coeffs: tuple, g):
    return np.polynomial.polynomial.polyval(g, coeffs)


@dataclass(frozen=True)
class PlasticityParams:
    """Fitted coefficients for both polarities of the update rule.

    tau_plus / tau_minus and shift_plus / shift_minus hold polynomial
    coefficients (constant term first) of the voltage scale and of the
    knee-to-location gap as functions of G.  Scalars are accepted and
    treated as constant polynomials.  v0 values are the saturation
    voltages (positive magnitudes).
    """

    a_plus: float
    a_minus: float
    mu_plus: float
    mu_minus: float
    tau_plus: tuple
    tau_minus: tuple
    v0_plus: float
    v0_minus: float
    shift_plus: tuple = (0.0,)
    shift_minus: tuple = (0.0,)
    fit_rmse: float = 0.0
    degenerate: bool = False

    def __post_init__(self) -> None:
        for name in ("tau_plus", "tau_minus", "shift_plus", "shift_minus"):
            raw = getattr(self, name)
            coeffs = (float(raw),) if np.isscalar(raw) else tuple(float(c) for c in raw)
            object.__setattr__(self, name, coeffs)
        if not self.degenerate:
            if self.a_plus <= 0:
                raise ValueError("a_plus must be > 0")
            if self.a_minus >= 0:
                raise ValueError("a_minus must be < 0")
        if self.mu_plus < 0 or self.mu_minus < 0:
            raise ValueError("mu exponents must be >= 0")
        g = np.linspace(0.0, 1.0, 101)
        for name, coeffs in (("tau_plus", self.tau_plus), ("tau_minus", self.tau_minus)):
            if np.min(_polyval(coeffs, g)) <= 0:
                raise ValueError(f"{name}(G) must be positive on [0, 1]")

    def tau_of(self, g, sign: str):
        coeffs = self.tau_plus if sign == "potentiation" else self.tau_minus
        return _polyval(coeffs, g)

    def shift_of(self, g, sign: str):
        coeffs = self.shift_plus if sign == "potentiation" else self.shift_minus
        return _polyval(coeffs, g)


def _gompertz(x):
    # exp(-exp(-x)), guarded against overflow far below the transition
    return np.exp(-np.exp(np.clip(-x, None, 700.0)))


def delta_g(g, dv, sign: str, params: PlasticityParams):
    """Conductance update for one pulse; pure and vectorized.

    g is the normalized conductance before the pulse, dv the programming
    voltage minus the branch's saturation voltage v0.  Returns a scalar
    for scalar inputs, positive for potentiation and negative for
    depression.  The caller clamps the applied result to [0, 1].
    """
    if sign not in _SIGNS:
        raise ValueError(f"sign must be one of {_SIGNS}")
    g_arr = np.asarray(g, dtype=float)
    if np.any(g_arr < 0.0) or np.any(g_arr > 1.0):
        raise ValueError("g must lie in [0, 1]")
    dv_arr = np.asarray(dv, dtype=float)
    if sign == "potentiation":
        out = _delta_g_pot(g_arr, dv_arr, params)
    else:
        out = _delta_g_dep(g_arr, dv_arr, params)
    if np.isscalar(g) and np.isscalar(dv):
        return float(out)
    return out


def _delta_g_pot(g, dv, params: PlasticityParams):
    tau = _polyval(params.tau_plus, g)
    x = (dv + _polyval(params.shift_plus, g)) / tau
    return (1.0 - g) ** params.mu_plus * params.a_plus * _gompertz(x)


def _delta_g_dep(g, dv, params: PlasticityParams):
    tau = _polyval(params.tau_minus, g)
    x = (dv + _polyval(params.shift_minus, g)) / tau
    return g**params.mu_minus * params.a_minus * _gompertz(x)


@dataclass(frozen=True)
class TimingMap:
    """Linear spike-timing to programming-voltage correspondence.

    The write amplitude is maximal (v_max, the saturation voltage) at
    coincident spikes and falls off linearly with |dt|; beyond the
    window no pulse is issued.
    """

    v_max: float
    slope_V_per_ms: float
    window_ms: float

    def __post_init__(self) -> None:
        check_scalar(self.slope_V_per_ms, "slope_V_per_ms", minimum=0.0, strict_min=True)
        check_scalar(self.window_ms, "window_ms", minimum=0.0, strict_min=True)
        if self.v_max - self.slope_V_per_ms * self.window_ms < 0.0:
            raise ValueError("voltage at the window edge must stay >= 0")


def timing_to_voltage(dt_ms: float, tmap: TimingMap):
    """Map a post-minus-pre spike delay to (V_P, sign).

    dt > 0 (pre before post) potentiates, dt < 0 depresses; dt = 0 is
    assigned to the potentiation branch.  |dt| beyond the window returns
    None (no write).  Depression pulses carry negative amplitude.
    """
    if abs(dt_ms) > tmap.window_ms:
        return None
    v = tmap.v_max - tmap.slope_V_per_ms * abs(dt_ms)
    if dt_ms >= 0.0:
        return v, "potentiation"
    return -v, "depression"


def saturation_knee(v: np.ndarray, y: np.ndarray) -> float | None:
    """Smallest voltage past the peak slope where the response flattens.

    Flat means the local slope of y(v) drops below KNEE_SLOPE_FRACTION
    of its peak.  Returns None when the curve is still rising at the
    last point or carries no positive slope at all.
    """
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    if v.size < 3:
        raise ValueError("need at least 3 points to locate a knee")
    dy = np.gradient(y, v)
    peak = dy.max()
    if peak <= 0:
        return None
    start = int(dy.argmax())
    for i in range(start, v.size):
        if dy[i] < KNEE_SLOPE_FRACTION * peak:
            return float(v[i])
    return None


def conductance_span(records: list[SweepRecord]) -> tuple:
    """(lo, hi) current bounds defining the G in [0, 1] normalization.

    Bounds cover both read columns (after set and after program), so
    either polarity spans its full swing: a potentiation sweep tops out
    at the strongest programmed state while a depression sweep bottoms
    out there.  Exposed so predictions on a second sweep can reuse the
    calibration sweep's scale.
    """
    grids = records_to_grids(records)
    lo = float(min(grids.i_set.min(), grids.i_read.min()))
    hi = float(max(grids.i_set.max(), grids.i_read.max()))
    if hi <= lo:
        raise ValueError("sweep span is empty; cannot normalize conductance")
    return lo, hi


def normalize_sweeps(records: list[SweepRecord]):
    """Turn raw sweep records into the (G0, dG) picture used by the fit.

    Returns (v_sets, v_programs, g0, dg) with g0 the per-state starting
    conductance grid and dg the normalized change, both on the
    conductance_span scale of these records.
    """
    grids = records_to_grids(records)
    lo, hi = conductance_span(records)
    span = hi - lo
    g0 = (grids.i_set - lo) / span
    dg = (grids.i_read - grids.i_set) / span
    return grids.v_sets, grids.v_programs, g0, dg


def extract_saturation_voltage(records: list[SweepRecord]) -> float:
    """Median knee voltage magnitude across non-degenerate set states.

    Works on |v_program| so depression sweeps (negative programming
    voltages, response growing toward more negative values) scan in the
    same direction as potentiation.
    """
    _, v_programs, _, dg = normalize_sweeps(records)
    order = np.argsort(np.abs(v_programs))
    v_mag = np.abs(v_programs)[order]
    dg = dg[:, order]
    global_max = np.abs(dg).max()
    if global_max <= 0:
        raise ValueError("all responses are zero; no saturation voltage")
    knees = []
    for row in np.abs(dg):
        if row.max() < DEGENERATE_STATE_FRACTION * global_max:
            continue
        k = saturation_knee(v_mag, row)
        if k is not None:
            knees.append(k)
    if not knees:
        raise ValueError("no set state shows a saturation knee in the sweep range")
    return float(np.median(knees))


@dataclass
class _CloudFit:
    a: float
    mu: float
    tau: tuple
    shift: tuple
    rmse: float
    n_points: int


def _mirror_poly(coeffs: tuple) -> tuple:
    """Coefficients of p(1 - g) given those of p(x), constant term first."""
    comp = np.polynomial.polynomial.Polynomial((1.0, -1.0))
    out = np.polynomial.polynomial.Polynomial(coeffs)(comp)
    return tuple(float(c) for c in out.coef)


def fit_delta_g_cloud(
    g: np.ndarray,
    dv: np.ndarray,
    dg: np.ndarray,
    initial_guess: dict | None = None,
    minimax_passes: int = 12,
) -> _CloudFit:
    """Least-squares fit of the potentiation-form surface to a point cloud.

    Fits amplitude, headroom exponent, voltage scale, and state
    dependence of both scale and shift to |dG| data; dv arrives already
    referenced to the saturation voltage.  The state dependence is
    restricted to the monotone-safe family: the shift is a quadratic
    nonincreasing in G (parameterized by its value at G = 1 and the
    negated slopes at both ends, each bounded >= 0), and the scale
    falls linearly from G = 0 with slope rho * e * mu * tau(1), rho in
    [0, 0.9).  Every surface in that family is strictly decreasing in G
    at every dv: a nonincreasing shift and scale can only push the
    transition later and sharper with state, and the rho cap bounds the
    sharpening term by rho * mu (the worst case of u * exp(-u) is 1/e),
    so the headroom factor always wins.  That matches the switching
    physics, too: domains surviving the set pulse skew hard and narrow.
    An unrestricted shift happily tilts the other way below the knee,
    where the double-exponential tail magnifies a slight upward slope
    into updates that grow with G.
    """
    g = np.asarray(g, dtype=float).ravel()
    dv = np.asarray(dv, dtype=float).ravel()
    dg = np.abs(np.asarray(dg, dtype=float).ravel())
    if not (g.size == dv.size == dg.size):
        raise ValueError("g, dv, dg must have equal length")
    if g.size < 6:
        raise ValueError("too few points to constrain the fit")

    guess = {"a": 1.0, "mu": 1.0, "tau": 0.3, "shift": (0.5, -0.05, 0.0)}
    if initial_guess:
        guess.update(initial_guess)
    mu0 = float(guess["mu"])
    tau_c = tuple(float(c) for c in np.atleast_1d(guess["tau"])) + (0.0,)
    tau_end = max(tau_c[0] + tau_c[1], 1e-3)
    rho0 = -tau_c[1] / (np.e * max(mu0, 0.05) * tau_end)
    s_coeffs = tuple(float(c) for c in np.atleast_1d(guess["shift"])) + (0.0, 0.0)
    s0, s1, s2 = s_coeffs[:3]
    # (s_end, d0, d1) = (shift at G=1, -shift'(0), -shift'(1)); an
    # in-family guess maps back exactly.
    x0 = np.array(
        [
            guess["a"],
            mu0,
            tau_end,
            rho0,
            max(s0 + s1 + s2, 0.0),
            max(-s1, 0.0),
            max(-(s1 + 2.0 * s2), 0.0),
        ]
    )
    lower = np.array([1e-12, 0.05, 1e-3, 0.0, 0.0, 0.0, 0.0])
    upper = np.array([10.0, 5.0, 5.0, 0.9, 3.0, 3.0, 3.0])
    x0 = np.clip(x0, lower, upper)

    def unpack(x):
        a, mu, tau_end, rho, s_end, d0, d1 = x
        slope = rho * np.e * mu * tau_end
        tau_coeffs = (tau_end + slope, -slope)
        shift_coeffs = (s_end + 0.5 * (d0 + d1), -d0, -0.5 * (d1 - d0))
        return a, mu, tau_coeffs, shift_coeffs

    def model(x):
        a, mu, tau_coeffs, shift_coeffs = unpack(x)
        tau = _polyval(tau_coeffs, g)
        return (1.0 - g) ** mu * a * _gompertz((dv + _polyval(shift_coeffs, g)) / tau)

    fit = least_squares(
        lambda x: model(x) - dg, x0, bounds=(lower, upper), xtol=1e-14, ftol=1e-14
    )
    # One warm restart; trf occasionally stalls short of the basin floor
    # and re-entry costs a single evaluation when already converged.
    fit = least_squares(
        lambda x: model(x) - dg, fit.x, bounds=(lower, upper), xtol=1e-14, ftol=1e-14
    )
    # Damped Lawson reweighting walks the least-squares solution toward
    # the minimax one.  Plain L2 buys tiny gains across the saturated
    # plateau at the price of concentrated error where a single state
    # deviates most from the shared shape, and downstream users feel the
    # worst-case error, not the average.  Keeps the best iterate: the
    # iteration is not monotone.
    best_x = fit.x
    best_mx = float(np.abs(model(best_x) - dg).max())
    w = np.ones_like(dg)
    for _ in range(minimax_passes):
        r = model(fit.x) - dg
        mx = float(np.abs(r).max())
        if mx < 1e-8 * max(float(dg.max()), 1e-30):
            break
        w *= np.abs(r) + 0.05 * mx
        w /= w.mean()
        sw = np.sqrt(w)
        fit = least_squares(
            lambda x: sw * (model(x) - dg),
            fit.x,
            bounds=(lower, upper),
            xtol=1e-14,
            ftol=1e-14,
        )
        mx = float(np.abs(model(fit.x) - dg).max())
        if mx < best_mx:
            best_x, best_mx = fit.x, mx
    rmse = float(np.sqrt(((model(best_x) - dg) ** 2).mean()))
    a, mu, tau_coeffs, shift_coeffs = unpack(best_x)
    return _CloudFit(
        a=float(a),
        mu=float(mu),
        tau=tuple(float(c) for c in tau_coeffs),
        shift=tuple(float(c) for c in shift_coeffs),
        rmse=rmse,
        n_points=int(g.size),
    )


def fit_compact_model(
    records: list[SweepRecord],
    initial_guess: dict | None = None,
) -> PlasticityParams:
    """Extract update-rule parameters from characterization sweeps.

    The saturation voltage of each polarity present in the records is
    fixed from the knee first; the remaining coefficients are then fit
    to the full (G, dv, dG) cloud.  The shift term lets the surface
    flatten past the knee, so above-knee points constrain the plateau
    instead of biasing the transition shape.  A polarity absent from
    the records is mirrored from the other one.
    """
    by_sign = {s: [r for r in records if r.polarity == s] for s in _SIGNS}
    if not by_sign["potentiation"] and not by_sign["depression"]:
        raise ValueError("no records with a recognized polarity")

    fits: dict[str, tuple[_CloudFit, float]] = {}
    for sign, recs in by_sign.items():
        if not recs:
            continue
        if len({r.v_set for r in recs}) < 3:
            raise ValueError(f"{sign}: need >= 3 set states to fit")
        _, v_programs, g0, dg = normalize_sweeps(recs)
        if np.abs(dg).max() <= 1e-12:
            # Null signal: no updates anywhere, flagged rather than fit.
            return PlasticityParams(
                a_plus=0.0,
                a_minus=0.0,
                mu_plus=1.0,
                mu_minus=1.0,
                tau_plus=(0.3,),
                tau_minus=(0.3,),
                v0_plus=float(np.max(np.abs(v_programs))),
                v0_minus=float(np.max(np.abs(v_programs))),
                degenerate=True,
            )
        v0 = extract_saturation_voltage(recs)
        v_mag = np.abs(v_programs)
        gg = np.broadcast_to(g0[:, None] if g0.ndim == 1 else g0, dg.shape)
        vv = np.broadcast_to(v_mag[None, :], dg.shape)
        # Depression sweeps start from the high state; headroom is G
        # itself, handled by fitting on (1 - G) in mirrored coordinates.
        g_cloud = gg if sign == "potentiation" else 1.0 - gg
        fit = fit_delta_g_cloud(
            g_cloud.ravel(),
            (vv - abs(v0)).ravel(),
            dg.ravel(),
            initial_guess=initial_guess,
        )
        fits[sign] = (fit, abs(v0))

    if "potentiation" not in fits:
        fit, v0 = fits["depression"]
        fits["potentiation"] = (fit, v0)
    if "depression" not in fits:
        fit, v0 = fits["potentiation"]
        fits["depression"] = (fit, v0)

    pot, v0p = fits["potentiation"]
    dep, v0m = fits["depression"]
    if by_sign["potentiation"] and by_sign["depression"]:
        # Pooled rmse over both clouds, not just the one fit last.
        sq = pot.rmse**2 * pot.n_points + dep.rmse**2 * dep.n_points
        rmse = float(np.sqrt(sq / (pot.n_points + dep.n_points)))
    else:
        rmse = pot.rmse if by_sign["potentiation"] else dep.rmse
    # The depression-side cloud lives in headroom coordinates (1 - G),
    # whether it was fit from depression records or mirrored over from
    # potentiation, so its polynomials always need the change of variable.
    dep_tau = _mirror_poly(dep.tau)
    dep_shift = _mirror_poly(dep.shift)
    return PlasticityParams(
        a_plus=pot.a,
        a_minus=-dep.a,
        mu_plus=pot.mu,
        mu_minus=dep.mu,
        tau_plus=pot.tau,
        tau_minus=dep_tau,
        v0_plus=v0p,
        v0_minus=v0m,
        shift_plus=pot.shift,
        shift_minus=dep_shift,
        fit_rmse=rmse,
    )
