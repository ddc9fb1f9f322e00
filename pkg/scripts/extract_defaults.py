"""Regenerate the frozen update-rule card in ferrosyn.presets.

Runs the full virtual characterization of the reference device and
refits the compact update rule, then prints the PLASTICITY_CARD literal
and the read-current span that anchors conductance normalization for
array backends.  Takes several minutes on one core (two 16 x 41 sweep
grids at 32 trials per point).  Rerun after any change to the device
card, the pulse protocol, or the fitting code, and paste the output
into presets.py.
"""

import time

import numpy as np

from ferrosyn import presets
from ferrosyn.characterization import run_protocol
from ferrosyn.plasticity import conductance_span, delta_g, fit_compact_model

SWEEP_SEEDS = {"potentiation": 11, "depression": 12}
TRIALS = 32


def main() -> None:
    device = presets.paper_default_device(0)
    sweeps = {}
    for polarity, seed in SWEEP_SEEDS.items():
        t0 = time.time()
        sweeps[polarity] = run_protocol(
            device, presets.paper_default_scheme(polarity), trials=TRIALS, seed=seed
        )
        print(f"# {polarity} sweep: {time.time() - t0:.0f}s")
    fit = fit_compact_model(sweeps["potentiation"] + sweeps["depression"])
    # The two polarities run disjoint grids, so take the union of their
    # per-sweep normalization spans.
    spans = [conductance_span(recs) for recs in sweeps.values()]
    lo = min(s[0] for s in spans)
    hi = max(s[1] for s in spans)

    def fmt(value) -> str:
        if isinstance(value, tuple):
            return "(" + ", ".join(fmt(v) for v in value) + ")"
        # round first, then flush any -0.0 to +0.0
        return repr(round(float(value), 10) + 0.0)

    print("PLASTICITY_CARD = {")
    for name in (
        "a_plus",
        "a_minus",
        "mu_plus",
        "mu_minus",
        "tau_plus",
        "tau_minus",
        "v0_plus",
        "v0_minus",
        "shift_plus",
        "shift_minus",
        "fit_rmse",
    ):
        print(f'    "{name}": {fmt(getattr(fit, name))},')
    print("}")
    print()
    print("READ_SPAN_UA = {")
    print(f'    "i_min_uA": {fmt(lo)},')
    print(f'    "i_max_uA": {fmt(hi)},')
    print("}")

    # Sanity: the frozen surface must order updates by state everywhere
    # in the programming range.
    g = np.linspace(0.0, 1.0, 100)
    dv = np.linspace(-1.35, 0.65, 100)
    gg, vv = np.meshgrid(g, dv, indexing="ij")
    pot = delta_g(gg, vv, "potentiation", fit)
    dep = np.abs(delta_g(gg, vv, "depression", fit))
    assert np.all(np.diff(pot, axis=0) < 0.0), "potentiation not decreasing in G"
    assert np.all(np.diff(dep, axis=0) > 0.0), "depression not increasing in G"
    print("# monotone on the programming-range grid: ok")


if __name__ == "__main__":
    main()
