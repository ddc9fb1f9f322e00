"""Command-line pipeline: sweep -> calibrate -> fit -> train -> eval.

Every command writes its artifacts plus a manifest.ini recording the
inputs, seed, package versions, wall time, and completion status.  All
artifacts embed the seed and config hash that produced them; reruns
with identical config and seed are byte-identical (the manifest's wall
time being the one deliberately volatile value, kept out of the
artifacts themselves).

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .characterization import (
    CalibrationError,
    calibrate,
    read_sweep_csv,
    run_protocol,
    write_sweep_csv,
)
from .configio import (
    ConfigError,
    SCHEMA_VERSION,
    SNN_SCHEMA,
    artifact_header,
    config_hash,
    dump_config,
    load_config,
    params_to_config,
)
from .mnist import load_mnist
from .network import (
    assign_labels,
    assign_labels_and_eval,
    evaluate_counts,
    finalize_report,
    simulate_counts,
    train,
)
from .plasticity import fit_compact_model
from . import presets

PAPER_ENERGY_REFERENCE_FJ = 29.6


def _write_manifest(out_dir: Path, command: str, inputs: dict, seed: int,
                    cfg_hash: str, outputs: list, status: str, wall_s: float) -> None:
    parser = configparser.ConfigParser()
    parser["manifest"] = {
        "command": command,
        "status": status,
        "seed": str(seed),
        "config_hash": cfg_hash,
        "schema_version": str(SCHEMA_VERSION),
        "ferrosyn_version": __version__,
        "numpy_version": np.__version__,
        "wall_time_s": f"{wall_s:.3f}",
    }
    parser["inputs"] = {k: str(v) for k, v in inputs.items()}
    parser["outputs"] = {f"artifact_{i}": str(p) for i, p in enumerate(outputs)}
    with open(out_dir / "manifest.ini", "w") as fh:
        parser.write(fh)


def _load_device_and_scheme(args):
    if args.device == "paper-defaults":
        device_cfg = dict(presets.DEVICE_CARD)
    else:
        device_cfg = load_config(args.device, ("device",))["device"]
    if args.scheme == "paper-defaults":
        scheme = presets.paper_default_scheme(getattr(args, "polarity", "potentiation"))
        scheme_cfg = {"builtin": "paper-defaults", "polarity": scheme.polarity}
    else:
        scheme_cfg = load_config(args.scheme, ("scheme",))["scheme"]
        scheme = presets.scheme_from_config(scheme_cfg)
    device = presets.device_from_config(device_cfg, rng_seed=args.seed)
    return device, device_cfg, scheme, scheme_cfg


def cmd_sweep(args) -> int:
    t0 = time.monotonic()
    device, device_cfg, scheme, scheme_cfg = _load_device_and_scheme(args)
    cfg_hash = config_hash({"device": device_cfg, "scheme": scheme_cfg,
                            "trials": args.trials})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    records = run_protocol(device, scheme, trials=args.trials, seed=args.seed,
                           n_jobs=args.threads)
    write_sweep_csv(out, records, artifact_header(args.seed, cfg_hash,
                                                  trials=args.trials))
    _write_manifest(out.parent, "sweep",
                    {"device": args.device, "scheme": args.scheme,
                     "trials": args.trials},
                    args.seed, cfg_hash, [out], "complete", time.monotonic() - t0)
    print(f"wrote {len(records)} records to {out}")
    return 0


def cmd_calibrate(args) -> int:
    t0 = time.monotonic()
    device, device_cfg, scheme, scheme_cfg = _load_device_and_scheme(args)
    records = read_sweep_csv(args.target)
    free = {}
    for pair in args.free.split(","):
        name, _, value = pair.partition("=")
        name = name.strip()
        if not value:
            raise ConfigError(f"--free entries must be name=initial, got {pair!r}")
        free[name] = float(value)
    cfg_hash = config_hash({"device": device_cfg, "scheme": scheme_cfg,
                            "free": free, "trials": args.trials})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    status = "complete"
    try:
        result = calibrate(records, free, device, scheme,
                           trials=args.trials, seed=args.seed,
                           max_evaluations=args.max_evaluations)
    except CalibrationError as exc:
        result = exc.result
        status = "partial"
    fitted_cfg = dict(device_cfg)
    fitted_cfg.update({k: result.params[k] for k in result.params})
    dump_config({"device": fitted_cfg}, out)
    residual_path = out.with_suffix(".residuals.csv")
    with open(residual_path, "w", newline="") as fh:
        for line in artifact_header(args.seed, cfg_hash, rmse=f"{result.rmse:.6g}"):
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["set_index", "program_index", "residual"])
        for i, j in np.ndindex(result.residuals.shape):
            writer.writerow([i, j, f"{result.residuals[i, j]:.9g}"])
    report_path = out.with_suffix(".report.txt")
    with open(report_path, "w") as fh:
        fh.write(f"# seed={args.seed} config_hash={cfg_hash}\n")
        fh.write(f"status: {status}\n")
        fh.write(f"rmse: {result.rmse:.6g}\n")
        fh.write(f"evaluations: {result.n_evaluations}\n")
        for name in sorted(result.params):
            fh.write(f"{name}: {result.params[name]:.8g}\n")
    _write_manifest(out.parent, "calibrate",
                    {"target": args.target, "free": args.free},
                    args.seed, cfg_hash, [out, residual_path, report_path],
                    status, time.monotonic() - t0)
    print(f"calibration {status}: rmse={result.rmse:.4g} -> {out}")
    return 0 if status == "complete" else 1


def cmd_fit(args) -> int:
    t0 = time.monotonic()
    records = read_sweep_csv(args.sweeps)
    cfg_hash = config_hash({"sweeps": str(args.sweeps)})
    params = fit_compact_model(records)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_config({"plasticity": params_to_config(params)}, out)
    _write_manifest(out.parent, "fit", {"sweeps": args.sweeps},
                    args.seed, cfg_hash, [out], "complete", time.monotonic() - t0)
    print(f"fit rmse={params.fit_rmse:.4g} v0_plus={params.v0_plus:.3g} -> {out}")
    return 0


def _load_train_setup(args):
    if args.config in ("paper-desk", "paper-full"):
        snn_section = {k: v.default for k, v in SNN_SCHEMA.items()}
        snn_section["n_excitatory"] = 100
        if args.config == "paper-full":
            snn_section.update({"n_excitatory": 225, "n_train": 60000,
                                "n_test": 10000, "n_label": 10000})
        sections = {"snn": snn_section}
    else:
        sections = load_config(args.config, ("snn",),
                               ("plasticity", "timing", "device"))
    snn_section = sections["snn"]
    config = presets.snn_from_config(snn_section)
    params = (presets.params_from_config(sections["plasticity"])
              if "plasticity" in sections else presets.paper_default_plasticity())
    timing = (presets.timing_from_config(sections["timing"])
              if "timing" in sections else presets.paper_default_timing())
    device_cfg = sections.get("device", presets.DEVICE_CARD)
    return sections, snn_section, config, params, timing, device_cfg


def cmd_train(args) -> int:
    t0 = time.monotonic()
    sections, snn_section, config, params, timing, device_cfg = _load_train_setup(args)
    cfg_hash = config_hash(sections)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_images, train_labels = load_mnist("train", args.mnist)
    test_images, test_labels = load_mnist("test", args.mnist)
    n_train = min(snn_section["n_train"], len(train_images))
    n_test = min(snn_section["n_test"], len(test_images))
    n_label = min(snn_section["n_label"], len(train_images))

    device = presets.device_from_config(device_cfg, rng_seed=args.seed)
    backend = presets.build_backend(
        snn_section, params,
        device_template=device,
        i_min_uA=snn_section["i_min_uA"],
        i_max_uA=snn_section["i_max_uA"],
        seed=args.seed,
    )
    array = presets.build_array(
        train_images.shape[1] * train_images.shape[2], config, backend, args.seed
    )

    report, array = train(config, train_images[:n_train], train_labels[:n_train],
                          array, timing, seed=args.seed)
    accuracy = assign_labels_and_eval(
        array, config, train_images[:n_label], train_labels[:n_label],
        test_images[:n_test], test_labels[:n_test],
        theta=report.theta, seed=args.seed,
    )
    finalize_report(report, accuracy)

    header = artifact_header(args.seed, cfg_hash)
    curve_path = out_dir / "accuracy_curve.csv"
    with open(curve_path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["samples", "batch_accuracy"])
        for s, a in zip(report.batch_samples, report.batch_accuracies):
            writer.writerow([s, f"{a:.6g}"])
    weights_path = out_dir / "conductances.csv"
    array.save_conductances_csv(weights_path, header)
    energy_path = out_dir / "energy_ledger.csv"
    array.save_energy_csv(energy_path, header)
    theta_path = out_dir / "theta.csv"
    with open(theta_path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["neuron", "theta"])
        for j, th in enumerate(report.theta):
            writer.writerow([j, f"{th:.9g}"])
    report_path = out_dir / "report.txt"
    max_e = report.max_event_energy_fJ
    with open(report_path, "w") as fh:
        fh.write(f"# seed={args.seed} config_hash={cfg_hash}\n")
        fh.write(f"rule: {config.learning_rule}\n")
        fh.write(f"neurons: {config.n_excitatory}\n")
        fh.write(f"train_images: {n_train}\n")
        fh.write(f"test_images: {n_test}\n")
        fh.write(f"test_accuracy: {accuracy:.6f}\n")
        fh.write(f"samples_to_90pct_of_final: {report.samples_to_convergence}\n")
        fh.write(f"write_events: {report.write_events}\n")
        fh.write(f"total_write_energy_fJ: {report.total_energy_fJ:.6g}\n")
        fh.write(f"max_single_event_energy_fJ: {max_e:.6g}\n")
        fh.write(
            f"reference_max_energy_fJ: {PAPER_ENERGY_REFERENCE_FJ} "
            f"(ratio {max_e / PAPER_ENERGY_REFERENCE_FJ:.3g})\n"
        )
    _write_manifest(out_dir, "train",
                    {"config": args.config, "mnist": args.mnist or "<default>"},
                    args.seed, cfg_hash,
                    [curve_path, weights_path, energy_path, theta_path, report_path],
                    "complete", time.monotonic() - t0)
    print(f"test accuracy {accuracy:.4f}; artifacts in {out_dir}")
    return 0


def _read_matrix_csv(path) -> tuple:
    with open(path) as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    return np.array([[float(x) for x in row] for row in reader]), header


def cmd_eval(args) -> int:
    t0 = time.monotonic()
    sections, snn_section, config, params, timing, device_cfg = _load_train_setup(args)
    cfg_hash = config_hash(sections)
    weights, _ = _read_matrix_csv(args.weights)
    if weights.shape[1] != config.n_excitatory:
        raise ConfigError(
            f"weight matrix has {weights.shape[1]} columns, config expects "
            f"{config.n_excitatory}"
        )
    theta = np.zeros(config.n_excitatory)
    if args.theta:
        th, _ = _read_matrix_csv(args.theta)
        theta = th[:, 1]
    train_images, train_labels = load_mnist("train", args.mnist)
    test_images, test_labels = load_mnist("test", args.mnist)
    n_label = min(snn_section["n_label"], len(train_images))
    n_test = min(snn_section["n_test"], len(test_images))
    counts_lab = simulate_counts(config, weights, theta,
                                 train_images[:n_label], args.seed, 1)
    assignment = assign_labels(counts_lab, train_labels[:n_label])
    counts_test = simulate_counts(config, weights, theta,
                                  test_images[:n_test], args.seed, 2)
    accuracy = evaluate_counts(counts_test, test_labels[:n_test], assignment)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write(f"# seed={args.seed} config_hash={cfg_hash}\n")
        fh.write(f"test_accuracy: {accuracy:.6f}\n")
        fh.write(f"test_images: {n_test}\n")
    _write_manifest(out.parent, "eval",
                    {"weights": args.weights, "config": args.config},
                    args.seed, cfg_hash, [out], "complete", time.monotonic() - t0)
    print(f"test accuracy {accuracy:.4f} -> {out}")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    manifest_path = run_dir / "manifest.ini"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.ini in {run_dir}")
    parser = configparser.ConfigParser()
    parser.read(manifest_path)
    print(f"command: {parser['manifest']['command']}")
    print(f"status: {parser['manifest']['status']}")
    print(f"seed: {parser['manifest']['seed']}")
    print(f"config_hash: {parser['manifest']['config_hash']}")
    print(f"wall_time_s: {parser['manifest']['wall_time_s']}")
    report_path = run_dir / "report.txt"
    if report_path.exists():
        print("-- report --")
        print(report_path.read_text().rstrip())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ferrosyn",
        description="FeFET synapse simulation pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run the reset/set/program protocol grid")
    p.add_argument("--scheme", default="paper-defaults")
    p.add_argument("--device", default="paper-defaults")
    p.add_argument("--polarity", default="potentiation",
                   choices=["potentiation", "depression"])
    p.add_argument("--trials", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="fit kinetic parameters to a target sweep")
    p.add_argument("--target", required=True)
    p.add_argument("--device", default="paper-defaults")
    p.add_argument("--scheme", default="paper-defaults")
    p.add_argument("--free", required=True,
                   help="comma list of name=initial_guess pairs")
    p.add_argument("--trials", type=int, default=8)
    p.add_argument("--max-evaluations", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit", help="extract update-rule parameters from sweeps")
    p.add_argument("--sweeps", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("train", help="train the spiking network on MNIST")
    p.add_argument("--config", required=True,
                   help="config file, or 'paper-desk' / 'paper-full'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mnist", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate saved conductances on the test set")
    p.add_argument("--weights", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--theta", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mnist", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="summarize a run directory")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
