"""Command-line entry point for reproducible experiments.

Subcommands::

    lfbp gen-data      --config C --out DIR [--force]
    lfbp train         --config C --out DIR [--force]
    lfbp reconstruct   --config C --params BASE --stack BASE --out BASE [--force]
    lfbp eval          --config C --out DIR [--params BASE] [--force]
    lfbp oracle {spectral|stability|decomposition|solve} [options] --out CSV
    lfbp export-filter --params BASE --out CSV [--gauge --config C] [--force]

Every command is deterministic given its config, refuses to overwrite existing
outputs unless ``--force`` is given, and exits with 0 on success, 2 on
validation errors, 3 on I/O errors, and 4 on numerical failures. ``--threads``
caps the numba thread pool; results do not depend on it (the projection
kernels are single-threaded by design).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import NumericalError
from .filters import export_filter_csv, reconstruct
from .metrics import classical_reconstruct, evaluate, nag_least_squares
from .oracle import (MomentModel, error_decomposition, solve_optimal_B_model,
                     spectral_factors, stability_probe)
from .phantom import make_dataset
from .tensorio import (load_dataset, load_filter_params, read_tensor,
                       save_dataset, save_filter_params, write_tensor)
from .training import train


def _refuse_existing(paths, force: bool):
    if force:
        return
    for p in paths:
        if Path(p).exists():
            raise FileExistsError(
                f"output {p} exists; there is no resume support, rerun with --force to overwrite")


def _load(config_path) -> ExperimentConfig:
    try:
        return load_config(config_path)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as e:
        raise ValueError(f"config is not valid JSON: {e}") from e


def cmd_gen_data(args) -> int:
    cfg = _load(args.config)
    outdir = Path(args.out) / "data"
    _refuse_existing([outdir / "manifest.json"], args.force)
    ds = make_dataset(cfg.geometry, cfg.phantom, cfg.k, cfg.snr_db, cfg.seed)
    save_dataset(outdir, ds)
    print(f"wrote {len(ds)} pairs to {outdir}")
    return 0


def cmd_train(args) -> int:
    cfg = _load(args.config)
    out = Path(args.out)
    datadir = out / "data"
    if not (datadir / "manifest.json").exists():
        raise FileNotFoundError(f"no dataset at {datadir}; run gen-data first")
    _refuse_existing([out / "learned_filter.json", out / "loss.csv"], args.force)
    ds = load_dataset(datadir, cfg.geometry)
    report = train(cfg.train, cfg.geometry, ds)
    save_filter_params(out / "learned", report.params)
    with open(out / "loss.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "data_loss", "penalty"])
        for i, (d, p) in enumerate(zip(report.data_loss, report.penalty)):
            wr.writerow([i, f"{d:.12g}", f"{p:.12g}"])
    print(f"trained {cfg.train.n_iters} iterations in {report.wall_clock:.1f}s; "
          f"final loss {report.data_loss[-1] + report.penalty[-1]:.6g}")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _load(args.config)
    params = load_filter_params(args.params)
    stack, _ = read_tensor(args.stack)
    _refuse_existing([str(args.out) + ".json"], args.force)
    vol = reconstruct(params, cfg.geometry, stack)
    write_tensor(args.out, vol, "volume")
    print(f"wrote volume {vol.shape} to {args.out}.bin")
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args.config)
    out = Path(args.out)
    datadir = out / "data"
    if not (datadir / "manifest.json").exists():
        raise FileNotFoundError(f"no dataset at {datadir}; run gen-data first")
    params_base = args.params if args.params else out / "learned"
    params = load_filter_params(params_base)
    targets = {name: out / f"metrics_{name}.csv" for name in ("learned", "classical", "nag")}
    _refuse_existing(targets.values(), args.force)
    ds = load_dataset(datadir, cfg.geometry)
    methods = {
        "learned": lambda g, y: reconstruct(params, g, y),
        "classical": lambda g, y: classical_reconstruct(g, y, cfg.eval.filter_kind),
        "nag": lambda g, y: nag_least_squares(g, y, cfg.eval.nag_iters),
    }
    for name, method in methods.items():
        report = evaluate(method, cfg.geometry, ds)
        report.to_csv(targets[name])
        print(f"{name}: MSE {report.mse_mean:.6g} +/- {report.mse_std:.3g}  "
              f"SSIM {report.ssim_mean:.4f} +/- {report.ssim_std:.3g}")
    return 0


def _random_operator(rows: int, cols: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((rows, cols)) / np.sqrt(cols)


def cmd_oracle(args) -> int:
    _refuse_existing([args.out], args.force)
    a = _random_operator(args.rows, args.cols, args.seed)
    if args.study == "spectral":
        sf = spectral_factors(a, args.sigma, args.lam)
        with open(args.out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["i", "singular_value", "gain", "variance_factor", "bias_factor"])
            for i in range(sf.singular_values.size):
                wr.writerow([i, f"{sf.singular_values[i]:.12g}", f"{sf.gain[i]:.12g}",
                             f"{sf.variance_factor[i]:.12g}", f"{sf.bias_factor[i]:.12g}"])
            wr.writerow(["variance", f"{sf.variance:.12g}", "", "", ""])
            wr.writerow(["bias", f"{sf.bias:.12g}", "", "", ""])
    elif args.study == "stability":
        pi = MomentModel(np.eye(args.cols), args.sigma**2)
        rng = np.random.default_rng(args.seed + 1)
        e = rng.standard_normal((args.cols, args.cols))
        pert = args.perturbation * (e @ e.T) / args.cols
        pi_prime = MomentModel(np.eye(args.cols) + pert, (1.5 * args.sigma) ** 2)
        tab = stability_probe(a, pi, pi_prime, args.lambdas)
        with open(args.out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["lambda", "gap", "w2"])
            for lam, gap in zip(tab.lambdas, tab.gaps):
                wr.writerow([f"{lam:.12g}", f"{gap:.12g}", f"{tab.w2:.12g}"])
    elif args.study == "decomposition":
        model = MomentModel(np.eye(args.cols), args.sigma**2)
        b = solve_optimal_B_model(a, model, args.lam)
        dec = error_decomposition(a, b, model)
        with open(args.out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["variance", "bias", "nullspace", "total"])
            wr.writerow([f"{dec.variance:.12g}", f"{dec.bias:.12g}",
                         f"{dec.nullspace:.12g}", f"{dec.total:.12g}"])
    else:  # solve
        model = MomentModel(np.eye(args.cols), args.sigma**2)
        b = solve_optimal_B_model(a, model, args.lam)
        with open(args.out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"b_{j}" for j in range(b.shape[1])])
            for row in b:
                wr.writerow([f"{v:.12g}" for v in row])
    print(f"wrote {args.study} table to {args.out}")
    return 0


def cmd_export_filter(args) -> int:
    params = load_filter_params(args.params)
    _refuse_existing([args.out], args.force)
    geom = None
    if args.gauge:
        if not args.config:
            raise ValueError("--gauge needs --config for the standard weight profile")
        geom = _load(args.config).geometry
    export_filter_csv(params, args.out, geom=geom, gauge=args.gauge)
    print(f"wrote filter table to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lfbp",
                                 description="learned filtered back-projection toolkit")
    ap.add_argument("--threads", type=int, default=None,
                    help="cap numba threads (results are thread-count independent)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a phantom/measurement dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="learn filter gains and weights")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="apply saved params to a stack file")
    p.add_argument("--config", required=True)
    p.add_argument("--params", required=True, help="base path of saved filter params")
    p.add_argument("--stack", required=True, help="base path of the stack tensor")
    p.add_argument("--out", required=True, help="base path of the output volume tensor")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="score learned/classical/nag on the dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params", default=None, help="params base (default OUT/learned)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="dense-instance studies on random operators")
    p.add_argument("study", choices=["spectral", "stability", "decomposition", "solve"])
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=12)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--lambdas", type=float, nargs="+", default=[0.1, 1.0, 10.0])
    p.add_argument("--perturbation", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export-filter", help="export gains/weights to CSV")
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gauge", action="store_true",
                   help="gauge-normalize weights to the standard profile first")
    p.add_argument("--config", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_export_filter)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        import numba

        numba.set_num_threads(max(1, args.threads))
    try:
        return args.func(args)
    except (NumericalError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 4
    except (FileExistsError, FileNotFoundError, OSError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, TypeError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
