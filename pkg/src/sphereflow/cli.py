"""``sphereflow`` command line: gen | baseline | train | eval | analyze.

Exit codes: 0 success, 2 invalid configuration or arguments, 1 runtime
failure.  ``SPHEREFLOW_THREADS`` caps the BLAS thread pool.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .config import ConfigError, GraphConfig, load_config
from .equivariance import circle_dft_check, equivariance_error, lowpass_bank, sphere_alignment
from .experiment import (dump_json, evaluate, generate_dataset, read_dataset, run_baseline,
                         run_training, write_dataset)
from .graph import LaplacianKind, build_healpix_graph
from .harmonics import eval_harmonics
from .network import load_checkpoint, save_checkpoint
from .sampling import RingSampling, healpix_new
from .spectral import detect_degree_blocks, eigendecompose, write_eigenvalues_csv

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    """Invalid input detected before any computation (exit code 2)."""


def _seed(v):
    s = int(v)
    if not 0 <= s < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return s


def build_parser():
    p = argparse.ArgumentParser(prog="sphereflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", type=Path, required=config_required)
        sp.add_argument("--seed", type=_seed, default=None,
                        help="overrides the seed of the config file")
        sp.add_argument("--out", type=Path, required=True, help="output directory")

    common(sub.add_parser("gen", help="generate the synthetic dataset"))
    b = sub.add_parser("baseline", help="PSD or histogram logistic-regression baseline")
    b.add_argument("features", choices=["psd", "hist"])
    b.add_argument("--data", type=Path, required=True)
    common(b)
    t = sub.add_parser("train", help="train the configured network variant")
    t.add_argument("--data", type=Path, required=True)
    common(t)
    e = sub.add_parser("eval", help="evaluate a checkpoint on the test splits")
    e.add_argument("--data", type=Path, required=True)
    e.add_argument("--checkpoint", type=Path, required=True)
    common(e)

    a = sub.add_parser("analyze", help="spectral and equivariance analyses")
    asub = a.add_subparsers(dest="analysis", required=True)
    for name in ("eigenvalues", "alignment", "equivariance"):
        sp = asub.add_parser(name)
        sp.add_argument("--nside", type=int, required=True)
        common(sp, config_required=False)
    asub.choices["alignment"].add_argument("--lmax", type=int, default=None)
    asub.choices["alignment"].add_argument("--measure", choices=["psd", "energy", "projection"],
                                           default="psd")
    eq = asub.choices["equivariance"]
    eq.add_argument("--lmax", type=int, default=None)
    eq.add_argument("--K", type=int, default=5)
    eq.add_argument("--trials", type=int, default=20)
    eq.add_argument("--angles", type=float, nargs="+", default=None,
                    help="rotation angles in radians (default k*pi/5, k=1..5)")
    c = asub.add_parser("circle")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--K", type=int, default=5)
    common(c, config_required=False)
    return p


def _config(args):
    try:
        return load_config(args.config, args.seed)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(str(exc)) from exc


def _graph_params(args):
    g = _config(args).graph if args.config else GraphConfig()
    return dict(neighbors=g.neighbors, sigma=g.sigma, kind=LaplacianKind(g.laplacian))


def _data(args):
    if not (args.data / "train.smap").is_file():
        raise UsageError(f"{args.data}: not a dataset directory (run `sphereflow gen`)")
    return read_dataset(args.data)


def _check_nside(n):
    if n < 1 or n & (n - 1):
        raise UsageError(f"--nside must be a positive power of two, got {n}")


def cmd_gen(args):
    cfg = _config(args)
    ds = generate_dataset(cfg)
    write_dataset(ds, args.out)
    dump_json({"config": cfg.model_dump(mode="json"), "seed": cfg.seed, "n_side": ds.n_side,
               "maps": {k: int(len(v)) for k, v in ds.maps.items()}},
              args.out / "dataset.json")


def cmd_baseline(args):
    cfg = _config(args)
    report = run_baseline(args.features, cfg, _data(args))
    report["note"] = "linear classifier is logistic regression, not an SVM"
    dump_json(report, args.out / f"baseline_{args.features}.json")


def cmd_train(args):
    cfg = _config(args)
    ds = _data(args)
    model, opt, metrics = run_training(cfg, ds)
    save_checkpoint(args.out / "model.sphf", model, opt,
                    {"config": cfg.model_dump(mode="json"), "seed": cfg.seed})
    dump_json(metrics, args.out / "train_metrics.json")


def cmd_eval(args):
    cfg = _config(args)
    ds = _data(args)
    if not args.checkpoint.is_file():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    model, _, _ = load_checkpoint(args.checkpoint)
    metrics = {"variant": model.spec.head, "checkpoint": args.checkpoint.name}
    metrics.update(evaluate(model, cfg, ds))
    dump_json(metrics, args.out / "eval_metrics.json")


def cmd_eigenvalues(args):
    _check_nside(args.nside)
    kw = _graph_params(args)
    g = build_healpix_graph(healpix_new(args.nside), **kw)
    basis = eigendecompose(g)
    blocks = detect_degree_blocks(basis)
    write_eigenvalues_csv(basis, args.out / "eigenvalues.csv")
    dump_json({"n_side": args.nside, "n": g.n, "sigma": g.sigma, "lambda_max": g.lambda_max,
               "laplacian": kw["kind"].value, "ell_max": blocks.ell_max,
               "group_sizes": list(blocks.sizes), "matched": list(blocks.matched),
               "diagnostic": blocks.diagnostic}, args.out / "eigenvalues.json")


def cmd_alignment(args):
    _check_nside(args.nside)
    kw = _graph_params(args)
    am = sphere_alignment(args.nside, args.lmax, kw["neighbors"], kw["sigma"], kw["kind"],
                          measure=args.measure)
    m = am.matrix
    with open(args.out / "alignment.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ell"] + [f"group_{j}" for j in range(m.shape[1])])
        for i, row in enumerate(m):
            w.writerow([i] + [f"{v:.17g}" for v in row])
    summary = dict(am.meta)
    summary.update({"size": m.shape[0], "diagonal": am.diagonal.tolist(),
                    "mean_diagonal_le8": am.mean_diagonal(8),
                    "column_sums": m.sum(axis=0).tolist()})
    dump_json(summary, args.out / "alignment.json")


def cmd_equivariance(args):
    _check_nside(args.nside)
    kw = _graph_params(args)
    s = healpix_new(args.nside)
    lmax = args.nside if args.lmax is None else args.lmax
    if not 0 <= lmax <= 2 * args.nside:
        raise UsageError("--lmax must lie in [0, 2 * nside]")
    seed = args.seed if args.seed is not None else (_config(args).seed if args.config else 0)
    g = build_healpix_graph(s, **kw)
    hb = eval_harmonics(s, lmax)
    bank = lowpass_bank(g, args.K)
    angles = args.angles or [k * np.pi / 5 for k in range(1, 6)]
    errors = [equivariance_error(g, bank, hb, a, args.trials, seed) for a in angles]
    with open(args.out / "equivariance.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["angle", "error"])
        w.writerows([f"{a:.17g}", f"{e:.17g}"] for a, e in zip(angles, errors))
    dump_json({"n_side": args.nside, "ell_max": lmax, "K": args.K, "trials": args.trials,
               "seed": seed, "filter": "chebyshev fit of exp(-4 lambda)",
               "laplacian": kw["kind"].value, "angles": angles, "errors": errors,
               "mean_error": float(np.mean(errors)), "max_error": float(np.max(errors))},
              args.out / "equivariance.json")


def cmd_circle(args):
    if args.n < 3:
        raise UsageError("--n must be at least 3")
    seed = args.seed if args.seed is not None else 0
    report = circle_dft_check(RingSampling(args.n), K=args.K, seed=seed)
    report["seed"] = seed
    dump_json(report, args.out / "circle.json")


ANALYSES = {"eigenvalues": cmd_eigenvalues, "alignment": cmd_alignment,
            "equivariance": cmd_equivariance, "circle": cmd_circle}
COMMANDS = {"gen": cmd_gen, "baseline": cmd_baseline, "train": cmd_train, "eval": cmd_eval}


def _thread_limit():
    raw = os.environ.get("SPHEREFLOW_THREADS")
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise UsageError(f"SPHEREFLOW_THREADS must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    fn = ANALYSES[args.analysis] if args.command == "analyze" else COMMANDS[args.command]
    try:
        with _thread_limit():
            args.out.mkdir(parents=True, exist_ok=True)
            fn(args)
    except (UsageError, ConfigError, ValidationError) as exc:
        print(f"sphereflow: invalid input: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"sphereflow: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
