"""Command-line entry points for the full design workflow.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical
failure, 4 I/O failure. Every command echoes its resolved configuration,
seed and the tool version in its JSON output for provenance.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import __version__, evolve, photonics, pipeline, qed, surrogate
from .errors import (
    ConfigError,
    InvalidInputError,
    NumericalError,
    SlotbraggError,
    UnreachableTargetError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) else x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(payload: dict, config: pipeline.RunConfig = None, seed=None):
    meta = {"version": __version__}
    if config is not None:
        meta["config"] = config.raw
        meta["config_sha256"] = config.config_hash()
        meta["seed"] = config.seed if seed is None else seed
    elif seed is not None:
        meta["seed"] = seed
    payload = {**meta, **payload}
    json.dump(_jsonable(payload), sys.stdout, indent=2)
    sys.stdout.write("\n")


def _load_config(args) -> pipeline.RunConfig:
    if getattr(args, "config", None):
        return pipeline.load_config_file(args.config)
    return pipeline.load_config({})


def _resolve_model(config: pipeline.RunConfig) -> photonics.IndexModel:
    return config.resolved_index_model()


# ---------------------------------------------------------------------------
# commands


def cmd_indist(args) -> int:
    rates = qed.RateSet(args.g, args.kappa, args.gstar)
    result = qed.indistinguishability(rates, method=args.method, tol=args.tol)
    _emit({"indist": result.indist, "numerator": result.numerator,
           "denominator": result.denominator, "method": result.method,
           "t_max": result.t_max, "residual": result.residual,
           "flags": list(result.flags),
           "inputs": {"g": args.g, "kappa": args.kappa, "gstar": args.gstar,
                      "tol": args.tol}})
    return EXIT_OK


def cmd_map(args) -> int:
    grid = qed.indist_map(args.gstar, (args.g_min, args.g_max),
                          (args.kappa_min, args.kappa_max), args.n,
                          tol=args.tol, method=args.method, jobs=args.jobs)
    import hashlib
    resolved = {k: v for k, v in sorted(vars(args).items())
                if k not in ("fn",)}
    config_hash = hashlib.sha256(
        json.dumps(resolved, sort_keys=True, default=str).encode()).hexdigest()
    pipeline.write_map_csv(grid, args.out, config_hash, args.seed)
    region = qed.iso_region(grid, args.threshold)
    if region.cells:
        gmin = float(min(grid.g_axis[i] for i, _ in region.cells))
        kmin = float(min(grid.kappa_axis[j] for _, j in region.cells))
        summary = {"region": "present", "threshold": args.threshold,
                   "min_g_over_gamma": gmin, "min_kappa_over_gamma": kmin,
                   "cell_count": len(region.cells)}
    else:
        summary = {"region": "empty", "threshold": args.threshold}
    _emit({"out": args.out, "n": args.n, "gstar": args.gstar,
           "failures": len(grid.failures), **summary}, seed=args.seed)
    return EXIT_OK


def cmd_threshold(args) -> int:
    bounds = ((args.g_min, args.g_max), (args.kappa_min, args.kappa_max))
    try:
        res = qed.min_coupling_threshold(args.gstar, args.target,
                                         search_bounds=bounds)
    except UnreachableTargetError as exc:
        _emit({"region": "empty", "target": args.target, "gstar": args.gstar,
               "best_indist": exc.best_indist}, seed=None)
        return EXIT_OK
    _emit({"gstar": args.gstar, "target": args.target, "g_min": res.g_min,
           "kappa_best": res.kappa_best, "indist": res.indist,
           "trivially_satisfied": res.trivially_satisfied})
    return EXIT_OK


def cmd_dataset_gen(args) -> int:
    config = _load_config(args)
    seed = config.seed if args.seed is None else args.seed
    jobs = args.jobs or config.jobs
    n = args.n or config.dataset_n
    model = _resolve_model(config)
    table = pipeline.generate_dataset(config.geometry, config.emitter, model,
                                      n, config.dataset_bounds, seed,
                                      jobs=jobs, qed_tol=config.qed_tol)
    pipeline.write_dataset_csv(table, args.out, config.config_hash(), seed)
    _emit({"out": args.out, "rows": n, "failed": table.failed_count,
           "jobs": jobs}, config, seed=seed)
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args)
    dataset = pipeline.read_dataset_csv(args.dataset)
    periods = dataset.inputs.shape[1]
    sizes = (periods, *config.hidden_sizes, 1)
    model = surrogate.init_model(sizes, seed=config.train.seed)
    trained, history = surrogate.train(model, dataset, config.train)
    surrogate.save(trained, args.out)
    _emit({"out": args.out, "layer_sizes": list(sizes),
           "rows": len(dataset), "invalid_rows":
               dataset.metadata.get("invalid_rows", 0),
           "epochs_run": len(history.train_loss),
           "best_epoch": history.best_epoch,
           "final_train_mse": float(history.train_loss[-1]),
           "best_holdout_mse": float(history.holdout_loss[history.best_epoch])},
          config)
    return EXIT_OK


def cmd_surrogate_eval(args) -> int:
    model = surrogate.load(args.model)
    dataset = pipeline.read_dataset_csv(args.dataset)
    pred = surrogate.predict_batch(model, dataset.inputs)
    rmse = float(np.sqrt(np.mean((pred - dataset.targets) ** 2)))
    mae = float(np.mean(np.abs(pred - dataset.targets)))
    _emit({"model": args.model, "dataset": args.dataset, "rows": len(dataset),
           "rmse": rmse, "mae": mae})
    return EXIT_OK


def cmd_optimize(args) -> int:
    config = _load_config(args)
    model = surrogate.load(args.model)
    index_model = _resolve_model(config)
    report = evolve.optimize_and_verify(model, config.geometry,
                                        config.emitter, index_model,
                                        config.ga_config(), top_k=args.top_k,
                                        qed_tol=config.qed_tol)
    if args.history_out:
        ga_cfg = config.ga_config()
        pipeline.write_ga_history_csv(
            report.ga_history_best, report.ga_history_mean,
            args.history_out, config.config_hash(), ga_cfg.seed)
    payload = _jsonable(report)
    payload.pop("ga_history_best", None)
    payload.pop("ga_history_mean", None)
    _emit({"report": payload}, config)
    return EXIT_OK


def _parse_omega(args, config: pipeline.RunConfig):
    if args.omega is None:
        return (photonics.NOMINAL_CORRUGATION_NM,) * config.geometry.periods
    if os.path.exists(args.omega):
        with open(args.omega, "r", encoding="utf-8") as fh:
            values = json.load(fh)
    else:
        values = [float(v) for v in args.omega.split(",")]
    return tuple(float(v) for v in values)


def cmd_verify(args) -> int:
    config = _load_config(args)
    omega = _parse_omega(args, config)
    geo = dataclasses.replace(config.geometry, corrugation_widths_nm=omega)
    model = _resolve_model(config)
    figures = photonics.evaluate_geometry(geo, config.emitter, model,
                                          qed_tol=config.qed_tol,
                                          method=config.qed_method)
    _emit({"figures": _jsonable(figures), "omega": list(omega),
           "resonance_shift_nm":
               figures.lambda0_nm - geo.target_wavelength_nm}, config)
    return EXIT_OK


def cmd_cavity_eval(args) -> int:
    config = _load_config(args)
    model = _resolve_model(config)
    figures = photonics.evaluate_geometry(config.geometry, config.emitter,
                                          model, qed_tol=config.qed_tol,
                                          method=config.qed_method)
    _emit({"figures": _jsonable(figures),
           "omega": list(config.geometry.corrugation_widths_nm),
           "resonance_shift_nm":
               figures.lambda0_nm - config.geometry.target_wavelength_nm},
          config)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config(args)
    model = _resolve_model(config)
    values = np.linspace(args.start, args.stop, args.steps)
    rows = pipeline.run_sweep(config.geometry, config.emitter, model,
                              args.param, values, qed_tol=config.qed_tol)
    pipeline.write_sweep_csv(args.param, rows, args.out,
                             config.config_hash(), config.seed)
    failed = sum(1 for _v, figs, _e in rows if figs is None)
    _emit({"out": args.out, "param": args.param, "steps": args.steps,
           "failed": failed}, config)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slotbragg",
        description="Photon indistinguishability and inverse design of "
                    "slot-Bragg nanocavities")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("indist", help="indistinguishability for one rate set")
    p.add_argument("--g", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--gstar", type=float, required=True)
    p.add_argument("--method", choices=("eigen", "quadrature"), default="eigen")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(fn=cmd_indist)

    p = sub.add_parser("map", help="indistinguishability map over (g, kappa)")
    p.add_argument("--gstar", type=float, required=True)
    p.add_argument("--g-min", type=float, default=1e2)
    p.add_argument("--g-max", type=float, default=1e6)
    p.add_argument("--kappa-min", type=float, default=1e2)
    p.add_argument("--kappa-max", type=float, default=1e6)
    p.add_argument("-n", "--n", type=int, default=60)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--method", choices=("eigen", "quadrature"), default="eigen")
    p.add_argument("--jobs", type=int,
                   default=int(os.environ.get("SLOTBRAGG_JOBS", "1")))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_map)

    p = sub.add_parser("threshold", help="minimum coupling reaching a target I")
    p.add_argument("--gstar", type=float, required=True)
    p.add_argument("--target", type=float, default=0.9)
    p.add_argument("--g-min", type=float, default=1.0)
    p.add_argument("--g-max", type=float, default=1e7)
    p.add_argument("--kappa-min", type=float, default=1.0)
    p.add_argument("--kappa-max", type=float, default=1e7)
    p.set_defaults(fn=cmd_threshold)

    p = sub.add_parser("dataset-gen", help="generate a physics dataset CSV")
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int,
                   default=int(os.environ.get("SLOTBRAGG_JOBS", "0")) or None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_dataset_gen)

    p = sub.add_parser("train", help="train the surrogate on a dataset CSV")
    p.add_argument("--config")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("surrogate-eval", help="evaluate a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.set_defaults(fn=cmd_surrogate_eval)

    p = sub.add_parser("optimize", help="GA on the surrogate + physics check")
    p.add_argument("--config")
    p.add_argument("--model", required=True)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--history-out")
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("verify", help="physics-evaluate one corrugation vector")
    p.add_argument("--config")
    p.add_argument("--omega", help="comma-separated widths or a JSON file path")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("cavity-eval", help="evaluate the configured geometry")
    p.add_argument("--config")
    p.set_defaults(fn=cmd_cavity_eval)

    p = sub.add_parser("sweep", help="vary one geometry field")
    p.add_argument("--config")
    p.add_argument("--param", required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except SlotbraggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
