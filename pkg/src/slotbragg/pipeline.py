"""Run configuration, dataset generation, sweeps and file interchange.

All output files embed the tool version, the sha256 of the resolved
configuration and the seed as leading '#' comment lines; the CSV bodies are
UTF-8 with LF line endings and '.' decimals. Evaluations are pure, inputs
are sampled up front from the seed, and results are assembled by row index,
so output bytes do not depend on the parallelism degree.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import __version__, photonics, qed, surrogate
from .errors import ConfigError, DatasetGenerationError, InvalidInputError


# ---------------------------------------------------------------------------
# configuration


_TOP_KEYS = {"emitter", "geometry", "index_model", "qed", "surrogate", "ga",
             "dataset", "seed", "jobs"}
_QED_KEYS = {"tol", "method"}
_SURROGATE_KEYS = {"hidden_sizes", "epochs", "batch_size", "learning_rate",
                   "holdout_fraction", "patience", "seed"}
_GA_KEYS = {"population_size", "generations", "tournament_size",
            "crossover_rate", "mutation_sigma_nm", "bounds", "elitism_count",
            "seed"}
_DATASET_KEYS = {"n", "bounds"}
_GEOMETRY_PRESET_KEYS = {"preset", "slot_width_nm", "periods",
                         "corrugation_widths_nm"}


def _reject_unknown(doc: dict, allowed: set, where: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass(frozen=True)
class RunConfig:
    emitter: photonics.EmitterSpec
    geometry: photonics.CavityGeometry
    index_model: Optional[photonics.IndexModel]   # None means calibrate on demand
    qed_tol: float
    qed_method: str
    hidden_sizes: tuple
    train: surrogate.TrainConfig
    ga_settings: dict
    dataset_n: int
    dataset_bounds: tuple
    seed: int
    jobs: int
    raw: dict

    def resolved_index_model(self) -> photonics.IndexModel:
        if self.index_model is not None:
            return self.index_model
        return photonics.calibrate_index_model(geometry_template=self.geometry)

    def ga_config(self, genome_length: Optional[int] = None):
        from . import evolve
        return evolve.GAConfig(
            genome_length=(genome_length if genome_length is not None
                           else self.geometry.periods),
            **self.ga_settings)

    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(doc: dict) -> RunConfig:
    """Validate and resolve a configuration document (strict keys)."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "configuration")

    emitter_doc = doc.get("emitter", "rt_benchmark")
    if isinstance(emitter_doc, str):
        try:
            emitter = photonics.emitter_preset(emitter_doc)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
    elif isinstance(emitter_doc, dict):
        try:
            emitter = photonics.emitter_from_json(json.dumps(emitter_doc))
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError("emitter must be a preset name or an object")

    geo_doc = doc.get("geometry", {"preset": emitter.name})
    if not isinstance(geo_doc, dict):
        raise ConfigError("geometry must be an object")
    if "preset" in geo_doc:
        _reject_unknown(geo_doc, _GEOMETRY_PRESET_KEYS, "geometry")
        kwargs = {}
        if "slot_width_nm" in geo_doc:
            kwargs["slot_width_nm"] = float(geo_doc["slot_width_nm"])
        if "periods" in geo_doc:
            kwargs["periods"] = int(geo_doc["periods"])
        if "corrugation_widths_nm" in geo_doc:
            kwargs["corrugation_widths_nm"] = tuple(geo_doc["corrugation_widths_nm"])
        try:
            geometry = photonics.preset_geometry(geo_doc["preset"], **kwargs)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        try:
            geometry = photonics.geometry_from_json(json.dumps(geo_doc))
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc

    model_doc = doc.get("index_model", {"calibrate": True})
    if not isinstance(model_doc, dict):
        raise ConfigError("index_model must be an object")
    if model_doc.get("calibrate") is True:
        _reject_unknown(model_doc, {"calibrate"}, "index_model")
        index_model = None
    elif "calibrate" in model_doc:
        raise ConfigError("index_model.calibrate may only be true")
    else:
        fields = {f.name for f in dataclasses.fields(photonics.IndexModel)}
        _reject_unknown(model_doc, fields, "index_model")
        try:
            index_model = photonics.IndexModel(**model_doc)
        except (TypeError, InvalidInputError) as exc:
            raise ConfigError(str(exc)) from exc

    qed_doc = doc.get("qed", {})
    _reject_unknown(qed_doc, _QED_KEYS, "qed")
    qed_tol = float(qed_doc.get("tol", 1e-6))
    qed_method = qed_doc.get("method", "eigen")
    if qed_method not in ("eigen", "quadrature"):
        raise ConfigError(f"unknown qed method {qed_method!r}")

    sur_doc = dict(doc.get("surrogate", {}))
    _reject_unknown(sur_doc, _SURROGATE_KEYS, "surrogate")
    hidden = tuple(int(h) for h in sur_doc.pop("hidden_sizes", (64, 64)))
    try:
        train = surrogate.TrainConfig(**sur_doc)
    except (TypeError, InvalidInputError) as exc:
        raise ConfigError(str(exc)) from exc

    ga_doc = dict(doc.get("ga", {}))
    _reject_unknown(ga_doc, _GA_KEYS, "ga")
    if "bounds" in ga_doc:
        ga_doc["bounds"] = tuple(ga_doc["bounds"])

    ds_doc = doc.get("dataset", {})
    _reject_unknown(ds_doc, _DATASET_KEYS, "dataset")
    dataset_n = int(ds_doc.get("n", 5000))
    dataset_bounds = tuple(ds_doc.get("bounds", photonics.CORRUGATION_BOUNDS_NM))
    if dataset_n < 1:
        raise ConfigError("dataset.n must be >= 1")
    if not dataset_bounds[0] <= dataset_bounds[1]:
        raise ConfigError("dataset.bounds must be ordered")

    seed = int(doc.get("seed", 0))
    jobs = int(doc.get("jobs", 1))
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")

    return RunConfig(emitter=emitter, geometry=geometry,
                     index_model=index_model, qed_tol=qed_tol,
                     qed_method=qed_method, hidden_sizes=hidden, train=train,
                     ga_settings=ga_doc, dataset_n=dataset_n,
                     dataset_bounds=dataset_bounds, seed=seed, jobs=jobs,
                     raw=doc)


def load_config_file(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return load_config(doc)


# ---------------------------------------------------------------------------
# provenance and CSV helpers


def provenance_lines(config_hash: str, seed: int) -> list:
    return [f"# slotbragg {__version__}",
            f"# config_sha256: {config_hash}",
            f"# seed: {seed}"]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path: str, header: str, rows, config_hash: str, seed: int):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in provenance_lines(config_hash, seed):
            fh.write(line + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv_rows(path: str):
    """Yield (header, rows) skipping '#' provenance lines."""
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line
            else:
                rows.append(line.split(","))
    if header is None:
        raise InvalidInputError(f"{path} contains no CSV header")
    return header, rows


# ---------------------------------------------------------------------------
# dataset generation


@dataclass(frozen=True)
class DatasetRow:
    index: int
    omega: np.ndarray
    figures: Optional[photonics.CavityFigures]
    error: Optional[str]


@dataclass(frozen=True)
class DatasetTable:
    rows: tuple
    periods: int
    failed_count: int


def sample_corrugations(n: int, periods: int, bounds: tuple,
                        seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo, hi = bounds
    return rng.uniform(lo, hi, size=(n, periods))


def _eval_dataset_row(args):
    idx, omega, geometry, emitter, model, qed_tol = args
    geo = replace(geometry, corrugation_widths_nm=tuple(float(w) for w in omega))
    try:
        figs = photonics.evaluate_geometry(geo, emitter, model, qed_tol=qed_tol)
        return idx, figs, None
    except Exception as exc:
        return idx, None, f"{type(exc).__name__}: {exc}"


def generate_dataset(geometry: photonics.CavityGeometry,
                     emitter: photonics.EmitterSpec,
                     model: photonics.IndexModel, n: int, bounds: tuple,
                     seed: int, jobs: int = 1,
                     qed_tol: float = 1e-6) -> DatasetTable:
    """Sample n corrugation vectors and evaluate each with the physics
    pipeline. Failed rows keep a NaN target and the failure cause; more than
    50 percent failures aborts."""
    omegas = sample_corrugations(n, geometry.periods, bounds, seed)
    if bounds[0] == bounds[1]:
        import warnings
        warnings.warn("degenerate sampling bounds: all rows identical",
                      stacklevel=2)
    tasks = [(i, omegas[i], geometry, emitter, model, qed_tol)
             for i in range(n)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_eval_dataset_row, tasks,
                                  chunksize=max(1, n // (jobs * 8))))
    else:
        results = [_eval_dataset_row(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    rows = tuple(DatasetRow(index=i, omega=omegas[i], figures=figs, error=err)
                 for i, figs, err in results)
    failed = sum(1 for r in rows if r.figures is None)
    if failed > 0.5 * n:
        causes = {}
        for r in rows:
            if r.error:
                causes[r.error.split(":")[0]] = causes.get(
                    r.error.split(":")[0], 0) + 1
        raise DatasetGenerationError(
            f"{failed}/{n} evaluations failed; causes: {causes}")
    return DatasetTable(rows=rows, periods=geometry.periods, failed_count=failed)


def _width_columns(periods: int) -> list:
    pad = max(2, len(str(periods)))
    return [f"w_{i + 1:0{pad}d}" for i in range(periods)]


def dataset_header(periods: int) -> str:
    return ",".join(["id"] + _width_columns(periods) +
                    ["lambda0_nm", "fwhm_nm", "q", "veff_norm",
                     "g_over_gamma", "kappa_over_gamma", "indist"])


def write_dataset_csv(table: DatasetTable, path: str, config_hash: str,
                      seed: int):
    nan = float("nan")

    def row_values(row: DatasetRow):
        f = row.figures
        tail = ([f.lambda0_nm, f.fwhm_nm, f.q, f.veff_norm, f.g_over_gamma,
                 f.kappa_over_gamma, f.indist] if f is not None
                else [nan] * 7)
        return [row.index, *row.omega, *tail]

    write_csv(path, dataset_header(table.periods),
              (row_values(r) for r in table.rows), config_hash, seed)


def read_dataset_csv(path: str) -> surrogate.Dataset:
    """Load a dataset CSV into training arrays; rows with a NaN target are
    excluded and counted in the metadata."""
    header, raw = read_csv_rows(path)
    cols = header.split(",")
    if cols[0] != "id" or cols[-1] != "indist":
        raise InvalidInputError(f"unexpected dataset header in {path}")
    w_cols = [c for c in cols if c.startswith("w_")]
    iw = [cols.index(c) for c in w_cols]
    it = cols.index("indist")
    inputs, targets, dropped = [], [], 0
    for row in raw:
        y = float(row[it])
        if math.isnan(y) or not (0.0 <= y <= 1.0):
            dropped += 1
            continue
        inputs.append([float(row[i]) for i in iw])
        targets.append(y)
    if not inputs:
        raise InvalidInputError(f"{path} contains no valid rows")
    return surrogate.Dataset(inputs=np.array(inputs), targets=np.array(targets),
                             metadata={"source": path, "invalid_rows": dropped})


# ---------------------------------------------------------------------------
# map and sweep emission


def write_map_csv(grid: qed.MapGrid, path: str, config_hash: str, seed: int):
    rows = ((g, k, grid.values[i, j])
            for i, g in enumerate(grid.g_axis)
            for j, k in enumerate(grid.kappa_axis))
    write_csv(path, "g_over_gamma,kappa_over_gamma,indist", rows,
              config_hash, seed)


_SWEEPABLE = ("slot_width_nm", "periods", "period_nm", "cavity_length_nm")


def run_sweep(geometry: photonics.CavityGeometry,
              emitter: photonics.EmitterSpec, model: photonics.IndexModel,
              param: str, values, qed_tol: float = 1e-6) -> list:
    """Vary one geometry field; returns (value, figures-or-None, error) rows."""
    if param not in _SWEEPABLE:
        raise InvalidInputError(
            f"cannot sweep {param!r}; choose one of {_SWEEPABLE}")
    out = []
    for v in values:
        if param == "periods":
            p = int(round(v))
            geo = replace(geometry, periods=p,
                          corrugation_widths_nm=(
                              photonics.NOMINAL_CORRUGATION_NM,) * p)
            v = p
        else:
            geo = replace(geometry, **{param: float(v)})
        try:
            figs = photonics.evaluate_geometry(geo, emitter, model,
                                               qed_tol=qed_tol)
            out.append((v, figs, None))
        except Exception as exc:
            out.append((v, None, f"{type(exc).__name__}: {exc}"))
    return out


def write_sweep_csv(param: str, rows, path: str, config_hash: str, seed: int):
    nan = float("nan")

    def values():
        for v, figs, _err in rows:
            if figs is None:
                yield [param, v, nan, nan, nan, nan, nan]
            else:
                yield [param, v, figs.indist, figs.q, figs.veff_norm,
                       figs.g_over_gamma, figs.kappa_over_gamma]

    write_csv(path, "param,value,indist,q,veff_norm,g_over_gamma,kappa_over_gamma",
              values(), config_hash, seed)


def write_ga_history_csv(history_best, history_mean, path: str,
                         config_hash: str, seed: int):
    rows = ((gen, b, m) for gen, (b, m)
            in enumerate(zip(history_best, history_mean)))
    write_csv(path, "generation,best,mean", rows, config_hash, seed)
