"""Genetic algorithm over corrugation-width vectors.

Tournament selection, gene-wise crossover, Gaussian mutation clipped to box
bounds, elitism. The fitness callback is arbitrary (surrogate or physics);
non-finite fitness demotes an individual to -inf instead of crashing the
search. Runs are bit-deterministic for a given seed and pure fitness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import photonics, surrogate
from .errors import InvalidInputError, VerificationFailureError


@dataclass(frozen=True)
class GAConfig:
    genome_length: int
    population_size: int = 64
    generations: int = 200
    tournament_size: int = 3
    crossover_rate: float = 0.7
    mutation_sigma_nm: float = 2.0
    bounds: tuple = photonics.CORRUGATION_BOUNDS_NM
    elitism_count: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.genome_length < 1:
            raise InvalidInputError("genome_length must be >= 1")
        if self.population_size < 2:
            raise InvalidInputError("population_size must be >= 2")
        if self.generations < 1:
            raise InvalidInputError("generations must be >= 1")
        if not (0 <= self.crossover_rate <= 1):
            raise InvalidInputError("crossover_rate must be in [0, 1]")
        lo, hi = self.bounds
        if not lo < hi:
            raise InvalidInputError("bounds must be ordered (lo < hi)")
        if self.mutation_sigma_nm < 0:
            raise InvalidInputError("mutation_sigma_nm must be >= 0")
        if not (0 <= self.elitism_count < self.population_size):
            raise InvalidInputError("elitism_count must be < population_size")
        if self.tournament_size < 1:
            raise InvalidInputError("tournament_size must be >= 1")


@dataclass(frozen=True)
class GAResult:
    best_omega: np.ndarray
    best_fitness: float
    history_best: np.ndarray
    history_mean: np.ndarray
    evaluation_count: int
    nonfinite_count: int
    seed: int


def crossover(parent_a: np.ndarray, parent_b: np.ndarray, rate: float,
              rng: np.random.Generator) -> np.ndarray:
    """Gene-wise mix: each gene comes from parent_b with probability `rate`."""
    a = np.asarray(parent_a, dtype=float)
    b = np.asarray(parent_b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError("parents must have equal length")
    take_b = rng.random(a.shape) < rate
    return np.where(take_b, b, a)


def mutate(omega: np.ndarray, sigma: float, bounds: tuple,
           rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian mutation, clipped to the box bounds."""
    lo, hi = bounds
    x = np.asarray(omega, dtype=float) + sigma * rng.standard_normal(len(omega))
    return np.clip(x, lo, hi)


def _evaluate(fitness: Callable, population: np.ndarray):
    values = np.empty(len(population))
    bad = 0
    for i, ind in enumerate(population):
        v = fitness(ind)
        if v is None or not math.isfinite(v):
            values[i] = -math.inf
            bad += 1
        else:
            values[i] = float(v)
    return values, bad


def run_ga(fitness: Callable, config: GAConfig,
           initial_population: Optional[np.ndarray] = None) -> GAResult:
    """Maximise `fitness` over the bounded box.

    `initial_population` rows, when given, seed the first generation (the
    remainder is drawn uniformly); they are clipped to bounds.
    """
    rng = np.random.default_rng(config.seed)
    lo, hi = config.bounds
    pop = rng.uniform(lo, hi, size=(config.population_size, config.genome_length))
    if initial_population is not None:
        seeded = np.clip(np.atleast_2d(np.asarray(initial_population, dtype=float)),
                         lo, hi)
        k = min(len(seeded), config.population_size)
        pop[:k] = seeded[:k]

    history_best = np.empty(config.generations)
    history_mean = np.empty(config.generations)
    evaluations = 0
    nonfinite = 0
    best_ind, best_fit = None, -math.inf

    for gen in range(config.generations):
        values, bad = _evaluate(fitness, pop)
        evaluations += len(pop)
        nonfinite += bad
        order = np.argsort(-values)
        if values[order[0]] > best_fit:
            best_fit = float(values[order[0]])
            best_ind = pop[order[0]].copy()
        finite = values[np.isfinite(values)]
        history_best[gen] = best_fit
        history_mean[gen] = float(finite.mean()) if len(finite) else -math.inf

        elite = pop[order[:config.elitism_count]].copy()
        children = [elite]
        n_children = config.population_size - config.elitism_count

        def pick():
            contenders = rng.integers(0, config.population_size,
                                      size=config.tournament_size)
            return pop[contenders[np.argmax(values[contenders])]]

        block = np.empty((n_children, config.genome_length))
        for c in range(n_children):
            child = crossover(pick(), pick(), config.crossover_rate, rng)
            block[c] = mutate(child, config.mutation_sigma_nm, config.bounds, rng)
        children.append(block)
        pop = np.vstack(children)

    return GAResult(best_omega=best_ind, best_fitness=best_fit,
                    history_best=history_best, history_mean=history_mean,
                    evaluation_count=evaluations, nonfinite_count=nonfinite,
                    seed=config.seed)


# ---------------------------------------------------------------------------
# surrogate-optimise, physics-verify


@dataclass(frozen=True)
class CandidateReport:
    omega: tuple
    surrogate_indist: float
    figures: Optional[photonics.CavityFigures]
    error: Optional[str]


@dataclass(frozen=True)
class OptimizationReport:
    candidates: tuple
    baseline: CandidateReport
    winner: CandidateReport
    winner_is_baseline: bool
    resonance_shift_nm: float
    surrogate_evaluations: int
    physics_evaluations: int
    ga_history_best: np.ndarray
    ga_history_mean: np.ndarray
    seed: int


def _top_k_diverse(archive: list, k: int, min_distance: float):
    """Best-scoring candidates with a pairwise distance floor, so the
    verification budget is not spent on near-clones from one basin; the
    floor is halved until k candidates fit."""
    ranked = sorted(archive, key=lambda t: -t[0])
    d = min_distance
    while True:
        out = []
        for fit, ind in ranked:
            if all(np.linalg.norm(ind - prev) > d for _fit, prev in out):
                out.append((fit, ind))
                if len(out) == k:
                    return out
        if d < 1e-9:
            return out
        d /= 2.0


def optimize_and_verify(model: surrogate.SurrogateModel,
                        geometry_template: photonics.CavityGeometry,
                        emitter: photonics.EmitterSpec,
                        index_model: photonics.IndexModel,
                        config: GAConfig, top_k: int = 5,
                        qed_tol: float = 1e-6) -> OptimizationReport:
    """Run the GA on the surrogate, then re-check the best candidates with
    the physics pipeline.

    The uniform-width incumbent seeds the population and is always part of
    the verification set, so the physics-verified winner can never fall below
    the baseline. The winner is chosen by physics, not by the surrogate.
    """
    if model.input_size != config.genome_length:
        raise InvalidInputError("surrogate input size != genome length")
    if geometry_template.periods != config.genome_length:
        raise InvalidInputError("geometry periods != genome length")

    archive = []

    def fitness(omega):
        v = surrogate.predict(model, omega)
        archive.append((v, np.array(omega)))
        return v

    baseline_omega = np.full(config.genome_length,
                             photonics.NOMINAL_CORRUGATION_NM)
    result = run_ga(fitness, config, initial_population=baseline_omega[None, :])

    physics_calls = 0

    def verify(omega):
        nonlocal physics_calls
        geo = replace(geometry_template,
                      corrugation_widths_nm=tuple(float(w) for w in omega))
        physics_calls += 1
        try:
            figs = photonics.evaluate_geometry(geo, emitter, index_model,
                                               qed_tol=qed_tol)
            return CandidateReport(omega=tuple(float(w) for w in omega),
                                   surrogate_indist=surrogate.predict(model, omega),
                                   figures=figs, error=None)
        except Exception as exc:
            return CandidateReport(omega=tuple(float(w) for w in omega),
                                   surrogate_indist=surrogate.predict(model, omega),
                                   figures=None, error=f"{type(exc).__name__}: {exc}")

    lo, hi = config.bounds
    baseline_report = verify(baseline_omega)
    picked = _top_k_diverse(archive, top_k,
                            min_distance=0.05 * (hi - lo)
                            * math.sqrt(config.genome_length))
    candidates = [verify(ind) for _fit, ind in picked]

    verified = [c for c in candidates if c.figures is not None]
    if not verified and baseline_report.figures is None:
        raise VerificationFailureError(
            "all candidates failed physics verification",
            causes=[c.error for c in candidates + [baseline_report]])

    pool = verified + ([baseline_report] if baseline_report.figures else [])
    winner = max(pool, key=lambda c: c.figures.indist)
    shift = (winner.figures.lambda0_nm - geometry_template.target_wavelength_nm
             if winner.figures else float("nan"))
    return OptimizationReport(
        candidates=tuple(candidates),
        baseline=baseline_report,
        winner=winner,
        winner_is_baseline=winner is baseline_report,
        resonance_shift_nm=shift,
        surrogate_evaluations=result.evaluation_count,
        physics_evaluations=physics_calls,
        ga_history_best=result.history_best,
        ga_history_mean=result.history_mean,
        seed=config.seed,
    )
