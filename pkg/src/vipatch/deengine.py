"""Differential evolution engine, generic over any fitness oracle.

DE/rand/1/bin maximization: uniform initialization within per-dimension
bounds, mutation v = m1 + f * (m2 - m3) over three distinct non-target
members, binomial crossover with a forced dimension, boundary clamping, and
elitist 1-to-1 selection (a trial replaces its parent only when strictly
better). The run loop sorts each generation in descending fitness order,
checks an optional success predicate on the generation best, and stops early
when the population mean fitness stagnates.

Determinism: all random draws for a generation come from a generator derived
from (rng_seed, generation) and are consumed in member-index order before any
evaluation, so trajectories are identical regardless of evaluation
parallelism.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

FitnessOracle = Callable[[np.ndarray], float]
SuccessPredicate = Callable[[np.ndarray, float], bool]

# Mean-fitness changes below this are treated as stagnation.
STAGNATION_EPS = 1e-12


@dataclass(frozen=True)
class DEConfig:
    """Search hyperparameters and box bounds."""

    bounds: np.ndarray
    population_size: int = 30
    scale_factor: float = 0.7
    crossover_rate: float = 0.9
    max_generations: int = 200
    stagnation_patience: int = 10
    rng_seed: int = 0

    def __post_init__(self) -> None:
        bounds = np.asarray(self.bounds, dtype=np.float64)
        if bounds.ndim != 2 or bounds.shape[1] != 2 or bounds.shape[0] < 1:
            raise ConfigError(f"bounds must have shape (D, 2), got {bounds.shape}")
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise ConfigError("each bound must satisfy low <= high")
        if self.population_size < 4:
            raise ConfigError("population_size must be >= 4 (mutation draws 3 distinct others)")
        if self.max_generations < 1:
            raise ConfigError("max_generations must be >= 1")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ConfigError("crossover_rate must lie in [0, 1]")
        if self.stagnation_patience < 1:
            raise ConfigError("stagnation_patience must be >= 1")
        object.__setattr__(self, "bounds", bounds)

    @property
    def dimensions(self) -> int:
        return self.bounds.shape[0]


@dataclass
class Population:
    """Aligned member vectors and fitness values at one generation."""

    members: np.ndarray
    fitness: np.ndarray
    generation: int = 0

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.fitness))

    @property
    def best_fitness(self) -> float:
        return float(self.fitness[self.best_index])

    @property
    def best_member(self) -> np.ndarray:
        return self.members[self.best_index].copy()

    @property
    def mean_fitness(self) -> float:
        return float(np.mean(self.fitness))

    def sorted_descending(self) -> "Population":
        """Copy with members reordered by descending fitness (stable)."""
        order = np.argsort(-self.fitness, kind="stable")
        return Population(
            members=self.members[order].copy(),
            fitness=self.fitness[order].copy(),
            generation=self.generation,
        )


@dataclass
class TrajectoryPoint:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_vector: np.ndarray


@dataclass
class Trajectory:
    """Per-generation convergence record of one run."""

    points: list[TrajectoryPoint] = field(default_factory=list)
    stop_reason: str = "budget"

    def record(self, population: Population) -> None:
        self.points.append(
            TrajectoryPoint(
                generation=population.generation,
                best_fitness=population.best_fitness,
                mean_fitness=population.mean_fitness,
                best_vector=population.best_member,
            )
        )

    @property
    def best_fitness_series(self) -> np.ndarray:
        return np.asarray([p.best_fitness for p in self.points])

    @property
    def mean_fitness_series(self) -> np.ndarray:
        return np.asarray([p.mean_fitness for p in self.points])

    @property
    def final_generation(self) -> int:
        return self.points[-1].generation if self.points else -1


def _generation_rng(config: DEConfig, generation: int) -> np.random.Generator:
    """Generator for the draws producing generation + 1 from `generation`."""
    return np.random.default_rng((config.rng_seed, generation))


def _evaluate(
    oracle: FitnessOracle, vectors: Sequence[np.ndarray], workers: int
) -> np.ndarray:
    """Evaluate vectors in order; worker count never affects the result."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(oracle, vectors))
    else:
        values = [oracle(v) for v in vectors]
    out = np.asarray([float(v) for v in values], dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ValueError("fitness oracle produced a non-finite value")
    return out


def initialize(
    config: DEConfig,
    fitness_oracle: FitnessOracle,
    rng: np.random.Generator | None = None,
    workers: int = 1,
) -> Population:
    """Sample generation 0 uniformly within bounds and evaluate it."""
    rng = rng or np.random.default_rng(config.rng_seed)
    low = config.bounds[:, 0]
    high = config.bounds[:, 1]
    members = rng.uniform(low, high, size=(config.population_size, config.dimensions))
    # rng.uniform(x, x) can return x + eps; degenerate bounds stay exact.
    degenerate = low == high
    if np.any(degenerate):
        members[:, degenerate] = low[degenerate]
    fitness = _evaluate(fitness_oracle, list(members), workers)
    return Population(members=members, fitness=fitness, generation=0)


def mutate(
    population: Population,
    target_index: int,
    config: DEConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Differential mutation from three distinct non-target members."""
    q = population.members.shape[0]
    if q < 4:
        raise ConfigError("mutation needs a population of at least 4")
    picks: list[int] = []
    while len(picks) < 3:
        candidate = int(rng.integers(0, q))
        if candidate != target_index and candidate not in picks:
            picks.append(candidate)
    m1, m2, m3 = (population.members[i] for i in picks)
    return m1 + config.scale_factor * (m2 - m3)


def crossover(
    target: np.ndarray,
    mutant: np.ndarray,
    config: DEConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Binomial crossover; dimension J_rand always comes from the mutant."""
    target = np.asarray(target, dtype=np.float64)
    mutant = np.asarray(mutant, dtype=np.float64)
    if target.shape != mutant.shape or target.ndim != 1:
        raise ConfigError("target and mutant must be equal-length vectors")
    d = target.size
    draws = rng.uniform(0.0, 1.0, size=d)
    j_rand = int(rng.integers(0, d))
    take_mutant = draws <= config.crossover_rate
    take_mutant[j_rand] = True
    return np.where(take_mutant, mutant, target)


def clamp_bounds(vector: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Clip each dimension into its [low, high] interval."""
    vector = np.asarray(vector, dtype=np.float64)
    bounds = np.asarray(bounds, dtype=np.float64)
    if vector.size != bounds.shape[0]:
        raise ConfigError(f"vector length {vector.size} does not match {bounds.shape[0]} bounds")
    return np.clip(vector, bounds[:, 0], bounds[:, 1])


def step(
    population: Population,
    fitness_oracle: FitnessOracle,
    config: DEConfig,
    rng: np.random.Generator | None = None,
    workers: int = 1,
) -> Population:
    """Advance one generation; returns a new Population, input untouched.

    Trial vectors are built for every index first (consuming randomness in
    index order), then evaluated, then selected 1-to-1: a trial replaces its
    parent only with strictly greater fitness, so ties keep the parent. If
    any evaluation raises, the error propagates and the caller's population
    is unchanged.
    """
    rng = rng or _generation_rng(config, population.generation)
    trials = []
    for i in range(population.members.shape[0]):
        mutant = mutate(population, i, config, rng)
        trial = crossover(population.members[i], mutant, config, rng)
        trials.append(clamp_bounds(trial, config.bounds))
    trial_fitness = _evaluate(fitness_oracle, trials, workers)
    replace = trial_fitness > population.fitness
    members = population.members.copy()
    fitness = population.fitness.copy()
    members[replace] = np.asarray(trials)[replace]
    fitness[replace] = trial_fitness[replace]
    return Population(members=members, fitness=fitness, generation=population.generation + 1)


def run(
    config: DEConfig,
    fitness_oracle: FitnessOracle,
    success_predicate: SuccessPredicate | None = None,
    workers: int = 1,
) -> tuple[np.ndarray, Trajectory]:
    """Full search loop; returns the best-ever vector and the trajectory.

    Per generation: sort descending, record, check the success predicate on
    the generation best, then step. Stops on predicate success, on mean
    fitness stagnating (|change| < 1e-12) for stagnation_patience consecutive
    generations, or after max_generations steps.
    """
    population = initialize(
        config, fitness_oracle, np.random.default_rng(config.rng_seed), workers
    )
    trajectory = Trajectory()
    population = population.sorted_descending()
    trajectory.record(population)
    if success_predicate is not None and success_predicate(
        population.best_member, population.best_fitness
    ):
        trajectory.stop_reason = "success"
        return population.best_member, trajectory
    streak = 0
    prev_mean = population.mean_fitness
    for generation in range(config.max_generations):
        rng = _generation_rng(config, generation)
        population = step(population, fitness_oracle, config, rng, workers)
        population = population.sorted_descending()
        trajectory.record(population)
        if success_predicate is not None and success_predicate(
            population.best_member, population.best_fitness
        ):
            trajectory.stop_reason = "success"
            return population.best_member, trajectory
        mean = population.mean_fitness
        streak = streak + 1 if abs(mean - prev_mean) < STAGNATION_EPS else 0
        prev_mean = mean
        if streak >= config.stagnation_patience:
            trajectory.stop_reason = "stagnation"
            return population.best_member, trajectory
    trajectory.stop_reason = "budget"
    return population.best_member, trajectory
