"""Differential evolution engine: operators, determinism, convergence."""

from __future__ import annotations

import numpy as np
import pytest

from vipatch import ConfigError, DEConfig, Population, initialize, run, step
from vipatch.deengine import clamp_bounds, crossover, mutate


def sphere(v: np.ndarray) -> float:
    return -float(np.sum(np.square(v)))


def bounds(dim: int, lo: float = -5.0, hi: float = 5.0) -> np.ndarray:
    return np.asarray([(lo, hi)] * dim, dtype=np.float64)


def make_config(**overrides) -> DEConfig:
    params = dict(bounds=bounds(4), population_size=12, max_generations=30, rng_seed=7)
    params.update(overrides)
    return DEConfig(**params)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            make_config(population_size=3)
        with pytest.raises(ConfigError):
            make_config(crossover_rate=1.5)
        with pytest.raises(ConfigError):
            DEConfig(bounds=np.asarray([(1.0, -1.0)]))
        with pytest.raises(ConfigError):
            make_config(max_generations=0)


class TestInitialize:
    def test_members_within_bounds_and_evaluated(self):
        config = make_config()
        pop = initialize(config, sphere)
        assert pop.members.shape == (12, 4)
        assert np.all(pop.members >= -5.0) and np.all(pop.members <= 5.0)
        expected = [sphere(m) for m in pop.members]
        np.testing.assert_allclose(pop.fitness, expected, rtol=0, atol=0)
        assert pop.generation == 0

    def test_deterministic_for_seed(self):
        pop_a = initialize(make_config(), sphere)
        pop_b = initialize(make_config(), sphere)
        np.testing.assert_array_equal(pop_a.members, pop_b.members)

    def test_degenerate_bounds_give_exact_value(self):
        config = make_config(bounds=np.asarray([(2.0, 2.0), (-1.0, 3.0)]))
        pop = initialize(config, sphere)
        assert np.all(pop.members[:, 0] == 2.0)

    def test_rejects_non_finite_fitness(self):
        with pytest.raises(ValueError):
            initialize(make_config(), lambda v: float("nan"))

    def test_unit_box_sample_means(self):
        config = make_config(bounds=np.asarray([(0.0, 1.0)] * 10), population_size=30)
        pop = initialize(config, sphere)
        means = pop.members.mean(axis=0)
        assert np.all(means >= 0.3) and np.all(means <= 0.7)


class TestOperators:
    def test_mutant_is_difference_combination(self):
        config = make_config(population_size=5, scale_factor=0.7)
        members = np.arange(20, dtype=np.float64).reshape(5, 4)
        pop = Population(members=members, fitness=np.zeros(5), generation=0)
        rng = np.random.default_rng(3)
        target = 2
        mutant = mutate(pop, target, config, rng)
        candidates = []
        indices = [i for i in range(5) if i != target]
        for a in indices:
            for b in indices:
                for c in indices:
                    if len({a, b, c}) == 3:
                        candidates.append(members[a] + 0.7 * (members[b] - members[c]))
        assert any(np.allclose(mutant, cand, rtol=0, atol=1e-12) for cand in candidates)

    def test_mutation_needs_four_members(self):
        pop = Population(members=np.zeros((3, 2)), fitness=np.zeros(3), generation=0)
        with pytest.raises(ConfigError):
            mutate(pop, 0, make_config(bounds=bounds(2)), np.random.default_rng(0))

    def test_crossover_mixes_target_and_mutant(self):
        rng = np.random.default_rng(11)
        target = np.zeros(6)
        mutant = np.ones(6)
        config = make_config(bounds=bounds(6), crossover_rate=0.5)
        trial = crossover(target, mutant, config, rng)
        assert set(np.unique(trial)) <= {0.0, 1.0}
        assert np.any(trial == 1.0)  # J_rand forces at least one mutant gene

    def test_crossover_rate_zero_keeps_one_mutant_gene(self):
        rng = np.random.default_rng(0)
        config = make_config(bounds=bounds(8), crossover_rate=0.0)
        for _ in range(10):
            trial = crossover(np.zeros(8), np.ones(8), config, rng)
            assert trial.sum() == 1.0

    def test_crossover_rate_one_takes_full_mutant(self):
        rng = np.random.default_rng(0)
        config = make_config(bounds=bounds(8), crossover_rate=1.0)
        trial = crossover(np.zeros(8), np.ones(8), config, rng)
        assert trial.sum() == 8.0

    def test_clamp(self):
        clipped = clamp_bounds(np.asarray([-9.0, 9.0, 1.0]), bounds(3))
        np.testing.assert_array_equal(clipped, [-5.0, 5.0, 1.0])


class TestStep:
    def test_selection_never_worsens(self):
        config = make_config()
        pop = initialize(config, sphere)
        for _ in range(5):
            new = step(pop, sphere, config)
            assert np.all(new.fitness >= pop.fitness)
            assert new.generation == pop.generation + 1
            pop = new

    def test_input_population_untouched(self):
        config = make_config()
        pop = initialize(config, sphere)
        members = pop.members.copy()
        fitness = pop.fitness.copy()
        step(pop, sphere, config)
        np.testing.assert_array_equal(pop.members, members)
        np.testing.assert_array_equal(pop.fitness, fitness)

    def test_trial_members_respect_bounds(self):
        config = make_config(bounds=bounds(4, -0.5, 0.5))
        pop = initialize(config, sphere)
        for _ in range(10):
            pop = step(pop, sphere, config)
            assert np.all(pop.members >= -0.5) and np.all(pop.members <= 0.5)

    def test_default_rng_reproducible_from_generation(self):
        config = make_config()
        pop = initialize(config, sphere)
        again = step(pop, sphere, config)
        once_more = step(pop, sphere, config)
        np.testing.assert_array_equal(again.members, once_more.members)

    def test_ties_keep_parent(self):
        config = make_config(bounds=bounds(3))
        pop = initialize(config, lambda v: 0.0)
        stepped = step(pop, lambda v: 0.0, config)
        np.testing.assert_array_equal(stepped.members, pop.members)


class TestRun:
    def test_sphere_converges(self):
        config = DEConfig(
            bounds=bounds(10, -1.0, 1.0),
            population_size=30,
            scale_factor=0.7,
            crossover_rate=0.9,
            max_generations=200,
            rng_seed=42,
        )
        best, trajectory = run(config, sphere)
        assert sphere(best) >= -1e-3
        assert trajectory.best_fitness_series[-1] >= -1e-3

    def test_trajectory_best_non_decreasing(self):
        config = make_config(max_generations=40)
        _, trajectory = run(config, sphere)
        series = list(trajectory.best_fitness_series)
        assert all(b >= a for a, b in zip(series, series[1:]))

    def test_constant_oracle_stops_at_patience(self):
        config = make_config(max_generations=200, stagnation_patience=10)
        _, trajectory = run(config, lambda v: 1.5)
        assert trajectory.stop_reason == "stagnation"
        assert trajectory.final_generation == 10
        assert len(trajectory.points) == 11

    def test_success_predicate_stops_early(self):
        config = make_config(max_generations=200)
        _, trajectory = run(config, sphere, success_predicate=lambda member, f: f > -10.0)
        assert trajectory.stop_reason == "success"
        assert trajectory.final_generation < 200

    def test_budget_stop(self):
        config = make_config(max_generations=3, stagnation_patience=50)
        _, trajectory = run(config, sphere)
        assert trajectory.stop_reason == "budget"
        assert trajectory.final_generation == 3

    def test_bitwise_deterministic(self):
        config = make_config(max_generations=25)
        best_a, traj_a = run(config, sphere)
        best_b, traj_b = run(config, sphere)
        np.testing.assert_array_equal(best_a, best_b)
        assert list(traj_a.best_fitness_series) == list(traj_b.best_fitness_series)
        assert list(traj_a.mean_fitness_series) == list(traj_b.mean_fitness_series)

    def test_worker_count_does_not_change_trajectory(self):
        config = make_config(max_generations=15)
        best_a, traj_a = run(config, sphere, workers=1)
        best_b, traj_b = run(config, sphere, workers=4)
        np.testing.assert_array_equal(best_a, best_b)
        assert list(traj_a.best_fitness_series) == list(traj_b.best_fitness_series)

    def test_best_vector_matches_recorded_best(self):
        config = make_config(max_generations=20)
        best, trajectory = run(config, sphere)
        assert sphere(best) == trajectory.points[-1].best_fitness

    def test_multimodal_oracle_improves(self):
        # Rastrigin (maximized as its negation): the engine is oracle-agnostic
        # and still makes progress on a rugged landscape.
        def neg_rastrigin(v: np.ndarray) -> float:
            return -float(10.0 * v.size + np.sum(v * v - 10.0 * np.cos(2.0 * np.pi * v)))

        config = DEConfig(
            bounds=bounds(6, -5.12, 5.12),
            population_size=30,
            max_generations=80,
            stagnation_patience=80,
            rng_seed=3,
        )
        best, trajectory = run(config, neg_rastrigin)
        assert trajectory.best_fitness_series[-1] > trajectory.best_fitness_series[0]
        assert neg_rastrigin(best) > -30.0
