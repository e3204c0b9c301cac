"""
The search engine on a toy problem
==================================

The attack optimizer is a self-contained differential evolution engine:
DE/rand/1/bin with one-to-one greedy selection, seeded per generation so
results never depend on worker count. Here it maximizes the (negated)
sphere function; the best fitness per generation never decreases.
"""

import numpy as np

from vipatch import DEConfig, run


def sphere(vector: np.ndarray) -> float:
    return -float(np.sum(np.square(vector)))


config = DEConfig(
    bounds=np.asarray([(-1.0, 1.0)] * 10),
    population_size=30,
    scale_factor=0.7,
    crossover_rate=0.9,
    max_generations=200,
    stagnation_patience=200,
    rng_seed=42,
)
best, trajectory = run(config, sphere)

print(f"stop reason: {trajectory.stop_reason}")
for point in trajectory.points[:: len(trajectory.points) // 10]:
    print(f"  generation {point.generation:3d}  best {point.best_fitness:.3e}")
print(f"final best fitness: {trajectory.points[-1].best_fitness:.3e}")
print(f"best vector norm: {np.linalg.norm(best):.3e}")

# Early stopping: a fitness landscape with nothing to improve stops after
# `stagnation_patience` flat generations instead of burning the budget.
flat_config = DEConfig(
    bounds=np.asarray([(-1.0, 1.0)] * 4),
    population_size=12,
    max_generations=500,
    stagnation_patience=10,
    rng_seed=1,
)
_, flat = run(flat_config, lambda v: 0.0)
print(f"constant landscape: stopped at generation {flat.points[-1].generation}"
      f" ({flat.stop_reason})")
