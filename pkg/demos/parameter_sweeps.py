"""
Sweeping patch radius and the attack/stealth trade-off
======================================================

Two dials shape an attack: the patch radius (bigger patches do more damage
and are easier to see) and the fitness weight alpha (alpha = 1 optimizes
pure damage; lower alpha trades damage for stealth). Sweeps re-run a batch
per value and aggregate the results.
"""

import numpy as np

from vipatch import AttackConfig, make_fixture, run_sweep

items = []
for index in range(4):
    pair, points = make_fixture(seed=index)
    items.append((f"pair{index:02d}", pair, points.astype(np.float64)))

config = AttackConfig(
    task="counting",
    population_size=12,
    max_generations=16,
    stagnation_patience=8,
    seed=2,
)

print("radius sweep (damage grows, visible fidelity drops):")
for radius, batch in run_sweep(items, config, "radius", [16, 32, 64], pool_size=4):
    effect = float(np.mean([t.game0 for t in batch.adversarial_tables()]))
    fidelity = float(np.mean([t.psnr_vis for t in batch.adversarial_tables()]))
    print(f"  r={radius:<4.0f} GAME(0) {effect:6.2f}   visible PSNR {fidelity:5.2f} dB")

print("alpha sweep (stealth term S rises as alpha falls):")
for alpha, batch in run_sweep(items, config, "alpha", [1.0, 0.5, 0.1], pool_size=4):
    stealth = float(np.mean([o.result.report.s_term for o in batch.outcomes]))
    effect = float(np.mean([t.game0 for t in batch.adversarial_tables()]))
    print(f"  alpha={alpha:<4} S {stealth:6.2f}   GAME(0) {effect:6.2f}")
