"""Detectability when each sentence hits the bank with a fixed probability."""

import numpy as np

from swan.detector import z_score
from swan.evalkit import binomial_auc, roc, simulate_detection

for p_pos in (0.3, 0.5, 0.7, 0.9):
    sim = simulate_detection(250, 5, p_pos, 0.05, 0.05, seed=0)
    print(f"p_pos={p_pos:.1f}  simulated auc={sim.auc:.4f}  closed form={binomial_auc(5, p_pos, 0.05):.4f}  "
          f"tpr@1%={sim.tpr_at[0.01]:.3f}")

# z for every possible count in a 5 sentence paragraph at lambda 0.05
print([round(z_score(k, 5, 0.05), 3) for k in range(6)])

# roc on hand-made scores
rng = np.random.default_rng(1)
pos = rng.normal(2.0, 1.0, 200)
neg = rng.normal(0.0, 1.0, 200)
result = roc(pos, neg)
print("auc", round(result.auc, 4), "tpr at fixed fpr", result.tpr_at)
