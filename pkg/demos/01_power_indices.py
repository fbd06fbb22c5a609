"""Power indices on small voting games: exact solvers vs Monte-Carlo.

A weighted voting game [quota 3; weights (2, 1, 1)] is the classic
illustration: player 0 swings three of the four coalitions of the others,
players 1 and 2 swing one each.
"""

import numpy as np

from gtap import (
    SamplingConfig,
    WeightedVotingGame,
    exact_power_index,
    mc_shapley,
    pie_estimate,
    shared_sample_estimate,
)

game = WeightedVotingGame([2, 1, 1], quota=3)

print("exact indices")
for kind, t in (("shapley", None), ("banzhaf", None), ("biased_banzhaf", 0.3)):
    est = exact_power_index(game, kind, t=t)
    print(f"  {est.index_kind:22s} {np.round(est.values, 4)}")

# Monte-Carlo estimators converge to the same values; stderr tracks the
# sampling error per player
print("\nMonte-Carlo, k = 50,000")
est = pie_estimate(game, SamplingConfig(t=0.5, k=50_000, seed=1))
print(f"  {est.index_kind:22s} {np.round(est.values, 4)} +- {np.round(est.stderr, 4)}")
est = mc_shapley(game, k=50_000, seed=1)
print(f"  {est.index_kind:22s} {np.round(est.values, 4)} +- {np.round(est.stderr, 4)}")

# the shared-pool variant spends one utility evaluation per coalition for
# ALL players, at the price of dependent estimates
est = shared_sample_estimate(game, SamplingConfig(t=0.5, k=50_000, seed=1))
print(f"  shared pool            {np.round(est.values, 4)} +- {np.round(est.stderr, 4)}")

# biased sampling: inclusion probability t reshapes which coalition sizes
# dominate the estimate
print("\nbiased Banzhaf across t")
for t in (0.1, 0.3, 0.5, 0.7, 0.9):
    est = exact_power_index(game, "biased_banzhaf", t=t)
    print(f"  t={t:.1f}  {np.round(est.values, 4)}")
