"""End-to-end pruning comparison on a synthetic task.

Runs the index-driven schedules (one-shot top-n, iterated pruning,
iterated building) against magnitude and random baselines across a range
of retained fractions and prints the resulting compression table.
"""

import collections

import numpy as np

from gtap.datasets import make_synthetic, split, subsample
from gtap.network import DenseNetwork, NetworkSpec, NeuronMask, TrainConfig, evaluate_accuracy, train
from gtap.pruning import NeuronGame, PruneConfig, compression_curve
from gtap.uncertainty import band_grid, select_bias

data = make_synthetic("xor", 1200, seed=5)
train_part, eval_source, test_part = split(data, (0.6, 0.2, 0.2), seed=5)
net = DenseNetwork.initialized(NetworkSpec((2, 16, 8, 2)), seed=5)
net = train(net, train_part, TrainConfig(lr=0.4, epochs=150, batch_size=32, seed=5))
print("unpruned test accuracy:", evaluate_accuracy(net, None, test_part))

universe = NeuronMask(net.spec)
eval_batch = subsample(eval_source, 128, seed=5)

selection = select_bias(band_grid(net, universe, eval_batch, axis_points=11, k=300, seed=5))
print(f"selected bias d = {selection.d:.2f} (t* = {selection.t_star:.2f})")

configs = [
    PruneConfig(method="top_n", fraction=1.0, index_kind="biased_banzhaf",
                d=selection.d, samples=300),
    PruneConfig(method="iterated_prune", fraction=1.0, index_kind="banzhaf",
                d=selection.d, step=2, samples=300),
    PruneConfig(method="iterated_build", fraction=1.0, index_kind="biased_banzhaf",
                d=selection.d, step=2, samples=300),
    PruneConfig(method="wmp", fraction=1.0, samples=1),
    PruneConfig(method="random", fraction=1.0, samples=1),
]
fractions = (1.0, 0.75, 0.5, 0.3, 0.2)
curve = compression_curve(net, eval_batch, test_part, configs, fractions, seeds=range(3))

table = collections.defaultdict(dict)
for row in curve.rows:
    table[row.method].setdefault(row.fraction, []).append(row.accuracy)

print(f"\n{'retained':>8}", *(f"{m:>15}" for m in sorted(table)))
for f in fractions:
    cells = [f"{np.mean(table[m][f]):>15.3f}" for m in sorted(table)]
    print(f"{f:>8.2f}", *cells)

curve.to_csv("curve_demo.csv")
print("\nrows written to curve_demo.csv")
