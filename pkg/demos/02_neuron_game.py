"""A trained network as a cooperative game over its hidden neurons.

Trains a small classifier on two Gaussian blobs, then treats each hidden
neuron as a player: a coalition's utility is the masked model's accuracy
on a held-out evaluation batch.
"""

import numpy as np

from gtap.datasets import make_synthetic, split
from gtap.games import Coalition, exact_power_index
from gtap.network import (
    DenseNetwork,
    NetworkSpec,
    NeuronMask,
    TrainConfig,
    evaluate_accuracy,
    train,
)
from gtap.pruning import NeuronGame

data = make_synthetic("blobs", 600, seed=0)
train_part, eval_part, test_part = split(data, (0.6, 0.2, 0.2), seed=0)

net = DenseNetwork.initialized(NetworkSpec((2, 8, 2)), seed=0)
net = train(net, train_part, TrainConfig(lr=0.3, epochs=60, batch_size=16, seed=0))
print("full-model accuracy:", evaluate_accuracy(net, None, test_part))

universe = NeuronMask(net.spec)
game = NeuronGame(net, universe, eval_part)
print("players:", game.n_players, "| grand coalition value:", game.grand_value())

# the empty coalition is the fully masked model: logits collapse to the
# output biases
print("empty coalition value:", game.evaluate(Coalition.empty(game.n_players)))

# with only 8 players the game is small enough for the exact solvers
est = exact_power_index(game, "banzhaf")
print("\nexact Banzhaf index per hidden neuron")
for i, (v, kept_alone) in enumerate(zip(est.values, np.eye(8, dtype=bool))):
    solo = game.evaluate(Coalition(kept_alone))
    print(f"  neuron {i}: index {v:+.4f}   accuracy alone {solo:.3f}")

order = est.ranked_players()
print("\nranking (best first):", order.tolist())
mask = game.mask_keeping(order[:3])
print("top-3 sub-network accuracy:", evaluate_accuracy(net, mask, test_part))
