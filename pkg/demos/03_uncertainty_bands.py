"""Dilution-variance bands and selection of the inclusion bias d.

Sweeps the (p, q) grid for a trained classifier: phase one removes a fixed
fraction q of the prunable neurons, phase two drops survivors with
probability p, and the variance of the true-class probability over many
such trials measures output uncertainty.  The diagonal argmax t* marks the
dilution level of maximal uncertainty; d = 1 - t* is the estimated
winning-ticket size used to bias coalition sampling.
"""

from gtap.datasets import make_synthetic, split
from gtap.network import DenseNetwork, NetworkSpec, NeuronMask, TrainConfig, train
from gtap.uncertainty import MCUEConfig, band_grid, mcue, select_bias

data = make_synthetic("blobs", 800, seed=3)
train_part, eval_part = split(data, (0.7, 0.3), seed=3)
net = DenseNetwork.initialized(NetworkSpec((2, 12, 6, 2)), seed=3)
net = train(net, train_part, TrainConfig(lr=0.3, epochs=80, batch_size=16, seed=3))
universe = NeuronMask(net.spec)

# a single cell: variance of the trial scores plus its bootstrap error
var, se = mcue(MCUEConfig(p=0.3, q=0.3, k=400, seed=0), net, universe, eval_part)
print(f"MCUE(0.3, 0.3) variance {var:.5f} +- {se:.5f}")

grid = band_grid(net, universe, eval_part, axis_points=11, k=300, seed=0)
print("\ndiagonal profile (p = q)")
for p, v in grid.diagonal():
    print(f"  {p:.1f}  {v:.5f} {'#' * int(v * 200)}")

selection = select_bias(grid)
print(f"\nt* = {selection.t_star:.2f}  ->  d = {selection.d:.2f}")

grid.to_csv("bands_demo.csv")
print("grid written to bands_demo.csv")
