"""Dense feedforward classifier with neuron masking.

The network is a stack of fully connected layers with ReLU hidden
activations and linear output logits fed to a softmax cross-entropy loss.
All parameters are float64.  A neuron mask zeroes the post-activation
output of selected neurons, which is equivalent to removing them from the
computation (their bias can no longer reach downstream layers).  Masks
cover the hidden layers and, optionally, the input layer; output neurons
are never maskable.

Model file format: the 8 ASCII bytes "GTAPNN01", a little-endian uint32
header length, a UTF-8 JSON header {"layer_sizes": [...], "dtype": "f64",
"seed": ...}, then the parameters as little-endian float64: every weight
matrix in layer order (row-major, shape fan_out x fan_in), then every bias
vector in layer order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .datasets import Dataset

MODEL_MAGIC = b"GTAPNN01"

# Coalition-batched accuracy evaluation processes masks in fixed-size
# chunks; the size bounds memory, it never affects results.
_COALITION_CHUNK = 32


class ModelFormatError(ValueError):
    """Raised for malformed or inconsistent model files."""


class DivergenceError(RuntimeError):
    """Raised when training produces a non-finite loss or parameters."""


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths, input through output; at least one hidden layer."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise ValueError("need input, at least one hidden, and output layer")
        if any(s < 1 for s in sizes):
            raise ValueError("all layer sizes must be >= 1")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return self.layer_sizes[1:-1]


class DenseNetwork:
    """Weights and biases for a NetworkSpec; weight matrices are
    (fan_out, fan_in)."""

    def __init__(self, spec: NetworkSpec, weights, biases, seed: int | None = None):
        sizes = spec.layer_sizes
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ValueError("parameter count does not match the spec")
        self.spec = spec
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.seed = seed
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (sizes[l + 1], sizes[l])
            if w.shape != expect:
                raise ValueError(f"layer {l} weight shape {w.shape}, expected {expect}")
            if b.shape != (sizes[l + 1],):
                raise ValueError(f"layer {l} bias shape {b.shape}, expected ({sizes[l + 1]},)")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {l} contains non-finite parameters")

    @classmethod
    def initialized(cls, spec: NetworkSpec, seed: int = 0) -> "DenseNetwork":
        """Glorot-uniform initialization, one stream per layer."""
        weights, biases = [], []
        sizes = spec.layer_sizes
        for l in range(len(sizes) - 1):
            fan_in, fan_out = sizes[l], sizes[l + 1]
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            gen = rng.stream(seed, rng.NET_INIT, l)
            weights.append(gen.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(spec, weights, biases, seed=seed)

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            self.spec,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            seed=self.seed,
        )

    @property
    def n_weights(self) -> int:
        return sum(w.size for w in self.weights)


class NeuronMask:
    """Kept/removed bits over the prunable neurons of a network.

    The prunable universe enumerates all hidden neurons in layer order
    (and the input neurons first, when ``include_inputs`` is set).  Stage s
    means the activations entering weight layer s: stage 0 is the input
    vector, stage h (h >= 1) the post-ReLU output of hidden layer h.  The
    output layer is never part of the universe.
    """

    def __init__(self, spec: NetworkSpec, kept=None, include_inputs: bool = False):
        self.spec = spec
        self.include_inputs = bool(include_inputs)
        stages = ([0] if include_inputs else []) + list(range(1, len(spec.layer_sizes) - 1))
        self._stages = tuple(stages)
        offsets = {}
        start = 0
        for s in stages:
            size = spec.layer_sizes[s]
            offsets[s] = slice(start, start + size)
            start += size
        self._slices = offsets
        total = start
        if kept is None:
            bits = np.ones(total, dtype=bool)
        else:
            bits = np.array(kept, dtype=bool)
            if bits.shape != (total,):
                raise ValueError(f"kept vector must have length {total}, got {bits.shape}")
        bits.setflags(write=False)
        self.kept = bits

    @property
    def n_prunable(self) -> int:
        return self.kept.size

    def prunable_stages(self) -> tuple[int, ...]:
        return self._stages

    def stage_slice(self, stage: int) -> slice:
        if stage not in self._slices:
            raise ValueError(f"stage {stage} is not prunable in this universe")
        return self._slices[stage]

    def stage_kept(self, stage: int) -> np.ndarray:
        return self.kept[self.stage_slice(stage)]

    def stage_of(self, neuron_id: int) -> int:
        for s, sl in self._slices.items():
            if sl.start <= neuron_id < sl.stop:
                return s
        raise ValueError(f"neuron id {neuron_id} out of range")

    def stage_ids(self, stage: int) -> np.ndarray:
        sl = self.stage_slice(stage)
        return np.arange(sl.start, sl.stop)

    def kept_ids(self) -> np.ndarray:
        return np.flatnonzero(self.kept)

    def with_kept(self, kept) -> "NeuronMask":
        return NeuronMask(self.spec, kept, include_inputs=self.include_inputs)

    def keeping_only(self, ids) -> "NeuronMask":
        bits = np.zeros(self.n_prunable, dtype=bool)
        bits[np.asarray(list(ids), dtype=np.int64)] = True
        return self.with_kept(bits)

    def intersect(self, other: "NeuronMask") -> "NeuronMask":
        if other.spec.layer_sizes != self.spec.layer_sizes or other.include_inputs != self.include_inputs:
            raise ValueError("masks belong to different universes")
        return self.with_kept(self.kept & other.kept)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, NeuronMask)
            and self.spec.layer_sizes == other.spec.layer_sizes
            and self.include_inputs == other.include_inputs
            and np.array_equal(self.kept, other.kept)
        )

    def __repr__(self) -> str:
        return f"NeuronMask({int(self.kept.sum())}/{self.n_prunable} kept)"


def _stage_masks(mask: NeuronMask | None):
    if mask is None:
        return None
    return {s: mask.stage_kept(s).astype(np.float64) for s in mask.prunable_stages()}


def _masked_logits(net: DenseNetwork, x: np.ndarray, mask: NeuronMask | None) -> np.ndarray:
    stage_masks = _stage_masks(mask)
    a = np.asarray(x, dtype=np.float64)
    if stage_masks is not None and 0 in stage_masks:
        a = a * stage_masks[0]
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        if l == last:
            return z
        a = np.maximum(z, 0.0)
        if stage_masks is not None and (l + 1) in stage_masks:
            a = a * stage_masks[l + 1]
    raise AssertionError("unreachable")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward_masked(net: DenseNetwork, x, mask: NeuronMask | None = None) -> np.ndarray:
    """Class probabilities for one input vector or a batch of rows, with
    masked neurons contributing exactly zero activation."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != net.spec.n_inputs:
        raise ValueError(f"input has {x.shape[1]} features, network expects {net.spec.n_inputs}")
    probs = softmax(_masked_logits(net, x, mask))
    return probs[0] if single else probs


def evaluate_accuracy(net: DenseNetwork, mask: NeuronMask | None, batch: Dataset) -> float:
    """Fraction of instances whose predicted class matches the label.

    Argmax ties resolve to the lowest class index.  Softmax is monotone,
    so the argmax is taken over logits directly.
    """
    if len(batch) == 0:
        raise ValueError("cannot evaluate on an empty batch")
    logits = _masked_logits(net, batch.features, mask)
    preds = np.argmax(logits, axis=1)
    return float(np.mean(preds == batch.labels))


def coalition_prefix(net: DenseNetwork, features: np.ndarray, universe: NeuronMask):
    """Activations shared by every coalition evaluation: the forward pass
    up to (and including) the activation feeding the first maskable stage.

    Returns (first_weight_layer, activation).  With a hidden-only universe
    the first hidden activation is coalition-independent, which removes
    the input-layer matmul from the per-coalition cost.
    """
    x = np.asarray(features, dtype=np.float64)
    if universe.include_inputs:
        return 0, x
    a1 = np.maximum(x @ net.weights[0].T + net.biases[0], 0.0)
    return 1, a1


def coalition_accuracies(
    net: DenseNetwork,
    batch: Dataset,
    universe: NeuronMask,
    kept_matrix: np.ndarray,
    prefix=None,
    chunk: int = _COALITION_CHUNK,
) -> np.ndarray:
    """Accuracy of the network under each of a batch of coalition masks.

    ``kept_matrix`` has one row per coalition over the universe's prunable
    ids; the result equals evaluating each row as a NeuronMask, computed
    with shared-prefix and tensor-batched matmuls.
    """
    kept_matrix = np.atleast_2d(np.asarray(kept_matrix, dtype=bool))
    if kept_matrix.shape[1] != universe.n_prunable:
        raise ValueError("mask width does not match the prunable universe")
    if prefix is None:
        prefix = coalition_prefix(net, batch.features, universe)
    start_layer, base = prefix
    labels = batch.labels
    last = len(net.weights) - 1
    out = np.empty(kept_matrix.shape[0])
    for lo in range(0, kept_matrix.shape[0], chunk):
        rows = kept_matrix[lo : lo + chunk]
        stage = start_layer  # mask stage entering weight layer `stage`
        m = rows[:, universe.stage_slice(stage)].astype(np.float64)
        a = base[None, :, :] * m[:, None, :]
        for l in range(start_layer, last + 1):
            z = a @ net.weights[l].T + net.biases[l]
            if l == last:
                logits = z
            else:
                a = np.maximum(z, 0.0)
                m = rows[:, universe.stage_slice(l + 1)].astype(np.float64)
                a = a * m[:, None, :]
        preds = logits.argmax(axis=2)
        out[lo : lo + chunk] = (preds == labels[None, :]).mean(axis=1)
    return out


def rowwise_class_probabilities(
    net: DenseNetwork,
    features: np.ndarray,
    universe: NeuronMask,
    kept_rows: np.ndarray,
) -> np.ndarray:
    """Probabilities for row i of ``features`` under mask row i.

    Unlike coalition_accuracies this pairs each input with its own mask,
    which is the shape needed by dropout-style uncertainty trials.
    """
    x = np.asarray(features, dtype=np.float64)
    kept_rows = np.asarray(kept_rows, dtype=bool)
    if kept_rows.shape != (x.shape[0], universe.n_prunable):
        raise ValueError("need one mask row per input row")
    a = x
    if universe.include_inputs:
        a = a * kept_rows[:, universe.stage_slice(0)]
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        if l == last:
            return softmax(z)
        a = np.maximum(z, 0.0)
        a = a * kept_rows[:, universe.stage_slice(l + 1)]
    raise AssertionError("unreachable")


def _forward_cache(net: DenseNetwork, x: np.ndarray):
    pre = []
    acts = [x]
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w.T + b
        pre.append(z)
        acts.append(z if l == last else np.maximum(z, 0.0))
    return pre, acts


def cross_entropy(net: DenseNetwork, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy, computed with a stable log-sum-exp."""
    logits = _masked_logits(net, np.asarray(features, dtype=np.float64), None)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(labels)), labels]
    return float(np.mean(log_z - picked))


def loss_and_gradients(net: DenseNetwork, features: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradients w.r.t. every weight and bias."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    m = x.shape[0]
    pre, acts = _forward_cache(net, x)
    logits = pre[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    log_z = np.log(exp.sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(m), y]))

    delta = probs.copy()
    delta[np.arange(m), y] -= 1.0
    delta /= m
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    for l in range(len(net.weights) - 1, -1, -1):
        grads_w[l] = delta.T @ acts[l]
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l]) * (pre[l - 1] > 0.0)
    return loss, grads_w, grads_b


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("invalid training hyperparameters")


def train(net: DenseNetwork, dataset: Dataset, cfg: TrainConfig) -> DenseNetwork:
    """Minibatch SGD on softmax cross-entropy; the input network is left
    untouched and a trained copy is returned.

    Each epoch shuffles with a stream keyed by (seed, epoch), so a fixed
    seed reproduces the exact parameter trajectory.  Zero epochs returns a
    bit-identical copy.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if dataset.n_classes > net.spec.n_outputs:
        raise ValueError(
            f"dataset has {dataset.n_classes} classes, network only {net.spec.n_outputs} outputs"
        )
    out = net.copy()
    x, y = dataset.features, dataset.labels
    for epoch in range(cfg.epochs):
        order = rng.stream(cfg.seed, rng.TRAIN_SHUFFLE, epoch).permutation(len(dataset))
        for lo in range(0, len(dataset), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            loss, grads_w, grads_b = loss_and_gradients(out, x[idx], y[idx])
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            for w, gw in zip(out.weights, grads_w):
                w -= cfg.lr * gw
            for b, gb in zip(out.biases, grads_b):
                b -= cfg.lr * gb
        if not all(np.isfinite(w).all() for w in out.weights):
            raise DivergenceError(f"non-finite parameters after epoch {epoch}")
    return out


@dataclass
class SaliencyScores:
    """Weight-level and neuron-level importance scores for the baselines."""

    per_weight: list[np.ndarray]
    per_neuron: np.ndarray
    kind: str  # "abs_weight" | "weight_times_grad"


def saliency(
    net: DenseNetwork,
    dataset: Dataset | None,
    kind: str,
    universe: NeuronMask | None = None,
) -> SaliencyScores:
    """Importance scores: |w| per weight, or |w * dL/dw| with the loss
    gradient averaged over the dataset.

    Neuron scores aggregate the incoming per-weight scores of each
    prunable neuron (input neurons, which have no incoming weights, use
    their outgoing scores instead).
    """
    if universe is None:
        universe = NeuronMask(net.spec)
    if kind == "abs_weight":
        per_weight = [np.abs(w) for w in net.weights]
    elif kind == "weight_times_grad":
        if dataset is None or len(dataset) == 0:
            raise ValueError("weight_times_grad needs a non-empty dataset")
        _, grads_w, _ = loss_and_gradients(net, dataset.features, dataset.labels)
        if not all(np.isfinite(g).all() for g in grads_w):
            raise ValueError("non-finite gradient")
        per_weight = [np.abs(w * g) for w, g in zip(net.weights, grads_w)]
    else:
        raise ValueError(f"unknown saliency kind {kind!r}")

    per_neuron = np.zeros(universe.n_prunable)
    for stage in universe.prunable_stages():
        sl = universe.stage_slice(stage)
        if stage == 0:
            per_neuron[sl] = per_weight[0].sum(axis=0)
        else:
            per_neuron[sl] = per_weight[stage - 1].sum(axis=1)
    return SaliencyScores(per_weight=per_weight, per_neuron=per_neuron, kind=kind)


def save_model(net: DenseNetwork, path) -> None:
    header = {
        "layer_sizes": list(net.spec.layer_sizes),
        "dtype": "f64",
        "seed": net.seed,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.concatenate(
        [w.ravel() for w in net.weights] + [b.ravel() for b in net.biases]
    ).astype("<f8")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(len(head).to_bytes(4, "little"))
        f.write(head)
        f.write(payload.tobytes())


def load_model(path) -> DenseNetwork:
    data = Path(path).read_bytes()
    if len(data) < len(MODEL_MAGIC) + 4:
        raise ModelFormatError("file too short for a model header")
    if data[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise ModelFormatError(f"bad magic bytes, expected {MODEL_MAGIC!r}")
    pos = len(MODEL_MAGIC)
    head_len = int.from_bytes(data[pos : pos + 4], "little")
    pos += 4
    if len(data) < pos + head_len:
        raise ModelFormatError("truncated header")
    try:
        header = json.loads(data[pos : pos + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"unreadable header: {e}") from e
    pos += head_len
    if header.get("dtype") != "f64":
        raise ModelFormatError(f"unsupported dtype {header.get('dtype')!r}")
    try:
        spec = NetworkSpec(tuple(header["layer_sizes"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"invalid layer sizes: {e}") from e

    sizes = spec.layer_sizes
    expected = sum(sizes[l + 1] * sizes[l] for l in range(len(sizes) - 1))
    expected += sum(sizes[1:])
    blob = data[pos:]
    if len(blob) % 8 != 0 or len(blob) // 8 != expected:
        raise ModelFormatError(
            f"parameter payload holds {len(blob) // 8} floats, header implies {expected}"
        )
    flat = np.frombuffer(blob, dtype="<f8")
    weights, biases = [], []
    offset = 0
    for l in range(len(sizes) - 1):
        count = sizes[l + 1] * sizes[l]
        weights.append(flat[offset : offset + count].reshape(sizes[l + 1], sizes[l]).copy())
        offset += count
    for l in range(len(sizes) - 1):
        count = sizes[l + 1]
        biases.append(flat[offset : offset + count].copy())
        offset += count
    seed = header.get("seed")
    return DenseNetwork(spec, weights, biases, seed=seed)
