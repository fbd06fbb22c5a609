"""Output-variance estimation under two-phase random neuron dilution.

One trial removes a fixed fraction q of the prunable neurons (a uniformly
random subset of the survivors' complement size), then drops each
surviving neuron independently with probability p, and scores the diluted
model on one uniformly drawn instance.  The sample variance of the trial
scores over many trials measures how uncertain the model's output becomes
at that dilution level; sweeping (p, q) over a grid locates the band of
high uncertainty, and the diagonal maximum p = q picks the inclusion bias
d = 1 - argmax used by the biased power index.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .datasets import Dataset
from .network import DenseNetwork, NeuronMask, rowwise_class_probabilities

_BOOTSTRAP_RESAMPLES = 1_000
_BOOTSTRAP_CHUNK = 50

TRIAL_SCORES = ("true_class_prob", "correct")


@dataclass(frozen=True)
class MCUEConfig:
    """Dilution trial parameters.

    ``p``: dropout probability applied to the surviving neurons.
    ``q``: fraction of neurons eliminated by the fixed-size first phase.
    ``k``: trial count.
    ``score``: the per-trial scalar; the default is the probability the
    diluted model assigns to the sampled instance's true class, "correct"
    scores 0/1 on the argmax instead.
    ``instances_per_trial``: average the score over this many sampled
    instances per trial (1 keeps the single-instance form).
    """

    p: float
    q: float
    k: int = 500
    seed: int = 0
    score: str = "true_class_prob"
    instances_per_trial: int = 1

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError("p and q must lie in [0, 1]")
        if self.k < 2:
            raise ValueError("variance estimation needs k >= 2 trials")
        if self.score not in TRIAL_SCORES:
            raise ValueError(f"score must be one of {TRIAL_SCORES}")
        if self.instances_per_trial < 1:
            raise ValueError("instances_per_trial must be >= 1")

    @property
    def retained_fraction(self) -> float:
        return 1.0 - self.q


def _trial_scores(cfg: MCUEConfig, net: DenseNetwork, universe: NeuronMask,
                  dataset: Dataset) -> np.ndarray:
    """The k per-trial scalars; draw order per trial is (subset keys,
    dropout uniforms, instance picks), all from one stream."""
    n = universe.n_prunable
    gen = rng.stream(cfg.seed, rng.MCUE_TRIALS)

    keep_count = math.floor((1.0 - cfg.q) * n)
    subset_keys = gen.random((cfg.k, n))
    kept = np.zeros((cfg.k, n), dtype=bool)
    if keep_count > 0:
        chosen = np.argsort(subset_keys, axis=1)[:, :keep_count]
        np.put_along_axis(kept, chosen, True, axis=1)
    kept &= gen.random((cfg.k, n)) >= cfg.p

    picks = gen.random((cfg.k, cfg.instances_per_trial))
    idx = np.minimum((picks * len(dataset)).astype(np.int64), len(dataset) - 1)

    scores = np.zeros(cfg.k)
    for j in range(cfg.instances_per_trial):
        rows = idx[:, j]
        probs = rowwise_class_probabilities(net, dataset.features[rows], universe, kept)
        labels = dataset.labels[rows]
        if cfg.score == "true_class_prob":
            scores += probs[np.arange(cfg.k), labels]
        else:
            scores += (probs.argmax(axis=1) == labels).astype(float)
    return scores / cfg.instances_per_trial


def _sample_variance(scores: np.ndarray, axis=None) -> np.ndarray:
    # centering on the first score keeps the variance of a constant
    # sequence exactly zero (the plain mean picks up summation rounding)
    centered = scores - scores[..., :1] if scores.ndim > 1 else scores - scores[0]
    return centered.var(axis=axis, ddof=1)


def _bootstrap_stderr(scores: np.ndarray, seed: int) -> float:
    """Standard error of the sample variance via seeded bootstrap."""
    k = scores.size
    gen = rng.stream(seed, rng.MCUE_BOOTSTRAP)
    resampled = np.empty(_BOOTSTRAP_RESAMPLES)
    for lo in range(0, _BOOTSTRAP_RESAMPLES, _BOOTSTRAP_CHUNK):
        size = min(_BOOTSTRAP_CHUNK, _BOOTSTRAP_RESAMPLES - lo)
        idx = gen.integers(0, k, size=(size, k))
        resampled[lo : lo + size] = _sample_variance(scores[idx], axis=1)
    return float(resampled.std(ddof=1))


def mcue(cfg: MCUEConfig, net: DenseNetwork, universe: NeuronMask,
         dataset: Dataset) -> tuple[float, float]:
    """Monte-Carlo uncertainty estimate at one (p, q) point.

    Returns the unbiased sample variance of the trial scores and its
    bootstrap standard error.
    """
    if len(dataset) == 0:
        raise ValueError("cannot run dilution trials on an empty dataset")
    scores = _trial_scores(cfg, net, universe, dataset)
    variance = float(_sample_variance(scores))
    return variance, _bootstrap_stderr(scores, cfg.seed)


@dataclass
class UncertaintyGrid:
    """Variance surface over the (p, q) grid, plus bootstrap errors."""

    p_values: np.ndarray
    q_values: np.ndarray
    variance: np.ndarray
    stderr: np.ndarray
    k: int
    seed: int
    trials: np.ndarray | None = None  # (p, q, k) trial scores when audited

    def __post_init__(self):
        self.p_values = np.asarray(self.p_values, dtype=float)
        self.q_values = np.asarray(self.q_values, dtype=float)
        expect = (self.p_values.size, self.q_values.size)
        if self.variance.shape != expect or self.stderr.shape != expect:
            raise ValueError("variance/stderr shape does not match the grid axes")
        if np.any(self.variance < 0):
            raise ValueError("variances cannot be negative")

    def diagonal(self) -> np.ndarray:
        """(p, variance) pairs along p = q; needs matching axes."""
        if not np.array_equal(self.p_values, self.q_values):
            raise ValueError("grid axes differ, no p = q diagonal")
        return np.column_stack([self.p_values, np.diagonal(self.variance)])

    def to_csv(self, out) -> None:
        """One row per cell, reals at 17 significant digits."""
        close = False
        if not hasattr(out, "write"):
            out = open(out, "w", newline="")
            close = True
        try:
            out.write("p,q,variance,stderr,k,seed\n")
            for i, p in enumerate(self.p_values):
                for j, q in enumerate(self.q_values):
                    out.write(
                        f"{p:.17g},{q:.17g},{self.variance[i, j]:.17g},"
                        f"{self.stderr[i, j]:.17g},{self.k},{self.seed}\n"
                    )
        finally:
            if close:
                out.close()

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def band_grid(
    net: DenseNetwork,
    universe: NeuronMask,
    dataset: Dataset,
    axis_points: int = 21,
    k: int = 500,
    seed: int = 0,
    score: str = "true_class_prob",
    threads: int = 1,
    keep_trials: bool = False,
) -> UncertaintyGrid:
    """Fill the (p, q) variance grid over [0, 1] x [0, 1].

    Every cell runs `mcue` with a sub-seed derived from (seed, i, j), so
    cells can be evaluated concurrently in any order without changing the
    result.
    """
    if axis_points < 2:
        raise ValueError("need at least the two endpoint grid values")
    axis = np.linspace(0.0, 1.0, axis_points)
    cells = [(i, j) for i in range(axis_points) for j in range(axis_points)]

    def one_cell(cell: tuple[int, int]):
        i, j = cell
        cfg = MCUEConfig(
            p=float(axis[i]),
            q=float(axis[j]),
            k=k,
            seed=rng.derive_seed(seed, rng.BAND_CELL, i, j),
            score=score,
        )
        scores = _trial_scores(cfg, net, universe, dataset)
        return float(_sample_variance(scores)), _bootstrap_stderr(scores, cfg.seed), scores

    variance = np.zeros((axis_points, axis_points))
    stderr = np.zeros((axis_points, axis_points))
    trials = np.zeros((axis_points, axis_points, k)) if keep_trials else None
    if threads <= 1:
        results = [one_cell(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_cell, cells))
    for (i, j), (var, se, scores) in zip(cells, results):
        variance[i, j] = var
        stderr[i, j] = se
        if trials is not None:
            trials[i, j] = scores
    return UncertaintyGrid(axis, axis.copy(), variance, stderr, k=k, seed=seed, trials=trials)


@dataclass
class BiasSelection:
    """Inclusion bias picked from the grid diagonal.

    ``t_star`` is the diagonal argmax of the variance (ties toward smaller
    p) and ``d = 1 - t_star`` the resulting bias.  ``degenerate`` flags an
    all-zero diagonal, where d falls back to 0.5.
    """

    t_star: float
    d: float
    diagonal: np.ndarray
    degenerate: bool = False


def select_bias(grid: UncertaintyGrid) -> BiasSelection:
    diag = grid.diagonal()
    variances = diag[:, 1]
    if np.all(variances == 0.0):
        return BiasSelection(t_star=0.5, d=0.5, diagonal=diag, degenerate=True)
    t_star = float(diag[int(np.argmax(variances)), 0])
    return BiasSelection(t_star=t_star, d=1.0 - t_star, diagonal=diag)
