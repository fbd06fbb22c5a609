"""Neuron games, pruning schedules, baselines and compression curves.

A trained network plus an evaluation batch induces a coalitional game:
the players are the prunable neurons and the utility of a coalition is
the masked model's accuracy on the batch.  The schedules rank neurons by
estimated power indices:

- top_n: one estimation round, keep the r highest.
- iterated_prune: repeatedly drop the worst few survivors and re-estimate
  with the dropped neurons excluded from every sampled coalition.
- iterated_build: grow the kept set from empty, re-estimating with the
  kept neurons forced into every sampled coalition.

Baselines rank by |weight| (wmp), |weight * gradient| (wgmp) or uniformly
at random, at neuron or individual-weight granularity.
"""

from __future__ import annotations

import io
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng
from .datasets import Dataset
from .games import (
    Coalition,
    Game,
    PowerIndexEstimate,
    SamplingConfig,
    mc_shapley,
    pie_estimate,
    restricted_game,
)
from .network import (
    DenseNetwork,
    NeuronMask,
    coalition_accuracies,
    coalition_prefix,
    evaluate_accuracy,
    saliency,
)

GTAP_METHODS = ("top_n", "iterated_prune", "iterated_build")
BASELINE_METHODS = ("wmp", "wgmp", "random")
INDEX_KINDS = ("shapley", "banzhaf", "biased_banzhaf")

_SEED_MASK = (1 << 64) - 1


class PruneAborted(RuntimeError):
    """An iterated schedule failed mid-run; carries the partial state."""

    def __init__(self, message: str, completed_rounds: int, committed_ids: list[int]):
        super().__init__(f"{message} (completed {completed_rounds} rounds, "
                         f"committed {len(committed_ids)} neurons)")
        self.completed_rounds = completed_rounds
        self.committed_ids = committed_ids


class NeuronGame(Game):
    """Coalitional game induced by masking a network on a fixed batch.

    The grand coalition's value equals the unpruned model's accuracy on
    the evaluation batch.  Batched evaluation reuses the activations that
    no mask can touch, so one utility costs only the masked tail of the
    forward pass.
    """

    def __init__(self, net: DenseNetwork, universe: NeuronMask, eval_batch: Dataset,
                 label: str = ""):
        if len(eval_batch) == 0:
            raise ValueError("evaluation batch is empty")
        super().__init__(universe.n_prunable, label or f"neuron-game({universe.n_prunable})")
        self.net = net
        self.universe = universe
        self.eval_batch = eval_batch
        self._prefix = coalition_prefix(net, eval_batch.features, universe)

    def evaluate(self, coalition: Coalition) -> float:
        return float(self.evaluate_many(coalition.bits[None, :])[0])

    def evaluate_many(self, bits: np.ndarray) -> np.ndarray:
        return coalition_accuracies(
            self.net, self.eval_batch, self.universe, bits, prefix=self._prefix
        )

    def grand_value(self) -> float:
        return self.evaluate(Coalition.full(self.n_players))

    def mask_keeping(self, ids) -> NeuronMask:
        return self.universe.keeping_only(ids)


@dataclass(frozen=True)
class PruneConfig:
    """Settings shared by the schedules and baselines.

    ``fraction`` is the kept fraction of the prunable universe (weights,
    for weight-granularity baselines).  ``samples`` is the per-player
    utility-sample budget for a whole schedule; iterated schedules divide
    it evenly over their rounds so every method sees a comparable number
    of evaluations.  ``step`` is the number of neurons committed per
    iteration.
    """

    method: str
    fraction: float
    index_kind: str = "biased_banzhaf"
    d: float = 0.5
    step: int = 1
    samples: int = 256
    granularity: str = "neuron"
    seed: int = 0

    def __post_init__(self):
        if self.method not in GTAP_METHODS + BASELINE_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if self.index_kind not in INDEX_KINDS:
            raise ValueError(f"unknown index kind {self.index_kind!r}")
        if not 0.0 <= self.d <= 1.0:
            raise ValueError("bias d must lie in [0, 1]")
        if self.step < 1 or self.samples < 1:
            raise ValueError("step and samples must be >= 1")
        if self.granularity not in ("neuron", "weight"):
            raise ValueError(f"unknown granularity {self.granularity!r}")


def _target_keep(n: int, fraction: float) -> int:
    return min(n, max(1, int(np.ceil(fraction * n))))


def _ranked(values: np.ndarray) -> np.ndarray:
    """Ids ordered by value descending, ties to the lower id."""
    return np.lexsort((np.arange(values.size), -values))


def _inclusion_probability(cfg: PruneConfig) -> float:
    return 0.5 if cfg.index_kind == "banzhaf" else cfg.d


def _estimate(game: Game, cfg: PruneConfig, k: int, seed: int,
              include_ids=(), exclude_ids=(), players=None,
              threads: int = 1) -> PowerIndexEstimate:
    """One estimation round under the current include/exclude commitments."""
    include_ids = np.asarray(list(include_ids), dtype=np.int64)
    exclude_ids = np.asarray(list(exclude_ids), dtype=np.int64)
    if cfg.index_kind == "shapley":
        # permutation sampling has no forced sets; estimate on the
        # sub-game over free players with the committed sets pinned
        free = np.setdiff1d(np.arange(game.n_players), np.union1d(include_ids, exclude_ids))
        sub = restricted_game(game, free, pinned_present=include_ids)
        est = mc_shapley(sub, k=k, seed=seed, threads=threads)
        values = np.full(game.n_players, np.nan)
        stderr = np.full(game.n_players, np.nan)
        samples = np.zeros(game.n_players, dtype=np.int64)
        values[exclude_ids] = -np.inf
        stderr[exclude_ids] = 0.0
        values[free] = est.values
        stderr[free] = est.stderr
        samples[free] = est.samples_used
        return PowerIndexEstimate(values, stderr, samples, est.index_kind,
                                  est.method, seed=seed)
    sampling = SamplingConfig(
        t=_inclusion_probability(cfg),
        k=k,
        include_set=Coalition.from_ids(include_ids, game.n_players) if include_ids.size else None,
        exclude_set=Coalition.from_ids(exclude_ids, game.n_players) if exclude_ids.size else None,
        seed=seed,
    )
    return pie_estimate(game, sampling, players=players, threads=threads)


def top_n_prune(game: NeuronGame, cfg: PruneConfig, threads: int = 1) -> NeuronMask:
    """Single estimation round; keep the r highest-index neurons."""
    r = _target_keep(game.n_players, cfg.fraction)
    est = _estimate(game, cfg, k=cfg.samples, seed=cfg.seed, threads=threads)
    kept = _ranked(est.values)[:r]
    return game.mask_keeping(kept)


def iterated_prune(game: NeuronGame, cfg: PruneConfig, threads: int = 1) -> NeuronMask:
    """Drop the ``step`` lowest-ranked survivors per round, re-estimating
    with every dropped neuron excluded from the sampled coalitions."""
    n = game.n_players
    r = _target_keep(n, cfg.fraction)
    survivors = np.arange(n)
    if r == n:
        return game.mask_keeping(survivors)
    rounds = int(np.ceil((n - r) / cfg.step))
    k_round = max(1, cfg.samples // rounds)
    excluded: list[int] = []
    for j in range(rounds):
        drop = min(cfg.step, survivors.size - r)
        try:
            est = _estimate(
                game, cfg, k=k_round, seed=(cfg.seed + j) & _SEED_MASK,
                exclude_ids=excluded, players=survivors, threads=threads,
            )
        except Exception as e:
            raise PruneAborted(f"index estimation failed: {e}", j, excluded) from e
        order = _ranked(est.values)
        ranked_survivors = order[np.isin(order, survivors)]
        doomed = ranked_survivors[-drop:]
        excluded.extend(int(i) for i in doomed)
        survivors = np.setdiff1d(survivors, doomed)
    return game.mask_keeping(survivors)


def iterated_build(game: NeuronGame, cfg: PruneConfig, threads: int = 1) -> NeuronMask:
    """Grow the kept set by the ``step`` highest-ranked candidates per
    round, re-estimating with the kept set forced into every coalition."""
    n = game.n_players
    r = _target_keep(n, cfg.fraction)
    rounds = int(np.ceil(r / cfg.step))
    k_round = max(1, cfg.samples // rounds)
    included: list[int] = []
    for j in range(rounds):
        add = min(cfg.step, r - len(included))
        candidates = np.setdiff1d(np.arange(n), np.asarray(included, dtype=np.int64))
        try:
            est = _estimate(
                game, cfg, k=k_round, seed=(cfg.seed + j) & _SEED_MASK,
                include_ids=included, players=candidates, threads=threads,
            )
        except Exception as e:
            raise PruneAborted(f"index estimation failed: {e}", j, included) from e
        order = _ranked(est.values)
        ranked_candidates = order[np.isin(order, candidates)]
        included.extend(int(i) for i in ranked_candidates[:add])
    return game.mask_keeping(included)


def layerwise_indices(game: NeuronGame, stage: int, cfg: PruneConfig,
                      threads: int = 1) -> PowerIndexEstimate:
    """Indices for one layer's neurons with every other layer's prunable
    neurons forced present.

    Estimates produced this way are comparable within the layer only;
    the ``scope`` field marks them as such.
    """
    layer_players = game.universe.stage_ids(stage)
    if layer_players.size == 0:
        raise ValueError(f"stage {stage} has no prunable neurons")
    others = np.setdiff1d(np.arange(game.n_players), layer_players)
    est = _estimate(game, cfg, k=cfg.samples, seed=cfg.seed,
                    include_ids=others, players=layer_players, threads=threads)
    est.scope = f"layer:{stage}"
    return est


@dataclass
class WeightMask:
    """Kept bits per weight matrix, for weight-granularity baselines."""

    kept: list[np.ndarray]

    def n_kept(self) -> int:
        return int(sum(k.sum() for k in self.kept))

    def n_total(self) -> int:
        return int(sum(k.size for k in self.kept))


def apply_weight_mask(net: DenseNetwork, mask: WeightMask) -> DenseNetwork:
    """Zero the dropped weights; biases are untouched."""
    if len(mask.kept) != len(net.weights):
        raise ValueError("weight mask does not match the network")
    weights = [w * k for w, k in zip(net.weights, mask.kept)]
    return DenseNetwork(net.spec, weights, [b.copy() for b in net.biases], seed=net.seed)


def baseline_prune(
    net: DenseNetwork,
    cfg: PruneConfig,
    universe: NeuronMask | None = None,
    dataset: Dataset | None = None,
) -> NeuronMask | WeightMask:
    """Magnitude, weight-gradient and random baselines.

    Neuron granularity keeps the top-scoring fraction of the prunable
    universe; weight granularity zeroes the lowest-scored weights anywhere
    in the network until only the requested fraction survives.  Ties keep
    the lower index.
    """
    if cfg.method not in BASELINE_METHODS:
        raise ValueError(f"{cfg.method!r} is not a baseline method")
    if universe is None:
        universe = NeuronMask(net.spec)

    if cfg.granularity == "neuron":
        n = universe.n_prunable
        r = _target_keep(n, cfg.fraction)
        if cfg.method == "random":
            order = rng.stream(cfg.seed, rng.RANDOM_PRUNE).permutation(n)
        else:
            kind = "abs_weight" if cfg.method == "wmp" else "weight_times_grad"
            scores = saliency(net, dataset, kind, universe).per_neuron
            order = _ranked(scores)
        return universe.keeping_only(order[:r])

    total = net.n_weights
    m = min(total, max(1, int(np.ceil(cfg.fraction * total))))
    if cfg.method == "random":
        flat_order = rng.stream(cfg.seed, rng.RANDOM_PRUNE).permutation(total)
    else:
        kind = "abs_weight" if cfg.method == "wmp" else "weight_times_grad"
        per_weight = saliency(net, dataset, kind, universe).per_weight
        flat = np.concatenate([pw.ravel() for pw in per_weight])
        flat_order = _ranked(flat)
    kept_flat = np.zeros(total, dtype=bool)
    kept_flat[flat_order[:m]] = True
    kept, offset = [], 0
    for w in net.weights:
        kept.append(kept_flat[offset : offset + w.size].reshape(w.shape))
        offset += w.size
    return WeightMask(kept)


def run_method(
    net: DenseNetwork,
    cfg: PruneConfig,
    game: NeuronGame | None = None,
    universe: NeuronMask | None = None,
    saliency_batch: Dataset | None = None,
    threads: int = 1,
) -> NeuronMask | WeightMask:
    """Dispatch one pruning method; GTAP schedules need the neuron game."""
    if cfg.method in GTAP_METHODS:
        if game is None:
            raise ValueError(f"{cfg.method} needs a NeuronGame")
        fn = {"top_n": top_n_prune, "iterated_prune": iterated_prune,
              "iterated_build": iterated_build}[cfg.method]
        return fn(game, cfg, threads=threads)
    return baseline_prune(net, cfg, universe=universe, dataset=saliency_batch)


@dataclass
class CurveRow:
    method: str
    index_kind: str
    d: float
    fraction: float
    accuracy: float
    seed: int
    k: int
    wall_ms: float


@dataclass
class CompressionCurve:
    """(retained fraction, test accuracy) rows per method and seed.

    Rows are ordered method-first, then fraction descending, then seed.
    The CSV writer emits wall_ms as 0 unless timing is requested, keeping
    artifact bytes reproducible across reruns.
    """

    rows: list[CurveRow] = field(default_factory=list)

    def sort(self) -> None:
        self.rows.sort(key=lambda r: (r.method, r.index_kind, -r.fraction, r.seed))

    def to_csv(self, out, timing: bool = False) -> None:
        close = False
        if not hasattr(out, "write"):
            out = open(out, "w", newline="")
            close = True
        try:
            out.write("method,index_kind,d,fraction,accuracy,seed,k,wall_ms\n")
            for r in self.rows:
                wall = r.wall_ms if timing else 0.0
                out.write(
                    f"{r.method},{r.index_kind},{r.d:.17g},{r.fraction:.17g},"
                    f"{r.accuracy:.17g},{r.seed},{r.k},{wall:.17g}\n"
                )
        finally:
            if close:
                out.close()

    def to_csv_text(self, timing: bool = False) -> str:
        buf = io.StringIO()
        self.to_csv(buf, timing=timing)
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, text: str) -> "CompressionCurve":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        if not lines or lines[0] != "method,index_kind,d,fraction,accuracy,seed,k,wall_ms":
            raise ValueError("not a compression-curve CSV")
        rows = []
        for ln in lines[1:]:
            method, kind, d, frac, acc, seed, k, wall = ln.split(",")
            rows.append(CurveRow(method, kind, float(d), float(frac), float(acc),
                                 int(seed), int(k), float(wall)))
        return cls(rows)


def compression_curve(
    net: DenseNetwork,
    eval_batch: Dataset,
    test_set: Dataset,
    configs: list[PruneConfig],
    fractions,
    seeds=(0,),
    universe: NeuronMask | None = None,
    threads: int = 1,
) -> CompressionCurve:
    """Accuracy-versus-size rows for each (config, fraction, seed).

    Power indices are estimated against ``eval_batch``; reported accuracy
    always comes from ``test_set``, which the caller keeps disjoint from
    the evaluation batch.
    """
    fractions = sorted({float(f) for f in fractions}, reverse=True)
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise ValueError("fractions must lie in (0, 1]")
    if universe is None:
        universe = NeuronMask(net.spec)
    game = NeuronGame(net, universe, eval_batch)
    full_universe_mask = universe

    curve = CompressionCurve()
    for cfg in configs:
        for fraction in fractions:
            for seed in seeds:
                run_cfg = replace(cfg, fraction=fraction, seed=int(seed))
                start = time.perf_counter()
                result = run_method(
                    net, run_cfg, game=game, universe=universe,
                    saliency_batch=eval_batch, threads=threads,
                )
                if isinstance(result, WeightMask):
                    accuracy = evaluate_accuracy(
                        apply_weight_mask(net, result), full_universe_mask, test_set
                    )
                else:
                    accuracy = evaluate_accuracy(net, result, test_set)
                wall_ms = (time.perf_counter() - start) * 1e3
                curve.rows.append(
                    CurveRow(
                        method=run_cfg.method,
                        index_kind=run_cfg.index_kind,
                        d=run_cfg.d,
                        fraction=fraction,
                        accuracy=accuracy,
                        seed=int(seed),
                        k=run_cfg.samples,
                        wall_ms=wall_ms,
                    )
                )
    curve.sort()
    return curve


def mask_to_json(mask: NeuronMask, method: str, config_hash: str = "", seed: int = 0) -> str:
    return json.dumps(
        {
            "n": mask.n_prunable,
            "kept": [int(i) for i in mask.kept_ids()],
            "method": method,
            "config_hash": config_hash,
            "seed": int(seed),
        },
        sort_keys=True,
    )


def mask_from_json(text: str, universe: NeuronMask) -> NeuronMask:
    doc = json.loads(text)
    if int(doc["n"]) != universe.n_prunable:
        raise ValueError(
            f"mask covers {doc['n']} neurons, universe has {universe.n_prunable}"
        )
    return universe.keeping_only(doc["kept"])
