"""Coalitional games and power indices.

A game assigns a real utility to every subset (coalition) of its players.
Power indices summarize each player's average marginal contribution
``v(C + i) - v(C - i)`` under different distributions over coalitions:

- Shapley value: average over uniformly random player orderings.
- Banzhaf index: average over the 2^(n-1) coalitions of the other players,
  i.e. every other player joins with probability 1/2.
- Biased Banzhaf with inclusion probability t: every other player joins
  independently with probability t.  At t = 0.5 this is the plain Banzhaf
  index.

Exact computation enumerates all subsets and is capped at 20 players.
Beyond that, the Monte-Carlo estimators apply: per-player coalition
sampling (`pie_estimate`), permutation sampling (`mc_shapley`), and a
variance-reducing shared coalition pool (`shared_sample_estimate`).
Estimators consume counter-based streams keyed by (seed, player), so their
output is reproducible bit-for-bit under any thread count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng

MAX_EXACT_PLAYERS = 20

# Permutations are processed in fixed-size chunks so the random stream
# layout (and therefore the estimate) is independent of threading.
_PERMUTATION_CHUNK = 256


class Coalition:
    """Immutable membership bit vector over the players of one game."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        arr = np.array(bits, dtype=bool)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("coalition bits must form a non-empty 1-D vector")
        arr.setflags(write=False)
        self.bits = arr

    @classmethod
    def empty(cls, n_players: int) -> "Coalition":
        return cls(np.zeros(n_players, dtype=bool))

    @classmethod
    def full(cls, n_players: int) -> "Coalition":
        return cls(np.ones(n_players, dtype=bool))

    @classmethod
    def from_ids(cls, ids, n_players: int) -> "Coalition":
        bits = np.zeros(n_players, dtype=bool)
        idx = np.asarray(list(ids), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n_players):
            raise ValueError("player id out of range")
        bits[idx] = True
        return cls(bits)

    @property
    def n_players(self) -> int:
        return self.bits.size

    def cardinality(self) -> int:
        return int(self.bits.sum())

    def ids(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def contains(self, player: int) -> bool:
        return bool(self.bits[player])

    def with_player(self, player: int) -> "Coalition":
        bits = self.bits.copy()
        bits[player] = True
        return Coalition(bits)

    def without_player(self, player: int) -> "Coalition":
        bits = self.bits.copy()
        bits[player] = False
        return Coalition(bits)

    def __eq__(self, other) -> bool:
        return isinstance(other, Coalition) and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.bits.size, self.bits.tobytes()))

    def __repr__(self) -> str:
        return f"Coalition({set(self.ids().tolist()) or '{}'} of {self.n_players})"


class Game:
    """Characteristic-function contract: a total, pure map from coalitions
    to real utilities."""

    def __init__(self, n_players: int, label: str = ""):
        if n_players < 1:
            raise ValueError("a game needs at least one player")
        self.n_players = int(n_players)
        self.label = label

    def evaluate(self, coalition: Coalition) -> float:
        raise NotImplementedError

    def evaluate_many(self, bits: np.ndarray) -> np.ndarray:
        """Utilities for a (k, n_players) batch of coalition bit rows.

        Subclasses override this when the utility can be vectorized; the
        fallback loops over `evaluate`.
        """
        bits = np.asarray(bits, dtype=bool)
        return np.array([self.evaluate(Coalition(row)) for row in bits], dtype=float)


class WeightedVotingGame(Game):
    """v(C) = 1 when the members' weights reach the quota, else 0."""

    def __init__(self, weights, quota: float, label: str = ""):
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 1:
            raise ValueError("weights must be a vector")
        super().__init__(len(weights), label or f"wvg(q={quota})")
        self.weights = weights
        self.quota = float(quota)

    def evaluate(self, coalition: Coalition) -> float:
        return float(coalition.bits @ self.weights >= self.quota)

    def evaluate_many(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=bool)
        return (bits @ self.weights >= self.quota).astype(float)

    def to_json(self) -> str:
        return json.dumps(
            {"type": "weighted_voting", "weights": self.weights.tolist(), "quota": self.quota},
            sort_keys=True,
        )


class AdditiveGame(Game):
    """v(C) = sum of the members' individual values; every power index of
    an additive game equals the value vector itself."""

    def __init__(self, values, label: str = ""):
        values = np.asarray(values, dtype=float)
        super().__init__(len(values), label or "additive")
        self.values = values

    def evaluate(self, coalition: Coalition) -> float:
        return float(coalition.bits @ self.values)

    def evaluate_many(self, bits: np.ndarray) -> np.ndarray:
        return np.asarray(bits, dtype=bool) @ self.values


class UnanimityGame(Game):
    """v(C) = 1 only for the grand coalition."""

    def __init__(self, n_players: int):
        super().__init__(n_players, "unanimity")

    def evaluate(self, coalition: Coalition) -> float:
        return float(coalition.cardinality() == self.n_players)

    def evaluate_many(self, bits: np.ndarray) -> np.ndarray:
        return np.asarray(bits, dtype=bool).all(axis=1).astype(float)


class CallableGame(Game):
    """Wrap an arbitrary coalition -> utility function."""

    def __init__(self, n_players: int, fn, label: str = ""):
        super().__init__(n_players, label or "callable")
        self._fn = fn

    def evaluate(self, coalition: Coalition) -> float:
        return float(self._fn(coalition))


def restricted_game(base: Game, free_ids, pinned_present=()) -> Game:
    """Sub-game over ``free_ids`` with all other players pinned.

    Players in ``pinned_present`` appear in every evaluated coalition;
    remaining non-free players never appear.  Used by iterated pruning and
    building to re-estimate indices after committing some decisions.
    """
    free = np.unique(np.asarray(list(free_ids), dtype=np.int64))
    pinned = np.asarray(list(pinned_present), dtype=np.int64)
    if free.size and (free.min() < 0 or free.max() >= base.n_players):
        raise ValueError("free player id out of range")
    if np.intersect1d(free, pinned).size:
        raise ValueError("free and pinned players overlap")
    if free.size == base.n_players and pinned.size == 0:
        return base
    template = np.zeros(base.n_players, dtype=bool)
    template[pinned] = True

    class _Restricted(Game):
        def __init__(self):
            super().__init__(len(free), f"{base.label}|restricted({len(free)})")

        def evaluate(self, coalition: Coalition) -> float:
            return self.evaluate_many(coalition.bits[None, :])[0]

        def evaluate_many(self, bits: np.ndarray) -> np.ndarray:
            bits = np.asarray(bits, dtype=bool)
            full = np.broadcast_to(template, (bits.shape[0], base.n_players)).copy()
            full[:, free] = bits
            return base.evaluate_many(full)

    return _Restricted()


class ScaledGame(Game):
    """v'(C) = scale * v(C); rank-based selection must be invariant to this."""

    def __init__(self, base: Game, scale: float):
        super().__init__(base.n_players, f"{base.label}*{scale}")
        self.base = base
        self.scale = float(scale)

    def evaluate(self, coalition: Coalition) -> float:
        return self.scale * self.base.evaluate(coalition)

    def evaluate_many(self, bits: np.ndarray) -> np.ndarray:
        return self.scale * self.base.evaluate_many(bits)


@dataclass(frozen=True)
class SamplingConfig:
    """Coalition sampling parameters.

    Each unforced player enters a sampled coalition independently with
    probability ``t``; members of ``include_set`` are always present and
    members of ``exclude_set`` always absent.
    """

    t: float
    k: int
    include_set: Coalition | None = None
    exclude_set: Coalition | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"inclusion probability t={self.t} outside [0, 1]")
        if self.k < 1:
            raise ValueError("sample count k must be >= 1")
        if self.include_set is not None and self.exclude_set is not None:
            if self.include_set.n_players != self.exclude_set.n_players:
                raise ValueError("include/exclude sets disagree on player count")
            if np.any(self.include_set.bits & self.exclude_set.bits):
                raise ValueError("include and exclude sets must be disjoint")


@dataclass
class PowerIndexEstimate:
    """Per-player index values with sampling metadata.

    Sentinels: players excluded from the game carry value -inf (so argmax
    selection never picks them), players that were simply not requested
    carry NaN with samples_used 0.
    """

    values: np.ndarray
    stderr: np.ndarray
    samples_used: np.ndarray
    index_kind: str
    method: str  # "exact" | "monte_carlo" | "shared_sample"
    seed: int | None = None
    undefined_players: tuple[int, ...] = ()
    scope: str = "global"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        self.samples_used = np.asarray(self.samples_used, dtype=np.int64)
        n = self.values.size
        if self.stderr.size != n or self.samples_used.size != n:
            raise ValueError("values, stderr and samples_used must have equal length")
        finite = np.isfinite(self.stderr)
        if np.any(self.stderr[finite] < 0):
            raise ValueError("standard errors cannot be negative")

    @property
    def n_players(self) -> int:
        return self.values.size

    def ranked_players(self) -> np.ndarray:
        """Player ids ordered by value descending, ties to the lower id."""
        return np.lexsort((np.arange(self.n_players), -self.values))

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_players": self.n_players,
                "kind": self.index_kind,
                "values": self.values.tolist(),
                "stderr": self.stderr.tolist(),
                "seed": int(self.seed) if self.seed is not None else 0,
                "samples": int(self.samples_used.max(initial=0)),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "PowerIndexEstimate":
        doc = json.loads(text)
        n = int(doc["n_players"])
        samples = int(doc["samples"])
        stderr = np.asarray(doc["stderr"], dtype=float)
        method = "exact" if np.all(stderr == 0.0) else "monte_carlo"
        return cls(
            values=np.asarray(doc["values"], dtype=float),
            stderr=stderr,
            samples_used=np.full(n, samples, dtype=np.int64),
            index_kind=str(doc["kind"]),
            method=method,
            seed=int(doc["seed"]),
        )


def index_kind_label(kind: str, t: float | None = None) -> str:
    if kind == "biased_banzhaf":
        if t is None:
            raise ValueError("biased_banzhaf needs an inclusion probability t")
        return f"biased_banzhaf({float(t)!r})"
    if kind in ("shapley", "banzhaf"):
        return kind
    raise ValueError(f"unknown index kind {kind!r}")


def _all_coalition_bits(n_players: int) -> np.ndarray:
    """(2^n, n) bit matrix; row index read as a bitmask gives the row."""
    masks = np.arange(1 << n_players, dtype=np.int64)
    return (masks[:, None] >> np.arange(n_players)) & 1 > 0


def exact_power_index(game: Game, kind: str, t: float | None = None) -> PowerIndexEstimate:
    """Exact index by full subset enumeration (n <= 20).

    Shapley uses the subset weights |C|! (n-|C|-1)! / n!, Banzhaf the
    uniform weight 2^-(n-1), and the biased index the Bernoulli weights
    t^|C| (1-t)^(n-1-|C|), each summed over coalitions C not containing
    the player.
    """
    n = game.n_players
    if n > MAX_EXACT_PLAYERS:
        raise ValueError(f"exact computation limited to {MAX_EXACT_PLAYERS} players, got {n}")
    label = index_kind_label(kind, t)
    if kind == "biased_banzhaf" and not 0.0 <= float(t) <= 1.0:
        raise ValueError(f"bias t={t} outside [0, 1]")

    bits = _all_coalition_bits(n)
    values = np.asarray(game.evaluate_many(bits), dtype=float)
    if values.shape != (1 << n,):
        raise ValueError("game.evaluate_many returned the wrong number of utilities")
    sizes = bits.sum(axis=1)
    masks = np.arange(1 << n, dtype=np.int64)

    if kind == "shapley":
        n_fact = math.factorial(n)
        weight_by_size = np.array(
            [math.factorial(s) * math.factorial(n - 1 - s) / n_fact for s in range(n)]
        )
    elif kind == "banzhaf":
        weight_by_size = np.full(n, 0.5 ** (n - 1))
    else:
        s = np.arange(n)
        weight_by_size = np.power(float(t), s) * np.power(1.0 - float(t), n - 1 - s)

    out = np.zeros(n)
    for i in range(n):
        without = (masks >> i) & 1 == 0
        sub = masks[without]
        marginal = values[sub | (1 << i)] - values[sub]
        out[i] = weight_by_size[sizes[without]] @ marginal

    return PowerIndexEstimate(
        values=out,
        stderr=np.zeros(n),
        samples_used=np.full(n, 1 << n, dtype=np.int64),
        index_kind=label,
        method="exact",
    )


def _forced_bits(cfg: SamplingConfig, n_players: int):
    include = exclude = None
    for name, coal in (("include", cfg.include_set), ("exclude", cfg.exclude_set)):
        if coal is not None and coal.n_players != n_players:
            raise ValueError(f"{name} set sized for {coal.n_players} players, game has {n_players}")
    if cfg.include_set is not None:
        include = cfg.include_set.bits
    if cfg.exclude_set is not None:
        exclude = cfg.exclude_set.bits
    return include, exclude


def sample_coalition(cfg: SamplingConfig, rng_stream: np.random.Generator,
                     n_players: int | None = None) -> Coalition:
    """Draw one coalition: forced members in, forced absentees out, every
    other player present independently with probability cfg.t."""
    if n_players is None:
        for coal in (cfg.include_set, cfg.exclude_set):
            if coal is not None:
                n_players = coal.n_players
                break
    if n_players is None:
        raise ValueError("n_players is required when no include/exclude set is given")
    include, exclude = _forced_bits(cfg, n_players)
    bits = rng_stream.random(n_players) < cfg.t
    if exclude is not None:
        bits[exclude] = False
    if include is not None:
        bits[include] = True
    return Coalition(bits)


def _sample_bits(n: int, t: float, k: int, include, exclude,
                 rng_stream: np.random.Generator) -> np.ndarray:
    bits = rng_stream.random((k, n)) < t
    if exclude is not None:
        bits[:, exclude] = False
    if include is not None:
        bits[:, include] = True
    return bits


def _mean_and_stderr(samples: np.ndarray) -> tuple[float, float]:
    k = samples.size
    mean = float(samples.mean())
    if k < 2:
        return mean, 0.0
    return mean, float(samples.std(ddof=1) / math.sqrt(k))


def _run_indexed(worker, items, threads: int):
    """Apply ``worker`` to items, optionally on a thread pool; output order
    always matches input order so reductions are schedule-invariant."""
    if threads <= 1 or len(items) <= 1:
        return [worker(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, items))


def pie_estimate(game: Game, cfg: SamplingConfig, players=None,
                 threads: int = 1) -> PowerIndexEstimate:
    """Biased-coalition Monte-Carlo estimate of the t-biased Banzhaf index.

    For each requested player i, draws cfg.k coalitions and averages
    v(C + i) - v(C - i); both terms are evaluated explicitly so the same
    marginal-contribution path serves all samplers.  Player i's draws come
    from a stream keyed by (seed, player id), making the result
    independent of evaluation order and worker count.
    """
    n = game.n_players
    include, exclude = _forced_bits(cfg, n)
    excluded_ids = np.flatnonzero(exclude) if exclude is not None else np.array([], dtype=np.int64)

    if players is None:
        requested = np.setdiff1d(np.arange(n), excluded_ids)
    else:
        requested = np.unique(np.asarray(list(players), dtype=np.int64))
        if requested.size and (requested.min() < 0 or requested.max() >= n):
            raise ValueError("requested player id out of range")
        overlap = np.intersect1d(requested, excluded_ids)
        if overlap.size:
            raise ValueError(f"cannot estimate excluded players {overlap.tolist()}")

    values = np.full(n, np.nan)
    stderr = np.full(n, np.nan)
    samples_used = np.zeros(n, dtype=np.int64)
    values[excluded_ids] = -np.inf
    stderr[excluded_ids] = 0.0

    def one_player(i: int) -> tuple[float, float]:
        gen = rng.stream(cfg.seed, rng.PIE_SAMPLES, i)
        bits = _sample_bits(n, cfg.t, cfg.k, include, exclude, gen)
        with_i = bits.copy()
        with_i[:, i] = True
        bits[:, i] = False
        v_with = np.asarray(game.evaluate_many(with_i), dtype=float)
        v_without = np.asarray(game.evaluate_many(bits), dtype=float)
        return _mean_and_stderr(v_with - v_without)

    for i, (mean, se) in zip(requested, _run_indexed(one_player, list(requested), threads)):
        values[i] = mean
        stderr[i] = se
        samples_used[i] = cfg.k

    return PowerIndexEstimate(
        values=values,
        stderr=stderr,
        samples_used=samples_used,
        index_kind=index_kind_label("biased_banzhaf", cfg.t),
        method="monte_carlo",
        seed=cfg.seed,
    )


def mc_shapley(game: Game, k: int, seed: int = 0, threads: int = 1) -> PowerIndexEstimate:
    """Permutation-sampling Shapley estimate.

    Each sampled ordering contributes one marginal to every player (the
    player's gain when joining the set of its predecessors), so k
    permutations cost k*(n+1) utility evaluations and yield k marginals
    per player.
    """
    if k < 1:
        raise ValueError("permutation count k must be >= 1")
    n = game.n_players
    positions = np.arange(n)

    def one_chunk(args: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        chunk_index, size = args
        gen = rng.stream(seed, rng.SHAPLEY_PERMUTATIONS, chunk_index)
        keys = gen.random((size, n))
        perms = np.argsort(keys, axis=1)
        inv = np.empty_like(perms)
        np.put_along_axis(inv, perms, np.broadcast_to(positions, perms.shape), axis=1)
        # prefix[b, j] holds the first j players of permutation b
        prefix = inv[:, None, :] < np.arange(n + 1)[None, :, None]
        vals = np.asarray(game.evaluate_many(prefix.reshape(-1, n)), dtype=float)
        marginals = np.diff(vals.reshape(size, n + 1), axis=1)
        flat_players = perms.ravel()
        flat_marg = marginals.ravel()
        return (
            np.bincount(flat_players, weights=flat_marg, minlength=n),
            np.bincount(flat_players, weights=flat_marg**2, minlength=n),
        )

    chunks = [(c, min(_PERMUTATION_CHUNK, k - start))
              for c, start in enumerate(range(0, k, _PERMUTATION_CHUNK))]
    sums = np.zeros(n)
    sums_sq = np.zeros(n)
    for part_sum, part_sq in _run_indexed(one_chunk, chunks, threads):
        sums += part_sum
        sums_sq += part_sq

    mean = sums / k
    if k > 1:
        var = np.maximum(sums_sq - k * mean**2, 0.0) / (k - 1)
        stderr = np.sqrt(var / k)
    else:
        stderr = np.zeros(n)

    return PowerIndexEstimate(
        values=mean,
        stderr=stderr,
        samples_used=np.full(n, k, dtype=np.int64),
        index_kind="shapley",
        method="monte_carlo",
        seed=seed,
    )


def shared_sample_estimate(game: Game, cfg: SamplingConfig) -> PowerIndexEstimate:
    """Variance-reducing estimate from one shared coalition pool.

    Draws a single pool of cfg.k coalitions, then scores player i as the
    mean utility of pool members containing i minus the mean over members
    excluding i.  Total evaluation cost is k (not k per player), at the
    price of statistically dependent estimates across players.  A player
    present in every pool coalition, or absent from all of them, has no
    contrast and is reported in ``undefined_players`` with value NaN.
    """
    if cfg.k < 2:
        raise ValueError("shared-sample estimation needs a pool of k >= 2")
    n = game.n_players
    include, exclude = _forced_bits(cfg, n)
    excluded_ids = np.flatnonzero(exclude) if exclude is not None else np.array([], dtype=np.int64)

    gen = rng.stream(cfg.seed, rng.SHARED_POOL)
    bits = _sample_bits(n, cfg.t, cfg.k, include, exclude, gen)
    vals = np.asarray(game.evaluate_many(bits), dtype=float)

    values = np.full(n, np.nan)
    stderr = np.full(n, np.nan)
    samples_used = np.zeros(n, dtype=np.int64)
    values[excluded_ids] = -np.inf
    stderr[excluded_ids] = 0.0
    undefined = []

    for i in range(n):
        if i in excluded_ids:
            continue
        member = bits[:, i]
        k_in = int(member.sum())
        k_out = cfg.k - k_in
        samples_used[i] = cfg.k
        if k_in == 0 or k_out == 0:
            undefined.append(i)
            continue
        v_in = vals[member]
        v_out = vals[~member]
        values[i] = v_in.mean() - v_out.mean()
        var_in = v_in.var(ddof=1) if k_in > 1 else 0.0
        var_out = v_out.var(ddof=1) if k_out > 1 else 0.0
        stderr[i] = math.sqrt(var_in / k_in + var_out / k_out)

    return PowerIndexEstimate(
        values=values,
        stderr=stderr,
        samples_used=samples_used,
        index_kind=index_kind_label("biased_banzhaf", cfg.t),
        method="shared_sample",
        seed=cfg.seed,
        undefined_players=tuple(undefined),
    )
