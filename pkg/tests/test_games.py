"""Power-index oracles and estimator behaviour.

The brute-force oracles here use itertools enumeration over permutations
and subsets, deliberately independent of the library's vectorized
subset-table path.
"""

import itertools
import json
import math

import numpy as np
import pytest

from gtap import rng
from gtap.games import (
    AdditiveGame,
    CallableGame,
    Coalition,
    PowerIndexEstimate,
    SamplingConfig,
    UnanimityGame,
    WeightedVotingGame,
    exact_power_index,
    index_kind_label,
    mc_shapley,
    pie_estimate,
    restricted_game,
    sample_coalition,
    shared_sample_estimate,
)


def brute_shapley(fn, n):
    """Average marginal over all n! orderings."""
    totals = [0.0] * n
    count = 0
    for perm in itertools.permutations(range(n)):
        members = [False] * n
        prev = fn(members)
        for p in perm:
            members[p] = True
            cur = fn(members)
            totals[p] += cur - prev
            prev = cur
        count += 1
    return [t / count for t in totals]


def brute_biased_banzhaf(fn, n, t):
    """Sum of swings weighted by t^|C| (1-t)^(n-1-|C|) over subsets of the
    other players; t = 0.5 gives the plain Banzhaf index."""
    out = []
    for i in range(n):
        others = [p for p in range(n) if p != i]
        total = 0.0
        for r in range(len(others) + 1):
            for subset in itertools.combinations(others, r):
                members = [False] * n
                for p in subset:
                    members[p] = True
                v_without = fn(members)
                members[i] = True
                v_with = fn(members)
                total += t**r * (1 - t) ** (n - 1 - r) * (v_with - v_without)
        out.append(total)
    return out


def voting_fn(weights, quota):
    def fn(members):
        return float(sum(w for w, m in zip(weights, members) if m) >= quota)

    return fn


QUOTA3 = WeightedVotingGame([2, 1, 1], quota=3)


class TestCoalition:
    def test_construction_and_cardinality(self):
        c = Coalition.from_ids([0, 3], 5)
        assert c.n_players == 5
        assert c.cardinality() == 2
        assert c.contains(3) and not c.contains(1)
        assert list(c.ids()) == [0, 3]

    def test_rejects_bad_ids(self):
        with pytest.raises(ValueError):
            Coalition.from_ids([5], 5)

    def test_immutable(self):
        c = Coalition.empty(3)
        with pytest.raises(ValueError):
            c.bits[0] = True

    def test_equality_and_hash(self):
        assert Coalition.from_ids([1], 3) == Coalition.from_ids([1], 3)
        assert hash(Coalition.full(4)) == hash(Coalition.full(4))


class TestExactIndices:
    def test_dictator_shapley(self):
        est = exact_power_index(WeightedVotingGame([1, 0, 0], quota=1), "shapley")
        assert np.allclose(est.values, [1, 0, 0])
        assert np.all(est.stderr == 0)

    def test_quota3_banzhaf_fixture(self):
        est = exact_power_index(QUOTA3, "banzhaf")
        assert np.allclose(est.values, [0.75, 0.25, 0.25], atol=1e-12)
        oracle = brute_biased_banzhaf(voting_fn([2, 1, 1], 3), 3, 0.5)
        assert np.allclose(est.values, oracle, atol=1e-12)

    def test_quota3_shapley_fixture(self):
        est = exact_power_index(QUOTA3, "shapley")
        assert np.allclose(est.values, [2 / 3, 1 / 6, 1 / 6], atol=1e-12)
        oracle = brute_shapley(voting_fn([2, 1, 1], 3), 3)
        assert np.allclose(est.values, oracle, atol=1e-12)

    def test_quota3_biased_fixture(self):
        est = exact_power_index(QUOTA3, "biased_banzhaf", t=0.3)
        # closed form: swing probabilities 2t - t^2 and t(1 - t)
        assert np.allclose(est.values, [0.51, 0.21, 0.21], atol=1e-12)
        oracle = brute_biased_banzhaf(voting_fn([2, 1, 1], 3), 3, 0.3)
        assert np.allclose(est.values, oracle, atol=1e-12)

    def test_random_games_match_brute_force(self):
        gen = np.random.default_rng(7)
        for _ in range(10):
            n = int(gen.integers(3, 6))
            weights = gen.integers(0, 5, n).astype(float)
            quota = float(max(1.0, weights.sum() * gen.uniform(0.3, 0.8)))
            game = WeightedVotingGame(weights, quota)
            fn = voting_fn(weights, quota)
            t = float(gen.uniform(0.1, 0.9))
            assert np.allclose(
                exact_power_index(game, "shapley").values, brute_shapley(fn, n), atol=1e-10
            )
            assert np.allclose(
                exact_power_index(game, "banzhaf").values,
                brute_biased_banzhaf(fn, n, 0.5),
                atol=1e-10,
            )
            assert np.allclose(
                exact_power_index(game, "biased_banzhaf", t=t).values,
                brute_biased_banzhaf(fn, n, t),
                atol=1e-10,
            )

    def test_biased_half_equals_banzhaf(self):
        gen = np.random.default_rng(11)
        for _ in range(5):
            n = int(gen.integers(3, 8))
            game = WeightedVotingGame(gen.integers(0, 6, n), quota=float(gen.integers(1, 9)))
            banzhaf = exact_power_index(game, "banzhaf").values
            biased = exact_power_index(game, "biased_banzhaf", t=0.5).values
            assert np.allclose(banzhaf, biased, atol=1e-12)

    def test_shapley_efficiency(self):
        gen = np.random.default_rng(3)
        for _ in range(10):
            n = int(gen.integers(2, 9))
            game = WeightedVotingGame(gen.uniform(0, 3, n), quota=float(gen.uniform(1, 4)))
            est = exact_power_index(game, "shapley")
            total = game.evaluate(Coalition.full(n)) - game.evaluate(Coalition.empty(n))
            assert est.values.sum() == pytest.approx(total, rel=1e-9, abs=1e-12)

    def test_rejects_large_games(self):
        with pytest.raises(ValueError):
            exact_power_index(AdditiveGame(np.ones(21)), "banzhaf")

    def test_rejects_bad_bias(self):
        with pytest.raises(ValueError):
            exact_power_index(QUOTA3, "biased_banzhaf", t=1.5)


class TestSampleCoalition:
    def test_t_one_gives_grand_coalition(self):
        cfg = SamplingConfig(t=1.0, k=1)
        c = sample_coalition(cfg, rng.stream(0, 99), n_players=5)
        assert c == Coalition.full(5)

    def test_t_zero_keeps_only_forced(self):
        cfg = SamplingConfig(t=0.0, k=1, include_set=Coalition.from_ids([2], 5))
        c = sample_coalition(cfg, rng.stream(0, 99))
        assert c == Coalition.from_ids([2], 5)

    def test_mean_cardinality_binomial(self):
        cfg = SamplingConfig(t=0.5, k=1)
        gen = rng.stream(123, 98)
        cards = [sample_coalition(cfg, gen, n_players=100).cardinality() for _ in range(10_000)]
        se = math.sqrt(100 * 0.25 / 10_000)
        assert abs(np.mean(cards) - 50.0) < 3 * se

    def test_disjointness_enforced(self):
        with pytest.raises(ValueError):
            SamplingConfig(
                t=0.5,
                k=1,
                include_set=Coalition.from_ids([1], 4),
                exclude_set=Coalition.from_ids([1, 2], 4),
            )


class TestPieEstimate:
    def test_additive_game_zero_variance(self):
        game = AdditiveGame([0.2, 0.5, 0.3])
        for t in (0.1, 0.5, 0.9):
            est = pie_estimate(game, SamplingConfig(t=t, k=16, seed=4))
            assert np.allclose(est.values, [0.2, 0.5, 0.3], atol=1e-12)
            assert np.allclose(est.stderr, 0.0)

    def test_quota3_converges_to_banzhaf(self):
        est = pie_estimate(QUOTA3, SamplingConfig(t=0.5, k=50_000, seed=1))
        assert np.allclose(est.values, [0.75, 0.25, 0.25], atol=0.01)

    def test_quota3_converges_to_biased(self):
        est = pie_estimate(QUOTA3, SamplingConfig(t=0.3, k=50_000, seed=1))
        assert np.allclose(est.values, [0.51, 0.21, 0.21], atol=0.01)

    def test_excluded_player_sentinel(self):
        cfg = SamplingConfig(t=0.5, k=100, seed=0, exclude_set=Coalition.from_ids([1], 3))
        est = pie_estimate(QUOTA3, cfg)
        assert est.values[1] == -np.inf
        assert est.samples_used[1] == 0

    def test_unrequested_player_marker(self):
        est = pie_estimate(QUOTA3, SamplingConfig(t=0.5, k=100, seed=0), players=[0])
        assert np.isnan(est.values[2])
        assert est.samples_used[2] == 0
        assert est.samples_used[0] == 100

    def test_estimating_excluded_player_rejected(self):
        cfg = SamplingConfig(t=0.5, k=10, exclude_set=Coalition.from_ids([0], 3))
        with pytest.raises(ValueError):
            pie_estimate(QUOTA3, cfg, players=[0])

    def test_excluded_never_sampled(self):
        seen = []

        class Spy(CallableGame):
            def evaluate_many(self, bits):
                seen.append(np.asarray(bits, dtype=bool).copy())
                return np.zeros(len(bits))

        spy = Spy(4, lambda c: 0.0)
        cfg = SamplingConfig(t=0.9, k=64, seed=2, exclude_set=Coalition.from_ids([3], 4))
        pie_estimate(spy, cfg)
        assert seen and all(not chunk[:, 3].any() for chunk in seen)

    def test_thread_count_invariance(self):
        cfg = SamplingConfig(t=0.4, k=5_000, seed=9)
        single = pie_estimate(QUOTA3, cfg, threads=1)
        multi = pie_estimate(QUOTA3, cfg, threads=4)
        assert np.array_equal(single.values, multi.values)
        assert np.array_equal(single.stderr, multi.stderr)

    def test_same_seed_bitwise_identical(self):
        cfg = SamplingConfig(t=0.4, k=2_000, seed=77)
        a = pie_estimate(QUOTA3, cfg)
        b = pie_estimate(QUOTA3, cfg)
        assert np.array_equal(a.values, b.values)


class TestMcShapley:
    def test_unanimity_symmetric(self):
        est = mc_shapley(UnanimityGame(3), k=10_000, seed=5)
        assert np.allclose(est.values, 1 / 3, atol=0.02)

    def test_additive_single_permutation_exact(self):
        est = mc_shapley(AdditiveGame([0.2, 0.5, 0.3]), k=1, seed=0)
        assert np.allclose(est.values, [0.2, 0.5, 0.3], atol=1e-12)
        assert np.all(est.stderr == 0)

    def test_quota3_converges(self):
        est = mc_shapley(QUOTA3, k=60_000, seed=2)
        assert np.allclose(est.values, [2 / 3, 1 / 6, 1 / 6], atol=0.01)

    def test_zero_permutations_rejected(self):
        with pytest.raises(ValueError):
            mc_shapley(QUOTA3, k=0)

    def test_thread_count_invariance(self):
        a = mc_shapley(QUOTA3, k=3_000, seed=3, threads=1)
        b = mc_shapley(QUOTA3, k=3_000, seed=3, threads=4)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.stderr, b.stderr)


class TestSharedSample:
    def test_additive_converges(self):
        est = shared_sample_estimate(
            AdditiveGame([0.2, 0.5, 0.3]), SamplingConfig(t=0.5, k=100_000, seed=6)
        )
        assert est.method == "shared_sample"
        assert np.allclose(est.values, [0.2, 0.5, 0.3], atol=0.02)

    def test_ranking_matches_banzhaf(self):
        est = shared_sample_estimate(QUOTA3, SamplingConfig(t=0.5, k=100_000, seed=6))
        assert est.values[0] > est.values[1]
        assert est.values[0] > est.values[2]
        assert abs(est.values[1] - est.values[2]) < 0.02

    def test_degenerate_pool_flags_undefined(self):
        est = shared_sample_estimate(QUOTA3, SamplingConfig(t=1.0, k=2, seed=0))
        assert set(est.undefined_players) == {0, 1, 2}
        assert np.isnan(est.values[0])

    def test_small_pool_rejected(self):
        with pytest.raises(ValueError):
            shared_sample_estimate(QUOTA3, SamplingConfig(t=0.5, k=1))


class TestInvariants:
    def test_dummy_player_gets_zero(self):
        # player 3 has weight 0 and can never swing the vote
        game = WeightedVotingGame([2, 1, 1, 0], quota=3)
        for kind, t in (("shapley", None), ("banzhaf", None), ("biased_banzhaf", 0.4)):
            assert exact_power_index(game, kind, t=t).values[3] == 0.0
        est = pie_estimate(game, SamplingConfig(t=0.5, k=500, seed=1))
        assert est.values[3] == 0.0 and est.stderr[3] == 0.0
        est = mc_shapley(game, k=500, seed=1)
        assert est.values[3] == 0.0 and est.stderr[3] == 0.0

    def test_symmetric_players_equal_exact(self):
        est = exact_power_index(WeightedVotingGame([1, 1, 3], quota=4), "shapley")
        assert est.values[0] == pytest.approx(est.values[1], abs=1e-9)

    def test_symmetric_players_close_monte_carlo(self):
        est = pie_estimate(QUOTA3, SamplingConfig(t=0.5, k=20_000, seed=12))
        combined = math.hypot(est.stderr[1], est.stderr[2])
        assert abs(est.values[1] - est.values[2]) <= 4 * combined

    def test_estimators_converge_within_stderr_bands(self):
        # |error| <= 5 * stderr should hold for ~all players across seeds
        game = WeightedVotingGame([3, 2, 2, 1, 1, 1], quota=6)
        exact = exact_power_index(game, "biased_banzhaf", t=0.5).values
        exact_sh = exact_power_index(game, "shapley").values
        hits = trials = 0
        for seed in range(100):
            est = pie_estimate(game, SamplingConfig(t=0.5, k=2_000, seed=seed))
            ok = np.abs(est.values - exact) <= 5 * est.stderr + 1e-15
            hits += int(ok.sum())
            trials += ok.size
            est = mc_shapley(game, k=2_000, seed=seed)
            ok = np.abs(est.values - exact_sh) <= 5 * est.stderr + 1e-15
            hits += int(ok.sum())
            trials += ok.size
        assert hits / trials >= 0.99

    def test_restricted_game_pins_players(self):
        base = WeightedVotingGame([2, 1, 1], quota=3)
        sub = restricted_game(base, free_ids=[1, 2], pinned_present=[0])
        assert sub.n_players == 2
        # with player 0 pinned, either remaining player alone reaches quota
        assert sub.evaluate(Coalition.from_ids([0], 2)) == 1.0
        assert sub.evaluate(Coalition.empty(2)) == 0.0
        assert restricted_game(base, free_ids=[0, 1, 2]) is base


class TestSerialization:
    def test_round_trip(self):
        est = exact_power_index(QUOTA3, "banzhaf")
        doc = json.loads(est.to_json())
        assert set(doc) == {"n_players", "kind", "values", "stderr", "seed", "samples"}
        back = PowerIndexEstimate.from_json(est.to_json())
        assert np.array_equal(back.values, est.values)
        assert back.index_kind == est.index_kind
        assert back.method == "exact"

    def test_kind_labels(self):
        assert index_kind_label("shapley") == "shapley"
        assert index_kind_label("biased_banzhaf", 0.3) == "biased_banzhaf(0.3)"
        with pytest.raises(ValueError):
            index_kind_label("nucleolus")
