"""Game-theory assisted pruning of dense feedforward networks."""

from .games import (
    AdditiveGame,
    CallableGame,
    Coalition,
    Game,
    PowerIndexEstimate,
    SamplingConfig,
    UnanimityGame,
    WeightedVotingGame,
    exact_power_index,
    mc_shapley,
    pie_estimate,
    restricted_game,
    sample_coalition,
    shared_sample_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "AdditiveGame",
    "CallableGame",
    "Coalition",
    "Game",
    "PowerIndexEstimate",
    "SamplingConfig",
    "UnanimityGame",
    "WeightedVotingGame",
    "exact_power_index",
    "mc_shapley",
    "pie_estimate",
    "restricted_game",
    "sample_coalition",
    "shared_sample_estimate",
]
