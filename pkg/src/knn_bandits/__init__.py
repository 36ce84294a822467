"""k-nearest-neighbour index policies for contextual bandits on metric spaces."""

__version__ = "0.1.0"

from .environments import (
    BumpCube,
    EmbeddedCircle,
    Environment,
    FlipLine,
    ball_mass_estimate,
    make_environment,
    margin_mass_estimate,
)
from .indices import Phi, index_klucb, index_ucb, kl_div, phi_inverse, select_k, uncertainty
from .neighbours import History, naive_stats, order_neighbours, prefix_stats
from .policies import (
    ContextFreeIndexPolicy,
    FixedArmPolicy,
    KNNIndexPolicy,
    OraclePolicy,
    UniformRandomPolicy,
)
from .simulation import ConfigError, PolicySpec, RunConfig, run_once, run_replicated

__all__ = [
    "BumpCube",
    "ConfigError",
    "ContextFreeIndexPolicy",
    "EmbeddedCircle",
    "Environment",
    "FixedArmPolicy",
    "FlipLine",
    "History",
    "KNNIndexPolicy",
    "OraclePolicy",
    "Phi",
    "PolicySpec",
    "RunConfig",
    "UniformRandomPolicy",
    "ball_mass_estimate",
    "index_klucb",
    "index_ucb",
    "kl_div",
    "make_environment",
    "margin_mass_estimate",
    "naive_stats",
    "order_neighbours",
    "phi_inverse",
    "prefix_stats",
    "run_once",
    "run_replicated",
    "select_k",
    "uncertainty",
]
