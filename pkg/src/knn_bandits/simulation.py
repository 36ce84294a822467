"""Run loop, regret accounting and replication management.

Each round the environment realizes every arm's reward; the policy only ever
sees the chosen arm's reward, while the oracle arm's realized reward feeds the
regret ``sum_t (Y_t^{oracle} - Y_t^{chosen})``. Pseudo-regret uses the mean
field instead of realized rewards.

Randomness is fully determined by ``(master_seed, replication)``: the
environment and the policy each get their own stream spawned from a
:class:`numpy.random.SeedSequence`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .environments import Environment
from .indices import DEFAULT_TOL, KLUCB, UCB, Phi
from .policies import (
    BasePolicy,
    ContextFreeIndexPolicy,
    FixedArmPolicy,
    KNNIndexPolicy,
    OraclePolicy,
    UniformRandomPolicy,
)

POLICY_KINDS = ("knn_ucb", "knn_klucb", "cf_ucb", "cf_klucb", "uniform", "oracle", "fixed")


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "knn_klucb"
    theta: Optional[float] = None
    phi: Phi = field(default_factory=Phi.const)
    arm: int = 0
    tol: float = DEFAULT_TOL

    @property
    def index_kind(self) -> Optional[str]:
        if self.kind.endswith("klucb"):
            return KLUCB
        if self.kind.endswith("ucb"):
            return UCB
        return None


@dataclass(frozen=True)
class RunConfig:
    environment: Environment
    policy: PolicySpec
    horizon: int
    master_seed: int = 0
    replications: int = 1
    record_every: int = 1
    n_jobs: int = 1

    def validate(self) -> "RunConfig":
        p = self.policy
        if p.kind not in POLICY_KINDS:
            raise ConfigError("policy.kind", f"unknown policy {p.kind!r}")
        if p.theta is not None and not p.theta > 0:
            raise ConfigError("policy.theta", "theta must be positive")
        if p.index_kind == KLUCB and not self.environment.bounded_rewards:
            raise ConfigError("policy.kind", "KL-UCB requires bounded rewards")
        if p.kind == "fixed" and not 0 <= p.arm < self.environment.n_arms:
            raise ConfigError("policy.arm", "arm out of range")
        if self.horizon < self.environment.n_arms:
            raise ConfigError("horizon", "horizon must be at least the number of arms")
        if self.replications < 1:
            raise ConfigError("replications", "replications must be >= 1")
        if self.record_every < 1:
            raise ConfigError("record_every", "record_every must be >= 1")
        return self


@dataclass(frozen=True)
class RoundRecord:
    t: int
    chosen_arm: int
    k_chosen: int
    reward: float
    oracle_arm: int
    oracle_reward: float
    regret: float
    pseudo_regret: float
    cum_regret: float
    cum_pseudo_regret: float


ROUND_FIELDS = tuple(RoundRecord.__dataclass_fields__)


@dataclass(frozen=True)
class ReplicationResult:
    replication: int
    final_regret: float
    final_pseudo_regret: float
    records: tuple = ()


@dataclass(frozen=True)
class RunSummary:
    horizon: int
    replications: int
    final_regret: tuple
    final_pseudo_regret: tuple
    mean_regret: float
    stderr_regret: Optional[float]
    mean_pseudo_regret: float
    stderr_pseudo_regret: Optional[float]
    checkpoints: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["final_regret"] = list(self.final_regret)
        d["final_pseudo_regret"] = list(self.final_pseudo_regret)
        d["checkpoints"] = [dict(c) for c in self.checkpoints]
        return d


def seed_sequence(master_seed: int, replication: int, stream: int) -> np.random.SeedSequence:
    """Stream 0 drives the environment, stream 1 the policy."""
    return np.random.SeedSequence(master_seed, spawn_key=(replication, stream))


def build_policy(spec: PolicySpec, env: Environment, rng: Optional[np.random.Generator] = None) -> BasePolicy:
    A = env.n_arms
    if spec.kind in ("knn_ucb", "knn_klucb"):
        return KNNIndexPolicy(A, index=spec.index_kind, theta=spec.theta, phi=spec.phi, tol=spec.tol)
    if spec.kind in ("cf_ucb", "cf_klucb"):
        return ContextFreeIndexPolicy(A, index=spec.index_kind, theta=spec.theta, tol=spec.tol)
    if spec.kind == "uniform":
        return UniformRandomPolicy(A, random_state=rng)
    if spec.kind == "oracle":
        return OraclePolicy(env)
    if spec.kind == "fixed":
        return FixedArmPolicy(A, arm=spec.arm)
    raise ConfigError("policy.kind", f"unknown policy {spec.kind!r}")


def play(env: Environment, policy: BasePolicy, horizon: int, rng: np.random.Generator,
         record_every: int = 1) -> tuple[list, float, float]:
    """Run ``horizon`` rounds; return strided records and final regrets.

    Cumulative sums are carried every round, so strided rows stay exact. The
    last round is always recorded.
    """
    cum = cum_pseudo = 0.0
    records = []
    for t in range(1, horizon + 1):
        rnd = env.sample_round(rng)
        trace = policy.decide(rnd.x)
        a = trace.chosen_arm
        y = float(rnd.rewards[a])
        y_star = float(rnd.rewards[rnd.oracle_arm])
        inst = y_star - y
        inst_pseudo = rnd.oracle_mean - float(rnd.means[a])
        cum += inst
        cum_pseudo += inst_pseudo
        policy.update(rnd.x, a, y)
        if t % record_every == 0 or t == horizon:
            records.append(RoundRecord(t, a, trace.k_chosen, y, rnd.oracle_arm, y_star,
                                       inst, inst_pseudo, cum, cum_pseudo))
    return records, cum, cum_pseudo


def run_once(config: RunConfig, replication: int) -> ReplicationResult:
    config.validate()
    env_rng = np.random.default_rng(seed_sequence(config.master_seed, replication, 0))
    pol_rng = np.random.default_rng(seed_sequence(config.master_seed, replication, 1))
    policy = build_policy(config.policy, config.environment, pol_rng)
    records, cum, cum_pseudo = play(config.environment, policy, config.horizon, env_rng,
                                    config.record_every)
    return ReplicationResult(replication, cum, cum_pseudo, tuple(records))


def _mean_stderr(values: Sequence[float]) -> tuple[float, Optional[float]]:
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    if len(v) < 2:
        return mean, None
    return mean, float(v.std(ddof=1) / math.sqrt(len(v)))


def summarize(results: Sequence[ReplicationResult], horizon: int) -> RunSummary:
    """Aggregate replications; the input order does not matter."""
    results = sorted(results, key=lambda r: r.replication)
    regret = tuple(r.final_regret for r in results)
    pseudo = tuple(r.final_pseudo_regret for r in results)
    m, se = _mean_stderr(regret)
    mp, sep = _mean_stderr(pseudo)
    checkpoints = []
    if results and results[0].records:
        for rows in zip(*(r.records for r in results)):
            checkpoints.append((
                ("t", rows[0].t),
                ("mean_cum_regret", float(np.mean([x.cum_regret for x in rows]))),
                ("mean_cum_pseudo_regret", float(np.mean([x.cum_pseudo_regret for x in rows]))),
            ))
    return RunSummary(horizon, len(results), regret, pseudo, m, se, mp, sep, tuple(checkpoints))


def simulate(config: RunConfig, replications: Optional[Sequence[int]] = None) -> list:
    """Run the requested replications, in parallel when ``config.n_jobs != 1``."""
    config.validate()
    reps = list(range(config.replications)) if replications is None else list(replications)
    if config.n_jobs == 1 or len(reps) == 1:
        return [run_once(config, r) for r in reps]
    return Parallel(n_jobs=config.n_jobs)(delayed(run_once)(config, r) for r in reps)


def run_replicated(config: RunConfig, replications: Optional[Sequence[int]] = None) -> RunSummary:
    return summarize(simulate(config, replications), config.horizon)
