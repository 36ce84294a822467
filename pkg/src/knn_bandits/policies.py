"""Bandit policies with a scikit-learn style estimator interface.

Every policy is a :class:`sklearn.base.BaseEstimator`, so ``get_params`` /
``set_params`` / ``clone`` work. The online protocol is:

* ``decide(x)`` returns a :class:`DecisionTrace` for the current round,
* ``update(x, arm, reward)`` (or ``partial_fit`` for batches) appends the
  observed reward,
* ``fit(X, arms, rewards)`` replaces the history wholesale,
* ``predict(X)`` returns the arm each row would receive at the current round.

Arms are 0-based. Rounds ``t`` are 1-based: at round ``t`` the history holds
``t - 1`` entries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array, column_or_1d

from .indices import (
    DEFAULT_THETA,
    DEFAULT_TOL,
    INDEX_KINDS,
    KLUCB,
    UCB,
    Phi,
    argmin_k,
    klucb_upper,
    uncertainty_profile,
)
from .neighbours import History, euclidean

INIT = "init"
INDEX = "index"


@dataclass(frozen=True)
class ArmTrace:
    k: int
    n: int
    fhat: float
    r: float
    uncertainty: float
    index: float


@dataclass(frozen=True)
class DecisionTrace:
    chosen_arm: int
    phase: str
    t: int
    arms: tuple = field(default=())

    @property
    def k_chosen(self) -> int:
        """Neighbourhood size behind the chosen arm's index (0 outside the index phase)."""
        if self.phase != INDEX or not self.arms:
            return 0
        return self.arms[self.chosen_arm].k


def _argmax_first(values) -> int:
    best, best_v = 0, values[0]
    for a in range(1, len(values)):
        if values[a] > best_v:
            best, best_v = a, values[a]
    return best


def _resolve_theta(theta: Optional[float], index: str) -> float:
    if theta is None:
        return DEFAULT_THETA[index]
    if not theta > 0:
        raise ValueError("theta must be positive")
    return float(theta)


class BasePolicy(BaseEstimator):
    """Shared history bookkeeping; subclasses implement ``decide``."""

    def __init__(self, n_arms: int = 2):
        self.n_arms = n_arms

    # -- history -------------------------------------------------------
    def _ensure_state(self, dim: Optional[int] = None) -> None:
        if not hasattr(self, "history_"):
            if self.n_arms < 1:
                raise ValueError("n_arms must be >= 1")
            self.history_ = None if dim is None else History(dim)
        if self.history_ is None and dim is not None:
            self.history_ = History(dim)

    @property
    def t(self) -> int:
        """Current round (1-based)."""
        h = getattr(self, "history_", None)
        return 1 if h is None else len(h) + 1

    def reset(self) -> "BasePolicy":
        for attr in ("history_", "counts_", "sums_"):
            if hasattr(self, attr):
                delattr(self, attr)
        return self

    def _validate_batch(self, X, arms, rewards):
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        arms = column_or_1d(arms).astype(np.intp)
        rewards = column_or_1d(rewards).astype(float)
        if not len(X) == len(arms) == len(rewards):
            raise ValueError("X, arms and rewards must have the same length")
        if len(arms) and (arms.min() < 0 or arms.max() >= self.n_arms):
            raise ValueError(f"arm indices must lie in [0, {self.n_arms})")
        if not np.all(np.isfinite(rewards)):
            raise ValueError("rewards must be finite")
        return X, arms, rewards

    def update(self, x, arm: int, reward: float) -> "BasePolicy":
        """Record one observed reward. Prior entries are never touched."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if not 0 <= arm < self.n_arms:
            raise ValueError(f"arm {arm} out of range")
        self._ensure_state(len(x))
        if len(x) != self.history_.dim:
            raise ValueError("covariate dimension changed")
        self.history_.append(x, arm, reward)
        self._after_update(arm, reward)
        return self

    def _after_update(self, arm: int, reward: float) -> None:
        pass

    def partial_fit(self, X, arms, rewards) -> "BasePolicy":
        X, arms, rewards = self._validate_batch(X, arms, rewards)
        for x, a, y in zip(X, arms, rewards):
            self.update(x, int(a), float(y))
        return self

    def fit(self, X, arms, rewards) -> "BasePolicy":
        self.reset()
        return self.partial_fit(X, arms, rewards)

    # -- decisions -----------------------------------------------------
    def decide(self, x) -> DecisionTrace:
        raise NotImplementedError

    def choose(self, x) -> int:
        return self.decide(x).chosen_arm

    def predict(self, X) -> np.ndarray:
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return np.array([self.choose(x) for x in X], dtype=np.intp)

    def _init_trace(self) -> Optional[DecisionTrace]:
        t = self.t
        if t <= self.n_arms:
            return DecisionTrace(t - 1, INIT, t)
        return None


class KNNIndexPolicy(BasePolicy):
    """Generalized k-nearest-neighbour index strategy (k-NN UCB / k-NN KL-UCB).

    For each arm the neighbourhood size is chosen by minimizing the
    uncertainty ``sqrt(theta ln t / N_k) + phi(t) r_k``; the arm with the
    largest index at that size is played (lowest arm on ties). The first
    ``n_arms`` rounds play each arm once.

    Parameters
    ----------
    n_arms : int
    index : {"ucb", "klucb"}
    theta : float, optional
        Exploration scale. Defaults to 4.5 for UCB and 2.5 for KL-UCB.
    phi : Phi, optional
        Bias multiplier; defaults to ``Phi.const(1.0)``.
    tol : float
        Bisection tolerance of the KL-UCB inversion.
    metric : callable, optional
        ``metric(points, x) -> distances``; Euclidean by default.
    """

    def __init__(self, n_arms: int = 2, index: str = UCB, theta: Optional[float] = None,
                 phi: Optional[Phi] = None, tol: float = DEFAULT_TOL, metric=None):
        super().__init__(n_arms)
        self.index = index
        self.theta = theta
        self.phi = phi
        self.tol = tol
        self.metric = metric

    def _params(self):
        if self.index not in INDEX_KINDS:
            raise ValueError(f"index must be one of {INDEX_KINDS}")
        return _resolve_theta(self.theta, self.index), self.phi or Phi.const(1.0)

    def decide(self, x) -> DecisionTrace:
        theta, phi = self._params()
        trace = self._init_trace()
        if trace is not None:
            return trace
        t = self.t
        h = self.history_
        x = np.asarray(x, dtype=float).reshape(-1)
        dist = (self.metric or euclidean)(h.X, x)
        order = np.argsort(dist, kind="stable")
        radii = dist[order]
        arms_sorted = h.arms[order]
        rewards_sorted = h.rewards[order]
        phi_t = phi(t)
        budget = theta * math.log(t)

        per_arm = []
        for a in range(self.n_arms):
            hit = arms_sorted == a
            N = np.cumsum(hit)
            u = uncertainty_profile(theta, phi_t, t, N, radii)
            k, u_k = argmin_k(u)
            n_k = int(N[k - 1])
            # S over the chosen prefix only; same left-to-right order as prefix_stats
            s_k = float(np.cumsum(np.where(hit[:k], rewards_sorted[:k], 0.0))[-1])
            fhat = s_k / n_k if n_k else 0.0
            r_k = float(radii[k - 1])
            if self.index == UCB:
                value = fhat + u_k
            else:
                value = klucb_upper(fhat, n_k, budget, tol=self.tol) + phi_t * r_k
            per_arm.append(ArmTrace(k, n_k, fhat, r_k, u_k, value))
        chosen = _argmax_first([p.index for p in per_arm])
        return DecisionTrace(chosen, INDEX, t, tuple(per_arm))


class ContextFreeIndexPolicy(BasePolicy):
    """UCB / KL-UCB on global per-arm counts and means, ignoring covariates."""

    def __init__(self, n_arms: int = 2, index: str = UCB, theta: Optional[float] = None,
                 tol: float = DEFAULT_TOL):
        super().__init__(n_arms)
        self.index = index
        self.theta = theta
        self.tol = tol

    def _after_update(self, arm, reward):
        if not hasattr(self, "counts_"):
            self.counts_ = np.zeros(self.n_arms, dtype=np.intp)
            self.sums_ = np.zeros(self.n_arms)
        self.counts_[arm] += 1
        self.sums_[arm] += reward

    def decide(self, x=None) -> DecisionTrace:
        if self.index not in INDEX_KINDS:
            raise ValueError(f"index must be one of {INDEX_KINDS}")
        theta = _resolve_theta(self.theta, self.index)
        trace = self._init_trace()
        if trace is not None:
            return trace
        t = self.t
        budget = theta * math.log(t)
        per_arm = []
        for a in range(self.n_arms):
            n = int(self.counts_[a])
            fhat = self.sums_[a] / n if n else 0.0
            u = math.sqrt(budget / n) if n else math.inf
            if self.index == UCB:
                value = fhat + u
            else:
                value = klucb_upper(fhat, n, budget, tol=self.tol)
            per_arm.append(ArmTrace(t - 1, n, float(fhat), 0.0, u, value))
        chosen = _argmax_first([p.index for p in per_arm])
        return DecisionTrace(chosen, INDEX, t, tuple(per_arm))


class UniformRandomPolicy(BasePolicy):
    """Plays an arm uniformly at random each round."""

    def __init__(self, n_arms: int = 2, random_state=None):
        super().__init__(n_arms)
        self.random_state = random_state

    def _rng(self) -> np.random.Generator:
        if not hasattr(self, "rng_"):
            self.rng_ = np.random.default_rng(self.random_state)
        return self.rng_

    def reset(self):
        super().reset()
        if hasattr(self, "rng_"):
            del self.rng_
        return self

    def decide(self, x=None) -> DecisionTrace:
        return DecisionTrace(int(self._rng().integers(self.n_arms)), INDEX, self.t)


class OraclePolicy(BasePolicy):
    """Plays ``argmax_a f^a(x)`` using the environment's mean field."""

    def __init__(self, environment=None):
        super().__init__(getattr(environment, "n_arms", 1))
        self.environment = environment

    def decide(self, x) -> DecisionTrace:
        if self.environment is None:
            raise ValueError("oracle policy needs environment mean-field access")
        arm, _ = self.environment.oracle(x)
        return DecisionTrace(arm, INDEX, self.t)


class FixedArmPolicy(BasePolicy):
    """Always plays the same arm (useful as a closed-form regret reference)."""

    def __init__(self, n_arms: int = 2, arm: int = 0):
        super().__init__(n_arms)
        self.arm = arm

    def decide(self, x=None) -> DecisionTrace:
        if not 0 <= self.arm < self.n_arms:
            raise ValueError("arm out of range")
        return DecisionTrace(self.arm, INDEX, self.t)
