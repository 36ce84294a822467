"""Synthetic contextual-bandit environments on Euclidean metric spaces.

Every environment exposes its mean reward field so regret, gaps and the
structural diagnostics (margin mass, ball mass, Lipschitz spot checks) can be
computed exactly or by Monte Carlo. Environments are immutable; all sampling
takes an explicit :class:`numpy.random.Generator`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

BERNOULLI = "bernoulli"
GAUSSIAN = "gaussian_unit"
NOISE_KINDS = (BERNOULLI, GAUSSIAN)


@dataclass(frozen=True)
class Round:
    x: np.ndarray
    rewards: np.ndarray
    means: np.ndarray
    oracle_arm: int
    oracle_mean: float


def _check_noise(noise: str) -> None:
    if noise not in NOISE_KINDS:
        raise ValueError(f"unknown noise model {noise!r}; expected one of {NOISE_KINDS}")


class Environment:
    """Base class: subclasses define ``means_batch`` and ``sample_covariates``.

    Attributes set by subclasses: ``n_arms``, ``dim`` (ambient dimension),
    ``lipschitz`` (declared constant for every arm) and ``noise``.
    """

    n_arms: int
    dim: int
    lipschitz: float
    noise: str
    diameter: float

    @property
    def bounded_rewards(self) -> bool:
        return self.noise == BERNOULLI

    def sample_covariates(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def means_batch(self, X: np.ndarray) -> np.ndarray:
        """Mean rewards, shape ``(len(X), n_arms)``."""
        raise NotImplementedError

    def means(self, x) -> np.ndarray:
        return self.means_batch(np.asarray(x, dtype=float).reshape(1, self.dim))[0]

    def oracle(self, x) -> tuple[int, float]:
        """Best arm at ``x`` (lowest index on ties) and its mean."""
        m = self.means(x)
        a = int(np.argmax(m))
        return a, float(m[a])

    def gap(self, x) -> tuple[np.ndarray, float]:
        """Per-arm gaps ``max_b f^b(x) - f^a(x)`` and the smallest positive gap.

        The second value is 0 when every arm is optimal at ``x``.
        """
        m = self.means(x)
        per_arm = m.max() - m
        pos = per_arm[per_arm > 0]
        return per_arm, float(pos.min()) if len(pos) else 0.0

    def _noisy(self, rng: np.random.Generator, means: np.ndarray) -> np.ndarray:
        if self.noise == BERNOULLI:
            return (rng.random(means.shape) < means).astype(float)
        return means + rng.standard_normal(means.shape)

    def sample_round(self, rng: np.random.Generator, x=None) -> Round:
        """Draw a covariate (unless ``x`` is forced) and every arm's reward."""
        if x is None:
            x = self.sample_covariates(rng, 1)[0]
        else:
            x = np.asarray(x, dtype=float).reshape(self.dim)
        m = self.means(x)
        rewards = self._noisy(rng, m)
        a = int(np.argmax(m))
        return Round(x, rewards, m, a, float(m[a]))

    def sample_rewards(self, rng: np.random.Generator, x, size: int) -> np.ndarray:
        """``size`` independent reward vectors at a fixed covariate."""
        m = np.broadcast_to(self.means(x), (size, self.n_arms))
        return self._noisy(rng, m)


@dataclass(frozen=True)
class FlipLine(Environment):
    """Two arms on ``[0, 1]`` with means ``x`` and ``1 - x``.

    Margin exponent 1, Lipschitz constant 1, and a context-free policy
    suffers expected pseudo-regret exactly 0.25 per round.
    """

    noise: str = BERNOULLI
    n_arms: int = field(default=2, init=False)
    dim: int = field(default=1, init=False)
    lipschitz: float = field(default=1.0, init=False)
    diameter: float = field(default=1.0, init=False)

    def __post_init__(self):
        _check_noise(self.noise)

    def sample_covariates(self, rng, size):
        return rng.random((size, 1))

    def means_batch(self, X):
        x = np.asarray(X, dtype=float)[:, 0]
        return np.stack([x, 1.0 - x], axis=1)


@dataclass(frozen=True)
class BumpCube(Environment):
    """Uniform covariates on ``[0, 1]^D`` with one Lipschitz bump per arm.

    ``f^a(x) = base + height * max(0, 1 - ||x - c_a|| / width)`` where the
    centres ``c_a`` sit at ``(a + 0.5) / A`` along the first axis and 0.5 in
    every other coordinate. The declared Lipschitz constant is
    ``height / width``.
    """

    dim: int = 2
    n_arms: int = 3
    noise: str = BERNOULLI
    base: float = 0.25
    height: float = 0.5
    width: float = 0.5

    def __post_init__(self):
        _check_noise(self.noise)
        if self.dim < 1 or self.n_arms < 1:
            raise ValueError("dim and n_arms must be >= 1")
        if self.width <= 0 or self.height < 0:
            raise ValueError("width must be positive and height nonnegative")
        if self.base < 0 or self.base + self.height > 1:
            raise ValueError("base and base + height must lie in [0, 1]")

    @property
    def lipschitz(self) -> float:
        return self.height / self.width

    @property
    def diameter(self) -> float:
        return math.sqrt(self.dim)

    @property
    def centres(self) -> np.ndarray:
        c = np.full((self.n_arms, self.dim), 0.5)
        c[:, 0] = (np.arange(self.n_arms) + 0.5) / self.n_arms
        return c

    def sample_covariates(self, rng, size):
        return rng.random((size, self.dim))

    def means_batch(self, X):
        X = np.asarray(X, dtype=float)
        d = np.sqrt(((X[:, None, :] - self.centres[None, :, :]) ** 2).sum(axis=-1))
        return self.base + self.height * np.maximum(0.0, 1.0 - d / self.width)


@dataclass(frozen=True)
class EmbeddedCircle(Environment):
    """Uniform covariates on a circle of radius 1/2 inside ``R^D``.

    The circle lies in the first two coordinates, centred at ``(0.5, 0.5)``;
    remaining coordinates are 0. Arm ``a`` has the linear mean
    ``0.5 + <u_a, x - centre>`` with ``u_a`` the unit vector at angle
    ``2 pi a / A``, so means stay in ``[0, 1]`` and the Lipschitz constant is 1.
    The intrinsic dimension is 1 whatever ``D`` is.
    """

    dim: int = 2
    n_arms: int = 2
    noise: str = BERNOULLI
    radius: float = field(default=0.5, init=False)
    lipschitz: float = field(default=1.0, init=False)

    def __post_init__(self):
        _check_noise(self.noise)
        if self.dim < 2:
            raise ValueError("EmbeddedCircle needs ambient dimension >= 2")
        if self.n_arms < 1:
            raise ValueError("n_arms must be >= 1")

    @property
    def diameter(self) -> float:
        return 2 * self.radius

    @property
    def centre(self) -> np.ndarray:
        c = np.zeros(self.dim)
        c[:2] = 0.5
        return c

    def point(self, angle) -> np.ndarray:
        angle = np.atleast_1d(np.asarray(angle, dtype=float))
        X = np.zeros((len(angle), self.dim))
        X[:, 0] = 0.5 + self.radius * np.cos(angle)
        X[:, 1] = 0.5 + self.radius * np.sin(angle)
        return X

    def sample_covariates(self, rng, size):
        return self.point(rng.uniform(0.0, 2 * math.pi, size))

    def means_batch(self, X):
        X = np.asarray(X, dtype=float)
        ang = 2 * math.pi * np.arange(self.n_arms) / self.n_arms
        U = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return np.clip(0.5 + (X[:, :2] - 0.5) @ U.T, 0.0, 1.0)


ENVIRONMENTS = {
    "flip_line": FlipLine,
    "bump_cube": BumpCube,
    "embedded_circle": EmbeddedCircle,
}


def make_environment(kind: str, ambient_dim: Optional[int] = None, arms: Optional[int] = None,
                     noise: str = BERNOULLI, **params) -> Environment:
    """Build an environment from its config-file description."""
    if kind not in ENVIRONMENTS:
        raise ValueError(f"unknown environment kind {kind!r}")
    if kind == "flip_line":
        if ambient_dim not in (None, 1):
            raise ValueError("flip_line has ambient_dim 1")
        if arms not in (None, 2):
            raise ValueError("flip_line has exactly 2 arms")
        if params:
            raise ValueError(f"flip_line takes no params, got {sorted(params)}")
        return FlipLine(noise=noise)
    kw = dict(params)
    if ambient_dim is not None:
        kw["dim"] = ambient_dim
    if arms is not None:
        kw["n_arms"] = arms
    return ENVIRONMENTS[kind](noise=noise, **kw)


def margin_mass_estimate(env: Environment, delta: float, samples: int, rng: np.random.Generator) -> float:
    """Monte Carlo estimate of ``mu{x : 0 < gap(x) < delta}``."""
    if delta <= 0 or samples < 1:
        raise ValueError("need delta > 0 and samples >= 1")
    m = env.means_batch(env.sample_covariates(rng, samples))
    per_arm = m.max(axis=1, keepdims=True) - m
    masked = np.where(per_arm > 0, per_arm, np.inf)
    smallest = masked.min(axis=1)
    smallest[np.isinf(smallest)] = 0.0
    return float(np.mean((smallest > 0) & (smallest < delta)))


def ball_mass_estimate(env: Environment, x, r: float, samples: int, rng: np.random.Generator) -> float:
    """Monte Carlo estimate of the covariate mass in the open ball ``B(x, r)``."""
    if r <= 0 or samples < 1:
        raise ValueError("need r > 0 and samples >= 1")
    X = env.sample_covariates(rng, samples)
    x = np.asarray(x, dtype=float).reshape(env.dim)
    return float(np.mean(np.sqrt(((X - x) ** 2).sum(axis=1)) < r))


def lipschitz_violation(env: Environment, pairs: int, rng: np.random.Generator) -> float:
    """Largest ``|f^a(x0) - f^a(x1)| - lambda ||x0 - x1||`` over random pairs.

    Nonpositive (up to rounding) when the declared constant holds.
    """
    X0 = env.sample_covariates(rng, pairs)
    X1 = env.sample_covariates(rng, pairs)
    df = np.abs(env.means_batch(X0) - env.means_batch(X1)).max(axis=1)
    dist = np.sqrt(((X0 - X1) ** 2).sum(axis=1))
    return float((df - env.lipschitz * dist).max())


def max_gap(env: Environment, samples: int, rng: np.random.Generator) -> float:
    """Monte Carlo lower estimate of ``M = max_a sup_x gap_a(x)``."""
    m = env.means_batch(env.sample_covariates(rng, samples))
    return float((m.max(axis=1, keepdims=True) - m).max())
