"""Uncertainty values and index functions for the k-NN index strategy.

All logarithms are natural. Infinite values are plain ``math.inf`` so they
order correctly against finite floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .neighbours import PrefixStats

UCB = "ucb"
KLUCB = "klucb"
INDEX_KINDS = (UCB, KLUCB)

# recommended exploration scales: UCB needs theta > 4, KL-UCB theta > 2
DEFAULT_THETA = {UCB: 4.5, KLUCB: 2.5}

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100


@dataclass(frozen=True)
class Phi:
    """Nondecreasing bias multiplier ``phi: N -> [1, inf)``.

    ``kind="const"`` gives ``phi(t) = scale`` (``scale >= 1``);
    ``kind="log"`` gives ``phi(t) = max(1, scale * ln t)``.
    """

    kind: str = "const"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("const", "log"):
            raise ValueError(f"unknown phi kind {self.kind!r}; expected 'const' or 'log'")
        if not math.isfinite(self.scale) or self.scale <= 0:
            raise ValueError("phi scale must be a positive finite number")
        if self.kind == "const" and self.scale < 1:
            raise ValueError("constant phi must be >= 1")

    @classmethod
    def const(cls, c: float = 1.0) -> "Phi":
        return cls("const", c)

    @classmethod
    def log(cls, c: float = 1.0) -> "Phi":
        return cls("log", c)

    def __call__(self, t: int) -> float:
        if self.kind == "const":
            return float(self.scale)
        return max(1.0, self.scale * math.log(t))

    @property
    def bounded(self) -> bool:
        return self.kind == "const"


def phi_inverse(phi, lam: float, max_t: int = 2**62) -> float:
    """Smallest ``t >= 1`` with ``phi(t) >= lam``, or ``math.inf`` if none.

    ``phi`` may be any nondecreasing callable on the positive integers. The
    search doubles an upper bracket and then bisects; an unbounded search is
    cut off at ``max_t`` and reported as infinite.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if phi(1) >= lam:
        return 1
    if getattr(phi, "bounded", False):
        return math.inf
    lo, hi = 1, 2
    while phi(hi) < lam:
        lo, hi = hi, hi * 2
        if hi > max_t:
            return math.inf
    # phi(lo) < lam <= phi(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if phi(mid) >= lam:
            hi = mid
        else:
            lo = mid
    return hi


def _check_unit(name: str, v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name}={v!r} outside [0, 1]")


def kl_div(p: float, q: float) -> float:
    """Bernoulli Kullback-Leibler divergence ``d(p, q)``.

    Uses ``0 log 0 = 0``; returns ``inf`` when ``q`` sits on a boundary that
    ``p`` does not.
    """
    _check_unit("p", p)
    _check_unit("q", q)
    return _kl(p, q)


def _kl(p: float, q: float) -> float:
    if p == q:
        return 0.0
    out = 0.0
    if p > 0.0:
        if q == 0.0:
            return math.inf
        out += p * math.log(p / q)
    if p < 1.0:
        if q == 1.0:
            return math.inf
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return out


def kl_div_array(p, q) -> np.ndarray:
    """Elementwise :func:`kl_div` for arrays (no range validation)."""
    p, q = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(p > 0, p * np.log(p / q), 0.0)
        b = np.where(p < 1, (1 - p) * np.log((1 - p) / (1 - q)), 0.0)
    out = a + b
    out[p == q] = 0.0
    return out


def uncertainty(theta: float, phi, t: int, n_k: int, r_k: float) -> float:
    """``sqrt(theta ln t / N) + phi(t) r``; infinite when ``N == 0``."""
    if t < 2:
        raise ValueError("uncertainty needs t >= 2")
    if n_k == 0:
        return math.inf
    return math.sqrt(theta * math.log(t) / n_k) + phi(t) * r_k


def uncertainty_profile(theta: float, phi_t: float, t: int, counts, radii) -> np.ndarray:
    """Vector of uncertainty values over all neighbourhood sizes."""
    counts = np.asarray(counts)
    budget = theta * math.log(t)
    out = np.full(counts.shape, math.inf)
    pos = counts > 0
    out[pos] = np.sqrt(budget / counts[pos]) + phi_t * np.asarray(radii)[pos]
    return out


def argmin_k(u: np.ndarray) -> tuple[int, float]:
    """Minimizing neighbourhood size (1-based, smallest on ties)."""
    if len(u) == 0:
        raise ValueError("empty statistics")
    i = int(np.argmin(u))
    if math.isinf(u[i]):
        return len(u), math.inf
    return i + 1, float(u[i])


def select_k(theta: float, phi, t: int, stats: "PrefixStats") -> tuple[int, float]:
    """Choose the number of neighbours minimizing the uncertainty."""
    return argmin_k(uncertainty_profile(theta, phi(t), t, stats.N, stats.r))


def index_ucb(fhat_k: float, u_k: float) -> float:
    return fhat_k + u_k


def klucb_upper(
    fhat: float,
    n: int,
    budget: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """``sup{w in [0, 1] : n d(fhat, w) <= budget}`` by bisection on ``[fhat, 1]``.

    The returned point is always feasible and lies within ``tol`` of the
    first infeasible point.
    """
    if not 0.0 <= fhat <= 1.0:
        raise ValueError("KL-UCB requires bounded rewards")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if n == 0 or fhat == 1.0:
        return 1.0
    if budget <= 0:
        return fhat
    lo, hi = fhat, 1.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if n * _kl(fhat, mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def index_klucb(
    fhat_k: float,
    n_k: int,
    theta: float,
    phi,
    t: int,
    r_k: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """k-NN KL-UCB index: KL upper confidence limit plus ``phi(t) r``."""
    upper = klucb_upper(fhat_k, n_k, theta * math.log(t), tol=tol, max_iter=max_iter)
    return upper + phi(t) * r_k
