"""Neighbour ordering and per-arm prefix statistics over a reward history.

For a query point ``x`` the history is sorted by distance (stable, so ties
keep history order) and, for one arm, the counts ``N[k]``, reward sums
``S[k]`` and means ``fhat[k]`` over the ``k`` nearest points are produced in a
single cumulative pass. Index ``k - 1`` of each array holds the value for a
neighbourhood of ``k`` points. One call costs ``O(t log t)``; a full run of
horizon ``n`` is therefore ``O(n^2 log n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Optional

import numpy as np

Metric = Callable[[np.ndarray, np.ndarray], np.ndarray]


def euclidean(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Distances from each row of ``points`` to ``x``."""
    diff = points - x
    return np.sqrt(np.sum(diff * diff, axis=-1))


class HistoryEntry(NamedTuple):
    x: np.ndarray
    arm: int
    reward: float


class History:
    """Append-only reward history backed by growable numpy buffers."""

    def __init__(self, dim: int, capacity: int = 64):
        self.dim = int(dim)
        self._X = np.empty((max(capacity, 1), self.dim))
        self._arms = np.empty(max(capacity, 1), dtype=np.intp)
        self._rewards = np.empty(max(capacity, 1))
        self._len = 0

    def __len__(self) -> int:
        return self._len

    def _grow(self) -> None:
        cap = 2 * len(self._arms)
        for name in ("_X", "_arms", "_rewards"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self._len] = old[: self._len]
            setattr(self, name, new)

    def append(self, x, arm: int, reward: float) -> None:
        if self._len == len(self._arms):
            self._grow()
        self._X[self._len] = x
        self._arms[self._len] = arm
        self._rewards[self._len] = reward
        self._len += 1

    def _view(self, arr: np.ndarray) -> np.ndarray:
        v = arr[: self._len]
        v.flags.writeable = False
        return v

    @property
    def X(self) -> np.ndarray:
        return self._view(self._X)

    @property
    def arms(self) -> np.ndarray:
        return self._view(self._arms)

    @property
    def rewards(self) -> np.ndarray:
        return self._view(self._rewards)

    def __getitem__(self, s: int) -> HistoryEntry:
        if not -self._len <= s < self._len:
            raise IndexError(s)
        s %= self._len
        return HistoryEntry(self._X[s].copy(), int(self._arms[s]), float(self._rewards[s]))

    def __iter__(self) -> Iterator[HistoryEntry]:
        for s in range(self._len):
            yield self[s]

    def copy(self) -> "History":
        h = History(self.dim, capacity=max(self._len, 1))
        h._X[: self._len] = self._X[: self._len]
        h._arms[: self._len] = self._arms[: self._len]
        h._rewards[: self._len] = self._rewards[: self._len]
        h._len = self._len
        return h


@dataclass(frozen=True)
class NeighbourOrder:
    """Distance-sorted permutation of history indices (0-based)."""

    order: np.ndarray
    dist: np.ndarray

    def __len__(self) -> int:
        return len(self.order)


@dataclass(frozen=True)
class PrefixStats:
    arm: int
    N: np.ndarray
    S: np.ndarray
    r: np.ndarray
    fhat: np.ndarray

    def __len__(self) -> int:
        return len(self.N)


def order_neighbours(x, X_hist, metric: Optional[Metric] = None) -> NeighbourOrder:
    """Sort history points by distance to ``x``; ties go to the earlier sample."""
    X_hist = np.asarray(X_hist, dtype=float)
    if len(X_hist) == 0:
        raise ValueError("no history")
    if X_hist.ndim == 1:
        X_hist = X_hist[:, None]
    x = np.asarray(x, dtype=float).reshape(-1)
    dist = (metric or euclidean)(X_hist, x)
    order = np.argsort(dist, kind="stable")
    return NeighbourOrder(order, dist[order])


def prefix_stats(order: NeighbourOrder, arms, rewards, arm: int, n_arms: Optional[int] = None) -> PrefixStats:
    """Cumulative count, sum and mean of ``arm`` over every neighbourhood size.

    Means follow the ``0/0 = 0`` convention.
    """
    arms = np.asarray(arms)
    rewards = np.asarray(rewards, dtype=float)
    if len(order) != len(arms):
        raise ValueError("order does not match history length")
    if arm < 0 or (n_arms is not None and arm >= n_arms):
        raise ValueError(f"arm index {arm} out of range")
    hit = arms[order.order] == arm
    N = np.cumsum(hit)
    # adding 0.0 for other arms leaves partial sums bit-identical
    S = np.cumsum(np.where(hit, rewards[order.order], 0.0))
    fhat = np.zeros_like(S)
    np.divide(S, N, out=fhat, where=N > 0)
    return PrefixStats(arm, N, S, order.dist, fhat)


def naive_stats(x, X_hist, arms, rewards, arm: int, k: int, n_arms: Optional[int] = None):
    """Recompute ``(N, S, r, fhat)`` for the ``k`` nearest points from scratch.

    Independent reference for :func:`prefix_stats`: distances are summed
    coordinate by coordinate in plain Python and the history is fully
    re-sorted on ``(distance, index)``.
    """
    if not 1 <= k <= len(arms):
        raise ValueError("k must lie in [1, len(history)]")
    if arm < 0 or (n_arms is not None and arm >= n_arms):
        raise ValueError(f"arm index {arm} out of range")
    xq = [float(v) for v in np.asarray(x, dtype=float).reshape(-1)]
    dists = []
    for s, row in enumerate(np.asarray(X_hist, dtype=float).reshape(len(arms), -1)):
        acc = 0.0
        for a, b in zip(row, xq):
            d = float(a) - b
            acc += d * d
        dists.append((math.sqrt(acc), s))
    dists.sort()
    n, total = 0, 0.0
    for _, s in dists[:k]:
        if int(arms[s]) == arm:
            n += 1
            total += float(rewards[s])
    fhat = total / n if n else 0.0
    return n, total, dists[k - 1][0], fhat
