"""Monte Carlo checks of a self-normalized concentration inequality.

Setting: ``Z_1..Z_n`` independent, a predictable selection ``eps_t`` in
{0, 1} decided before ``Z_t`` is drawn, ``S = sum eps_t Z_t``,
``N = sum eps_t`` and ``xi = S / N`` (0 when ``N = 0``). If ``phi`` bounds the
log-MGF of every ``Z_t`` on ``rho >= 0`` then

    P[N * phi_star(xi) > delta] <= e * ceil(delta * ln n) * exp(-delta)

where ``phi_star(x) = sup_{rho >= 0} (rho x - phi(rho))``. This module
provides the envelopes, their conjugates (closed form and numeric), the
bound, the supermartingale ``W_t = exp(rho S(t) - N(t) phi(rho))`` and
vectorized falsification experiments.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .indices import kl_div, kl_div_array

CLOSED = "closed"
NUMERIC = "numeric"


class MgfBound:
    """Convex log-MGF envelope ``phi`` on ``[0, inf)`` with ``phi(0) = 0``."""

    name = "mgf"
    dphi_limit = math.inf

    def phi(self, rho: float) -> float:
        raise NotImplementedError

    def dphi(self, rho: float) -> float:
        raise NotImplementedError

    def legendre_closed(self, x: float) -> Optional[float]:
        return None

    def legendre_array(self, x: np.ndarray) -> np.ndarray:
        """Conjugate evaluated elementwise (closed form where available)."""
        return np.array([legendre(self, float(v)) for v in np.ravel(x)]).reshape(np.shape(x))

    def as_dict(self) -> dict:
        return {"kind": self.name}


class QuadraticEnvelope(MgfBound):
    """``phi(rho) = coef * rho^2``; ``coef = 1/2`` is the standard Gaussian envelope."""

    name = "quadratic"

    def __init__(self, coef: float = 0.5):
        if coef <= 0:
            raise ValueError("coef must be positive")
        self.coef = float(coef)

    def phi(self, rho):
        return self.coef * rho * rho

    def dphi(self, rho):
        return 2.0 * self.coef * rho

    def legendre_closed(self, x):
        return x * x / (4.0 * self.coef) if x > 0 else 0.0

    def legendre_array(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, x * x / (4.0 * self.coef), 0.0)

    def as_dict(self):
        return {"kind": self.name, "coef": self.coef}

    def __repr__(self):
        return f"QuadraticEnvelope(coef={self.coef!r})"


class GaussianHalfSquare(QuadraticEnvelope):
    name = "gaussian"

    def __init__(self):
        super().__init__(0.5)

    def as_dict(self):
        return {"kind": self.name}

    def __repr__(self):
        return "GaussianHalfSquare()"


class BernoulliEnvelope(MgfBound):
    """``phi(rho) = log(1 + xi_max (e^rho - 1))`` for variables in [0, 1] with mean <= xi_max.

    Its conjugate is the Bernoulli divergence ``d(x, xi_max)`` on
    ``[xi_max, 1]``, zero below ``xi_max`` and infinite above 1.
    """

    name = "bernoulli"
    dphi_limit = 1.0

    def __init__(self, xi_max: float):
        if not 0.0 < xi_max < 1.0:
            raise ValueError("xi_max must lie in (0, 1)")
        self.xi_max = float(xi_max)

    def phi(self, rho):
        if rho < 30.0:
            return math.log1p(self.xi_max * math.expm1(rho))
        return rho + math.log(self.xi_max + (1.0 - self.xi_max) * math.exp(-rho))

    def dphi(self, rho):
        return 1.0 / (1.0 + (1.0 - self.xi_max) / self.xi_max * math.exp(-rho))

    def legendre_closed(self, x):
        if x <= self.xi_max:
            return 0.0
        if x > 1.0:
            return math.inf
        return kl_div(x, self.xi_max)

    def legendre_array(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        mid = (x > self.xi_max) & (x <= 1.0)
        out[mid] = kl_div_array(x[mid], self.xi_max)
        out[x > 1.0] = math.inf
        return out

    def as_dict(self):
        return {"kind": self.name, "xi_max": self.xi_max}

    def __repr__(self):
        return f"BernoulliEnvelope(xi_max={self.xi_max!r})"


def _legendre_numeric(bound: MgfBound, x: float, rho_tol: float = 1e-12) -> float:
    if x <= bound.dphi(0.0):
        return 0.0
    limit = bound.dphi_limit
    if x > limit:
        return math.inf
    if x == limit:
        # supremum approached as rho -> inf; objective is increasing in rho
        rho, prev = 1.0, -math.inf
        val = rho * x - bound.phi(rho)
        while val - prev > 1e-15 * max(1.0, abs(val)) and rho < 1e6:
            prev, rho = val, 2.0 * rho
            val = rho * x - bound.phi(rho)
        return val
    lo, hi = 0.0, 1.0
    while bound.dphi(hi) < x:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rho_tol:
        mid = 0.5 * (lo + hi)
        if bound.dphi(mid) < x:
            lo = mid
        else:
            hi = mid
    rho = 0.5 * (lo + hi)
    return rho * x - bound.phi(rho)


def legendre(bound: MgfBound, x: float, method: str = "auto") -> float:
    """``sup_{rho >= 0} (rho x - phi(rho))``.

    ``method="auto"`` prefers the closed form; ``"numeric"`` solves
    ``phi'(rho) = x`` by doubling and bisection.
    """
    if method not in ("auto", CLOSED, NUMERIC):
        raise ValueError(f"unknown method {method!r}")
    if method != NUMERIC:
        v = bound.legendre_closed(x)
        if v is not None:
            return v
        if method == CLOSED:
            raise ValueError(f"{bound!r} has no closed-form conjugate")
    return _legendre_numeric(bound, x)


def legendre_identity_check(bound: MgfBound, rho: float, method: str = "auto") -> float:
    """``|phi_star(phi'(rho)) - (rho phi'(rho) - phi(rho))|``."""
    d = bound.dphi(rho)
    return abs(legendre(bound, d, method) - (rho * d - bound.phi(rho)))


def tail_bound(delta: float, n: int) -> float:
    """``min(1, e * ceil(delta ln n) * exp(-delta))``; defined for ``delta > 1``."""
    if not delta > 1:
        raise ValueError("peeling constant gamma=delta/(delta-1) undefined for delta <= 1")
    if n < 2:
        raise ValueError("n must be >= 2")
    return min(1.0, math.e * math.ceil(delta * math.log(n)) * math.exp(-delta))


# -- experiments ------------------------------------------------------------

class StandardNormal:
    name = "normal"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_normal(size)

    def as_dict(self):
        return {"kind": self.name}


class Bernoulli:
    name = "bernoulli"

    def __init__(self, p: float):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        self.p = float(p)

    def sample(self, rng, size):
        return (rng.random(size) < self.p).astype(float)

    def as_dict(self):
        return {"kind": self.name, "p": self.p}


def check_pairing(dist, bound: MgfBound) -> None:
    """Reject (distribution, envelope) pairs the harness does not support."""
    if isinstance(dist, StandardNormal) and isinstance(bound, QuadraticEnvelope):
        return
    if isinstance(dist, Bernoulli) and isinstance(bound, BernoulliEnvelope):
        if dist.p > bound.xi_max:
            raise ValueError(f"Bernoulli({dist.p}) mean exceeds xi_max={bound.xi_max}")
        return
    raise ValueError(f"incompatible pairing: {dist.name} with {bound!r}")


# A scheme maps (t, S(t-1), N(t-1), rng) to the selection for round t.
# It is always evaluated before Z_t is drawn.
Scheme = Callable[[int, np.ndarray, np.ndarray, np.random.Generator], np.ndarray]


def always_on(t, S, N, rng):
    return np.ones(S.shape, dtype=bool)


def iid_coin(q: float = 0.5) -> Scheme:
    def scheme(t, S, N, rng):
        return rng.random(S.shape) < q
    scheme.q = q
    return scheme


def adaptive_sign(t, S, N, rng):
    return S <= 0


def adaptive_count(t, S, N, rng):
    return N < t / 2


def make_scheme(name: str, q: float = 0.5) -> Scheme:
    if name == "always_on":
        return always_on
    if name == "iid_coin":
        return iid_coin(q)
    if name == "adaptive_sign":
        return adaptive_sign
    if name == "adaptive_count":
        return adaptive_count
    raise ValueError(f"unknown scheme {name!r}")


SCHEMES = ("always_on", "iid_coin", "adaptive_sign", "adaptive_count")


@dataclass
class AdaptedExperiment:
    n: int
    dist: object
    scheme: Scheme = always_on
    scheme_name: str = "always_on"


def simulate_selected_sums(exp: AdaptedExperiment, replications: int,
                           rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Final ``(S(n), N(n))`` for ``replications`` independent trajectories."""
    S = np.zeros(replications)
    N = np.zeros(replications, dtype=np.int64)
    for t in range(1, exp.n + 1):
        eps = np.asarray(exp.scheme(t, S, N, rng), dtype=bool)
        z = exp.dist.sample(rng, replications)
        S = S + np.where(eps, z, 0.0)
        N = N + eps
    return S, N


def self_normalized_mean(S, N) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    N = np.asarray(N)
    out = np.zeros(S.shape)
    np.divide(S, N, out=out, where=N > 0)
    return out


def violation_mask(bound: MgfBound, S, N, delta: float, mode: str = "conjugate") -> np.ndarray:
    """Trajectories where ``N phi_star(xi) > delta``.

    ``mode="divergence"`` uses the Bernoulli-divergence form
    ``xi > xi_max and N d(xi, xi_max) > delta`` instead.
    """
    N = np.asarray(N)
    xi = self_normalized_mean(S, N)
    if mode == "conjugate":
        with np.errstate(invalid="ignore"):
            v = N * bound.legendre_array(xi) > delta
        return v & (N > 0)
    if mode == "divergence":
        if not isinstance(bound, BernoulliEnvelope):
            raise ValueError("divergence mode needs a BernoulliEnvelope")
        above = xi > bound.xi_max
        d = np.zeros(xi.shape)
        d[above] = kl_div_array(np.minimum(xi[above], 1.0), bound.xi_max)
        return above & (N * d > delta)
    raise ValueError(f"unknown mode {mode!r}")


def run_adapted_experiment(exp: AdaptedExperiment, bound: MgfBound, delta: float,
                           rng: np.random.Generator, mode: str = "conjugate"):
    """One trajectory: ``(N(n), xi_n, violated)``."""
    check_pairing(exp.dist, bound)
    S, N = simulate_selected_sums(exp, 1, rng)
    violated = bool(violation_mask(bound, S, N, delta, mode)[0])
    return int(N[0]), float(self_normalized_mean(S, N)[0]), violated


@dataclass(frozen=True)
class ViolationReport:
    scheme: str
    delta: float
    n: int
    replications: int
    violations: int
    rate: float
    bound: float
    half_width: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def make_report(scheme: str, delta: float, n: int, violations: int, replications: int) -> ViolationReport:
    b = tail_bound(delta, n)
    hw = 3.0 * math.sqrt(b * (1.0 - b) / replications)
    rate = violations / replications
    return ViolationReport(scheme, float(delta), n, replications, int(violations), rate, b, hw,
                           rate <= b + hw)


def verify_bound(bound: MgfBound, dist, n: int, deltas: Iterable[float], replications: int,
                 rng: np.random.Generator, schemes: Sequence[str] = SCHEMES,
                 q: float = 0.5) -> list[ViolationReport]:
    """Empirical violation rate per (scheme, delta), one simulation per scheme."""
    check_pairing(dist, bound)
    deltas = list(deltas)
    for d in deltas:
        tail_bound(d, n)
    reports = []
    for name in schemes:
        exp = AdaptedExperiment(n, dist, make_scheme(name, q), name)
        S, N = simulate_selected_sums(exp, replications, rng)
        for d in deltas:
            v = int(violation_mask(bound, S, N, d).sum())
            reports.append(make_report(name, d, n, v, replications))
    return reports


@dataclass(frozen=True)
class SupermartingaleReport:
    rho: float
    scheme: str
    mean: float
    stderr: float
    passed: bool


def supermartingale_values(bound: MgfBound, S, N, rho: float) -> np.ndarray:
    return np.exp(rho * np.asarray(S) - np.asarray(N) * bound.phi(rho))


def supermartingale_check(bound: MgfBound, exp: AdaptedExperiment, rhos: Iterable[float],
                          replications: int, rng: np.random.Generator):
    """Monte Carlo ``E[W_n]`` per ``rho``; passes when ``<= 1 + 3 stderr``.

    Returns ``(reports, max_deviation)`` where the deviation is the largest
    ``mean - 1`` observed.
    """
    check_pairing(exp.dist, bound)
    S, N = simulate_selected_sums(exp, replications, rng)
    reports = []
    for rho in rhos:
        w = supermartingale_values(bound, S, N, rho)
        mean = float(w.mean())
        se = float(w.std(ddof=1) / math.sqrt(replications)) if replications > 1 else 0.0
        reports.append(SupermartingaleReport(float(rho), exp.scheme_name, mean, se,
                                             mean <= 1.0 + 3.0 * se))
    dev = max((r.mean - 1.0 for r in reports), default=0.0)
    return reports, dev
