"""Exact stationary distribution of the Erlang-A/C customer-count chain.

Probabilities are built in log space from the detailed-balance recursion
pi_k = pi_{k-1} * lambda / d(k), truncated once a geometric bound on the
remaining mass drops below ``tail_eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import PreconditionError, TruncationError
from .models import QueueParams, departure_rate

K_CAP = 10_000_000


@dataclass(frozen=True)
class LatticeDist:
    """Stationary pmf on k = 0..k_max plus a bound on the mass beyond k_max.

    ``tail_ratio`` bounds pi_{k+1}/pi_k for every k >= k_max (it is exact for
    Erlang-C, where the chain is geometric above n).
    """

    k_max: int
    probs: np.ndarray
    tail_mass_bound: float
    params: QueueParams
    tail_ratio: float
    _suffix: np.ndarray = field(init=False, repr=False, compare=False)
    _prefix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.probs.setflags(write=False)
        suffix = np.cumsum(self.probs[::-1])[::-1] + self.tail_mass_bound
        prefix = np.cumsum(self.probs)
        suffix.setflags(write=False)
        prefix.setflags(write=False)
        object.__setattr__(self, "_suffix", suffix)
        object.__setattr__(self, "_prefix", prefix)

    @property
    def counts(self) -> np.ndarray:
        return np.arange(self.k_max + 1)

    def points(self, centering: str = "fluid") -> np.ndarray:
        return self.params.lattice_point(self.counts, centering)

    @property
    def tail_is_exact(self) -> bool:
        return self.params.is_erlang_c

    def expect(self, fn, centering: str = "fluid") -> float:
        """E[fn(X~)] over the retained lattice (tail excluded)."""
        return float(np.dot(self.probs, fn(self.points(centering))))

    def survival_count(self, k):
        """P(X >= k) for integer k (exact beyond k_max for Erlang-C, a bound otherwise)."""
        k = np.asarray(k)
        inside = np.clip(k, 0, self.k_max)
        out = np.where(k <= 0, 1.0, self._suffix[inside])
        beyond = k > self.k_max
        if np.any(beyond):
            r = self.tail_ratio
            extra = self.probs[-1] * r ** (k - self.k_max).astype(float) / (1.0 - r)
            out = np.where(beyond, extra, out)
        return out


def _log_ratios(params: QueueParams, k0: int, k1: int) -> np.ndarray:
    k = np.arange(k0, k1 + 1, dtype=float)
    return math.log(params.lam) - np.log(departure_rate(params, k))


def stationary(params: QueueParams, tail_eps: float = 1e-14) -> LatticeDist:
    """Stationary pmf of the customer count, truncated with certified tail mass < tail_eps."""
    if not (0.0 < tail_eps <= 1e-6):
        raise PreconditionError(f"tail_eps must lie in (0, 1e-6], got {tail_eps}")
    n = params.n
    log_pi = np.concatenate([[0.0], np.cumsum(_log_ratios(params, 1, n))])
    if params.is_erlang_c:
        log_rho = math.log(params.rho)
        head = logsumexp(log_pi)
        # mass from n onwards is pi_n / (1 - rho); total is known in closed form
        log_total = np.logaddexp(logsumexp(log_pi[:-1]), log_pi[n] - math.log1p(-params.rho))
        # need pi_K * rho/(1-rho) <= eps * total
        target = math.log(tail_eps) + log_total - log_rho + math.log1p(-params.rho)
        extra = max(1, int(math.ceil((target - log_pi[n]) / log_rho)))
        k_max = n + extra
        if k_max > K_CAP:
            raise TruncationError(f"Erlang-C tail needs k_max={k_max} > {K_CAP}; raise tail_eps")
        geo = log_pi[n] + log_rho * np.arange(1, extra + 1)
        log_pi = np.concatenate([log_pi, geo])
        log_tail = log_pi[-1] + log_rho - math.log1p(-params.rho)
        del head
        probs = np.exp(log_pi - log_total)
        return LatticeDist(k_max, probs, float(math.exp(log_tail - log_total)), params, params.rho)

    # Erlang-A: ratios lambda/d(k) fall below one past the fluid point and keep falling.
    k_hi = n
    chunk = max(64, int(4 * math.sqrt(params.lam / params.alpha + 1.0)) + n)
    while True:
        new_hi = k_hi + chunk
        if new_hi > K_CAP:
            raise TruncationError(f"Erlang-A tail bound not reached within k <= {K_CAP}")
        log_pi = np.concatenate([log_pi, log_pi[-1] + np.cumsum(_log_ratios(params, k_hi + 1, new_hi))])
        k_hi = new_hi
        r = params.lam / float(departure_rate(params, k_hi + 1))
        if r < 1.0:
            log_total = logsumexp(log_pi)
            log_tail = log_pi[-1] + math.log(r) - math.log1p(-r)
            if log_tail - log_total < math.log(tail_eps):
                break
        chunk *= 2
    # trim the over-shoot: smallest K whose own bound still certifies the tail
    ks = np.arange(log_pi.size)
    ratios = params.lam / departure_rate(params, ks + 1)
    with np.errstate(divide="ignore"):
        bounds = np.where(ratios < 1.0, log_pi + np.log(ratios) - np.log1p(-np.minimum(ratios, 1 - 1e-300)), np.inf)
    log_total = logsumexp(log_pi)
    ok = np.nonzero(bounds - log_total < math.log(tail_eps))[0]
    ok = ok[ok >= n]
    k_max = int(ok[0]) if ok.size else int(log_pi.size - 1)
    r = float(ratios[k_max])
    log_pi = log_pi[: k_max + 1]
    log_tail = float(bounds[k_max])
    log_total = np.logaddexp(logsumexp(log_pi), log_tail)
    probs = np.exp(log_pi - log_total)
    return LatticeDist(k_max, probs, float(math.exp(log_tail - log_total)), params, r)


def tail_moment_bound(dist: LatticeDist, m: int, centering: str = "fluid") -> float:
    """Upper bound on sum_{k > k_max} pi_k |x_k|^m using the geometric ratio bound.

    With c = |x_{k_max}|, s = -log(r)/delta the sum is at most
    pi_K [ int_0^inf r^t (c + delta t)^m dt + max_t r^t (c + delta t)^m ],
    and the integral equals (1/delta) sum_j m!/(m-j)! c^(m-j) / s^(j+1).
    """
    r = dist.tail_ratio
    if not (0.0 < r < 1.0):
        raise TruncationError("tail ratio bound is not below one")
    d = dist.params.delta
    c = abs(float(dist.points(centering)[-1]))
    s = -math.log(r) / d
    integral = 0.0
    fall = 1.0
    for j in range(m + 1):
        integral += fall * c ** (m - j) / s ** (j + 1)
        fall *= (m - j)
    integral /= d
    t_star = max(0.0, m / -math.log(r) - c / d)
    peak = r ** t_star * (c + d * t_star) ** m
    return float(dist.probs[-1] * (integral + peak))


def scaled_moment(dist: LatticeDist, m: int, centering: str = "fluid",
                  rel_tol: float = 1e-9) -> float:
    """E[X~^m] with X~ = delta (X - center); refuses if the truncated tail could matter.

    The tail contribution must be below ``rel_tol`` times max(1, |moment|).
    """
    if int(m) != m or m < 0 or m > 20:
        raise PreconditionError(f"moment order must be an integer in [0, 20], got {m}")
    if m == 0:
        return float(dist.probs.sum() + dist.tail_mass_bound)
    x = dist.points(centering)
    value = float(np.dot(dist.probs, x ** m))
    bound = tail_moment_bound(dist, m, centering)
    if bound > rel_tol * max(1.0, abs(value)):
        raise TruncationError(f"moment {m} tail contribution up to {bound:.3g} is not certifiable; "
                              f"use a smaller tail_eps")
    return value


def stationary_for_moment(params: QueueParams, m: int, centering: str = "fluid",
                          start_eps: float = 1e-14):
    """Shrink tail_eps until the order-m moment is certified; returns (dist, moment)."""
    eps = start_eps
    while True:
        dist = stationary(params, eps)
        try:
            return dist, scaled_moment(dist, m, centering)
        except TruncationError:
            eps *= 1e-8
            if eps < 1e-300:
                raise


def pmf_at(dist: LatticeDist, k: int) -> float:
    if k < 0:
        return 0.0
    if k <= dist.k_max:
        return float(dist.probs[k])
    return float(dist.probs[-1] * dist.tail_ratio ** (k - dist.k_max))


def tail_prob(dist: LatticeDist, z: float, centering: str = "fluid") -> float:
    """P(X~ >= z)."""
    k = math.ceil(dist.params.center(centering) + z / dist.params.delta - 1e-9)
    return float(dist.survival_count(k))


def cdf(dist: LatticeDist, x, centering: str = "fluid"):
    """P(X~ <= x); right-continuous step function."""
    x = np.asarray(x, dtype=float)
    k = np.floor(dist.params.center(centering) + x / dist.params.delta + 1e-9).astype(np.int64)
    out = np.where(k < 0, 0.0, dist._prefix[np.clip(k, 0, dist.k_max)])
    beyond = k > dist.k_max
    if np.any(beyond):
        out = np.where(beyond, 1.0 - dist.survival_count(k + 1), out)
    return out


# the two-dimensional Coxian chain lives in its own module; expose it here as well
from .coxian import C2Dist, mphn_c2_stationary  # noqa: E402,F401
