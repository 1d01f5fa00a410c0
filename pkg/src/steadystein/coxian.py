"""Exact stationary distribution of the M/C2/n+M chain.

With a two-phase Coxian service time every waiting customer is in phase 1,
so the pair (x1, x2) of phase-1 and phase-2 customers is itself a Markov
chain. It is solved by Gauss-Seidel sweeps accelerated with two exact
aggregation steps: both the phase-2 count and the total count induce
birth-death chains whose balance equations are solved in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels as K
from .errors import NumericError, PreconditionError


@dataclass(frozen=True)
class C2Dist:
    n: int
    n_total: int
    lam: float
    alpha: float
    nu1: float
    nu2: float
    p12: float
    probs: np.ndarray
    offsets: np.ndarray
    tail_mass_bound: float
    residual: float
    sweeps: int

    @property
    def delta(self) -> float:
        return 1.0 / math.sqrt(self.lam)

    def states(self):
        """Arrays (x1, x2) aligned with ``probs``."""
        x1 = np.concatenate([np.arange(self.n_total - x2 + 1) for x2 in range(self.n + 1)])
        x2 = np.concatenate([np.full(self.n_total - x2 + 1, x2) for x2 in range(self.n + 1)])
        return x1, x2

    def total_pmf(self) -> np.ndarray:
        x1, x2 = self.states()
        return np.bincount(x1 + x2, weights=self.probs, minlength=self.n_total + 1)

    def scaled_total(self) -> np.ndarray:
        return self.delta * (np.arange(self.n_total + 1) - self.n)

    def abs_scaled_mean(self) -> float:
        """E|T~| with T~ = delta (x1 + x2 - n)."""
        return float(self.total_pmf() @ np.abs(self.scaled_total()))

    def scaled_moment(self, m: int) -> float:
        return float(self.total_pmf() @ self.scaled_total() ** m)

    def marginal_x1(self) -> np.ndarray:
        x1, _ = self.states()
        return np.bincount(x1, weights=self.probs, minlength=self.n_total + 1)


def truncation_level(lam: float, n: int, alpha: float, tail_eps: float) -> int:
    """Total-count cap: above n the count is dominated by an M/M/inf queue with
    per-customer rate alpha, whose stationary law is Poisson(lam/alpha)."""
    extra = int(stats.poisson.isf(tail_eps, lam / alpha)) + 1
    return n + max(extra, 1)


def _initial_guess(n, n_total, lam, nu1, nu2, p12, offsets):
    x1_mean = lam / nu1
    x2_mean = lam * p12 / nu2
    pi = np.empty(offsets[-1] + n_total - n + 1)
    for x2 in range(n + 1):
        x1 = np.arange(n_total - x2 + 1)
        log_w = stats.poisson.logpmf(x1, x1_mean) + stats.poisson.logpmf(x2, x2_mean)
        pi[offsets[x2]: offsets[x2] + x1.size] = np.exp(np.maximum(log_w, -700.0))
    return pi / pi.sum()


def mphn_c2_stationary(nu1: float, nu2: float, p12: float, lam: float, n: int, alpha: float,
                       tail_eps: float = 1e-12, tol: float = 1e-10,
                       max_sweeps: int = 500_000) -> C2Dist:
    """Stationary law of (phase-1 count, phase-2 count) for the M/C2/n+M queue."""
    if alpha <= 0:
        raise PreconditionError("the two-phase chain needs alpha > 0 for positive recurrence")
    if not (0.0 <= p12 <= 1.0) or nu1 <= 0 or nu2 <= 0 or lam <= 0 or n < 1:
        raise PreconditionError("invalid Coxian or queue parameters")
    n_total = truncation_level(lam, n, alpha, tail_eps)
    widths = np.array([n_total - x2 + 1 for x2 in range(n + 1)], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(widths)[:-1]]).astype(np.int64)
    pi = _initial_guess(n, n_total, lam, nu1, nu2, p12, offsets)
    sweeps = 0
    change = math.inf
    while sweeps < max_sweeps:
        done, change = K.c2_gauss_seidel(n, n_total, lam, alpha, nu1, nu2, p12, pi, offsets,
                                         tol, 1, 1.0)
        sweeps += done
        if change < tol:
            break
        if p12 > 0.0:
            K.c2_level_rescale(n, n_total, nu1, nu2, p12, pi, offsets)
        K.c2_total_rescale(n, n_total, lam, alpha, nu1, nu2, p12, pi, offsets)
    residual = float(K.c2_residual(n, n_total, lam, alpha, nu1, nu2, p12, pi, offsets))
    if change >= tol:
        raise NumericError(f"Gauss-Seidel did not converge in {max_sweeps} sweeps: "
                           f"relative change {change:.3g}, balance residual {residual:.3g}")
    pi.setflags(write=False)
    return C2Dist(n, n_total, lam, alpha, nu1, nu2, p12, pi, offsets, tail_eps, residual, sweeps)
