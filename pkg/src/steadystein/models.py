"""Queue parameterizations and the one-dimensional drift / diffusion coefficients.

States are measured on the scaled axis x = delta * (k - x_fluid), where k is the
customer count, delta = 1/sqrt(R) and x_fluid is the fluid equilibrium.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, StabilityError

CONSTANT = "constant"
STATE_DEPENDENT = "state_dependent"
MODES = (CONSTANT, STATE_DEPENDENT)


def fluid_equilibrium(lam: float, mu: float, n: int, alpha: float) -> float:
    """Customer count at which arrivals balance service plus abandonment."""
    load = lam / mu
    if load < n:
        return load
    if alpha <= 0.0:
        raise StabilityError(f"Erlang-C queue with offered load {load} >= n={n} is unstable")
    return n + (lam - n * mu) / alpha


@dataclass(frozen=True)
class QueueParams:
    """Erlang-A queue (Erlang-C when ``alpha == 0``) with cached derived scalars.

    ``delta`` uses the offered-load scaling 1/sqrt(R). ``delta_arrival`` is the
    1/sqrt(lambda) scaling used for phase-type service; keep the two apart.
    """

    lam: float
    mu: float
    n: int
    alpha: float = 0.0
    offered_load: float = field(init=False, repr=False)
    delta: float = field(init=False, repr=False)
    delta_arrival: float = field(init=False, repr=False)
    rho: float = field(init=False, repr=False)
    x_fluid: float = field(init=False, repr=False)
    zeta: float = field(init=False, repr=False)
    beta: float = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise PreconditionError(f"arrival rate must be positive, got {self.lam}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise PreconditionError(f"service rate must be positive, got {self.mu}")
        if int(self.n) != self.n or self.n < 1:
            raise PreconditionError(f"server count must be a positive integer, got {self.n}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise PreconditionError(f"abandonment rate must be >= 0, got {self.alpha}")
        object.__setattr__(self, "n", int(self.n))
        load = self.lam / self.mu
        xf = fluid_equilibrium(self.lam, self.mu, self.n, self.alpha)
        d = 1.0 / math.sqrt(load)
        object.__setattr__(self, "offered_load", load)
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "delta_arrival", 1.0 / math.sqrt(self.lam))
        object.__setattr__(self, "rho", load / self.n)
        object.__setattr__(self, "x_fluid", xf)
        object.__setattr__(self, "zeta", d * (xf - self.n))
        object.__setattr__(self, "beta", (self.n - load) / math.sqrt(load))

    @classmethod
    def from_load(cls, load: float, n: int, mu: float = 1.0, alpha: float = 0.0) -> "QueueParams":
        return cls(lam=load * mu, mu=mu, n=n, alpha=alpha)

    @property
    def is_erlang_c(self) -> bool:
        return self.alpha == 0.0

    @property
    def underloaded(self) -> bool:
        return self.offered_load <= self.n

    def lattice_point(self, k, centering: str = "fluid"):
        """Scaled position of customer count ``k``."""
        return self.delta * (np.asarray(k, dtype=float) - self.center(centering))

    def center(self, centering: str = "fluid") -> float:
        if centering == "fluid":
            return self.x_fluid
        if centering == "offered_load":
            return self.offered_load
        raise PreconditionError(f"unknown centering {centering!r}")

    def snapshot(self) -> dict:
        return {"lambda": self.lam, "mu": self.mu, "n": self.n, "alpha": self.alpha,
                "R": self.offered_load, "delta": self.delta, "zeta": self.zeta}


def departure_rate(params: QueueParams, k):
    """Total service plus abandonment rate with ``k`` customers present (continuous in k)."""
    k = np.asarray(k, dtype=float)
    return params.mu * np.minimum(k, params.n) + params.alpha * np.maximum(k - params.n, 0.0)


def drift(params: QueueParams, x):
    """Piecewise-linear drift of the diffusion, kink at -zeta."""
    x = np.asarray(x, dtype=float)
    z = params.zeta
    neg = lambda v: np.maximum(-v, 0.0)  # noqa: E731
    pos = lambda v: np.maximum(v, 0.0)  # noqa: E731
    return (neg(x + z) - neg(z)) * params.mu - (pos(x + z) - pos(z)) * params.alpha


def diff_coeff(params: QueueParams, x, mode: str = CONSTANT):
    """Second-order coefficient.

    ``constant`` gives 2*mu. ``state_dependent`` matches the chain's infinitesimal
    variance: delta^2 * (lambda + d(k)) where k is the customer count that x
    corresponds to, frozen at delta^2 * lambda = mu once k drops below zero.
    """
    x = np.asarray(x, dtype=float)
    if mode == CONSTANT:
        return np.full_like(x, 2.0 * params.mu)
    if mode != STATE_DEPENDENT:
        raise PreconditionError(f"unknown mode {mode!r}")
    d = params.delta
    k = params.x_fluid + x / d
    return d * d * (params.lam + departure_rate(params, np.maximum(k, 0.0)))


def lattice_drift(params: QueueParams, k):
    """Generator-side drift at integer counts: delta * (lambda - d(k))."""
    return params.delta * (params.lam - departure_rate(params, k))


def lattice_diff_coeff(params: QueueParams, k):
    """Generator-side infinitesimal variance at integer counts: delta^2 * (lambda + d(k) 1{k>0})."""
    k = np.asarray(k, dtype=float)
    d = params.delta
    return d * d * (params.lam + np.where(k > 0, departure_rate(params, k), 0.0))


def affine_pieces(params: QueueParams, mode: str = CONSTANT):
    """Split the real line into intervals where drift and coefficient are both affine.

    Returns a list of ``(lo, hi, b0, b1, a0, a1)`` with b(x) = b0 + b1 x and
    a(x) = a0 + a1 x on [lo, hi].
    """
    mu, alpha, z = params.mu, params.alpha, params.zeta
    kink = -z
    left_b = ((alpha - mu) * max(z, 0.0), -mu)
    right_b = ((mu - alpha) * min(z, 0.0), -alpha)
    if mode == CONSTANT:
        return [(-math.inf, kink, *left_b, 2.0 * mu, 0.0),
                (kink, math.inf, *right_b, 2.0 * mu, 0.0)]
    if mode != STATE_DEPENDENT:
        raise PreconditionError(f"unknown mode {mode!r}")
    d, lam, xf, n = params.delta, params.lam, params.x_fluid, params.n
    empty = -d * xf
    return [
        (-math.inf, empty, *left_b, d * d * lam, 0.0),
        (empty, kink, *left_b, d * d * (lam + mu * xf), d * mu),
        (kink, math.inf, *right_b, d * d * (lam + n * mu + alpha * (xf - n)), d * alpha),
    ]
