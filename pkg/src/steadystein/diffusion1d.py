"""Stationary densities of the one-dimensional diffusion approximations.

The density is nu(x) proportional to (2/a(x)) * exp(int_0^x 2 b(u)/a(u) du). Both
drift b and coefficient a are affine between breakpoints, so the log-density is
known in closed form everywhere; only pieces where a varies are integrated
numerically.
"""
from __future__ import annotations

import math

import numpy as np

from . import models
from ._pieces import ExpPiece, GaussPiece, QuadPiece, log1p_minus
from .errors import PreconditionError
from .models import CONSTANT, STATE_DEPENDENT, QueueParams


def _phi_increment(x, x0, b0, b1, a0, a1):
    """int_{x0}^{x} 2 (b0 + b1 y) / (a0 + a1 y) dy."""
    x = np.asarray(x, dtype=float)
    if a1 == 0.0:
        return (2.0 / a0) * (b0 * (x - x0) + 0.5 * b1 * (x - x0) * (x + x0))
    ax0 = a0 + a1 * x0
    bx0 = b0 + b1 * x0
    u = a1 * (x - x0) / ax0
    c2 = 2.0 * (b0 * a1 - b1 * a0) / (a1 * a1)
    return c2 * log1p_minus(u) + 2.0 * bx0 * (x - x0) / ax0


class DensityCurve:
    """Normalized stationary density of a 1-d diffusion with piecewise-affine b and a."""

    def __init__(self, params: QueueParams, mode: str, specs, pieces, log_norm):
        self.params = params
        self.mode = mode
        self.specs = specs
        self.pieces = pieces
        self.log_norm = log_norm
        self.breakpoints = tuple(p.hi for p in pieces[:-1])

    @property
    def log_kappa(self) -> float:
        """log of kappa in nu(x) = kappa / a(x) * exp(int_0^x 2b/a)."""
        return math.log(2.0) - self.log_norm

    # coefficient access ------------------------------------------------------------
    def _select(self, x, which):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for lo, hi, b0, b1, a0, a1 in self.specs:
            m = (x >= lo) & (x <= hi)
            vals = {"b": b0 + b1 * x, "a": a0 + a1 * x, "b'": np.full_like(x, b1),
                    "a'": np.full_like(x, a1)}[which]
            out = np.where(m, vals, out)
        return out

    def drift(self, x):
        return self._select(x, "b")

    def coeff(self, x):
        return self._select(x, "a")

    def drift_slope(self, x):
        return self._select(x, "b'")

    def coeff_slope(self, x):
        return self._select(x, "a'")

    def phi(self, x):
        """int_0^x 2b/a, the exponent shared by density and Poisson solution."""
        return self.logpdf(x) + self.log_norm - np.log(2.0 / self.coeff(x))

    # evaluators --------------------------------------------------------------------
    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, -np.inf)
        for p in self.pieces:
            m = (x >= p.lo) & (x <= p.hi)
            if m.any():
                out[m] = p.log_g(x[m])
        return out - self.log_norm

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def _accumulate(self, x, j, upper):
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape)
        for p in self.pieces:
            cx = p.clip(x)
            if upper:
                total = total + p.moments_between(cx, np.full(x.shape, p.hi), j)[j]
            else:
                total = total + p.moments_between(np.full(x.shape, p.lo), cx, j)[j]
        return total * math.exp(-self.log_norm)

    def cdf(self, x):
        return np.clip(self._accumulate(x, 0, upper=False), 0.0, 1.0)

    def sf(self, x):
        """P(Y >= x), computed from the right so small tails keep full precision."""
        return np.clip(self._accumulate(x, 0, upper=True), 0.0, 1.0)

    def partial_moment(self, x, j: int, upper: bool = False):
        """int y^j nu(y) over (-inf, x] (or [x, inf) when ``upper``)."""
        return self._accumulate(x, j, upper)

    def moment_between(self, u, v, j: int):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        total = np.zeros(np.broadcast(u, v).shape)
        for p in self.pieces:
            cu, cv = p.clip(u), p.clip(v)
            cv = np.maximum(cu, cv)
            total = total + p.moments_between(cu, cv, j)[j]
        return total * math.exp(-self.log_norm)

    def interval_prob(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return self.moment_between(lo, np.maximum(lo, hi), 0)

    def moment(self, m: int) -> float:
        if m < 0 or m > 20 or int(m) != m:
            raise PreconditionError(f"moment order must be an integer in [0, 20], got {m}")
        total = 0.0
        for p in self.pieces:
            total += float(p.moments_between(np.array(p.lo), np.array(p.hi), m)[m])
        return total * math.exp(-self.log_norm)

    def quantile_window(self, mass=1e-15):
        """Finite interval outside which each tail carries at most ``mass`` probability."""
        lo, hi = -1.0, 1.0
        while self.cdf(lo) > mass:
            lo *= 2.0
        while self.sf(hi) > mass:
            hi *= 2.0
        return lo, hi


def build_density(params: QueueParams, mode: str = CONSTANT) -> DensityCurve:
    """Stationary density of the diffusion approximation for ``params``.

    ``constant`` uses a(x) = 2 mu; ``state_dependent`` uses the coefficient
    matched to the chain's infinitesimal variance (Erlang-C only).
    """
    if mode not in models.MODES:
        raise PreconditionError(f"unknown mode {mode!r}")
    if mode == STATE_DEPENDENT and not params.is_erlang_c:
        raise PreconditionError("state-dependent density is implemented for Erlang-C (alpha = 0)")
    specs = [s for s in models.affine_pieces(params, mode) if s[1] > s[0]]
    anchors = [None] * len(specs)
    home = next(i for i, s in enumerate(specs) if s[0] <= 0.0 <= s[1])
    anchors[home] = (0.0, 0.0)
    for i in range(home + 1, len(specs)):
        lo = specs[i][0]
        x0, f0 = anchors[i - 1]
        anchors[i] = (lo, f0 + float(_phi_increment(lo, x0, *specs[i - 1][2:])))
    for i in range(home - 1, -1, -1):
        hi = specs[i][1]
        x0, f0 = anchors[i + 1]
        anchors[i] = (hi, f0 + float(_phi_increment(hi, x0, *specs[i + 1][2:])))

    pieces = []
    for (lo, hi, b0, b1, a0, a1), (x0, f0) in zip(specs, anchors):
        if a1 == 0.0:
            base = math.log(2.0 / a0) + f0
            if b1 < 0.0:
                center = -b0 / b1
                scale = math.sqrt(a0 / (2.0 * -b1))
                log_amp = base + float(_phi_increment(center, x0, b0, b1, a0, a1))
                pieces.append(GaussPiece(lo, hi, log_amp, center, scale))
            elif b1 == 0.0:
                pieces.append(ExpPiece(lo, hi, base, x0, 2.0 * b0 / a0))
            else:
                raise PreconditionError("drift increasing on an unbounded piece: not integrable")
        else:
            def log_g(x, x0=x0, f0=f0, c=(b0, b1, a0, a1)):
                return np.log(2.0 / (c[2] + c[3] * x)) + f0 + _phi_increment(x, x0, *c)
            pieces.append(QuadPiece(lo, hi, log_g))
    log_norm = math.log(sum(float(p.mass(np.array(p.lo), np.array(p.hi))) for p in pieces))
    return DensityCurve(params, mode, specs, pieces, log_norm)


def density_moment(curve: DensityCurve, m: int) -> float:
    return curve.moment(m)


def density_cdf(curve: DensityCurve, x):
    return curve.cdf(x)


def interval_prob(curve: DensityCurve, lo, hi):
    return curve.interval_prob(lo, hi)
