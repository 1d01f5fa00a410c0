"""Distances between an exact lattice distribution and a diffusion density."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .birth_death import LatticeDist, scaled_moment, stationary_for_moment, tail_prob
from .diffusion1d import DensityCurve
from .errors import PreconditionError


@dataclass(frozen=True)
class ErrorReport:
    metric: str
    value: float
    params: dict = field(default_factory=dict)
    bound: float | None = None

    @property
    def bound_satisfied(self) -> bool | None:
        return None if self.bound is None else self.value <= self.bound


def _lattice_cdf_steps(lattice: LatticeDist):
    x = lattice.points()
    steps = np.cumsum(lattice.probs)
    return x, steps


def _cdf_root(curve: DensityCurve, target, lo, hi, iters=80):
    """Vectorized safeguarded Newton for curve.cdf(y) = target on brackets [lo, hi]."""
    lo = lo.copy()
    hi = hi.copy()
    y = 0.5 * (lo + hi)
    for _ in range(iters):
        f = curve.cdf(y) - target
        lo = np.where(f < 0, y, lo)
        hi = np.where(f >= 0, y, hi)
        dens = curve.pdf(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = y - f / dens
        ok = np.isfinite(step) & (step > lo) & (step < hi)
        y_new = np.where(ok, step, 0.5 * (lo + hi))
        if np.max(np.abs(y_new - y)) < 1e-15 * (1.0 + np.max(np.abs(y))):
            return y_new
        y = y_new
    return y


def _integral_of_cdf(curve: DensityCurve, u, v, fu, fv):
    """int_u^v F(y) dy = v F(v) - u F(u) - int_u^v y nu(y) dy."""
    return v * fv - u * fu - curve.moment_between(u, v, 1)


def wasserstein1(lattice: LatticeDist, curve: DensityCurve) -> float:
    """int |F_lattice - F_curve| dx, exact between lattice points."""
    x, steps = _lattice_cdf_steps(lattice)
    fx = curve.cdf(x)
    # left of the first lattice point the lattice cdf is zero
    total = float(x[0] * fx[0] - curve.partial_moment(x[0], 1))
    u, v = x[:-1], x[1:]
    fu, fv = fx[:-1], fx[1:]
    c = steps[:-1]
    h = v - u
    above = fv <= c  # curve stays below the step on the whole cell
    below = fu >= c
    cross = ~(above | below)
    integ = _integral_of_cdf(curve, u, v, fu, fv)
    cell = np.where(above, c * h - integ, np.where(below, integ - c * h, 0.0))
    if cross.any():
        uc, vc, cc = u[cross], v[cross], c[cross]
        ys = _cdf_root(curve, cc, uc, vc)
        fuc, fvc = fu[cross], fv[cross]
        left = cc * (ys - uc) - _integral_of_cdf(curve, uc, ys, fuc, cc)
        right = _integral_of_cdf(curve, ys, vc, cc, fvc) - cc * (vc - ys)
        cell[cross] = left + right
    total += float(np.sum(cell))
    # right of the last retained point the lattice cdf is 1 up to the certified tail mass
    last = x[-1]
    total += float(curve.partial_moment(last, 1, upper=True) - last * curve.sf(last))
    return total


def wasserstein1_discrete(xa, pa, xb, pb) -> float:
    """int |F_a - F_b| dx for two finitely supported laws."""
    xa, pa, xb, pb = (np.asarray(v, dtype=float) for v in (xa, pa, xb, pb))
    grid = np.union1d(xa, xb)
    fa = np.array([pa[xa <= g].sum() for g in grid])
    fb = np.array([pb[xb <= g].sum() for g in grid])
    return float(np.sum(np.abs(fa - fb)[:-1] * np.diff(grid)))


def kolmogorov(lattice: LatticeDist, curve: DensityCurve) -> float:
    """sup_x |F_lattice(x) - F_curve(x)| over lattice jumps (both sides) and breakpoints."""
    x, steps = _lattice_cdf_steps(lattice)
    fx = curve.cdf(x)
    before = np.concatenate([[0.0], steps[:-1]])
    cand = [np.max(np.abs(steps - fx)), np.max(np.abs(before - fx))]
    bps = np.asarray(curve.breakpoints, dtype=float)
    if bps.size:
        from .birth_death import cdf as lattice_cdf
        cand.append(np.max(np.abs(lattice_cdf(lattice, bps) - curve.cdf(bps))))
    cand.append(abs(1.0 - lattice.tail_mass_bound - 1.0))
    return float(max(cand))


def half_cell_probs(lattice: LatticeDist, curve: DensityCurve) -> np.ndarray:
    x = lattice.points()
    h = 0.5 * lattice.params.delta
    return curve.interval_prob(x - h, x + h)


def pmf_sup_error(lattice: LatticeDist, curve: DensityCurve) -> float:
    """sup_k |pi_k - P(Y in [x_k - delta/2, x_k + delta/2])|."""
    return float(np.max(np.abs(lattice.probs - half_cell_probs(lattice, curve))))


def tail_ratio_error(lattice: LatticeDist, curve: DensityCurve, z: float) -> float:
    """|P(X~ >= z) / P(Y >= z) - 1|.

    z need not be a lattice point. When the density tail underflows the ratio
    is formed from log-probabilities.
    """
    num = tail_prob(lattice, z)
    den = float(curve.sf(z))
    if den <= 0.0 or num <= 0.0:
        log_den = _log_sf(curve, z)
        log_num = math.log(num) if num > 0 else -math.inf
        return abs(math.expm1(log_num - log_den))
    return abs(num / den - 1.0)


def _log_sf(curve: DensityCurve, z: float) -> float:
    last = curve.pieces[-1]
    if z < last.lo:
        raise PreconditionError("density tail probability underflowed inside the core")
    # beyond the last breakpoint the density is Gaussian or exponential: use log of its integrand
    grid = np.linspace(z, z + 200.0, 20001)
    lg = curve.logpdf(grid)
    top = lg.max()
    return float(top + math.log(np.trapezoid(np.exp(lg - top), grid)))


def moment_error(lattice: LatticeDist, curve: DensityCurve, m: int) -> float:
    """|E X~^m - E Y^m|, with the lattice moment tail-certified."""
    if m == 0:
        return 0.0
    exact = scaled_moment(lattice, m)
    return abs(exact - curve.moment(m))


def moment_error_auto(params, curve: DensityCurve, m: int) -> tuple[float, float, float]:
    """Returns (exact, approx, |difference|), tightening truncation until certified."""
    _, exact = stationary_for_moment(params, m)
    approx = curve.moment(m)
    return exact, approx, abs(exact - approx)
