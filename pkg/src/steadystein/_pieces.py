"""Unnormalized density pieces g(x) = (2/a(x)) exp(Phi(x)) on intervals where b, a are affine.

Three shapes occur: Gaussian (a constant, b sloped), exponential (a constant,
b flat) and a rational-exponent core (a sloped) that is integrated numerically.
Every piece exposes the same vectorized interface for partial integrals
``int_{u}^{v} y**j g(y) dy`` with lo <= u <= v <= hi.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

from .errors import NumericError, PreconditionError

_SQRT2PI = math.sqrt(2.0 * math.pi)
_GL_NODES, _GL_WEIGHTS = leggauss(20)
_GL_COARSE = leggauss(10)


def log1p_minus(u):
    """log(1+u) - u without cancellation near u = 0."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < 0.05
    us = u[small]
    acc = np.zeros_like(us)
    term = us * us
    for k in range(2, 30):
        acc += (-1.0) ** (k + 1) * term / k
        term = term * us
    out[small] = acc
    ub = u[~small]
    out[~small] = np.log1p(ub) - ub
    return out


def _zero_on_inf(x, j, gx):
    """Boundary term x**j * g(x), treating infinite x (where g vanishes) as zero."""
    with np.errstate(invalid="ignore", over="ignore"):
        t = np.where(np.isfinite(x), np.power(np.where(np.isfinite(x), x, 0.0), j) * gx, 0.0)
    return t


class Piece:
    lo: float
    hi: float

    def log_g(self, x):
        raise NotImplementedError

    def g(self, x):
        return np.exp(self.log_g(x))

    def moments_between(self, u, v, jmax: int):
        """List of arrays ``[int_u^v y**j g]`` for j = 0..jmax."""
        raise NotImplementedError

    def mass(self, u, v):
        return self.moments_between(u, v, 0)[0]

    def clip(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def _g_finite(self, x):
        """g(x) with infinite endpoints mapped to 0 (g vanishes there)."""
        finite = np.isfinite(x)
        safe = np.where(finite, x, self.lo if math.isfinite(self.lo) else self.hi)
        return np.where(finite, np.exp(self.log_g(safe)), 0.0)


class GaussPiece(Piece):
    """g(x) = exp(L - (x - c)^2 / (2 s^2))."""

    def __init__(self, lo, hi, log_amp, center, scale):
        self.lo, self.hi = lo, hi
        self.log_amp, self.center, self.scale = log_amp, center, scale

    def log_g(self, x):
        x = np.asarray(x, dtype=float)
        return self.log_amp - 0.5 * ((x - self.center) / self.scale) ** 2

    def _normal_mass(self, u, v):
        """exp(L) * s * sqrt(2 pi) * P(u <= c + s Z <= v), stable in both tails."""
        tu = (np.asarray(u, dtype=float) - self.center) / self.scale
        tv = (np.asarray(v, dtype=float) - self.center) / self.scale
        upper = tu > 0
        # For intervals right of the center use survival functions.
        lo_part = np.where(upper, special.log_ndtr(-tv), special.log_ndtr(tu))
        hi_part = np.where(upper, special.log_ndtr(-tu), special.log_ndtr(tv))
        with np.errstate(divide="ignore", invalid="ignore"):
            diff = np.where(hi_part > lo_part,
                            hi_part + np.log1p(-np.exp(lo_part - hi_part)), -np.inf)
        return np.exp(self.log_amp + math.log(self.scale * _SQRT2PI) + diff)

    def moments_between(self, u, v, jmax):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        s2 = self.scale ** 2
        gu = self._g_finite(u)
        gv = self._g_finite(v)
        out = [self._normal_mass(u, v)]
        # d/dy g = -(y - c)/s^2 g  =>  M_j = c M_{j-1} + s^2 (j-1) M_{j-2} + s^2 [y^{j-1} g]_v^u
        for j in range(1, jmax + 1):
            prev2 = out[j - 2] if j >= 2 else 0.0
            bnd = _zero_on_inf(u, j - 1, gu) - _zero_on_inf(v, j - 1, gv)
            out.append(self.center * out[j - 1] + s2 * (j - 1) * prev2 + s2 * bnd)
        return out


class ExpPiece(Piece):
    """g(x) = exp(L0 + r (x - x0)), r != 0, integrable on [lo, hi]."""

    def __init__(self, lo, hi, log_anchor, anchor, rate):
        if rate == 0.0 and (math.isinf(lo) or math.isinf(hi)):
            raise PreconditionError("flat density on an unbounded interval is not integrable")
        self.lo, self.hi = lo, hi
        self.log_anchor, self.anchor, self.rate = log_anchor, anchor, rate

    def log_g(self, x):
        x = np.asarray(x, dtype=float)
        return self.log_anchor + self.rate * (x - self.anchor)

    def moments_between(self, u, v, jmax):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        r = self.rate
        gu = self._g_finite(u)
        gv = self._g_finite(v)
        # M_j = ([y^j g]_u^v - j M_{j-1}) / r
        out = [(gv - gu) / r]
        for j in range(1, jmax + 1):
            bnd = _zero_on_inf(v, j, gv) - _zero_on_inf(u, j, gu)
            out.append((bnd - j * out[j - 1]) / r)
        return out


class QuadPiece(Piece):
    """Bounded piece integrated with adaptive composite Gauss-Legendre panels.

    Panels are bisected until the 10- and 20-point rules agree to ``tol``
    relative to the piece's running mass, then partial integrals use exact
    panel sums plus one 20-point rule on the fractional panel.
    """

    def __init__(self, lo, hi, log_g, tol=1e-14, max_panels=200_000):
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise PreconditionError("numerically integrated pieces must be bounded")
        self.lo, self.hi = lo, hi
        self._log_g = log_g
        self.edges = self._adapt(tol, max_panels)
        self._cum = {}

    def log_g(self, x):
        return self._log_g(np.asarray(x, dtype=float))

    def _rule(self, a, b, nodes, weights, j=0):
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        y = mid[:, None] + half[:, None] * nodes[None, :]
        vals = np.exp(self.log_g(y))
        if j:
            vals = vals * y ** j
        return half * (vals @ weights)

    def _adapt(self, tol, max_panels):
        width = self.hi - self.lo
        count = max(1, int(math.ceil(width / 0.25)))
        edges = np.linspace(self.lo, self.hi, count + 1)
        scale = None
        while True:
            a, b = edges[:-1], edges[1:]
            fine = self._rule(a, b, _GL_NODES, _GL_WEIGHTS)
            coarse = self._rule(a, b, *_GL_COARSE)
            if scale is None:
                scale = max(float(np.sum(fine)), 1e-300)
            bad = np.abs(fine - coarse) > tol * scale
            if not bad.any():
                return edges
            if edges.size > max_panels:
                raise NumericError(f"panel refinement exceeded {max_panels} panels on "
                                   f"[{self.lo}, {self.hi}]; worst panel error "
                                   f"{float(np.max(np.abs(fine - coarse)))}")
            mids = 0.5 * (a[bad] + b[bad])
            edges = np.sort(np.concatenate([edges, mids]))

    def _cumulative(self, j):
        if j not in self._cum:
            panel = self._rule(self.edges[:-1], self.edges[1:], _GL_NODES, _GL_WEIGHTS, j)
            left = np.concatenate([[0.0], np.cumsum(panel)])
            right = np.concatenate([np.cumsum(panel[::-1])[::-1], [0.0]])
            self._cum[j] = (left, right)
        return self._cum[j]

    def _locate(self, x):
        return np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.edges.size - 2)

    def _from_left(self, x, j):
        """int_lo^x y^j g for x inside the piece."""
        idx = self._locate(x)
        left, _ = self._cumulative(j)
        return left[idx] + self._rule(self.edges[idx], x, _GL_NODES, _GL_WEIGHTS, j)

    def _to_right(self, x, j):
        """int_x^hi y^j g for x inside the piece."""
        idx = self._locate(x)
        _, right = self._cumulative(j)
        return right[idx + 1] + self._rule(x, self.edges[idx + 1], _GL_NODES, _GL_WEIGHTS, j)

    def moments_between(self, u, v, jmax):
        u, v = np.broadcast_arrays(self.clip(u), self.clip(v))
        shape = u.shape
        u = u.ravel()
        v = v.ravel()
        out = [np.zeros(u.size) for _ in range(jmax + 1)]
        active = v > u
        if not active.any():
            return [o.reshape(shape) for o in out]
        ua, va = u[active], v[active]
        whole = (ua == self.lo) & (va == self.hi)
        from_lo = (ua == self.lo) & ~whole
        to_hi = (va == self.hi) & ~whole
        inner = ~(whole | from_lo | to_hi)
        mid = 0.5 * (self.lo + self.hi)
        for j in range(jmax + 1):
            left, right = self._cumulative(j)
            res = np.empty(ua.size)
            res[whole] = left[-1]
            if from_lo.any():
                res[from_lo] = self._from_left(va[from_lo], j)
            if to_hi.any():
                res[to_hi] = self._to_right(ua[to_hi], j)
            if inner.any():
                ui, vi = ua[inner], va[inner]
                # difference taken on the side that keeps subtracted terms small
                rs = ui >= mid
                val = np.empty(ui.size)
                if (~rs).any():
                    val[~rs] = self._from_left(vi[~rs], j) - self._from_left(ui[~rs], j)
                if rs.any():
                    val[rs] = self._to_right(ui[rs], j) - self._to_right(vi[rs], j)
                res[inner] = val
            out[j][active] = res
        return [o.reshape(shape) for o in out]
