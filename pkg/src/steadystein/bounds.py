"""Moment and density inequalities checked against exact stationary laws.

Each check evaluates the left side exactly on the lattice (or on the density
curve) and compares it with the closed-form right side. Results are returned as
``BoundCheck`` rows so that sweeps can be aggregated and serialized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .birth_death import LatticeDist, stationary, tail_moment_bound
from .diffusion1d import build_density
from .errors import PreconditionError
from .models import CONSTANT, STATE_DEPENDENT, QueueParams


@dataclass(frozen=True)
class BoundCheck:
    name: str
    params: dict
    value: float
    bound: float
    tol: float = 1e-9

    @property
    def ok(self) -> bool:
        return self.value <= self.bound + self.tol

    def row(self) -> dict:
        return {"check": self.name, **self.params, "value": self.value, "bound": self.bound,
                "ok": self.ok}


def _lower_split(lattice: LatticeDist):
    """Lattice points and masks for the regions x <= -zeta and x >= -zeta."""
    x = lattice.points()
    kink = -lattice.params.zeta
    # x <= -zeta exactly when k <= n; compare counts to avoid rounding at the kink
    k = lattice.counts
    return x, lattice.probs, k <= lattice.params.n, k >= lattice.params.n, kink


def idle_identity_gap(lattice: LatticeDist) -> float:
    """|E|(X~ + zeta) 1(X~ <= -zeta)| - |zeta||; zero for Erlang-C by flow balance."""
    if not lattice.params.is_erlang_c:
        raise PreconditionError("the idle-server identity is specific to alpha = 0")
    x, p, low, _, _ = _lower_split(lattice)
    z = lattice.params.zeta
    lhs = math.fsum(p[low] * np.abs(x[low] + z))
    return abs(lhs - abs(z))


def moment_bounds_erlang_c(lattice: LatticeDist) -> list[BoundCheck]:
    params = lattice.params
    if not params.is_erlang_c:
        raise PreconditionError("Erlang-C moment bounds need alpha = 0")
    x, p, low, high, _ = _lower_split(lattice)
    d, z = params.delta, abs(params.zeta)
    snap = {"n": params.n, "R": params.offered_load, "alpha": 0.0}
    second_low = math.fsum(p[low] * x[low] ** 2)
    abs_low = math.fsum(p[low] * np.abs(x[low]))
    # the geometric tail beyond k_max lies in the upper region and is accounted for exactly
    abs_high = math.fsum(p[high] * np.abs(x[high])) + _upper_tail_abs(lattice)
    idle = math.fsum(p[low])
    quad = 4.0 / 3.0 + 2.0 * d * d / 3.0
    return [
        BoundCheck("C.second_low", snap, second_low, quad),
        BoundCheck("C.abs_low_const", snap, abs_low, math.sqrt(quad)),
        BoundCheck("C.abs_low_zeta", snap, abs_low, 2.0 * z),
        BoundCheck("C.abs_high", snap, abs_high, 1.0 / z + d * d / (4.0 * z) + d / 2.0),
        BoundCheck("C.prob_low", snap, idle, (2.0 + d) * z),
    ]


def _upper_tail_abs(lattice: LatticeDist) -> float:
    """Sum over k > k_max of pi_k |x_k| for the exact geometric Erlang-C tail."""
    if not lattice.params.is_erlang_c:
        return 0.0
    r = lattice.tail_ratio
    d = lattice.params.delta
    c = float(lattice.points()[-1])
    # sum_{j>=1} r^j (c + d j) = c r/(1-r) + d r/(1-r)^2
    return float(lattice.probs[-1] * (c * r / (1.0 - r) + d * r / (1.0 - r) ** 2))


def moment_bounds_erlang_a(lattice: LatticeDist) -> list[BoundCheck]:
    """Underloaded (R <= n) or overloaded (R >= n) Erlang-A inequalities."""
    params = lattice.params
    if params.is_erlang_c:
        raise PreconditionError("Erlang-A moment bounds need alpha > 0")
    x, p, low, high, _ = _lower_split(lattice)
    mu, alpha = params.mu, params.alpha
    d, zeta = params.delta, params.zeta
    z = abs(zeta)
    inv_z = math.inf if z == 0.0 else 1.0 / z
    d2 = d * d
    snap = {"n": params.n, "R": params.offered_load, "alpha": alpha}
    shifted = x + zeta
    second_low = math.fsum(p[low] * x[low] ** 2)
    abs_low = math.fsum(p[low] * np.abs(x[low]))
    abs_high = math.fsum(p[high] * np.abs(x[high]))
    second_high = math.fsum(p[high] * x[high] ** 2)
    sh_high = math.fsum(p[high] * shifted[high])
    sh2_high = math.fsum(p[high] * shifted[high] ** 2)
    sh_low = math.fsum(p[low] * np.abs(shifted[low]))
    sh2_low = math.fsum(p[low] * shifted[low] ** 2)
    prob_low = math.fsum(p[low])
    # mass beyond k_max sits in the upper region; add certified bounds on its contribution
    tail_p = lattice.tail_mass_bound
    slack = {1: tail_moment_bound(lattice, 1) + z * tail_p,
             2: 2.0 * (tail_moment_bound(lattice, 2) + z * z * tail_p)}
    checks = []

    def add(name, value, bound, upper=0):
        checks.append(BoundCheck(name, snap, value + (slack[upper] if upper else 0.0), bound))

    if params.offered_load <= params.n:
        left = (alpha / mu * d2 + d2 + 4.0) / 3.0
        right = (mu / alpha * d2 + mu / alpha * 4.0 + d2) / 3.0
        add("A.under.second_low", second_low, left)
        add("A.under.abs_low_const", abs_low, math.sqrt(left))
        add("A.under.abs_low_zeta", abs_low, 2.0 * z + alpha / mu * math.sqrt(right))
        add("A.under.abs_high", abs_high,
            (1.0 + d2 / 4.0 + d / 2.0 * math.sqrt(left)) * min(mu / min(mu, alpha), inv_z), 1)
        add("A.under.shift2_high", sh2_high, right, 2)
        add("A.under.shift_high_const", sh_high, math.sqrt(right), 1)
        add("A.under.shift_high_zeta", sh_high, inv_z * (d2 / 4.0 * alpha / mu + d2 / 4.0 + 1.0), 1)
        add("A.under.prob_low", prob_low, (2.0 + d) * (z + alpha / mu * math.sqrt(right)))
    if params.offered_load >= params.n:
        over = (d2 + 4.0 * mu / alpha) / 3.0
        add("A.over.abs_low_const", abs_low, math.sqrt((alpha * d2 / 4.0 + mu) / min(alpha, mu)))
        add("A.over.abs_low_zeta", abs_low, inv_z * (d2 / 4.0 + mu / alpha))
        add("A.over.second_high", second_high, over, 2)
        add("A.over.abs_high", abs_high, math.sqrt(over), 1)
        add("A.over.shift_low_zeta", sh_low, inv_z * (d2 / 4.0 + 1.0))
        add("A.over.shift2_low", sh2_low, d2 / 4.0 * alpha / mu + 1.0)
        add("A.over.shift_low_const", sh_low, math.sqrt(d2 / 4.0 * alpha / mu + 1.0))
        add("A.over.shift_low_rate", sh_low, alpha / mu * math.sqrt(over))
        scale = min(max(inv_z, alpha / mu), math.sqrt(alpha / mu))
        add("A.over.prob_low", prob_low, (3.0 + d) * 16.0 / math.sqrt(2.0) * (d2 / 4.0 + 1.0) * scale)
    return checks


def erlang_c_grid(count_n: int = 25, fractions=(0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99, 0.999),
                  n_max: int = 1000):
    """Erlang-C points with 1 <= R < n and n spread geometrically over [2, n_max]."""
    ns = sorted({int(round(v)) for v in np.geomspace(2, n_max, count_n)})
    out = []
    for n in ns:
        for f in fractions:
            out.append(QueueParams.from_load(1.0 + f * (n - 1), n))
    return out


def erlang_a_grid(ratios=(0.5, 1.0, 2.0), ns=(2, 5, 10, 20, 50, 100, 200, 500),
                  loads=(0.5, 0.7, 0.9, 0.99, 1.0, 1.01, 1.1, 1.5)):
    """Erlang-A points (mu = 1) covering under- and overloaded regimes."""
    return [QueueParams.from_load(rho * n, n, alpha=a) for a in ratios for n in ns for rho in loads]


def moment_bound_sweep(grid, tail_eps: float = 1e-14) -> list[BoundCheck]:
    checks: list[BoundCheck] = []
    for params in grid:
        lattice = stationary(params, tail_eps)
        if params.is_erlang_c:
            checks.extend(moment_bounds_erlang_c(lattice))
        else:
            checks.extend(moment_bounds_erlang_a(lattice))
    return checks


def density_sup(params: QueueParams, mode: str) -> float:
    """Maximum of the stationary density, located by bracketing on the drift sign.

    The density is unimodal: its log-derivative (2b - a')/a changes sign once.
    """
    curve = build_density(params, mode)
    lo, hi = curve.quantile_window(1e-12)
    xs = np.linspace(lo, hi, 4001)
    xs = np.concatenate([xs, [-params.zeta, -1.0 / params.delta, 0.0]])
    xs = np.sort(xs[(xs >= lo) & (xs <= hi)])
    vals = curve.pdf(xs)
    i = int(np.argmax(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
    # golden-section refinement of the peak
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, e = b - g * (b - a), a + g * (b - a)
    fc, fe = float(curve.pdf(c)), float(curve.pdf(e))
    for _ in range(80):
        if fc > fe:
            b, e, fe = e, c, fc
            c = b - g * (b - a)
            fc = float(curve.pdf(c))
        else:
            a, c, fc = c, e, fe
            e = a + g * (b - a)
            fe = float(curve.pdf(e))
    return max(float(vals[i]), fc, fe)


def density_bound_checks(grid) -> list[BoundCheck]:
    out = []
    cap_const = math.sqrt(2.0 / math.pi)
    for params in grid:
        snap = {"n": params.n, "R": params.offered_load, "alpha": params.alpha}
        if params.is_erlang_c:
            out.append(BoundCheck("sup_density_constant", snap, density_sup(params, CONSTANT), cap_const))
        if params.offered_load >= 1.0:
            out.append(BoundCheck("sup_density_state_dependent", snap,
                                  density_sup(params, STATE_DEPENDENT), 4.0))
    return out


def scaled_first_moment_near_critical(zeta_abs: float, n: int = 10) -> float:
    """|zeta| E Y for an Erlang-C diffusion tuned so that |zeta| equals ``zeta_abs``.

    With mu = 1, zeta = (R - n)/sqrt(R); solve for R given n.
    """
    # R - n = -zeta_abs sqrt(R): quadratic in s = sqrt(R)
    s = (-zeta_abs + math.sqrt(zeta_abs * zeta_abs + 4.0 * n)) / 2.0
    params = QueueParams.from_load(s * s, n)
    curve = build_density(params, CONSTANT)
    return abs(params.zeta) * curve.moment(1)
