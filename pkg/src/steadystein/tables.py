"""Row builders for the published comparison tables.

Each builder returns a ``Table``: ordered column names, rows as tuples and a
metadata dict. Deterministic tables set ``exact`` in the metadata; the
simulation-backed phase-type table carries standard-error columns.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .birth_death import stationary, stationary_for_moment, tail_prob
from .coxian import mphn_c2_stationary
from .diffusion1d import build_density
from .errors import PreconditionError
from .metrics import kolmogorov, pmf_sup_error, tail_ratio_error
from .models import CONSTANT, STATE_DEPENDENT, QueueParams

W_CONST = 190.0
K_CONST = 156.0


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[tuple]
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def as_dicts(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]


def _map(fn, items, jobs: int = 1):
    """Ordered map; rows keep their input order whatever the completion order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------------------
# Erlang-C moment tables

TAB1_ROWS = [(5, 3.0), (5, 4.0), (5, 4.9), (5, 4.95), (5, 4.99),
             (500, 300.0), (500, 400.0), (500, 490.0), (500, 495.0), (500, 499.0)]


def _tab1_row(item):
    n, load = item
    p = QueueParams.from_load(load, n)
    _, m1 = stationary_for_moment(p, 1, "offered_load")
    approx = build_density(p, CONSTANT).moment(1)
    exact_mean = load + m1 * math.sqrt(load)
    approx_mean = load + approx * math.sqrt(load)
    err = abs(exact_mean - approx_mean)
    # h(x) = x is 1-Lipschitz, so sqrt(R) |E X~ - E Y| <= sqrt(R) d_W <= 190
    return (n, load, exact_mean, approx_mean, err, W_CONST, err <= W_CONST)


def tab1(jobs: int = 1) -> Table:
    rows = _map(_tab1_row, TAB1_ROWS, jobs)
    return Table("tab1", ["n", "R", "mean_exact", "mean_approx", "error", "bound", "bound_ok"],
                 rows, {"exact": True, "mu": 1.0})


TAB2_LOADS = [300.0, 400.0, 490.0, 495.0, 499.0, 499.9]


def _moment_pair(load, n, m):
    p = QueueParams.from_load(load, n)
    _, exact = stationary_for_moment(p, m)
    return exact, abs(exact - build_density(p, CONSTANT).moment(m))


def _tab2_row(load):
    m2, e2 = _moment_pair(load, 500, 2)
    m10, e10 = _moment_pair(load, 500, 10)
    return (500, load, m2, e2, m10, e10)


def tab2(jobs: int = 1) -> Table:
    rows = _map(_tab2_row, TAB2_LOADS, jobs)
    return Table("tab2", ["n", "R", "m2_exact", "m2_error", "m10_exact", "m10_error"],
                 rows, {"exact": True, "mu": 1.0})


TAB3_LOADS = [499.0, 499.9, 499.95, 499.99]


def _tab3_row(load):
    m2, err = _moment_pair(load, 500, 2)
    z = abs(QueueParams.from_load(load, 500).zeta)
    return (500, load, z, m2, err, z * err, math.sqrt(z) * err, z ** 1.5 * err)


def tab3(jobs: int = 1) -> Table:
    rows = _map(_tab3_row, TAB3_LOADS, jobs)
    return Table("tab3", ["n", "R", "abs_zeta", "m2_exact", "m2_error", "zeta_x_error",
                          "zeta_half_x_error", "zeta_three_halves_x_error"],
                 rows, {"exact": True, "mu": 1.0})


BENEFIT_ROWS = [(5, 3.0), (5, 4.0), (5, 4.9), (5, 4.95), (5, 4.99),
                (100, 60.0), (100, 80.0), (100, 98.0), (100, 99.0), (100, 99.8)]


def _benefit_row(item):
    n, load = item
    p = QueueParams.from_load(load, n)
    _, m1 = stationary_for_moment(p, 1)
    e_c = abs(m1 - build_density(p, CONSTANT).moment(1))
    e_s = abs(m1 - build_density(p, STATE_DEPENDENT).moment(1))
    bound = W_CONST / math.sqrt(load)
    return (n, load, m1, e_c, e_c / m1, e_s, e_s / m1, bound, e_c <= bound)


def benefit(jobs: int = 1) -> Table:
    rows = _map(_benefit_row, BENEFIT_ROWS, jobs)
    return Table("benefit", ["n", "R", "mean_exact", "error_constant", "rel_error_constant",
                             "error_state_dependent", "rel_error_state_dependent",
                             "bound_constant", "bound_ok"], rows, {"exact": True, "mu": 1.0})


RATES_ROWS = [(5, 4.0), (50, 46.59), (500, 488.94), (5000, 4965.0)]


def _rates_row(item):
    n, load = item
    p = QueueParams.from_load(load, n)
    curves = [build_density(p, CONSTANT), build_density(p, STATE_DEPENDENT)]
    out = [n, load]
    for m in (1, 2):
        _, exact = stationary_for_moment(p, m)
        out += [exact] + [abs(exact - c.moment(m)) for c in curves]
    return out


def rates(jobs: int = 1) -> Table:
    raw = _map(_rates_row, RATES_ROWS, jobs)
    rows = []
    prev = None
    for r in raw:
        # shrink factor relative to the previous (10x smaller) offered load
        ratios = [math.nan] * 4 if prev is None else [prev[i] / r[i] for i in (3, 4, 6, 7)]
        rows.append(tuple(r + ratios))
        prev = r
    return Table("rates", ["n", "R", "m1_exact", "m1_error_constant", "m1_error_state_dependent",
                           "m2_exact", "m2_error_constant", "m2_error_state_dependent",
                           "m1_ratio_constant", "m1_ratio_state_dependent",
                           "m2_ratio_constant", "m2_ratio_state_dependent"],
                 rows, {"exact": True, "mu": 1.0})


DIST_ROWS = [(5, 3.0), (5, 4.0), (5, 4.9), (5, 4.95), (5, 4.99),
             (100, 60.0), (100, 80.0), (100, 98.0), (100, 99.0), (100, 99.8),
             (5, 4.0), (50, 46.59), (500, 488.94), (5000, 4965.0)]


def _pmf_row(item):
    n, load = item
    p = QueueParams.from_load(load, n)
    lat = stationary(p)
    return (n, load, pmf_sup_error(lat, build_density(p, CONSTANT)),
            pmf_sup_error(lat, build_density(p, STATE_DEPENDENT)))


def pmf(jobs: int = 1) -> Table:
    rows = _map(_pmf_row, DIST_ROWS, jobs)
    return Table("pmf", ["n", "R", "pmf_sup_constant", "pmf_sup_state_dependent"],
                 rows, {"exact": True, "mu": 1.0})


def _kolm_row(item):
    n, load = item
    p = QueueParams.from_load(load, n)
    lat = stationary(p)
    dk_c = kolmogorov(lat, build_density(p, CONSTANT))
    dk_s = kolmogorov(lat, build_density(p, STATE_DEPENDENT))
    bound = K_CONST / math.sqrt(load)
    return (n, load, dk_c, dk_s, bound, dk_c <= bound)


def kolm(jobs: int = 1) -> Table:
    rows = _map(_kolm_row, DIST_ROWS, jobs)
    return Table("kolm", ["n", "R", "dk_constant", "dk_state_dependent", "bound_constant", "bound_ok"],
                 rows, {"exact": True, "mu": 1.0})


# --------------------------------------------------------------------------------------
# moderate deviations

MD_NS = (100, 200, 400, 800, 1600)


def _md_row(item):
    n, rho, z = item
    p = QueueParams.from_load(rho * n, n)
    lat = stationary(p)
    return (n, rho, z, tail_prob(lat, z),
            tail_ratio_error(lat, build_density(p, STATE_DEPENDENT), z),
            tail_ratio_error(lat, build_density(p, CONSTANT), z))


def md(ns=MD_NS, rho: float = 0.6, z: float = 2.4, jobs: int = 1) -> Table:
    rows = _map(_md_row, [(int(n), rho, z) for n in ns], jobs)
    return Table("md", ["n", "rho", "z", "tail_exact", "rel_error_state_dependent",
                        "rel_error_constant"], rows, {"exact": True, "mu": 1.0})


def md_curve(n: int = 100, rho: float = 0.9, z_max: float = 8.0, z_min: float | None = None) -> Table:
    """Relative tail errors at every lattice point from -zeta + delta up to ``z_max``."""
    p = QueueParams.from_load(rho * n, n)
    start = -p.zeta + p.delta
    if z_min is not None and z_min < start - 1e-12:
        raise PreconditionError(f"z must be at least -zeta + delta = {start:.6g}")
    lat = stationary(p)
    curves = [build_density(p, CONSTANT), build_density(p, STATE_DEPENDENT)]
    k0 = n + 1 if z_min is None else math.ceil(p.offered_load + z_min / p.delta - 1e-9)
    rows = []
    k = k0
    while True:
        z = float(p.lattice_point(k))
        if z > z_max + 1e-12:
            break
        rows.append((k, z, tail_prob(lat, z), tail_ratio_error(lat, curves[0], z),
                     tail_ratio_error(lat, curves[1], z)))
        k += 1
    ordered = all(r[4] < r[3] for r in rows)
    return Table("md_curve", ["k", "z", "tail_exact", "rel_error_constant",
                              "rel_error_state_dependent"], rows,
                 {"exact": True, "n": n, "rho": rho, "z_max": z_max, "ordering_holds": ordered})


# --------------------------------------------------------------------------------------
# M/C2/n+M

PH_NS = (15, 30, 60, 125, 250, 500, 1000)


@dataclass(frozen=True)
class PhSettings:
    alpha: float = 1.0
    scv: float = 24.0
    exact_max_n: int = 500
    tail_eps: float = 1e-12
    dt: float = 1e-2
    steps: int = 3_125_000
    replications: int = 32
    burn_in: float = 200.0
    seed: int = 0
    des_horizon: float = 5e3
    des_replications: int = 8
    jobs: int | None = None


def _ph_exact(n: int, s: PhSettings):
    from .mphn import DesConfig, coxian2, des_simulate
    pt = coxian2(1.0, s.scv)
    if n <= s.exact_max_n:
        nu1, nu2 = pt.nu
        dist = mphn_c2_stationary(nu1, nu2, float(pt.P[0, 1]), float(n), n, s.alpha, s.tail_eps)
        return dist.abs_scaled_mean(), 0.0, "gauss_seidel"
    res = des_simulate(pt, float(n), n, s.alpha,
                       DesConfig(horizon=s.des_horizon, burn_in=s.des_horizon / 20,
                                 replications=s.des_replications, seed=s.seed, jobs=s.jobs))
    return res.abs_total.value, res.abs_total.stderr, "des"


def ph_row(n: int, s: PhSettings = PhSettings()):
    from .mphn import OuConfig, OUSpec, coxian2, ou_simulate
    exact, exact_se, method = _ph_exact(n, s)
    spec = OUSpec(coxian2(1.0, s.scv), float(n), n, s.alpha)
    cfg = OuConfig(dt=s.dt, steps=s.steps, burn_in=s.burn_in, replications=s.replications,
                   seed=s.seed, jobs=s.jobs)
    out = [n, exact, exact_se, method]
    for mode in (CONSTANT, STATE_DEPENDENT):
        est = ou_simulate(spec, mode, cfg).abs_total
        err = abs(est.value - exact)
        out += [est.value, err, math.hypot(est.stderr, exact_se), err / exact]
    return tuple(out)


def ph(ns=PH_NS, settings: PhSettings = PhSettings()) -> Table:
    rows = [ph_row(int(n), settings) for n in ns]
    cols = ["n", "abs_total_exact", "exact_stderr", "exact_method",
            "ou_constant", "error_constant", "stderr_constant", "rel_error_constant",
            "ou_state_dependent", "error_state_dependent", "stderr_state_dependent",
            "rel_error_state_dependent"]
    meta = {"exact": False, "mu": 1.0, "alpha": settings.alpha, "scv": settings.scv,
            "dt": settings.dt, "steps": settings.steps, "replications": settings.replications,
            "burn_in": settings.burn_in, "seed": settings.seed, "exact_max_n": settings.exact_max_n}
    return Table("ph", cols, rows, meta)


TABLES = {"tab1": tab1, "tab2": tab2, "tab3": tab3, "benefit": benefit, "rates": rates,
          "pmf": pmf, "kolm": kolm, "md": md, "ph": ph}
