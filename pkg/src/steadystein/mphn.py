"""Phase-type service algebra, M/Ph/n+M event simulation with state-space-collapse
checks, and Euler-Maruyama simulation of the two multi-dimensional diffusion models.

Scaling throughout: delta = 1/sqrt(lambda), n mu = lambda + beta sqrt(lambda), and
phase counts are centered at gamma n.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels as K
from ._accel import USING_NUMBA
from .errors import InvalidPhaseType, NumericError, PreconditionError

CONSTANT = "constant"
STATE_DEPENDENT = "state_dependent"


# --------------------------------------------------------------------------------------
# phase-type algebra


@dataclass(frozen=True)
class PhaseType:
    """Initial-phase distribution ``p``, phase rates ``nu`` and routing matrix ``P``."""

    p: np.ndarray
    nu: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        d = p.size
        if nu.size != d or P.shape != (d, d):
            raise InvalidPhaseType(f"inconsistent shapes p{p.shape}, nu{nu.shape}, P{P.shape}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidPhaseType("p must be a probability vector")
        if np.any(nu <= 0):
            raise InvalidPhaseType("phase rates must be positive")
        if np.any(P < 0) or np.any(P.sum(axis=1) > 1.0 + 1e-12):
            raise InvalidPhaseType("P must be substochastic")
        if np.any(np.diag(P) != 0):
            raise InvalidPhaseType("P must have a zero diagonal")
        reach = (p > 0) | (P.sum(axis=0) > 0)
        if not reach.all():
            raise InvalidPhaseType(f"redundant phases {np.nonzero(~reach)[0].tolist()}")
        transient = np.eye(d) - P
        if np.linalg.matrix_rank(transient) < d or np.linalg.cond(transient) > 1e12:
            raise InvalidPhaseType("I - P is singular: some phase is never absorbed")
        for name, arr in (("p", p), ("nu", nu), ("P", P)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.p.size

    @property
    def mean(self) -> float:
        """Expected absorption time p' (I - P)^-1 (1/nu)."""
        return float(self.p @ np.linalg.solve(np.eye(self.d) - self.P, 1.0 / self.nu))

    @property
    def mu(self) -> float:
        return 1.0 / self.mean

    @property
    def rate_matrix(self) -> np.ndarray:
        return (np.eye(self.d) - self.P.T) @ np.diag(self.nu)

    @property
    def gamma(self) -> np.ndarray:
        """Long-run fraction of busy servers working on each phase."""
        return self.mu * np.linalg.solve(self.rate_matrix, self.p)

    @property
    def scv(self) -> float:
        """Squared coefficient of variation of the service time."""
        T = -np.diag(self.nu) + np.diag(self.nu) @ self.P
        inv = np.linalg.inv(-T)
        m1 = self.p @ inv @ np.ones(self.d)
        m2 = 2.0 * self.p @ inv @ inv @ np.ones(self.d)
        return float(m2 / m1 ** 2 - 1.0)


def phasetype_derive(pt: PhaseType):
    """(mu, gamma, rate matrix) of a phase-type distribution."""
    gamma = pt.gamma
    if np.any(gamma < -1e-14):
        raise InvalidPhaseType(f"negative load fractions {gamma}")
    return pt.mu, np.clip(gamma, 0.0, None), pt.rate_matrix


def routing_covariance(pt: PhaseType, k: int) -> np.ndarray:
    """H^k: covariance of the one-hot destination of a phase-k completion."""
    row = pt.P[k]
    return np.diag(row) - np.outer(row, row)


def sigma_matrix(pt: PhaseType) -> np.ndarray:
    """Covariance of the constant-coefficient diffusion.

    The service part is scaled by 1/mu so that the matrix is the limit of the
    chain's per-unit-time jump covariance at any mean service time.
    """
    mu, gamma, R = phasetype_derive(pt)
    service = sum(gamma[k] * pt.nu[k] * routing_covariance(pt, k) for k in range(pt.d))
    service = service + R @ np.diag(gamma) @ (np.eye(pt.d) - pt.P)
    sigma = np.diag(pt.p) + service / mu
    return 0.5 * (sigma + sigma.T)


def exponential(mu: float = 1.0) -> PhaseType:
    return PhaseType([1.0], [mu], [[0.0]])


def coxian2(mu: float = 1.0, scv: float = 24.0) -> PhaseType:
    """Two-phase Coxian with mean 1/mu and squared coefficient of variation ``scv`` (>= 1/2)."""
    if scv < 0.5:
        raise InvalidPhaseType("this Coxian family needs scv >= 1/2")
    nu1 = 2.0 * mu
    p12 = 1.0 / (2.0 * scv)
    return PhaseType([1.0, 0.0], [nu1, p12 * nu1], [[0.0, p12], [0.0, 0.0]])


def hyperexp2(p1: float = 0.5, nu1: float = 2.0 / 3.0, nu2: float = 2.0) -> PhaseType:
    return PhaseType([p1, 1.0 - p1], [nu1, nu2], np.zeros((2, 2)))


def erlang2(theta: float = 2.0) -> PhaseType:
    return PhaseType([1.0, 0.0], [theta, theta], [[0.0, 1.0], [0.0, 0.0]])


PRESETS = {"exponential": exponential, "c2": coxian2, "h2": hyperexp2, "e2": erlang2}


def preset(name: str) -> PhaseType:
    try:
        return PRESETS[name]()
    except KeyError:
        raise PreconditionError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# --------------------------------------------------------------------------------------
# diffusion models


@dataclass(frozen=True)
class OUSpec:
    pt: PhaseType
    lam: float
    n: int
    alpha: float

    def __post_init__(self):
        if self.lam <= 0 or self.n < 1 or self.alpha < 0:
            raise PreconditionError("need lambda > 0, n >= 1, alpha >= 0")

    @property
    def d(self) -> int:
        return self.pt.d

    @property
    def delta(self) -> float:
        return 1.0 / math.sqrt(self.lam)

    @property
    def beta(self) -> float:
        return (self.n * self.pt.mu - self.lam) / math.sqrt(self.lam)

    @property
    def gamma(self) -> np.ndarray:
        return phasetype_derive(self.pt)[1]

    @property
    def service_level(self) -> np.ndarray:
        """delta * gamma * n: scaled number of servers per phase at the centering point."""
        return self.delta * self.gamma * self.n

    @property
    def sigma(self) -> np.ndarray:
        return sigma_matrix(self.pt)

    @property
    def sigma_chol(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.sigma)
        except np.linalg.LinAlgError as exc:
            raise NumericError("covariance matrix is not positive definite") from exc

    def drift(self, y, mode: str = CONSTANT) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.empty(self.d)
        K.ou_drift(y, 1 if mode == STATE_DEPENDENT else 0, self.pt.p, self.pt.nu, self.pt.P,
                   float(self.alpha), float(self.beta), math.sqrt(self.lam), self.service_level, out,
                   np.empty(self.d))
        return out

    def second_order(self, y, mode: str = CONSTANT) -> np.ndarray:
        """Matrix A(y) with generator term (1/2) sum_ij A_ij d_ij f."""
        if mode == CONSTANT:
            return self.sigma
        y = np.asarray(y, dtype=float)
        work = np.empty(self.d)
        K.ou_drift(y, 1, self.pt.p, self.pt.nu, self.pt.P, float(self.alpha), float(self.beta),
                   math.sqrt(self.lam), self.service_level, np.empty(self.d), work)
        out = np.empty((self.d, self.d))
        K.sd_second_order(y, work, self.pt.p, self.pt.nu, self.pt.P, float(self.alpha),
                          self.delta, self.delta ** 2 * self.lam, out)
        return out


def ctmc_jump_moments(spec: OUSpec, in_service, queued):
    """First and second moments per unit time of the scaled chain's jumps.

    ``in_service`` and ``queued`` are per-phase counts (real-valued counts allowed).
    Returns (mean jump vector, second-moment matrix), both in scaled units.
    """
    pt, d, delta = spec.pt, spec.d, spec.delta
    z = np.asarray(in_service, dtype=float)
    q = np.asarray(queued, dtype=float)
    first = np.zeros(d)
    second = np.zeros((d, d))
    eye = np.eye(d)

    def add(rate, jump):
        nonlocal first, second
        first = first + rate * delta * jump
        second = second + rate * delta ** 2 * np.outer(jump, jump)

    for i in range(d):
        add(spec.lam * pt.p[i], eye[i])
        add(spec.alpha * q[i], -eye[i])
        for j in range(d):
            if pt.P[i, j] > 0:
                add(pt.nu[i] * z[i] * pt.P[i, j], eye[j] - eye[i])
        add(pt.nu[i] * z[i] * (1.0 - pt.P[i].sum()), -eye[i])
    return first, second


# --------------------------------------------------------------------------------------
# simulation results


@dataclass(frozen=True)
class SimEstimate:
    value: float
    stderr: float
    replications: int
    burn_in: float
    seed: int

    @classmethod
    def from_replications(cls, values, burn_in, seed):
        values = np.asarray(values, dtype=float)
        se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.inf
        return cls(float(values.mean()), se, int(values.size), float(burn_in), int(seed))


def replication_streams(seed: int, replications: int) -> list[np.random.Generator]:
    """Independent counter-based (Philox) generators, one per replication index."""
    children = np.random.SeedSequence(seed).spawn(replications)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


BLOCK = 1 << 16


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        jobs = int(os.environ.get("STEADYSTEIN_JOBS", "1") or 1)
    return max(1, int(jobs))


def _run_parallel(fn, items, jobs):
    # threads only help when the kernels release the GIL
    if jobs <= 1 or not USING_NUMBA:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------------------
# discrete-event simulation


@dataclass(frozen=True)
class DesConfig:
    horizon: float = 2.0e4
    burn_in: float = 1.0e3
    replications: int = 8
    seed: int = 0
    ssc_stride: int = 0  # 0 picks roughly one sample per unit of time
    ssc_cap: int = 2_000_000
    jobs: int | None = None

    def __post_init__(self):
        if self.horizon <= 0 or self.burn_in < 0 or self.replications < 2 or self.ssc_cap < 0:
            raise PreconditionError("DES config needs horizon > 0, burn_in >= 0, replications >= 2")


@dataclass
class DesResult:
    abs_total: SimEstimate
    moments: dict
    phase_means: list
    counters: np.ndarray  # replications x (arrivals, departures, abandonments, in-system, events)
    ssc_ell: np.ndarray
    ssc_queue: np.ndarray
    ssc_total: np.ndarray
    delta: float
    config: DesConfig

    @property
    def events(self) -> int:
        return int(self.counters[:, K.CNT_EVENTS].sum())

    @property
    def flow_conserved(self) -> bool:
        c = self.counters
        return bool(np.all(c[:, K.CNT_ARR] == c[:, K.CNT_DEP] + c[:, K.CNT_ABN] + c[:, K.CNT_INSYS]))


def des_simulate(pt: PhaseType, lam: float, n: int, alpha: float,
                 config: DesConfig = DesConfig()) -> DesResult:
    """Event-driven simulation of the M/Ph/n+M system, starting empty."""
    if alpha <= 0:
        raise PreconditionError("simulation needs alpha > 0 so the system is stable")
    if lam <= 0 or n < 1:
        raise PreconditionError("need lambda > 0 and n >= 1")
    delta = 1.0 / math.sqrt(lam)
    gamma_n = phasetype_derive(pt)[1] * n
    p_cum = np.cumsum(pt.p)
    p_cum[-1] = 1.0
    route_cum = np.cumsum(np.hstack([pt.P, (1.0 - pt.P.sum(axis=1))[:, None]]), axis=1)
    route_cum[:, -1] = 1.0
    stride = config.ssc_stride or max(1, int(round(lam)))
    streams = replication_streams(config.seed, config.replications)
    queue_cap = max(64, 4 * int(lam / alpha + 10 * math.sqrt(lam / alpha) + 10))
    cap = config.ssc_cap // config.replications
    t_end = float(config.burn_in + config.horizon)

    def one(rng):
        istate = np.zeros(K.DES_INT_STATE, np.int64)
        busy = np.zeros(pt.d, np.int64)
        qcount = np.zeros(pt.d, np.int64)
        qbuf = np.zeros(queue_cap, np.int64)
        acc = np.zeros(K.DES_FIXED + pt.d)
        counters = np.zeros(5, np.int64)
        ssc_ell = np.zeros(cap, np.int64)
        ssc_q = np.zeros((cap, pt.d), np.int64)
        ssc_total = np.zeros(cap, np.int64)
        t = 0.0
        while not istate[K.ST_DONE]:
            t, qbuf = K.des_advance(rng.random(BLOCK * K.UNIFORMS_PER_EVENT), float(lam),
                                    float(alpha), int(n), p_cum, pt.nu, route_cum, delta, gamma_n,
                                    float(config.burn_in), t_end, stride, istate, t, busy, qcount,
                                    qbuf, acc, counters, ssc_ell, ssc_q, ssc_total)
        k = istate[K.ST_NSSC]
        return acc, counters, ssc_ell[:k], ssc_q[:k], ssc_total[:k]

    runs = _run_parallel(one, streams, resolve_jobs(config.jobs))
    acc = np.array([r[0] for r in runs])
    per_time = acc / acc[:, [K.DES_TIME]]
    est = lambda col: SimEstimate.from_replications(per_time[:, col], config.burn_in, config.seed)  # noqa: E731
    moments = {m: est(K.DES_M1 + m - 1) for m in range(1, 5)}
    phase = [est(K.DES_FIXED + i) for i in range(pt.d)]
    return DesResult(
        abs_total=est(K.DES_ABS), moments=moments, phase_means=phase,
        counters=np.array([r[1] for r in runs]),
        ssc_ell=np.concatenate([r[2] for r in runs]),
        ssc_queue=np.concatenate([r[3] for r in runs]) if runs else np.zeros((0, pt.d)),
        ssc_total=np.concatenate([r[4] for r in runs]),
        delta=delta, config=config)


# --------------------------------------------------------------------------------------
# state-space collapse


@dataclass
class SscReport:
    status: str  # "pass" | "fail" | "inconclusive"
    level: float
    tests: list  # dicts: ell, phase, samples, chi2, dof, p_value
    min_p_value: float
    family_threshold: float
    mean_gap: list  # per phase: (mean of delta Q_i - p_i delta ell, batch-means SE)
    mean_ok: bool
    moment_constants: dict  # m -> per-phase empirical constant
    samples: int


def _merge_bins(observed, expected, floor=5.0):
    """Merge adjacent bins (left to right, remainder into the last) until each expects >= floor."""
    obs_out, exp_out = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= floor:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp_out:
            obs_out[-1] += o_acc
            exp_out[-1] += e_acc
        else:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
    return np.array(obs_out), np.array(exp_out)


def batch_means_se(values, batches: int = 32) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2 * batches:
        return float(values.std(ddof=1) / math.sqrt(max(values.size, 1)))
    usable = values.size - values.size % batches
    means = values[:usable].reshape(batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


def ssc_binomial_test(ell, queue, p, delta: float | None = None, level: float = 0.01,
                      min_stratum: int = 500, min_samples: int = 10_000,
                      moment_orders=(1, 2)) -> SscReport:
    """Chi-square tests of Q_i | (queue length = ell) ~ Binomial(ell, p_i), per stratum and phase.

    The family-wise level is split over all tests (Bonferroni). Strata with
    ell = 0 carry no information and are dropped.
    """
    ell = np.asarray(ell, dtype=np.int64)
    queue = np.asarray(queue, dtype=np.int64).reshape(ell.size, -1)
    p = np.asarray(p, dtype=float)
    keep = ell >= 1
    total = int(keep.sum())
    delta = 1.0 if delta is None else float(delta)
    gaps = delta * queue - delta * np.outer(ell, p)
    mean_gap = [(float(gaps[:, i].mean()) if ell.size else 0.0, batch_means_se(gaps[:, i]))
                for i in range(p.size)]
    mean_ok = all(abs(m) <= 3.0 * se + 1e-15 for m, se in mean_gap)
    constants = {}
    pos_scaled = delta * ell
    for m in moment_orders:
        denom = delta ** m * np.mean(pos_scaled ** m) if ell.size else 0.0
        constants[m] = [float(np.mean(np.abs(gaps[:, i]) ** (2 * m)) / denom) if denom > 0 else math.nan
                        for i in range(p.size)]
    if total < min_samples:
        return SscReport("inconclusive", level, [], math.nan, math.nan, mean_gap, mean_ok,
                         constants, total)
    tests = []
    degenerate_fail = False
    for i in range(p.size):
        if p[i] in (0.0, 1.0):
            expected = 0 if p[i] == 0.0 else ell[keep]
            if np.any(queue[keep, i] != expected):
                degenerate_fail = True
            continue
        for value in np.unique(ell[keep]):
            rows = ell == value
            count = int(rows.sum())
            if count < min_stratum:
                continue
            observed = np.bincount(queue[rows, i], minlength=value + 1)[: value + 1].astype(float)
            expected = count * stats.binom.pmf(np.arange(value + 1), value, p[i])
            obs_m, exp_m = _merge_bins(observed, expected)
            if obs_m.size < 2:
                continue
            chi2 = float(np.sum((obs_m - exp_m) ** 2 / exp_m))
            dof = obs_m.size - 1
            tests.append({"ell": int(value), "phase": i, "samples": count, "chi2": chi2,
                          "dof": dof, "p_value": float(stats.chi2.sf(chi2, dof))})
    threshold = level / max(1, len(tests))
    min_p = min((t["p_value"] for t in tests), default=math.nan)
    if degenerate_fail:
        status = "fail"
    elif not tests:
        status = "pass" if np.all(p % 1.0 == 0.0) else "inconclusive"
    else:
        status = "pass" if min_p >= threshold else "fail"
    return SscReport(status, level, tests, min_p, threshold, mean_gap, mean_ok, constants, total)


# --------------------------------------------------------------------------------------
# diffusion simulation


@dataclass(frozen=True)
class OuConfig:
    dt: float = 1e-2
    steps: int = 1_000_000
    burn_in: float = 1e3  # time units
    replications: int = 32
    seed: int = 0
    noise: bool = True
    blowup: float = 1e4
    max_clip_fraction: float = 1e-4
    jobs: int | None = None

    def __post_init__(self):
        if self.dt <= 0 or self.steps < 1 or self.burn_in < 0 or self.replications < 2:
            raise PreconditionError("OU config needs dt > 0, steps >= 1, replications >= 2")


@dataclass
class OuResult:
    abs_total: SimEstimate
    mean_total: SimEstimate
    second_total: SimEstimate
    coordinate_means: list
    clip_fraction: float
    mode: str
    config: OuConfig


def ou_simulate(spec: OUSpec, mode: str = CONSTANT, config: OuConfig = OuConfig(),
                y0=None) -> OuResult:
    """Long-run averages of e'Y (absolute value, first and second moments) by Euler-Maruyama."""
    if mode not in (CONSTANT, STATE_DEPENDENT):
        raise PreconditionError(f"unknown mode {mode!r}")
    chol = spec.sigma_chol if mode == CONSTANT else np.zeros((spec.d, spec.d))
    if not config.noise:
        chol = np.zeros_like(chol)
    y_start = np.zeros(spec.d) if y0 is None else np.asarray(y0, dtype=float)
    burn_steps = int(round(config.burn_in / config.dt))
    streams = replication_streams(config.seed, config.replications)
    sd = 1 if mode == STATE_DEPENDENT else 0
    noise_gate = 1.0 if config.noise else 0.0
    pt = spec.pt

    def one(rng):
        y = y_start.copy()
        sums = np.zeros(4 + spec.d)
        clips = 0
        for record, todo in ((False, burn_steps), (True, config.steps)):
            while todo > 0:
                size = min(BLOCK, todo)
                normals = rng.standard_normal((size, spec.d)) if config.noise else np.zeros((size, spec.d))
                c, bad = K.ou_advance(y, normals, record, sd, config.dt, chol, pt.p, pt.nu, pt.P,
                                      float(spec.alpha), float(spec.beta), spec.delta,
                                      spec.delta ** 2 * spec.lam, spec.service_level,
                                      config.blowup, noise_gate, sums)
                clips += c
                if bad >= 0:
                    return sums, clips, bad
                todo -= size
        return sums, clips, -1

    runs = _run_parallel(one, streams, resolve_jobs(config.jobs))
    for sums, _, bad in runs:
        if bad >= 0:
            raise NumericError(f"Euler-Maruyama path left |y| < {config.blowup} at step {bad}; "
                               f"reduce the step size (dt={config.dt})")
    sums = np.array([r[0] for r in runs])
    total_steps = (burn_steps + config.steps) * config.replications
    clip_fraction = float(sum(r[1] for r in runs)) / total_steps
    if mode == STATE_DEPENDENT and clip_fraction > config.max_clip_fraction:
        raise NumericError(f"second-order matrix clipped on {clip_fraction:.2e} of steps")
    avg = sums / sums[:, [0]]
    est = lambda col: SimEstimate.from_replications(avg[:, col], config.burn_in, config.seed)  # noqa: E731
    return OuResult(est(1), est(2), est(3), [est(4 + i) for i in range(spec.d)], clip_fraction,
                    mode, config)
