"""Hot loops: many-server phase-type event simulation, piecewise-OU Euler-Maruyama,
and Gauss-Seidel sweeps for the two-phase Coxian chain.

Every function here is written in the numba-compatible subset of Python and
numpy so the same source runs compiled or interpreted (see ``_accel``).
Random draws arrive as pre-generated blocks, so both backends consume the
same stream and give identical results.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import jit, jit_inline

# layout of the time-integral accumulator filled by des_advance
DES_TIME, DES_ABS, DES_M1, DES_M2, DES_M3, DES_M4 = 0, 1, 2, 3, 4, 5
DES_FIXED = 6  # per-phase scaled means follow
# layout of the event counters
CNT_ARR, CNT_DEP, CNT_ABN, CNT_INSYS, CNT_EVENTS = 0, 1, 2, 3, 4


# integer state slots used by des_advance
ST_HEAD, ST_QLEN, ST_INSERV, ST_NSSC, ST_ARRIVALS, ST_DONE = 0, 1, 2, 3, 4, 5
DES_INT_STATE = 6
UNIFORMS_PER_EVENT = 3


@jit_inline
def _pick(cum, u):
    k = 0
    while k < cum.size - 1 and u > cum[k]:
        k += 1
    return k


@jit
def des_advance(uniforms, lam, alpha, n, p_cum, nu, route_cum, delta, gamma_n, burn, t_end,
                ssc_stride, istate, t_now, busy, qcount, qbuf, acc, counters,
                ssc_ell, ssc_q, ssc_total):
    """Advance one M/Ph/n+M replication using a block of uniforms (<= 3 per event).

    Mutable state lives in the arrays ``istate``, ``busy``, ``qcount``, ``qbuf``,
    ``acc`` and ``counters``. Returns (t_now, qbuf); qbuf is reallocated when
    the FCFS buffer fills. ``istate[ST_DONE]`` is set once time reaches t_end.
    """
    d = nu.size
    head = istate[ST_HEAD]
    qlen = istate[ST_QLEN]
    in_service = istate[ST_INSERV]
    n_ssc = istate[ST_NSSC]
    arrivals_after_burn = istate[ST_ARRIVALS]
    ssc_cap = ssc_ell.size
    t = t_now
    pos_u = 0
    service_rates = np.zeros(d)
    while pos_u + UNIFORMS_PER_EVENT <= uniforms.size:
        svc = 0.0
        for i in range(d):
            service_rates[i] = nu[i] * busy[i]
            svc += service_rates[i]
        total_rate = lam + svc + alpha * qlen
        dt = -math.log(1.0 - uniforms[pos_u]) / total_rate
        u = uniforms[pos_u + 1] * total_rate
        extra = uniforms[pos_u + 2]
        pos_u += UNIFORMS_PER_EVENT
        t_next = t + dt
        lo = t if t > burn else burn
        hi = t_next if t_next < t_end else t_end
        if hi > lo:
            w = hi - lo
            xt = delta * (in_service + qlen - n)
            acc[DES_TIME] += w
            acc[DES_ABS] += w * abs(xt)
            acc[DES_M1] += w * xt
            acc[DES_M2] += w * xt * xt
            acc[DES_M3] += w * xt * xt * xt
            acc[DES_M4] += w * xt * xt * xt * xt
            for i in range(d):
                acc[DES_FIXED + i] += w * delta * (busy[i] + qcount[i] - gamma_n[i])
        if t_next >= t_end:
            t = t_end
            istate[ST_DONE] = 1
            break
        t = t_next
        counters[CNT_EVENTS] += 1
        if u < lam:
            counters[CNT_ARR] += 1
            if t > burn:
                arrivals_after_burn += 1
                if arrivals_after_burn % ssc_stride == 0 and n_ssc < ssc_cap:
                    ssc_ell[n_ssc] = qlen
                    for i in range(d):
                        ssc_q[n_ssc, i] = qcount[i]
                    ssc_total[n_ssc] = in_service + qlen
                    n_ssc += 1
            phase = _pick(p_cum, extra)
            if in_service < n:
                busy[phase] += 1
                in_service += 1
            else:
                if head + qlen == qbuf.size:
                    if head > 0:
                        for j in range(qlen):
                            qbuf[j] = qbuf[head + j]
                        head = 0
                    else:
                        bigger = np.zeros(2 * qbuf.size, np.int64)
                        for j in range(qlen):
                            bigger[j] = qbuf[j]
                        qbuf = bigger
                qbuf[head + qlen] = phase
                qlen += 1
                qcount[phase] += 1
        elif u < lam + svc:
            u -= lam
            i = 0
            while i < d - 1 and u >= service_rates[i]:
                u -= service_rates[i]
                i += 1
            busy[i] -= 1
            dest = _pick(route_cum[i], extra)
            if dest < d:
                busy[dest] += 1
            else:
                in_service -= 1
                counters[CNT_DEP] += 1
                if qlen > 0:
                    k = qbuf[head]
                    head += 1
                    qlen -= 1
                    qcount[k] -= 1
                    busy[k] += 1
                    in_service += 1
        else:
            # abandonment of a uniformly chosen waiting customer
            pos = int(extra * qlen)
            if pos >= qlen:
                pos = qlen - 1
            k = qbuf[head + pos]
            for j in range(head + pos, head + qlen - 1):
                qbuf[j] = qbuf[j + 1]
            qlen -= 1
            qcount[k] -= 1
            counters[CNT_ABN] += 1
    counters[CNT_INSYS] = in_service + qlen
    istate[ST_HEAD] = head
    istate[ST_QLEN] = qlen
    istate[ST_INSERV] = in_service
    istate[ST_NSSC] = n_ssc
    istate[ST_ARRIVALS] = arrivals_after_burn
    return t, qbuf


@jit_inline
def ou_drift(y, mode_sd, p, nu, route, alpha, beta, sqrt_lam, service_level, out, work):
    """Drift of the piecewise OU (mode_sd = 0) or the state-dependent generator (mode_sd = 1).

    ``service_level`` is delta * gamma * n; ``route`` is the substochastic matrix.
    ``work`` receives the (clipped, in state-dependent mode) in-service vector.
    """
    d = y.size
    s = 0.0
    for i in range(d):
        s += y[i]
    sp = s if s > 0.0 else 0.0
    for i in range(d):
        w = y[i] - p[i] * sp
        if mode_sd:
            w = w + service_level[i]
            if w < 0.0:
                w = 0.0
        work[i] = w
    for i in range(d):
        inflow = 0.0
        for j in range(d):
            inflow += route[j, i] * nu[j] * work[j]
        if mode_sd:
            base = sqrt_lam * p[i]
        else:
            base = -p[i] * beta
        out[i] = base - nu[i] * work[i] + inflow - alpha * p[i] * sp


@jit_inline
def sd_second_order(y, work, p, nu, route, alpha, delta, lam_delta2, out):
    """State-dependent second-order matrix A(y) with generator (1/2) sum A_ij d_ij."""
    d = y.size
    s = 0.0
    for i in range(d):
        s += y[i]
    sp = s if s > 0.0 else 0.0
    for i in range(d):
        inflow = 0.0
        for j in range(d):
            inflow += route[j, i] * nu[j] * work[j]
        out[i, i] = lam_delta2 * p[i] + delta * (alpha * p[i] * sp + nu[i] * work[i] + inflow)
        for j in range(i + 1, d):
            v = -delta * (nu[i] * work[i] * route[i, j] + nu[j] * work[j] * route[j, i])
            out[i, j] = v
            out[j, i] = v


@jit_inline
def clipped_cholesky(a, lower, tol):
    """Cholesky factor of a PSD matrix; negative pivots are clipped to zero.

    Returns 1 if a pivot below -tol * scale had to be clipped, else 0.
    """
    d = a.shape[0]
    scale = 0.0
    for i in range(d):
        if a[i, i] > scale:
            scale = a[i, i]
    clipped = 0
    for i in range(d):
        for j in range(d):
            lower[i, j] = 0.0
    for j in range(d):
        piv = a[j, j]
        for k in range(j):
            piv -= lower[j, k] * lower[j, k]
        if piv < -tol * scale:
            clipped = 1
        if piv <= 0.0:
            lower[j, j] = 0.0
            continue
        ljj = math.sqrt(piv)
        lower[j, j] = ljj
        for i in range(j + 1, d):
            v = a[i, j]
            for k in range(j):
                v -= lower[i, k] * lower[j, k]
            lower[i, j] = v / ljj
    return clipped


@jit
def ou_advance(y, normals, record, mode_sd, dt, chol, p, nu, route, alpha, beta, delta,
               lam_delta2, service_level, blowup, noise_scale, sums):
    """Euler-Maruyama steps driven by a block of standard normals (one row per step).

    Updates ``y`` in place and, when ``record``, adds to
    sums = [steps, sum |e'y|, sum e'y, sum (e'y)^2, sum y_1, ..., sum y_d].
    Returns (clipped factorizations, index of first divergent step or -1).
    """
    d = y.size
    b = np.empty(d)
    work = np.empty(d)
    amat = np.empty((d, d))
    lower = chol.copy()
    sqdt = math.sqrt(dt)
    sqrt_lam = lam_delta2 / delta
    clips = 0
    for step in range(normals.shape[0]):
        ou_drift(y, mode_sd, p, nu, route, alpha, beta, sqrt_lam, service_level, b, work)
        if mode_sd:
            sd_second_order(y, work, p, nu, route, alpha, delta, lam_delta2, amat)
            clips += clipped_cholesky(amat, lower, 1e-12)
        s = 0.0
        bad = False
        for i in range(d):
            inc = 0.0
            for k in range(i + 1):
                inc += lower[i, k] * normals[step, k]
            y[i] += b[i] * dt + noise_scale * inc * sqdt
            if not (abs(y[i]) < blowup):
                bad = True
            s += y[i]
        if bad:
            return clips, step
        if record:
            sums[0] += 1.0
            sums[1] += abs(s)
            sums[2] += s
            sums[3] += s * s
            for i in range(d):
                sums[4 + i] += y[i]
    return clips, -1


@jit
def c2_gauss_seidel(n, n_total, lam, alpha, nu1, nu2, p12, pi, offsets, tol, max_sweeps, omega):
    """Gauss-Seidel (with over-relaxation ``omega``) for the truncated two-phase Coxian chain.

    States are (x1, x2) with 0 <= x2 <= n and x1 + x2 <= n_total, stored at
    offsets[x2] + x1. ``pi`` holds the initial guess and is updated in place.
    Returns (sweeps, last relative change).
    """
    change = 1.0
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        change = 0.0
        total = 0.0
        for x2 in range(n + 1):
            width = n_total - x2
            for x1 in range(width + 1):
                z1 = x1 if x1 < n - x2 else n - x2
                q = x1 - z1
                out = nu1 * z1 + alpha * q + nu2 * x2
                if x1 + x2 < n_total:
                    out += lam
                inflow = 0.0
                if x1 >= 1:
                    inflow += pi[offsets[x2] + x1 - 1] * lam
                if x2 >= 1:
                    z_prev = x1 + 1 if x1 + 1 < n - x2 + 1 else n - x2 + 1
                    inflow += pi[offsets[x2 - 1] + x1 + 1] * nu1 * z_prev * p12
                if x1 + 1 <= width:
                    z_prev = x1 + 1 if x1 + 1 < n - x2 else n - x2
                    q_prev = x1 + 1 - z_prev
                    inflow += pi[offsets[x2] + x1 + 1] * (nu1 * z_prev * (1.0 - p12) + alpha * q_prev)
                if x2 + 1 <= n and x1 <= n_total - x2 - 1:
                    inflow += pi[offsets[x2 + 1] + x1] * nu2 * (x2 + 1)
                idx = offsets[x2] + x1
                new = inflow / out
                new = (1.0 - omega) * pi[idx] + omega * new
                if new < 0.0:
                    new = 0.0
                old = pi[idx]
                diff = abs(new - old)
                ref = new if new > old else old
                if ref > 1e-300:
                    rel = diff / ref
                    if rel > change and new > 1e-12 * tol:
                        change = rel
                pi[idx] = new
                total += new
        for k in range(pi.size):
            pi[k] /= total
        if change < tol:
            break
    return sweeps, change


@jit
def c2_residual(n, n_total, lam, alpha, nu1, nu2, p12, pi, offsets):
    """max_s |(pi Q)_s| for the truncated chain."""
    worst = 0.0
    for x2 in range(n + 1):
        width = n_total - x2
        for x1 in range(width + 1):
            z1 = x1 if x1 < n - x2 else n - x2
            q = x1 - z1
            out = nu1 * z1 + alpha * q + nu2 * x2
            if x1 + x2 < n_total:
                out += lam
            inflow = 0.0
            if x1 >= 1:
                inflow += pi[offsets[x2] + x1 - 1] * lam
            if x2 >= 1:
                z_prev = x1 + 1 if x1 + 1 < n - x2 + 1 else n - x2 + 1
                inflow += pi[offsets[x2 - 1] + x1 + 1] * nu1 * z_prev * p12
            if x1 + 1 <= width:
                z_prev = x1 + 1 if x1 + 1 < n - x2 else n - x2
                q_prev = x1 + 1 - z_prev
                inflow += pi[offsets[x2] + x1 + 1] * (nu1 * z_prev * (1.0 - p12) + alpha * q_prev)
            if x2 + 1 <= n and x1 <= n_total - x2 - 1:
                inflow += pi[offsets[x2 + 1] + x1] * nu2 * (x2 + 1)
            r = abs(inflow - pi[offsets[x2] + x1] * out)
            if r > worst:
                worst = r
    return worst


@jit
def c2_level_rescale(n, n_total, nu1, nu2, p12, pi, offsets):
    """Aggregation step: rescale each x2-level so level masses solve the aggregated
    birth-death chain in x2 (up rate from phase-1 completions routed on, down rate nu2 x2)."""
    mass = np.zeros(n + 1)
    up = np.zeros(n + 1)
    for x2 in range(n + 1):
        width = n_total - x2
        for x1 in range(width + 1):
            v = pi[offsets[x2] + x1]
            z1 = x1 if x1 < n - x2 else n - x2
            mass[x2] += v
            up[x2] += v * nu1 * z1 * p12
    log_target = np.zeros(n + 1)
    for x2 in range(1, n + 1):
        if up[x2 - 1] <= 0.0 or mass[x2 - 1] <= 0.0:
            return 0
        log_target[x2] = log_target[x2 - 1] + math.log(up[x2 - 1] / mass[x2 - 1]) - math.log(nu2 * x2)
    top = log_target.max()
    norm = 0.0
    for x2 in range(n + 1):
        log_target[x2] = math.exp(log_target[x2] - top)
        norm += log_target[x2]
    for x2 in range(n + 1):
        if mass[x2] <= 0.0:
            return 0
        scale = log_target[x2] / norm / mass[x2]
        width = n_total - x2
        for x1 in range(width + 1):
            pi[offsets[x2] + x1] *= scale
    return 1


@jit
def c2_total_rescale(n, n_total, lam, alpha, nu1, nu2, p12, pi, offsets):
    """Aggregation step on total-count levels T = x1 + x2, which also form a birth-death chain."""
    mass = np.zeros(n_total + 1)
    down = np.zeros(n_total + 1)
    for x2 in range(n + 1):
        width = n_total - x2
        for x1 in range(width + 1):
            v = pi[offsets[x2] + x1]
            z1 = x1 if x1 < n - x2 else n - x2
            q = x1 - z1
            mass[x1 + x2] += v
            down[x1 + x2] += v * (nu1 * z1 * (1.0 - p12) + alpha * q + nu2 * x2)
    log_target = np.zeros(n_total + 1)
    for t in range(1, n_total + 1):
        if down[t] <= 0.0 or mass[t] <= 0.0:
            return 0
        log_target[t] = log_target[t - 1] + math.log(lam) - math.log(down[t] / mass[t])
    top = log_target.max()
    norm = 0.0
    for t in range(n_total + 1):
        log_target[t] = math.exp(log_target[t] - top)
        norm += log_target[t]
    for x2 in range(n + 1):
        width = n_total - x2
        for x1 in range(width + 1):
            t = x1 + x2
            pi[offsets[x2] + x1] *= log_target[t] / norm / mass[t]
    return 1
