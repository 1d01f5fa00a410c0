"""Independent reference values, frozen to oracles.json.

Nothing here imports steadystein. Erlang-C quantities come from direct
high-precision sums and quadrature in mpmath; the two-phase chain is assembled
from scratch and solved with a sparse LU factorization; the small transport
problem is solved as a linear program.

Run:  python3 tests/oracles/generate.py
"""
from __future__ import annotations

import json
import pathlib

import mpmath as mp
import numpy as np
from scipy import optimize, sparse
from scipy.sparse.linalg import spsolve

mp.mp.dps = 40
OUT = pathlib.Path(__file__).with_name("oracles.json")


# ---------------------------------------------------------------- exact Erlang-C chain


def erlang_c_pmf(load, n, mass_eps=mp.mpf("1e-40")):
    """pi_k for k = 0..K with the geometric remainder below mass_eps."""
    load = mp.mpf(load)
    rho = load / n
    w = [mp.mpf(1)]
    for k in range(1, n + 1):
        w.append(w[-1] * load / k)
    head = mp.fsum(w[:-1])
    total = head + w[n] / (1 - rho)
    k = n
    while w[k] * rho / (1 - rho) > mass_eps * total:
        w.append(w[-1] * rho)
        k += 1
    return [v / total for v in w], rho


def erlang_c_moment(load, n, m, center=None):
    pi, rho = erlang_c_pmf(load, n)
    load = mp.mpf(load)
    c = load if center is None else mp.mpf(center)
    d = 1 / mp.sqrt(load)
    return mp.fsum(p * (d * (k - c)) ** m for k, p in enumerate(pi))


# ---------------------------------------------------------------- diffusion densities


def log_density_constant(x, zeta):
    """Unnormalized log density with drift -x (left of -zeta), zeta (right), coefficient 2."""
    if x <= -zeta:
        return -x * x / 2
    return -zeta * zeta / 2 + zeta * (x + zeta)


def log_density_state(x, zeta, d):
    """Unnormalized log density with coefficient 1 / (2 + d x) / (2 + d|zeta|) by pieces."""
    def phi_mid(y):
        # integral from 0 of -2u/(2 + d u)
        return -2 * y / d + 4 / d ** 2 * mp.log((2 + d * y) / 2)

    a_right = 2 + d * abs(zeta)
    if x <= -1 / d:
        base = phi_mid(-1 / d)
        return base - (x * x - 1 / d ** 2) + mp.log(2)  # a = 1 there
    if x <= -zeta:
        return phi_mid(x) + mp.log(2 / (2 + d * x))
    return phi_mid(-zeta) + 2 * zeta * (x + zeta) / a_right + mp.log(2 / a_right)


def density_moments(load, n, mode, orders):
    load = mp.mpf(load)
    d = 1 / mp.sqrt(load)
    zeta = d * (load - n)
    if mode == "constant":
        logf = lambda x: log_density_constant(x, zeta)  # noqa: E731
        cuts = [-mp.inf, -zeta, mp.inf]
    else:
        logf = lambda x: log_density_state(x, zeta, d)  # noqa: E731
        cuts = [-mp.inf, -1 / d, -zeta, mp.inf]
    f = lambda x: mp.exp(logf(x))  # noqa: E731
    # split the exponential tail at a few multiples of its scale so quad resolves it
    right = [cuts[-2] + s / abs(zeta) for s in (1, 5, 20, 80)]
    pts = cuts[:-1] + right + [mp.inf]
    norm = mp.quad(f, pts)
    out = {m: mp.quad(lambda x: x ** m * f(x), pts) / norm for m in orders}
    return out, f, norm, pts


def density_cdf(f, norm, pts, x):
    inner = [p for p in pts if p < x]
    return mp.quad(f, inner + [x]) / norm


# ---------------------------------------------------------------- oracles


def tab1_errors():
    rows = []
    for n, load in [(5, 3), (5, 4), (5, 4.9), (5, 4.95), (5, 4.99), (500, 490), (500, 499)]:
        exact = erlang_c_moment(load, n, 1)
        approx = density_moments(load, n, "constant", [1])[0][1]
        rows.append({"n": n, "R": load, "mean_exact": float(load + mp.sqrt(load) * exact),
                     "error": float(mp.sqrt(load) * abs(exact - approx))})
    return rows


def moment_errors():
    rows = []
    for n, load in [(5, 4), (50, 46.59), (5, 3)]:
        for mode in ("constant", "state_dependent"):
            mom = density_moments(load, n, mode, [1, 2])[0]
            for m in (1, 2):
                exact = erlang_c_moment(load, n, m)
                rows.append({"n": n, "R": load, "mode": mode, "m": m, "exact": float(exact),
                             "error": float(abs(exact - mom[m]))})
    exact = erlang_c_moment(499, 500, 2)
    mom = density_moments(499, 500, "constant", [2])[0]
    rows.append({"n": 500, "R": 499, "mode": "constant", "m": 2, "exact": float(exact),
                 "error": float(abs(exact - mom[2]))})
    return rows


def kolmogorov_small():
    """sup |F_X - F_Y| for n = 5, R = 4, evaluated on both sides of every jump."""
    n, load = 5, mp.mpf(4)
    pi, _ = erlang_c_pmf(load, n)
    d = 1 / mp.sqrt(load)
    out = {}
    for mode in ("constant", "state_dependent"):
        _, f, norm, pts = density_moments(load, n, mode, [])
        acc = mp.mpf(0)
        worst = mp.mpf(0)
        for k, p in enumerate(pi[:60]):
            x = d * (k - load)
            g = density_cdf(f, norm, pts, x)
            worst = max(worst, abs(acc - g))
            acc += p
            worst = max(worst, abs(acc - g))
        out[mode] = float(worst)
    return out


def md_row():
    n, load = 100, mp.mpf(60)
    pi, _ = erlang_c_pmf(load, n)
    d = 1 / mp.sqrt(load)
    z = mp.mpf("2.4")
    k0 = int(mp.ceil(load + z / d))
    tail = mp.fsum(pi[k0:])
    # the remainder beyond the retained pmf is below 1e-40
    out = {"tail": float(tail)}
    for mode in ("constant", "state_dependent"):
        _, f, norm, pts = density_moments(load, n, mode, [])
        sf = 1 - density_cdf(f, norm, pts, z)
        out[mode] = float(abs(tail / sf - 1))
    return out


def transport_lp():
    """Optimal transport cost between a 3-point and a 5-point law (|x - y| cost)."""
    xa, pa = np.array([-1.0, 0.5, 2.0]), np.array([0.2, 0.5, 0.3])
    xb, pb = np.array([-2.0, -0.5, 0.0, 1.0, 3.0]), np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    cost = np.abs(xa[:, None] - xb[None, :]).ravel()
    rows = []
    for i in range(3):
        r = np.zeros((3, 5))
        r[i, :] = 1
        rows.append(r.ravel())
    for j in range(5):
        r = np.zeros((3, 5))
        r[:, j] = 1
        rows.append(r.ravel())
    res = optimize.linprog(cost, A_eq=np.array(rows), b_eq=np.concatenate([pa, pb]),
                           bounds=(0, None), method="highs")
    return {"xa": xa.tolist(), "pa": pa.tolist(), "xb": xb.tolist(), "pb": pb.tolist(),
            "cost": float(res.fun)}


def coxian_lu(n, lam, alpha, nu1, nu2, p12, cap_extra=60):
    """E|delta (x1 + x2 - n)| for the M/C2/n+M chain by direct sparse LU."""
    cap = n + cap_extra
    states = [(a, b) for b in range(n + 1) for a in range(cap - b + 1)]
    index = {s: i for i, s in enumerate(states)}
    rows, cols, vals = [], [], []

    def add(i, j, r):
        rows.append(i)
        cols.append(j)
        vals.append(r)

    for (a, b), i in index.items():
        t = a + b
        out = 0.0
        if t < cap:
            add(i, index[(a + 1, b)], lam)
            out += lam
        in_service_1 = min(a, n - b)
        queued = t - min(t, n)
        if in_service_1 > 0:
            # phase-1 completion: to phase 2 with p12, else leaves; a queued customer starts phase 1
            r = nu1 * in_service_1
            if p12 > 0:
                add(i, index[(a - 1, b + 1)], r * p12)
            add(i, index[(a - 1, b)], r * (1 - p12))
            out += r
        if b > 0:
            r = nu2 * b
            add(i, index[(a, b - 1)], r)
            out += r
        if queued > 0:
            r = alpha * queued
            add(i, index[(a - 1, b)], r)
            out += r
        add(i, i, -out)
    q = sparse.csr_matrix((vals, (rows, cols)), shape=(len(states),) * 2)
    a_mat = q.T.tolil()
    a_mat[0, :] = 1.0
    rhs = np.zeros(len(states))
    rhs[0] = 1.0
    pi = spsolve(a_mat.tocsc(), rhs)
    tot = np.array([a + b for a, b in states])
    return float(pi @ np.abs((tot - n) / np.sqrt(lam)))


def phase_type_hand():
    """Erlang-2 (theta = 2): mean 1, gamma = (1/2, 1/2); Sigma by the three-term formula."""
    p = np.array([1.0, 0.0])
    nu = np.array([2.0, 2.0])
    P = np.array([[0.0, 1.0], [0.0, 0.0]])
    gamma = np.array([0.5, 0.5])
    mu = 1.0
    sigma = np.diag(p).astype(float)
    for k in range(2):
        row = P[k]
        h = np.diag(row) - np.outer(row, row)
        sigma += gamma[k] * nu[k] * h / mu
    sigma += (np.eye(2) - P.T) @ np.diag(nu * gamma) @ (np.eye(2) - P) / mu
    return {"gamma": gamma.tolist(), "mu": mu, "sigma": sigma.tolist()}


def main():
    data = {
        "tab1": tab1_errors(),
        "moment_errors": moment_errors(),
        "kolmogorov_n5_R4": kolmogorov_small(),
        "md_n100": md_row(),
        "transport": transport_lp(),
        "coxian_n15": coxian_lu(15, 15.0, 1.0, 2.0, 1.0 / 24.0, 1.0 / 48.0),
        "erlang2": phase_type_hand(),
    }
    OUT.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
