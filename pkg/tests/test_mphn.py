import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from steadystein.coxian import mphn_c2_stationary
from steadystein.errors import InvalidPhaseType, PreconditionError
from steadystein.models import QueueParams, drift, lattice_diff_coeff
from steadystein.mphn import (DesConfig, OuConfig, OUSpec, PhaseType, coxian2, ctmc_jump_moments,
                              des_simulate, erlang2, exponential, hyperexp2, ou_simulate, preset,
                              sigma_matrix, ssc_binomial_test)


@st.composite
def phase_types(draw):
    d = draw(st.integers(1, 4))
    raw_p = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=d, max_size=d)))
    if raw_p.sum() < 1e-3:
        raw_p[0] = 1.0
    p = raw_p / raw_p.sum()
    nu = np.array(draw(st.lists(st.floats(0.1, 10.0), min_size=d, max_size=d)))
    P = np.zeros((d, d))
    # route only forward so every phase is eventually absorbed
    for i in range(d):
        for j in range(i + 1, d):
            P[i, j] = draw(st.floats(0.0, 1.0))
        s = P[i].sum()
        if s > 0.95:
            P[i] *= 0.95 / s
    reach = (p > 0) | (P.sum(axis=0) > 0)
    if not reach.all():
        p = p + 0.01 * ~reach
        p = p / p.sum()
    return PhaseType(p, nu, P)


@given(phase_types())
def test_load_fractions_sum_to_one(pt):
    assert pt.gamma.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(pt.gamma >= -1e-14)


def test_covariance_positive_definite_on_corpus():
    rng = np.random.default_rng(7)
    built = 0
    while built < 50:
        d = int(rng.integers(1, 5))
        p = rng.dirichlet(np.ones(d))
        nu = rng.uniform(0.1, 10.0, d)
        P = np.triu(rng.uniform(0, 1, (d, d)), 1)
        P *= np.minimum(1.0, 0.95 / np.maximum(P.sum(axis=1, keepdims=True), 1e-12))
        sigma = sigma_matrix(PhaseType(p, nu, P))
        assert np.allclose(sigma, sigma.T)
        assert np.linalg.eigvalsh(sigma).min() > 0
        built += 1


def test_erlang2_matches_hand_computation(oracles):
    ref = oracles["erlang2"]
    pt = erlang2(2.0)
    assert pt.mu == pytest.approx(ref["mu"])
    assert np.allclose(pt.gamma, ref["gamma"], atol=1e-12)
    assert np.allclose(sigma_matrix(pt), ref["sigma"], atol=1e-12)


def test_hyperexponential_covariance_is_diagonal():
    pt = hyperexp2()
    expected = np.diag(pt.p + pt.nu * pt.gamma / pt.mu)
    assert np.allclose(sigma_matrix(pt), expected, atol=1e-12)


def test_coxian_preset_moments():
    pt = coxian2(1.0, 24.0)
    assert pt.mean == pytest.approx(1.0)
    assert pt.scv == pytest.approx(24.0)
    for name in ("exponential", "c2", "h2", "e2"):
        assert preset(name).mean == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        preset("weibull")


def test_invalid_phase_types_are_rejected():
    with pytest.raises(InvalidPhaseType):
        PhaseType([0.5, 0.4], [1.0, 1.0], np.zeros((2, 2)))
    with pytest.raises(InvalidPhaseType):
        PhaseType([1.0, 0.0], [1.0, 1.0], [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(InvalidPhaseType):
        PhaseType([1.0, 0.0], [1.0, 1.0], np.zeros((2, 2)))


@given(phase_types(), st.integers(5, 200))
def test_chain_jump_moments_at_balance(pt, n):
    spec = OUSpec(pt, n * pt.mu, n, 1.0)
    first, second = ctmc_jump_moments(spec, pt.gamma * n, np.zeros(pt.d))
    assert np.allclose(first, 0.0, atol=1e-9)
    assert np.allclose(second, sigma_matrix(pt), rtol=1e-9, atol=1e-12)


@given(lam=st.floats(5.0, 300.0), frac=st.floats(0.6, 1.6), alpha=st.floats(0.1, 3.0),
       k=st.integers(1, 600))
def test_one_phase_reduces_to_scalar_model(lam, frac, alpha, k):
    n = int(lam * frac) + 1
    spec = OUSpec(exponential(), lam, n, alpha)
    params = QueueParams(lam, 1.0, n, alpha)
    y = spec.delta * (k - n)
    x = float(params.lattice_point(k))
    assert float(spec.drift([y])[0]) == pytest.approx(float(drift(params, x)), abs=1e-9)
    sd = float(spec.second_order([y], "state_dependent")[0, 0])
    assert sd == pytest.approx(float(lattice_diff_coeff(params, k)), rel=1e-9)


def test_noise_free_path_settles_at_drift_root():
    spec = OUSpec(coxian2(), 30.0, 30, 1.0)
    root = optimize.fsolve(lambda y: spec.drift(y), np.full(spec.d, 0.3), xtol=1e-13)
    res = ou_simulate(spec, config=OuConfig(dt=0.01, steps=20_000, burn_in=400.0, replications=2,
                                            noise=False))
    assert res.mean_total.value == pytest.approx(root.sum(), abs=1e-8)
    assert res.abs_total.value == pytest.approx(abs(root.sum()), abs=1e-8)


def test_des_conserves_flow_and_matches_exact_chain():
    pt = coxian2()
    res = des_simulate(pt, 15.0, 15, 1.0, DesConfig(horizon=4e3, burn_in=200.0, replications=6,
                                                    seed=3))
    assert res.flow_conserved
    exact = mphn_c2_stationary(pt.nu[0], pt.nu[1], float(pt.P[0, 1]), 15.0, 15, 1.0, 1e-12)
    est = res.abs_total
    assert abs(est.value - exact.abs_scaled_mean()) < 4 * est.stderr


def test_exact_chain_matches_independent_lu(oracles):
    pt = coxian2()
    dist = mphn_c2_stationary(pt.nu[0], pt.nu[1], float(pt.P[0, 1]), 15.0, 15, 1.0, 1e-12)
    assert dist.abs_scaled_mean() == pytest.approx(oracles["coxian_n15"], rel=1e-8)


def test_ssc_rejects_wrong_split_and_accepts_right_one():
    rng = np.random.default_rng(1)
    ell = rng.integers(1, 12, 40_000)
    good = rng.binomial(ell, 0.3)
    bad = rng.binomial(ell, 0.36)
    p = np.array([0.3, 0.7])
    ok = ssc_binomial_test(ell, np.column_stack([good, ell - good]), p)
    assert ok.status == "pass" and ok.mean_ok
    wrong = ssc_binomial_test(ell, np.column_stack([bad, ell - bad]), p)
    assert wrong.status == "fail"
    few = ssc_binomial_test(ell[:100], np.column_stack([good[:100], ell[:100] - good[:100]]), p)
    assert few.status == "inconclusive"


SNIPPET = """
import json
from steadystein._accel import backend_name
from steadystein.mphn import OUSpec, OuConfig, coxian2, ou_simulate
spec = OUSpec(coxian2(), 15.0, 15, 1.0)
out = {"backend": backend_name()}
for mode in ("constant", "state_dependent"):
    r = ou_simulate(spec, mode, OuConfig(dt=0.01, steps=3000, burn_in=5.0, replications=2, seed=11))
    out[mode] = r.abs_total.value
print(json.dumps(out))
"""


def _run_backend(disable: bool):
    env = dict(os.environ)
    env.pop("STEADYSTEIN_DISABLE_NUMBA", None)
    if disable:
        env["STEADYSTEIN_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", SNIPPET], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout)


def test_interpreted_and_compiled_backends_agree():
    fast, slow = _run_backend(False), _run_backend(True)
    assert fast["backend"] == "numba" and slow["backend"] == "numpy"
    for mode in ("constant", "state_dependent"):
        assert fast[mode] == pytest.approx(slow[mode], rel=1e-9)
