import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from steadystein.birth_death import cdf, stationary
from steadystein.diffusion1d import build_density
from steadystein.metrics import (kolmogorov, moment_error, pmf_sup_error, tail_ratio_error,
                                 wasserstein1, wasserstein1_discrete)
from steadystein.models import CONSTANT, STATE_DEPENDENT, QueueParams


def test_discrete_transport_matches_linear_program(oracles):
    t = oracles["transport"]
    assert wasserstein1_discrete(t["xa"], t["pa"], t["xb"], t["pb"]) == pytest.approx(t["cost"], abs=1e-12)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.lists(st.floats(-5, 5), min_size=1, max_size=8))
def test_discrete_transport_agrees_with_scipy(xa, xb):
    pa = np.full(len(xa), 1.0 / len(xa))
    pb = np.full(len(xb), 1.0 / len(xb))
    ref = stats.wasserstein_distance(xa, xb)
    assert wasserstein1_discrete(xa, pa, xb, pb) == pytest.approx(ref, abs=1e-12)


def _brute_w1(lat, curve):
    lo, hi = curve.quantile_window(1e-16)
    x = lat.points()
    lo, hi = min(lo, x[0]), max(hi, x[-1])
    edges = np.unique(np.concatenate([[lo, hi], x[(x > lo) & (x < hi)]]))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        step = float(cdf(lat, a))
        total += integrate.quad(lambda y: abs(step - float(curve.cdf(y))), a, b,
                                epsabs=1e-13, limit=200)[0]
    return total


@pytest.mark.parametrize("load,n,mode", [(4.0, 5, CONSTANT), (4.0, 5, STATE_DEPENDENT),
                                         (46.59, 50, CONSTANT)])
def test_wasserstein_matches_direct_integration(load, n, mode):
    p = QueueParams.from_load(load, n)
    lat, curve = stationary(p), build_density(p, mode)
    assert wasserstein1(lat, curve) == pytest.approx(_brute_w1(lat, curve), rel=1e-7, abs=1e-12)


def test_kolmogorov_matches_oracle(oracles):
    p = QueueParams.from_load(4.0, 5)
    lat = stationary(p)
    for mode, value in oracles["kolmogorov_n5_R4"].items():
        assert kolmogorov(lat, build_density(p, mode)) == pytest.approx(value, rel=1e-8)


def test_tail_ratio_matches_oracle(oracles):
    md = oracles["md_n100"]
    p = QueueParams.from_load(60.0, 100)
    lat = stationary(p)
    for mode in (CONSTANT, STATE_DEPENDENT):
        assert tail_ratio_error(lat, build_density(p, mode), 2.4) == pytest.approx(md[mode], rel=1e-8)


@given(load=st.floats(1.0, 200.0), frac=st.floats(1.01, 2.0), mode=st.sampled_from([CONSTANT, STATE_DEPENDENT]))
def test_metric_orderings(load, frac, mode):
    p = QueueParams.from_load(load, int(load * frac) + 1)
    lat, curve = stationary(p), build_density(p, mode)
    w = wasserstein1(lat, curve)
    # x is 1-Lipschitz so the first-moment gap never exceeds W1
    assert moment_error(lat, curve, 1) <= w + 1e-10
    dk = kolmogorov(lat, curve)
    assert 0.0 <= dk <= 1.0
    # a single cell probability differs by at most twice the CDF gap
    assert pmf_sup_error(lat, curve) <= 2.0 * dk + 1e-12
