import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from steadystein.birth_death import (cdf, pmf_at, scaled_moment, stationary, stationary_for_moment,
                                     tail_moment_bound, tail_prob)
from steadystein.errors import TruncationError
from steadystein.models import QueueParams, departure_rate

loads = st.floats(0.5, 300.0)


def _params(load, frac, alpha):
    return QueueParams.from_load(load, int(load * frac) + 1, alpha=alpha)


@given(load=loads, frac=st.floats(0.3, 2.0), alpha=st.one_of(st.just(0.0), st.floats(0.05, 2.0)))
def test_detailed_balance_and_mass(load, frac, alpha):
    if alpha == 0.0 and int(load * frac) + 1 <= load:
        return
    p = _params(load, frac, alpha)
    lat = stationary(p)
    k = lat.counts[:-1]
    lhs = lat.probs[:-1] * p.lam
    rhs = lat.probs[1:] * departure_rate(p, k + 1)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-300)
    assert lat.probs.sum() + lat.tail_mass_bound == pytest.approx(1.0, abs=1e-12)
    assert lat.tail_mass_bound < 1e-14


def erlang_c_wait_probability(load, n):
    # textbook closed form, written independently of the solver
    top = load ** n / math.factorial(n) * n / (n - load)
    return top / (sum(load ** k / math.factorial(k) for k in range(n)) + top)


@pytest.mark.parametrize("load,n", [(3.0, 5), (4.0, 5), (8.5, 10), (18.0, 20)])
def test_probability_of_waiting_matches_closed_form(load, n):
    lat = stationary(QueueParams.from_load(load, n))
    assert float(lat.survival_count(n)) == pytest.approx(erlang_c_wait_probability(load, n), rel=1e-11)


def test_geometric_tail_is_exact_for_erlang_c():
    lat = stationary(QueueParams.from_load(4.0, 5), 1e-20)
    assert lat.tail_ratio == pytest.approx(0.8)
    k = lat.k_max + 7
    assert pmf_at(lat, k) == pytest.approx(lat.probs[-1] * 0.8 ** 7)


def test_truncation_refuses_uncertified_moment():
    lat = stationary(QueueParams.from_load(499.9, 500), 1e-6)
    with pytest.raises(TruncationError):
        scaled_moment(lat, 10)
    _, value = stationary_for_moment(QueueParams.from_load(499.9, 500), 2)
    assert value == pytest.approx(9.94e4, rel=5e-3)


def test_tail_moment_bound_dominates_actual_tail():
    p = QueueParams.from_load(40.0, 45)
    coarse = stationary(p, 1e-6)
    fine = stationary(p, 1e-40)
    x = fine.points()
    tail = x[coarse.k_max + 1:]
    actual = float(np.dot(fine.probs[coarse.k_max + 1:], np.abs(tail) ** 3))
    assert actual <= tail_moment_bound(coarse, 3) + 1e-300
    assert actual > 0


def test_moments_match_oracle(oracles):
    for row in oracles["moment_errors"]:
        p = QueueParams.from_load(row["R"], row["n"])
        _, value = stationary_for_moment(p, row["m"])
        assert value == pytest.approx(row["exact"], rel=1e-10)
    for row in oracles["tab1"]:
        p = QueueParams.from_load(row["R"], row["n"])
        _, m1 = stationary_for_moment(p, 1)
        assert row["R"] + math.sqrt(row["R"]) * m1 == pytest.approx(row["mean_exact"], rel=1e-11)


@given(load=st.floats(1.0, 100.0), frac=st.floats(1.05, 2.0), k=st.integers(0, 400))
def test_tail_and_cdf_are_complementary(load, frac, k):
    lat = stationary(_params(load, frac, 0.0))
    # halfway between counts k and k + 1 the two step functions partition the mass
    z = float(lat.params.lattice_point(k + 0.5))
    assert tail_prob(lat, z) + float(cdf(lat, z)) == pytest.approx(1.0, abs=1e-12)
    assert tail_prob(lat, z) == pytest.approx(float(lat.survival_count(k + 1)), abs=1e-15)
