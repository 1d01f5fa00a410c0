import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from steadystein.birth_death import stationary
from steadystein.bounds import (density_sup, erlang_a_grid, erlang_c_grid, idle_identity_gap,
                                moment_bounds_erlang_a, moment_bounds_erlang_c,
                                scaled_first_moment_near_critical)
from steadystein.errors import PreconditionError
from steadystein.models import CONSTANT, STATE_DEPENDENT, QueueParams


@given(n=st.integers(2, 400), frac=st.floats(0.0, 0.999))
def test_idle_identity_and_moment_bounds(n, frac):
    p = QueueParams.from_load(1.0 + frac * (n - 1), n)
    lat = stationary(p)
    assert idle_identity_gap(lat) < 1e-10
    for check in moment_bounds_erlang_c(lat):
        assert check.ok, check.row()


@given(n=st.integers(2, 300), rho=st.floats(0.4, 1.6), alpha=st.sampled_from([0.5, 1.0, 2.0]))
def test_erlang_a_moment_bounds(n, rho, alpha):
    lat = stationary(QueueParams.from_load(rho * n, n, alpha=alpha))
    for check in moment_bounds_erlang_a(lat):
        assert check.ok, check.row()


def test_model_mismatch_is_rejected():
    with pytest.raises(PreconditionError):
        moment_bounds_erlang_a(stationary(QueueParams.from_load(3.0, 5)))
    with pytest.raises(PreconditionError):
        idle_identity_gap(stationary(QueueParams.from_load(3.0, 5, alpha=1.0)))


def test_grid_sizes():
    assert len(erlang_c_grid()) >= 200
    assert len(erlang_a_grid()) >= 100
    assert all(1.0 <= p.offered_load < p.n for p in erlang_c_grid())


@given(n=st.integers(2, 1000), frac=st.floats(0.0, 0.999))
def test_density_peaks(n, frac):
    p = QueueParams.from_load(1.0 + frac * (n - 1), n)
    assert density_sup(p, CONSTANT) <= math.sqrt(2 / math.pi) + 1e-9
    assert density_sup(p, STATE_DEPENDENT) <= 4.0 + 1e-9


def test_first_moment_blows_up_like_inverse_gap():
    assert scaled_first_moment_near_critical(1e-3) == pytest.approx(1.0, rel=1e-2)
    assert scaled_first_moment_near_critical(1e-4) == pytest.approx(1.0, rel=1e-3)
