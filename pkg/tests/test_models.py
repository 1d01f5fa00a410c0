import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from steadystein.errors import PreconditionError, StabilityError
from steadystein.models import (CONSTANT, STATE_DEPENDENT, QueueParams, affine_pieces, diff_coeff,
                                drift, fluid_equilibrium, lattice_diff_coeff, lattice_drift)


def test_fluid_equilibrium_regimes():
    assert fluid_equilibrium(4.0, 1.0, 5, 0.0) == 4.0
    assert fluid_equilibrium(12.0, 1.0, 10, 0.5) == pytest.approx(14.0)
    with pytest.raises(StabilityError):
        fluid_equilibrium(5.0, 1.0, 5, 0.0)


def test_invalid_inputs():
    with pytest.raises(PreconditionError):
        QueueParams(-1.0, 1.0, 5)
    with pytest.raises(PreconditionError):
        QueueParams(1.0, 1.0, 0)
    with pytest.raises(PreconditionError):
        QueueParams(1.0, 1.0, 3, alpha=-0.1)
    with pytest.raises(PreconditionError):
        diff_coeff(QueueParams.from_load(3.0, 5), 0.0, "bogus")


def test_zeta_matches_definition():
    p = QueueParams.from_load(4.0, 5)
    assert p.delta == pytest.approx(0.5)
    assert p.zeta == pytest.approx(0.5 * (4.0 - 5))
    # x <= -zeta exactly at counts up to n
    assert p.lattice_point(5) == pytest.approx(-p.zeta)


@given(load=st.floats(0.5, 400.0), frac=st.floats(1.05, 3.0), alpha=st.floats(0.0, 3.0),
       k=st.integers(0, 2000))
def test_lattice_drift_matches_diffusion_drift(load, frac, alpha, k):
    n = int(load * frac) + 1
    p = QueueParams.from_load(load, n, alpha=alpha)
    x = p.lattice_point(k)
    assert lattice_drift(p, k) == pytest.approx(float(drift(p, x)), rel=1e-9, abs=1e-9)


@given(load=st.floats(1.0, 400.0), frac=st.floats(1.05, 3.0), k=st.integers(1, 2000))
def test_state_dependent_coefficient_is_chain_variance(load, frac, k):
    p = QueueParams.from_load(load, int(load * frac) + 1)
    x = p.lattice_point(k)
    assert lattice_diff_coeff(p, k) == pytest.approx(float(diff_coeff(p, x, STATE_DEPENDENT)),
                                                     rel=1e-12)


@given(load=st.floats(1.0, 200.0), frac=st.floats(1.05, 2.0), alpha=st.floats(0.0, 2.0),
       x=st.floats(-30.0, 30.0))
def test_affine_pieces_reproduce_coefficients(load, frac, alpha, x):
    p = QueueParams.from_load(load, int(load * frac) + 1, alpha=alpha)
    for mode in (CONSTANT, STATE_DEPENDENT):
        if mode == STATE_DEPENDENT and not p.is_erlang_c:
            continue
        for lo, hi, b0, b1, a0, a1 in affine_pieces(p, mode):
            if lo <= x <= hi:
                assert b0 + b1 * x == pytest.approx(float(drift(p, x)), abs=1e-9)
                assert a0 + a1 * x == pytest.approx(float(diff_coeff(p, x, mode)), abs=1e-9)


def test_constant_coefficient_is_twice_service_rate():
    p = QueueParams(3.0, 1.5, 4)
    assert np.all(diff_coeff(p, np.linspace(-5, 5, 11)) == 3.0)
    x = -p.zeta - 1.0
    assert math.isclose(float(drift(p, x)), -1.5 * x, rel_tol=1e-12)
    assert math.isclose(float(drift(p, -p.zeta + 1.0)), 1.5 * p.zeta, rel_tol=1e-12)
