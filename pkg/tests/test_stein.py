import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from steadystein.birth_death import pmf_at, stationary
from steadystein.diffusion1d import build_density
from steadystein.errors import PreconditionError
from steadystein.models import QueueParams
from steadystein.stein import (abs_shift, bar_residual, check_gradient_bounds, check_mgf_bound,
                               indicator, lipschitz_family, mgf_gamma_threshold, monomial, ramp,
                               solve_poisson, tent, tilted_tail_sum_direct)
from steadystein.stein import _tilted_tail_sum


@given(load=st.floats(1.0, 300.0), frac=st.floats(1.01, 2.0), alpha=st.sampled_from([0.0, 0.5, 2.0]),
       m=st.integers(1, 3))
def test_bar_identity_on_lattice(load, frac, alpha, m):
    p = QueueParams.from_load(load, int(load * frac) + 1, alpha=alpha)
    lat = stationary(p, 1e-40)
    scale = max(1.0, lat.expect(lambda x: np.abs(x) ** m))
    assert abs(bar_residual(lat, m)) < 1e-8 * scale


def test_bar_callable_and_expanded_agree():
    lat = stationary(QueueParams.from_load(40.0, 45), 1e-40)
    assert bar_residual(lat, lambda x: x ** 2) == pytest.approx(bar_residual(lat, 2), abs=1e-10)


def test_test_function_shapes():
    x = np.array([-3.0, -1.0, 0.0, 1.0, 3.0])
    assert np.allclose(abs_shift(1.0)(x), np.abs(x - 1.0))
    assert np.allclose(ramp(2.0)(x), np.clip(x, -2, 2))
    assert np.allclose(tent(2.0)(x), np.maximum(0.0, 2.0 - np.abs(x)))
    assert np.allclose(indicator(0.0)(x), (x <= 0).astype(float))
    assert np.allclose(monomial(3)(x), x ** 3)


@given(load=st.floats(1.0, 300.0), frac=st.floats(1.01, 2.0), which=st.integers(0, 6),
       x=st.floats(-4.0, 4.0))
def test_two_integral_forms_of_fprime_agree(load, frac, which, x):
    p = QueueParams.from_load(load, int(load * frac) + 1)
    sol = solve_poisson(build_density(p), lipschitz_family()[which])
    left, right = float(sol.fprime_left_form(x)), float(sol.fprime_right_form(x))
    assert left == pytest.approx(right, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("load,n,alpha", [(4.0, 5, 0.0), (90.0, 100, 0.0), (100.0, 100, 1.0)])
def test_second_derivative_continuous_at_kink_for_lipschitz_h(load, n, alpha):
    p = QueueParams.from_load(load, n, alpha=alpha)
    curve = build_density(p)
    kink = -p.zeta
    for h in lipschitz_family():
        if any(abs(k - kink) < 1e-6 for k in h.kinks):
            continue
        sol = solve_poisson(curve, h)
        eps = 1e-7
        lo, hi = float(sol.fsecond(kink - eps)), float(sol.fsecond(kink + eps))
        assert lo == pytest.approx(hi, abs=1e-4 * max(1.0, abs(lo)))


def test_second_derivative_jumps_where_indicator_does():
    p = QueueParams.from_load(4.0, 5)
    sol = solve_poisson(build_density(p), indicator(0.0))
    eps = 1e-9
    jump = float(sol.fsecond(eps) - sol.fsecond(-eps))
    # (a/2) f'' = E h - h - b f', so f'' jumps by 2/a times the unit drop of h
    assert jump == pytest.approx(2.0 / 2.0, rel=1e-5)


@pytest.mark.parametrize("mode", ["constant", "state_dependent"])
def test_poisson_residual_is_small(mode):
    p = QueueParams.from_load(46.59, 50)
    curve = build_density(p, mode)
    x = np.linspace(-3.0, 3.0, 61) + 1e-3
    for h in lipschitz_family():
        assert np.max(solve_poisson(curve, h).ode_residual(x)) < 1e-7


@pytest.mark.parametrize("suite,params", [
    ("wasserstein_C", QueueParams.from_load(4.0, 5)),
    ("kolmogorov_C", QueueParams.from_load(80.0, 100)),
    ("kolmogorov_A", QueueParams.from_load(50.0, 50, alpha=0.5)),
])
def test_gradient_bounds_hold(suite, params):
    report = check_gradient_bounds(params, suite, count=80)
    assert report.passed, report.max_ratio
    assert report.residual < 1e-7


def test_gradient_suite_rejects_wrong_model():
    with pytest.raises(PreconditionError):
        check_gradient_bounds(QueueParams.from_load(4.0, 5, alpha=1.0), "wasserstein_C")


@given(n=st.integers(10, 500), rho=st.floats(0.2, 0.99), bump=st.floats(1.01, 3.0))
def test_mgf_closed_form_matches_summation(n, rho, bump):
    p = QueueParams.from_load(rho * n, n)
    lat = stationary(p, 1e-40)
    theta = 0.5 * (2 * abs(p.zeta) / (2 + p.delta * abs(p.zeta)))
    # extend the explicit sum through the exact geometric tail until the terms vanish
    extra, k = 0.0, lat.k_max + 1
    while True:
        term = pmf_at(lat, k) * math.exp(theta * float(p.lattice_point(k)))
        extra += term
        if term < 1e-20 * (extra + 1e-300) or term == 0.0:
            break
        k += 1
    direct = tilted_tail_sum_direct(lat, theta) + extra
    assert _tilted_tail_sum(lat, theta) == pytest.approx(direct, rel=1e-9)
    report = check_mgf_bound(lat, bump * mgf_gamma_threshold(p))
    assert math.isfinite(report.constant_tilted) and report.constant_tilted >= 0
