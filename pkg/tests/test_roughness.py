import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import owens_t

from qrefl.errors import DomainError, OverflowGuardError
from qrefl.roughness import (
    RoughnessModel,
    dephasing_factor,
    rough_from_smooth,
    roughness_factor,
    shadowing_fraction,
    shadowing_fraction_erf,
    smooth_from_rough,
)

QUARTZ = RoughnessModel(sigma=10.0, L=750.0, sigma_uncertainty=2.0)


def owen_ratio(a, theta_i):
    # ∫₀^θ exp(-(a tan t)²/2) dt = 2π e^{a²/2} T(a, tan θ); T(a, ∞) = erfc(a/√2)/4
    return owens_t(a, math.tan(math.pi / 2 - theta_i)) / (0.25 * math.erfc(a / math.sqrt(2)))


def test_dephasing_values():
    assert dephasing_factor(QUARTZ, 0.0) == 1.0
    assert dephasing_factor(QUARTZ, 0.0998) == pytest.approx(0.018610748292, rel=1e-10)
    assert dephasing_factor(QUARTZ, 4.49e-3) == pytest.approx(0.991968387147, rel=1e-10)
    with pytest.raises(DomainError):
        dephasing_factor(QUARTZ, -1.0)


def test_shadowing_values():
    assert shadowing_fraction(QUARTZ, 0.0) == pytest.approx(1.0, abs=1e-14)
    # mpmath quadrature oracle
    assert shadowing_fraction(QUARTZ, math.radians(89.73)) == pytest.approx(0.27628232287794147, rel=1e-10)
    assert shadowing_fraction(QUARTZ, math.radians(89.9)) == pytest.approx(0.10416385095690676, rel=1e-10)
    assert shadowing_fraction(QUARTZ, math.radians(84.0)) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("a", [5.0, 10.0, 20.0])
@pytest.mark.parametrize("deg", [30.0, 80.0, 87.0, 89.0])
def test_shadowing_owens_t(a, deg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = RoughnessModel(1.0, a)
    assert shadowing_fraction(m, math.radians(deg)) == pytest.approx(owen_ratio(a, math.radians(deg)), rel=1e-8)


def test_erf_closed_form_accuracy():
    # erf form is accurate to O((σ/L)²)
    for a in (50.0, 75.0, 200.0):
        m = RoughnessModel(1.0, a)
        for deg in (89.0, 89.5, 89.73, 89.9):
            th = math.radians(deg)
            exact = shadowing_fraction(m, th)
            assert abs(shadowing_fraction_erf(m, th) - exact) / exact < 1.5 / a**2


def test_shadowing_domain():
    with pytest.raises(DomainError):
        shadowing_fraction(QUARTZ, math.pi / 2)
    with pytest.raises(DomainError):
        shadowing_fraction(QUARTZ, -0.1)


def test_composition_at_84():
    k = 0.0998
    f = roughness_factor(QUARTZ, k, math.radians(84.0))
    assert f == pytest.approx(0.018610748292 * 1.0, rel=1e-6)
    assert rough_from_smooth(QUARTZ, k, math.radians(84.0), 0.0) == 0.0


def test_smooth_limit():
    m = RoughnessModel(1e-6, 1e3)
    assert rough_from_smooth(m, 0.1, math.radians(89.0), 0.3) == pytest.approx(0.3, rel=1e-9)


def test_rough_from_smooth_bounds():
    with pytest.raises(DomainError):
        rough_from_smooth(QUARTZ, 0.01, 1.0, 1.5)


def test_round_trip():
    th = math.radians(88.0)
    for R in (1e-8, 1e-3, 0.4):
        r = rough_from_smooth(QUARTZ, 0.03, th, R)
        assert smooth_from_rough(QUARTZ, 0.03, th, r).value == pytest.approx(R, rel=1e-12)


def test_zero_band():
    m = RoughnessModel(10.0, 750.0, 0.0)
    v = smooth_from_rough(m, 0.05, math.radians(87.0), 1e-4, 0.0)
    assert v.err_minus == 0.0 and v.err_plus == 0.0


def test_sigma_band_at_high_k():
    k = 0.0998
    v = smooth_from_rough(QUARTZ, k, math.radians(84.0), 1e-7, 0.0)
    # correction envelope for σ ∈ [8, 12]: factors e^{+1.434}, e^{-1.753}
    assert math.log((v.value + v.err_plus) / v.value) == pytest.approx(1.7529670400, rel=1e-6)
    assert math.log(v.value / (v.value - v.err_minus)) == pytest.approx(1.43424576, rel=1e-6)


def test_band_combines_in_quadrature():
    th = math.radians(87.0)
    k = 0.05
    only_stat = smooth_from_rough(RoughnessModel(10.0, 750.0, 0.0), k, th, 1e-4, 1e-5)
    only_sigma = smooth_from_rough(QUARTZ, k, th, 1e-4, 0.0)
    both = smooth_from_rough(QUARTZ, k, th, 1e-4, 1e-5)
    assert both.err_plus == pytest.approx(math.hypot(only_stat.err_plus, only_sigma.err_plus), rel=1e-12)


def test_overflow_guard():
    with pytest.raises(OverflowGuardError):
        smooth_from_rough(RoughnessModel(100.0, 1e4), 1.0, 0.1, 1e-3)


def test_model_validation():
    with pytest.raises(DomainError):
        RoughnessModel(0.0, 10.0)
    with pytest.raises(DomainError):
        RoughnessModel(1.0, 10.0, -1.0)
    with pytest.warns(UserWarning):
        RoughnessModel(10.0, 50.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.0, max_value=0.3), st.floats(min_value=0.0, max_value=1.5))
def test_factor_bounds(k, th):
    f = roughness_factor(QUARTZ, k, th)
    assert 0.0 < f <= 1.0


def test_monotonicity():
    k = np.linspace(0, 0.2, 30)
    assert np.all(np.diff(dephasing_factor(QUARTZ, k)) < 0)
    s = [dephasing_factor(RoughnessModel(x, 750.0), 0.05) for x in (5.0, 8.0, 12.0)]
    assert s[0] > s[1] > s[2]
    th = np.radians(np.linspace(88.0, 89.95, 25))
    assert np.all(np.diff(shadowing_fraction(QUARTZ, th)) < 0)
