import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import A, V0
from qrefl.asymptotics import (
    CONSTANTS,
    DEFAULT_MARGIN,
    SystemParameters,
    asymptotic_reflection,
    fit_asymptote_line,
    fit_line,
    loglog_transform,
    low_energy_line,
    validity_window,
)
from qrefl.errors import (
    DomainError,
    InsufficientDataError,
    NoPowerLawError,
    UnsupportedExponentError,
    UnsupportedRegimeError,
)
from qrefl.units import energy_from_wavenumber


@pytest.fixture(scope="module")
def system(ctx, quartz):
    return SystemParameters.from_potential(ctx, quartz, A, V0)


def test_constants():
    assert (CONSTANTS.B3, CONSTANTS.B4, CONSTANTS.G4) == (2.24050, 1.69443, 0.35)
    with pytest.raises(Exception):
        CONSTANTS.B3 = 1.0
    assert DEFAULT_MARGIN == 3.0


def test_asymptotic_values():
    assert asymptotic_reflection(3, 33.95, 1.0) == pytest.approx(4.995386019e-07, rel=1e-9)
    assert asymptotic_reflection(4, 1.0, 1.0) == pytest.approx(math.exp(-2 * 1.69443), rel=1e-15)
    assert 1 - asymptotic_reflection(3, 1e-12, 1.0) < 1e-3


def test_asymptotic_errors():
    with pytest.raises(UnsupportedExponentError):
        asymptotic_reflection(5, 1.0, 1.0)
    with pytest.raises(DomainError):
        asymptotic_reflection(3, 0.0, 1.0)


def test_asymptotic_monotone():
    k = np.geomspace(1e-3, 1e2, 50)
    assert np.all(np.diff(asymptotic_reflection(3, k, 300.0)) < 0)
    b = np.geomspace(1, 1e3, 50)
    assert np.all(np.diff([asymptotic_reflection(4, 0.1, x) for x in b]) < 0)


def test_system_parameters(system):
    assert system.rho == pytest.approx(1.84540784335, rel=1e-10)
    assert system.beta3 == pytest.approx(340.553010828, rel=1e-10)


def test_n4_window_nearly_empty(system):
    w = validity_window(4, system, 3.0)
    assert w.lower == pytest.approx(1.05, rel=1e-12)
    assert w.upper == pytest.approx(system.rho**2 / 3, rel=1e-12)
    assert w.upper == pytest.approx(1.135, abs=1e-3)
    assert not w.empty


def test_n3_window(system, ctx):
    w = validity_window(3, system, 1.0)
    assert w.lower == pytest.approx(system.rho**3, rel=1e-12)
    assert w.upper == pytest.approx((system.beta3 / A) ** 1.5, rel=1e-12)
    e_lo, _ = w.energy_bounds(ctx)
    assert 1e-4 <= e_lo < 1e-3  # order 1e-4 meV
    assert w.quoted_lower_energy == pytest.approx(7e-6 * V0, rel=1e-12)
    # upper edge is strict
    ka_hi = w.ka_bounds(A)[1]
    assert not w.contains_ka(ka_hi, A)


def test_windows_do_not_overlap(system):
    w3, w4 = validity_window(3, system), validity_window(4, system)
    assert w3.lower / system.beta3 > w4.upper / system.beta4


def test_large_rho_n4_window_nonempty():
    big = SystemParameters(rho=1e3, beta3=1e3, beta4=1.0, a=1.0)
    for m in (1, 3, 100):
        assert not validity_window(4, big, m).empty


def test_window_errors(system):
    with pytest.raises(DomainError):
        validity_window(3, system, 0.5)
    with pytest.raises(UnsupportedExponentError):
        validity_window(6, system)


def test_loglog_transform():
    pts = loglog_transform([1.0, 2.0, 3.0, 4.0, 5.0], [1 / math.e, math.exp(-math.e), 0.0, 1.0, 0.5])
    assert pts.x[0] == 0.0
    assert pts.y[0] == pytest.approx(0.0, abs=1e-15)
    assert pts.y[1] == pytest.approx(1.0, rel=1e-15)
    assert [i for i, _ in pts.rejected] == [2, 3]
    assert list(pts.index) == [0, 1, 4]


def test_loglog_error_propagation():
    pts = loglog_transform([1.0], [0.1], [0.001])
    assert pts.sigma_y[0] == pytest.approx(0.001 / (0.1 * math.log(10)), rel=1e-12)


def test_synthetic_round_trip():
    beta, n = 341.0, 3
    ka = np.geomspace(0.1, 10, 25)
    R = asymptotic_reflection(n, ka / A, beta)
    lf = fit_asymptote_line(loglog_transform(ka, R), A)
    assert lf.slope == pytest.approx(1 / 3, abs=1e-6)
    assert lf.n_nearest == 3 and lf.physical
    assert lf.beta_inferred == pytest.approx(beta, rel=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([3, 4]), st.floats(min_value=20.0, max_value=2000.0))
def test_exact_inverse(n, beta):
    ka = np.geomspace(0.05, 5, 12)
    R = asymptotic_reflection(n, ka / A, beta)
    lf = fit_asymptote_line(loglog_transform(ka, R), A)
    assert lf.slope == pytest.approx(1 - 2 / n, abs=1e-9)
    assert lf.beta_inferred == pytest.approx(beta, rel=1e-9)


def test_degenerate_flat_data():
    pts = loglog_transform([0.1, 0.2, 0.3, 0.4], [0.5] * 4)
    lf = fit_asymptote_line(pts, A)
    assert lf.slope == pytest.approx(0.0, abs=1e-12)
    assert lf.n_inferred == pytest.approx(2.0, abs=1e-12)
    assert not lf.physical and lf.beta_inferred is None


def test_fit_errors():
    with pytest.raises(InsufficientDataError):
        fit_line([1.0, 2.0], [1.0, 2.0])
    pts = loglog_transform([0.1, 0.2, 0.4, 0.8], np.exp(-np.array([0.1, 0.2, 0.4, 0.8]) ** 2))
    with pytest.raises(NoPowerLawError):
        fit_asymptote_line(pts, A)


def test_window_filtering(system):
    w = validity_window(3, system)
    lo, hi = w.ka_bounds(A)
    ka = np.concatenate([[lo / 10], np.geomspace(lo * 1.01, hi * 0.99, 6), [hi * 10]])
    R = asymptotic_reflection(3, ka / A, system.beta3)
    R[0] = 0.9  # far off the line, must be excluded by the window
    lf = fit_asymptote_line(loglog_transform(ka, R), A, w)
    assert lf.n_points == 6
    assert lf.slope == pytest.approx(1 / 3, abs=1e-9)


def test_weighted_option():
    ka = np.geomspace(0.1, 10, 10)
    R = asymptotic_reflection(3, ka / A, 341.0)
    lf = fit_asymptote_line(loglog_transform(ka, R, 0.01 * R), A, weighted=True)
    assert lf.slope == pytest.approx(1 / 3, abs=1e-9)


def test_low_energy_line():
    lf = low_energy_line(1.85, 341.0, 2.65)
    assert lf.slope == 1.0
    assert lf.intercept == pytest.approx(5.732791575, rel=1e-9)
    with pytest.raises(UnsupportedRegimeError):
        low_energy_line(3.0, 341.0, 2.65)


def test_c_n_extraction(ctx):
    ka = np.geomspace(0.1, 10, 10)
    lf = fit_asymptote_line(loglog_transform(ka, asymptotic_reflection(3, ka / A, 340.553010828)), A)
    assert lf.c_n(ctx) == pytest.approx(236.0, rel=1e-8)


def _window_fit(potential, system, ctx):
    from qrefl.solver import ScatteringProblem, solve_reflection

    w = validity_window(3, system)
    lo, hi = w.k_bounds()
    ks = np.geomspace(lo, hi, 22)[1:-1]
    R = np.array([solve_reflection(ScatteringProblem(potential, float(k), ctx)).R for k in ks])
    return fit_asymptote_line(loglog_transform(ks * A, R), A, w)


def test_pure_vdw_window_slope(system, ctx, quartz):
    from qrefl.potential import HomogeneousPotential

    lf = _window_fit(HomogeneousPotential(3, quartz.c3), system, ctx)
    assert abs(lf.slope - 1 / 3) <= 0.03
    assert lf.c_n(ctx) == pytest.approx(quartz.c3, rel=0.15)


@pytest.mark.xfail(strict=True, reason="retardation inside the n = 3 window steepens the slope to ~0.379")
def test_casimir_window_slope(system, ctx, quartz):
    lf = _window_fit(quartz, system, ctx)
    assert abs(lf.slope - 1 / 3) <= 0.03
    assert lf.c_n(ctx) == pytest.approx(quartz.c3, rel=0.15)
