import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import C4, L_TRANSITION
from qrefl.errors import DomainError, NoSolutionError, UnsupportedExponentError
from qrefl.potential import (
    ALPHA_QUARTZ,
    CasimirVdWPotential,
    HomogeneousPotential,
    SurfaceMaterial,
    c4_from_material,
    evaluate,
    reflection_distance_r0,
    rho,
    system_rho,
)
from qrefl.units import HELIUM3, ParticleSpecies, UnitContext, beta_n


def test_value_at_30_angstrom(quartz):
    assert evaluate(quartz, 30.0) == pytest.approx(-23600.0 / (30.0**3 * 130.0), rel=1e-14)
    assert evaluate(quartz, 30.0) == pytest.approx(-6.7e-3, rel=0.01)


def test_homogeneous_value():
    assert evaluate(HomogeneousPotential(3, 236.0), 10.0) == pytest.approx(-0.236, rel=1e-14)


def test_far_field_vanishes(quartz):
    v = evaluate(quartz, 1e9)
    assert v < 0 and abs(v) < 1e-30


def test_nonpositive_r_rejected(quartz):
    with pytest.raises(DomainError):
        evaluate(quartz, 0.0)
    with pytest.raises(DomainError):
        evaluate(HomogeneousPotential(4, 1.0), -1.0)


def test_c3_from_pair(quartz):
    assert quartz.c3 == pytest.approx(236.0, rel=1e-12)


def test_limits(quartz):
    r = np.array([1e-3, 0.1, 1.0]) * L_TRANSITION / 100
    assert np.all(np.abs(-evaluate(quartz, r) * r**3 / quartz.c3 - 1) < 0.01)
    r = np.array([100.0, 1e3, 1e4]) * L_TRANSITION
    assert np.all(np.abs(-evaluate(quartz, r) * r**4 / quartz.c4 - 1) < 0.01)


@given(st.floats(min_value=1e-4, max_value=1e8))
def test_algebraic_identity(r):
    p = CasimirVdWPotential(C4, L_TRANSITION)
    assert -p(r) * r**3 * (r + p.l) == pytest.approx(C4, rel=1e-13)


def test_negative_and_increasing(quartz):
    r = np.geomspace(1e-3, 1e7, 500)
    V = evaluate(quartz, r)
    assert np.all(V < 0)
    assert np.all(np.diff(V) > 0)


def test_derivatives_against_finite_differences(quartz):
    for p in (quartz, HomogeneousPotential(3, 236.0), HomogeneousPotential(4, 23600.0)):
        for r in (1.0, 30.0, 500.0):
            V, V1, V2 = p.derivatives(r)
            h = 1e-4 * r
            assert V1 == pytest.approx((p(r + h) - p(r - h)) / (2 * h), rel=1e-7)
            assert V2 == pytest.approx((p(r + h) - 2 * p(r) + p(r - h)) / h**2, rel=1e-4)


def test_invalid_models():
    with pytest.raises(DomainError):
        CasimirVdWPotential(-1.0, 100.0)
    with pytest.raises(DomainError):
        CasimirVdWPotential(1.0, 0.0)
    with pytest.raises(UnsupportedExponentError):
        HomogeneousPotential(2, 1.0)
    with pytest.raises(DomainError):
        SurfaceMaterial(epsilon=1.0)
    with pytest.raises(DomainError):
        SurfaceMaterial(phi=1.5)


def test_c4_from_quartz():
    c4 = c4_from_material(HELIUM3, ALPHA_QUARTZ)
    # arithmetic oracle with the rounded polarizability volume 0.2067 Å³
    species = ParticleSpecies(polarizability_volume=0.2067)
    assert c4_from_material(species, ALPHA_QUARTZ) == pytest.approx(23608.5148710, rel=1e-9)
    assert round(c4 / 1000, 1) == 23.6


def test_c4_limits():
    assert c4_from_material(ParticleSpecies(polarizability_volume=0.0), ALPHA_QUARTZ) == 0.0
    ctx = UnitContext()
    conductor = SurfaceMaterial(epsilon=1e12, phi=1.0)
    expect = 3 * ctx.hbar_c * HELIUM3.polarizability_volume / (8 * math.pi)
    assert c4_from_material(HELIUM3, conductor) == pytest.approx(expect, rel=1e-11)


def test_phi_back_solve():
    # φ that reproduces exactly 23.6 eV Å⁴ with α' = 0.2067 Å³
    ratio = 23600.0 / c4_from_material(ParticleSpecies(polarizability_volume=0.2067), SurfaceMaterial(phi=1.0))
    assert ratio == pytest.approx(0.762, abs=5e-4)


def test_rho(ctx, quartz):
    r = rho(ctx, 236.0, 23600.0)
    assert r == pytest.approx(1.84540784335, rel=1e-10)
    assert r == pytest.approx(beta_n(ctx, 236.0, 3) / beta_n(ctx, 23600.0, 4), rel=1e-12)
    assert system_rho(ctx, quartz) == pytest.approx(r, rel=1e-14)
    heavy = UnitContext(ParticleSpecies(mass=2 * HELIUM3.mass))
    assert rho(heavy, 236.0, 23600.0) == pytest.approx(math.sqrt(2) * r, rel=1e-13)


def test_r0_near_30_angstrom(quartz):
    E = 6.9e-3
    # quartic E r⁴ + E l r³ - C4 = 0, positive real root
    roots = np.roots([E, E * L_TRANSITION, 0, 0, -C4])
    expect = max(z.real for z in roots if abs(z.imag) < 1e-9 and z.real > 0)
    r0 = reflection_distance_r0(quartz, E)
    assert r0 == pytest.approx(expect, rel=1e-10)
    assert r0 == pytest.approx(30.0, rel=0.02)


def test_r0_homogeneous_closed_form():
    p = HomogeneousPotential(3, 236.0)
    assert reflection_distance_r0(p, 1e-3) == pytest.approx((236.0 / 1e-3) ** (1 / 3), rel=1e-9)


def test_r0_monotone(quartz):
    E = np.geomspace(1e-8, 1.0, 30)
    r0 = [reflection_distance_r0(quartz, e) for e in E]
    assert np.all(np.diff(r0) < 0)


def test_r0_errors(quartz):
    with pytest.raises(DomainError):
        reflection_distance_r0(quartz, 0.0)
    with pytest.raises(NoSolutionError):
        reflection_distance_r0(quartz, 1e20)
