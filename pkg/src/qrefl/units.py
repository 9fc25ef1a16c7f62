"""Canonical units and physical constants.

Internally every quantity is expressed in meV, Å and radians.  The only
composite constant the rest of the package needs is ``2m/ħ²`` for the
scattered particle, which converts an energy in meV into a squared
wavenumber in Å⁻².
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedExponentError

# CODATA 2018
HBAR_C = 197.3269804e9 * 1e-5  # MeV·fm -> meV·Å
ATOMIC_MASS_UNIT = 931.49410242e9  # u c² in meV
EPSILON_0 = 8.8541878128e-12  # F/m

# AME2016 atomic mass of ³He, in u
HELIUM3_MASS = 3.0160293

NM = 10.0  # Å per nm
UM = 1.0e4  # Å per µm


def polarizability_volume(alpha_si: float) -> float:
    """Convert a polarizability in F·m² into a polarizability volume in Å³."""
    return alpha_si / (4.0 * math.pi * EPSILON_0) * 1e30


@dataclass(frozen=True)
class ParticleSpecies:
    """A neutral projectile: mass in u, polarizability volume α/(4πε₀) in Å³."""

    mass: float = HELIUM3_MASS
    polarizability_volume: float = polarizability_volume(2.3e-41)
    name: str = "3He"

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError(f"particle mass must be positive, got {self.mass}")
        if not self.polarizability_volume >= 0:
            raise DomainError("polarizability volume must be non-negative")


HELIUM3 = ParticleSpecies()


@dataclass(frozen=True)
class UnitContext:
    species: ParticleSpecies = HELIUM3
    hbar_c: float = HBAR_C

    @property
    def two_m_over_hbar2(self) -> float:
        """2m/ħ² in meV⁻¹ Å⁻²."""
        mc2 = self.species.mass * ATOMIC_MASS_UNIT
        return 2.0 * mc2 / self.hbar_c**2


def wavenumber_from_energy(ctx: UnitContext, E):
    """Wavenumber k = sqrt(2mE/ħ²) in Å⁻¹ for an energy in meV."""
    E = np.asarray(E, dtype=float)
    if np.any(E < 0):
        raise DomainError("energy must be non-negative")
    k = np.sqrt(ctx.two_m_over_hbar2 * E)
    return float(k) if k.ndim == 0 else k


def energy_from_wavenumber(ctx: UnitContext, k):
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError("wavenumber must be non-negative")
    E = k * k / ctx.two_m_over_hbar2
    return float(E) if E.ndim == 0 else E


def de_broglie_wavelength(ctx: UnitContext, E: float) -> float:
    return 2.0 * math.pi / wavenumber_from_energy(ctx, E)


def beta_n(ctx: UnitContext, c_n: float, n: int) -> float:
    """Length scale βₙ = ((2m/ħ²)·Cₙ)^(1/(n-2)) of a -Cₙ/rⁿ potential.

    ``c_n`` is in meV·Åⁿ; the result is in Å.
    """
    if int(n) != n or n < 3:
        raise UnsupportedExponentError(f"power n={n} unsupported (need integer n >= 3)")
    if not c_n > 0:
        raise DomainError("C_n must be positive")
    return (ctx.two_m_over_hbar2 * c_n) ** (1.0 / (n - 2))


def c_n_from_beta(ctx: UnitContext, beta: float, n: int) -> float:
    if int(n) != n or n < 3:
        raise UnsupportedExponentError(f"power n={n} unsupported (need integer n >= 3)")
    if not beta > 0:
        raise DomainError("beta must be positive")
    return beta ** (n - 2) / ctx.two_m_over_hbar2
