"""Attractive atom-surface interaction models.

Two families are provided:

* :class:`CasimirVdWPotential`, ``V(r) = -C4 / (r³ (r + l))``, which interpolates
  between the non-retarded van der Waals law ``-C3/r³`` (``C3 = C4/l``) close
  to the surface and the retarded Casimir law ``-C4/r⁴`` far from it;
* :class:`HomogeneousPotential`, a pure power law ``-Cₙ/rⁿ``.

Energies are in meV and distances in Å.  The repulsive wall is deliberately
absent: the solver absorbs the transmitted flux well before it would matter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NoSolutionError, UnsupportedExponentError
from .units import ParticleSpecies, UnitContext, beta_n

# kernel model codes, see _kernels.wfun
_CASIMIR, _HOMOGENEOUS, _FREE = 0, 1, 2

R0_BRACKET = (1e-3, 1e7)


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("distance r must be positive")
    return r


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class CasimirVdWPotential:
    c4: float  # meV Å⁴
    l: float  # Å

    def __post_init__(self):
        if not self.c4 > 0:
            raise DomainError(f"C4 must be positive, got {self.c4}")
        if not self.l > 0:
            raise DomainError(f"transition length must be positive, got {self.l}")

    @property
    def c3(self) -> float:
        return self.c4 / self.l

    def __call__(self, r):
        r = _check_r(r)
        return _out(-self.c4 / (r**3 * (r + self.l)))

    def derivatives(self, r):
        """(V, V', V'') at r."""
        r = _check_r(r)
        V = -self.c4 / (r**3 * (r + self.l))
        g = 3.0 / r + 1.0 / (r + self.l)
        return _out(V), _out(-V * g), _out(V * (g * g + 3.0 / r**2 + 1.0 / (r + self.l) ** 2))

    def kernel_params(self, ctx: UnitContext):
        return _CASIMIR, ctx.two_m_over_hbar2 * self.c4, self.l


@dataclass(frozen=True)
class HomogeneousPotential:
    n: int
    c_n: float  # meV Åⁿ

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise UnsupportedExponentError(f"power n={self.n} unsupported (need integer n >= 3)")
        if not self.c_n > 0:
            raise DomainError(f"C_n must be positive, got {self.c_n}")

    @classmethod
    def from_beta(cls, ctx: UnitContext, n: int, beta: float) -> "HomogeneousPotential":
        return cls(n, beta ** (n - 2) / ctx.two_m_over_hbar2)

    def beta(self, ctx: UnitContext) -> float:
        return beta_n(ctx, self.c_n, self.n)

    def __call__(self, r):
        r = _check_r(r)
        return _out(-self.c_n / r**self.n)

    def derivatives(self, r):
        r = _check_r(r)
        n = self.n
        V = -self.c_n / r**n
        return _out(V), _out(-n * V / r), _out(n * (n + 1) * V / r**2)

    def kernel_params(self, ctx: UnitContext):
        return _HOMOGENEOUS, float(self.n), ctx.two_m_over_hbar2 * self.c_n


@dataclass(frozen=True)
class FreeSpace:
    """V ≡ 0; a reference case for testing the scattering machinery."""

    def __call__(self, r):
        return _out(np.zeros_like(_check_r(r)))

    def derivatives(self, r):
        z = _out(np.zeros_like(_check_r(r)))
        return z, z, z

    def kernel_params(self, ctx: UnitContext):
        return _FREE, 0.0, 0.0


@dataclass(frozen=True)
class SurfaceMaterial:
    """Dielectric surface plus literature metadata on its full potential well.

    ``phi`` is the dimensionless correction φ(ε) entering the C4 coefficient;
    the default 0.762 reproduces C4 = 23.6 eV·Å⁴ for ³He on α-quartz.
    ``well_depth_V0`` (meV) and ``well_minimum_a`` (Å) are not used by the
    attractive model itself; they set energy and length scales for reports.
    """

    epsilon: float = 4.5
    phi: float = 0.762
    well_depth_V0: float = 9.6
    well_minimum_a: float = 2.65

    def __post_init__(self):
        if not self.epsilon > 1:
            raise DomainError(f"dielectric constant must exceed 1, got {self.epsilon}")
        if not 0 < self.phi <= 1:
            raise DomainError(f"phi must lie in (0, 1], got {self.phi}")
        if not self.well_depth_V0 > 0 or not self.well_minimum_a > 0:
            raise DomainError("well depth and minimum position must be positive")


ALPHA_QUARTZ = SurfaceMaterial()


def evaluate(p, r):
    """V(r) in meV for any potential model."""
    return p(r)


def c4_from_material(species: ParticleSpecies, mat: SurfaceMaterial, hbar_c: float | None = None) -> float:
    """Retarded coefficient C4 = (3ħc/8π)·α'·φ(ε)·(ε-1)/(ε+1), in meV·Å⁴."""
    if not mat.epsilon > 1:
        raise DomainError("dielectric constant must exceed 1")
    if hbar_c is None:
        hbar_c = UnitContext(species).hbar_c
    return (
        3.0 * hbar_c / (8.0 * math.pi)
        * species.polarizability_volume
        * mat.phi
        * (mat.epsilon - 1.0)
        / (mat.epsilon + 1.0)
    )


def rho(ctx: UnitContext, c3: float, c4: float) -> float:
    """System parameter ρ = β3/β4 = sqrt(2m/ħ²)·C3/sqrt(C4)."""
    if not (c3 > 0 and c4 > 0):
        raise DomainError("C3 and C4 must be positive")
    return math.sqrt(ctx.two_m_over_hbar2) * c3 / math.sqrt(c4)


def system_rho(ctx: UnitContext, p: CasimirVdWPotential) -> float:
    return rho(ctx, p.c3, p.c4)


def _solve_abs_v(p, level: float, bracket) -> float:
    """Unique r with |V(r)| = level, |V| being strictly decreasing in r."""
    if isinstance(p, FreeSpace):
        raise NoSolutionError("|V| vanishes identically; no crossing exists")
    if isinstance(p, HomogeneousPotential):
        r = (p.c_n / level) ** (1.0 / p.n)
        if not bracket[0] <= r <= bracket[1]:
            raise NoSolutionError(f"|V| = {level:g} meV is reached outside {bracket} Å")
        return r

    def g(lr):
        return math.log(-p(math.exp(lr))) - math.log(level)

    grid = np.linspace(math.log(bracket[0]), math.log(bracket[1]), 41)
    vals = [g(x) for x in grid]
    for lo, hi, vlo, vhi in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if vlo == 0.0:
            return math.exp(lo)
        if vlo > 0 > vhi:
            lr = brentq(g, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
            return math.exp(lr)
    if vals[-1] == 0.0:
        return math.exp(grid[-1])
    raise NoSolutionError(f"|V| = {level:g} meV is not reached on r in {bracket} Å")


def reflection_distance_r0(p, E: float) -> float:
    """Distance r0 (Å) at which |V(r0)| equals the normal kinetic energy E (meV)."""
    if not E > 0:
        raise DomainError("energy must be positive")
    return _solve_abs_v(p, E, R0_BRACKET)
