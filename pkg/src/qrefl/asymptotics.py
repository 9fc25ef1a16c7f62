"""High-energy asymptotes of the reflection coefficient and ln(-ln R) analysis.

For a homogeneous potential ``-Cₙ/rⁿ`` the reflection coefficient behaves at
large ``kβₙ`` as ``R = exp(-2 Bₙ (kβₙ)^(1-2/n))``.  On a ``ln(-ln R)`` versus
``ln(k a)`` plot this is a straight line whose slope gives the power ``n``
and whose intercept gives ``βₙ``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    InsufficientDataError,
    NoPowerLawError,
    UnsupportedExponentError,
    UnsupportedRegimeError,
)
from .potential import CasimirVdWPotential, rho as _rho
from .units import UnitContext, beta_n, c_n_from_beta, energy_from_wavenumber


@dataclass(frozen=True)
class AsymptoteConstants:
    B3: float = 2.24050
    B4: float = 1.69443
    G4: float = 0.35

    def B(self, n: int) -> float:
        if n == 3:
            return self.B3
        if n == 4:
            return self.B4
        raise UnsupportedExponentError(f"B_n is tabulated only for n = 3, 4 (got {n})")


CONSTANTS = AsymptoteConstants()
DEFAULT_MARGIN = 3.0
# lower edge of the van der Waals asymptote as quoted for He/α-quartz, in units of V0
QUOTED_VDW_ONSET = 7e-6


def asymptotic_reflection(n: int, k, beta, constants: AsymptoteConstants = CONSTANTS):
    B = constants.B(n)
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0) or not beta > 0:
        raise DomainError("k and beta_n must be positive")
    R = np.exp(-2.0 * B * (k * beta) ** (1.0 - 2.0 / n))
    return float(R) if R.ndim == 0 else R


@dataclass(frozen=True)
class SystemParameters:
    rho: float
    beta3: float
    beta4: float
    a: float
    well_depth: float | None = None

    @classmethod
    def from_potential(cls, ctx: UnitContext, p: CasimirVdWPotential, a: float, well_depth=None):
        return cls(
            rho=_rho(ctx, p.c3, p.c4),
            beta3=beta_n(ctx, p.c3, 3),
            beta4=beta_n(ctx, p.c4, 4),
            a=a,
            well_depth=well_depth,
        )


@dataclass(frozen=True)
class ValidityWindow:
    """Range of kβₙ where the n-th asymptote applies; ``margin`` models "≪"."""

    n: int
    lower: float
    upper: float
    margin: float
    beta: float
    # the same onset as quoted with the experiment (n = 3 only), meV
    quoted_lower_energy: float | None = None

    @property
    def empty(self) -> bool:
        return not self.lower < self.upper

    def k_bounds(self):
        return self.lower / self.beta, self.upper / self.beta

    def ka_bounds(self, a: float):
        lo, hi = self.k_bounds()
        return lo * a, hi * a

    def energy_bounds(self, ctx: UnitContext):
        lo, hi = self.k_bounds()
        return energy_from_wavenumber(ctx, lo), energy_from_wavenumber(ctx, hi)

    def contains_ka(self, ka, a: float):
        lo, hi = self.ka_bounds(a)
        ka = np.asarray(ka, dtype=float)
        if self.n == 3:
            return (ka >= lo) & (ka < hi)
        return (ka >= lo) & (ka <= hi)


def validity_window(n: int, system: SystemParameters, margin: float = DEFAULT_MARGIN,
                    constants: AsymptoteConstants = CONSTANTS) -> ValidityWindow:
    if margin < 1:
        raise DomainError("margin must be >= 1")
    if n == 4:
        return ValidityWindow(4, constants.G4 * margin, system.rho**2 / margin, margin, system.beta4)
    if n == 3:
        quoted = None if system.well_depth is None else QUOTED_VDW_ONSET * system.well_depth
        return ValidityWindow(
            3, system.rho**3 * margin, (system.beta3 / system.a) ** 1.5, margin, system.beta3, quoted
        )
    raise UnsupportedExponentError(f"validity windows are defined for n = 3, 4 (got {n})")


@dataclass(frozen=True)
class LogLogPoints:
    x: np.ndarray  # ln(k a)
    y: np.ndarray  # ln(-ln R)
    index: np.ndarray  # positions in the input that survived
    rejected: tuple  # (index, reason) pairs
    sigma_y: np.ndarray | None = None


def loglog_transform(ka, R, R_err=None) -> LogLogPoints:
    """Map (k a, R) to (ln(k a), ln(-ln R)); R outside (0, 1) is rejected.

    If ``R_err`` is given the error bars are carried through the Jacobian
    1/(R |ln R|).
    """
    ka = np.asarray(ka, dtype=float)
    R = np.asarray(R, dtype=float)
    keep, rejected = [], []
    for i, (x, r) in enumerate(zip(ka, R)):
        if not x > 0:
            rejected.append((i, f"k a = {x!r} is not positive"))
        elif not 0 < r < 1:
            rejected.append((i, f"R = {r!r} outside (0, 1)"))
        else:
            keep.append(i)
    idx = np.array(keep, dtype=int)
    lnR = np.log(R[idx])
    sy = None
    if R_err is not None:
        sy = np.asarray(R_err, dtype=float)[idx] / (R[idx] * np.abs(lnR))
    return LogLogPoints(np.log(ka[idx]), np.log(-lnR), idx, tuple(rejected), sy)


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    residual_rms: float
    n_inferred: float | None = None
    n_nearest: int | None = None
    beta_inferred: float | None = None
    n_points: int = 0
    physical: bool = True

    def c_n(self, ctx: UnitContext):
        if self.beta_inferred is None:
            return None
        return c_n_from_beta(ctx, self.beta_inferred, self.n_nearest)


def fit_line(x, y, sigma=None) -> LineFit:
    """Ordinary (or 1/σ²-weighted) least-squares straight line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise InsufficientDataError(f"need at least 3 points for a line fit, got {len(x)}")
    w = None if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    slope, intercept = np.polyfit(x, y, 1, w=w)
    resid = y - (slope * x + intercept)
    return LineFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))), n_points=len(x))


def fit_asymptote_line(points: LogLogPoints, a: float, window: ValidityWindow | None = None,
                       weighted: bool = False, constants: AsymptoteConstants = CONSTANTS) -> LineFit:
    """Straight-line fit of ln(-ln R) vs ln(k a), with power and βₙ inferred.

    The slope s gives n = 2/(1 - s); βₙ follows from the intercept
    ln(2Bₙ(βₙ/a)^(1-2/n)) using the tabulated Bₙ of the nearest integer n.
    """
    x, y, sy = points.x, points.y, points.sigma_y
    if window is not None:
        m = window.contains_ka(np.exp(x), a)
        x, y = x[m], y[m]
        sy = None if sy is None else sy[m]
    fit = fit_line(x, y, sy if weighted else None)
    s = fit.slope
    if s >= 1:
        raise NoPowerLawError(f"slope {s:.4g} >= 1 does not correspond to a power-law potential")
    n_inf = 2.0 / (1.0 - s)
    n_near = int(round(n_inf))
    beta = None
    physical = n_near >= 3
    if n_near in (3, 4):
        B = constants.B(n_near)
        e = 1.0 - 2.0 / n_near
        beta = a * (math.exp(fit.intercept) / (2.0 * B)) ** (1.0 / e)
    return LineFit(s, fit.intercept, fit.residual_rms, n_inf, n_near, beta, fit.n_points, physical)


def low_energy_line(rho: float, beta3: float, a: float) -> LineFit:
    """Threshold line ln(-ln R) = ln(2.4 β3/a) + ln(k a), quoted for ρ ≈ 1.9."""
    if not 1.5 <= rho <= 2.3:
        raise UnsupportedRegimeError(
            f"the low-energy intercept is only known for rho near 1.9 (got {rho:.3g})"
        )
    return LineFit(1.0, math.log(2.4 * beta3 / a), 0.0)
