"""Reflection from a randomly stepped surface.

The surface consists of wide terraces of mean width ``L`` whose heights are
Gaussian distributed with standard deviation ``sigma``.  Relative to a
smooth surface the specular reflectivity is reduced by

* dephasing between terraces at different heights, ``exp(-4σ²k²)``;
* shadowing: atoms hitting step edges from the side are lost.  With
  ``θ = 90° - θᵢ`` the surviving fraction is ``∫₀^θ f / ∫₀^{90°} f`` where
  ``f(θ) ∝ exp(-(L tanθ/σ)²/2)`` is the probability of a step of height
  ``L tanθ``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, OverflowGuardError


@dataclass(frozen=True)
class RoughnessModel:
    sigma: float  # Å
    L: float  # Å
    sigma_uncertainty: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0 or not self.L > 0:
            raise DomainError("sigma and L must be positive")
        if self.sigma_uncertainty < 0:
            raise DomainError("sigma uncertainty must be non-negative")
        if self.L / self.sigma < 10:
            warnings.warn(f"terrace width L/sigma = {self.L / self.sigma:.3g} is not >> 1", stacklevel=3)

    def with_sigma(self, sigma: float) -> "RoughnessModel":
        return RoughnessModel(sigma, self.L, self.sigma_uncertainty)


def dephasing_factor(m: RoughnessModel, k):
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError("k must be non-negative")
    d = np.exp(-4.0 * m.sigma**2 * k**2)
    return float(d) if d.ndim == 0 else d


def _step_weight(m, theta):
    # normalisation (L/σ)/sqrt(2π) cancels in the ratio
    return math.exp(-0.5 * (m.L * math.tan(theta) / m.sigma) ** 2)


def _partial_integral(m, theta):
    if theta <= 0:
        return 0.0
    width = m.sigma / m.L
    pts = [p for p in (width, 3 * width, 10 * width) if p < theta]
    total, _ = quad(lambda t: _step_weight(m, t), 0.0, theta, points=pts or None,
                    epsabs=0.0, epsrel=1e-12, limit=200)
    return total


def shadowing_fraction(m: RoughnessModel, theta_i):
    """Fraction of atoms not lost to step edges at incidence angle θᵢ (rad)."""
    th = np.asarray(theta_i, dtype=float)
    if np.any(th < 0) or np.any(th >= math.pi / 2):
        raise DomainError("incidence angle must lie in [0, pi/2)")
    full = _partial_integral(m, math.pi / 2)
    out = np.array([_partial_integral(m, math.pi / 2 - t) / full for t in th.ravel()]).reshape(th.shape)
    out = np.minimum(out, 1.0)
    return float(out) if out.ndim == 0 else out


def shadowing_fraction_erf(m: RoughnessModel, theta_i):
    """Closed-form approximation erf(L tanθ/(σ√2)), valid for L/σ >> 1."""
    from scipy.special import erf

    theta = math.pi / 2 - np.asarray(theta_i, dtype=float)
    v = erf(m.L * np.tan(theta) / (m.sigma * math.sqrt(2.0)))
    return float(v) if np.ndim(v) == 0 else v


def roughness_factor(m: RoughnessModel, k, theta_i):
    return dephasing_factor(m, k) * shadowing_fraction(m, theta_i)


def rough_from_smooth(m: RoughnessModel, k, theta_i, R_smooth):
    R_smooth = np.asarray(R_smooth, dtype=float)
    if np.any(R_smooth < 0) or np.any(R_smooth > 1):
        raise DomainError("smooth-surface R must lie in [0, 1]")
    out = roughness_factor(m, k, theta_i) * R_smooth
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CorrectedValue:
    value: float
    err_minus: float
    err_plus: float

    @property
    def err(self) -> float:
        return 0.5 * (self.err_minus + self.err_plus)


FACTOR_FLOOR = 1e-300


def smooth_from_rough(m: RoughnessModel, k: float, theta_i: float, R_rough: float,
                      R_rough_err: float = 0.0, include_sigma_band: bool = True) -> CorrectedValue:
    """Invert the roughness model for one data point.

    The band adds in quadrature the propagated statistical error and the
    envelope from re-evaluating the correction at σ ± Δσ (the factor is
    exponential in σ², so an envelope is used instead of linearisation).
    """
    if R_rough < 0:
        raise DomainError("R must be non-negative")
    factor = roughness_factor(m, k, theta_i)
    if factor < FACTOR_FLOOR:
        raise OverflowGuardError(f"roughness correction factor {factor:.3g} underflows at k={k:g}")
    value = R_rough / factor
    stat = R_rough_err / factor
    lo = hi = 0.0
    ds = m.sigma_uncertainty
    if include_sigma_band and ds > 0:
        s_lo = max(m.sigma - ds, 1e-12 * m.sigma)
        v_lo = R_rough / roughness_factor(m.with_sigma(s_lo), k, theta_i)
        f_hi = roughness_factor(m.with_sigma(m.sigma + ds), k, theta_i)
        if f_hi < FACTOR_FLOOR:
            raise OverflowGuardError(f"roughness correction at sigma+dsigma underflows at k={k:g}")
        v_hi = R_rough / f_hi
        lo = value - min(v_lo, v_hi)
        hi = max(v_lo, v_hi) - value
    return CorrectedValue(value, math.hypot(stat, lo), math.hypot(stat, hi))
