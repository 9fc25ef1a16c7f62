"""Exact quantum reflection from an attractive surface potential.

The stationary equation ``u'' + (k² - (2m/ħ²)V(r)) u = 0`` is solved with a
purely incoming WKB wave as the inner boundary condition: flux transmitted
towards the surface is absorbed, which models the sticking/diffuse loss at
the (unmodelled) repulsive wall.  Far from the surface the solution is split
into an incident ``A e^{-ikr}`` and a reflected ``B e^{+ikr}`` plane wave and
``R = |B/A|²``.

Two independent integrators are available:

``solve_reflection``
    adaptive Dormand-Prince 5(4) on the local WKB reflection ratio, i.e. the
    exact solution is matched onto local WKB waves at every point;
``solve_reflection_reference``
    fixed-step RK4 on ``(u, u')`` directly, stepping uniformly in WKB phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from . import _kernels
from .errors import (
    BoundaryPlacementError,
    ConvergenceError,
    DomainError,
    NoSolutionError,
    UnitarityError,
)
from .potential import FreeSpace, _solve_abs_v, reflection_distance_r0
from .units import UnitContext, energy_from_wavenumber

DEFAULT_TOLERANCE = 1e-10
DEFAULT_BADNESS = 1e-3
DEFAULT_V_RATIO = 1e-8
DEFAULT_MAX_STEPS = 50_000_000


def _reduced(p, ctx, r):
    """W, W', W'' with W = -(2m/ħ²) V."""
    V, V1, V2 = p.derivatives(r)
    s = -ctx.two_m_over_hbar2
    return s * V, s * V1, s * V2


def local_wavenumber(p, ctx: UnitContext, k: float, r):
    """q(r) = sqrt(k² - (2m/ħ²) V(r)) in Å⁻¹."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("distance r must be positive")
    W, _, _ = _reduced(p, ctx, r)
    q = np.sqrt(k * k + W)
    return float(q) if q.ndim == 0 else q


def wkb_badness(p, ctx: UnitContext, k: float, r):
    """|d λ(r) / dr| for the local de Broglie wavelength λ(r) = 2π/q(r).

    Evaluated analytically: 2π|q'|/q² = π|W'|/q³.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("distance r must be positive")
    W, W1, _ = _reduced(p, ctx, r)
    q2 = k * k + W
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(q2 > 0, math.pi * np.abs(W1) / q2**1.5, np.inf)
    return float(b) if b.ndim == 0 else b


def wkb_phase(p, ctx: UnitContext, k: float, r_a: float, r_b: float) -> float:
    """∫ q(r) dr from r_a to r_b, by adaptive quadrature in ln r."""
    if r_a <= 0 or r_b <= 0:
        raise DomainError("distance r must be positive")

    def integrand(t):
        r = math.exp(t)
        return local_wavenumber(p, ctx, k, r) * r

    val, _ = quad(integrand, math.log(r_a), math.log(r_b), epsabs=0.0, epsrel=1e-13, limit=500)
    return val


@dataclass(frozen=True)
class ScatteringProblem:
    """One reflection calculation at normal wavenumber ``k`` (Å⁻¹).

    ``r_min``/``r_max`` default to automatic placement: ``r_min`` is the
    largest radius below r0/4 where the WKB badness does not exceed
    ``badness_max``; ``r_max`` is where ``|V|/E`` has dropped to ``v_ratio_max``.
    Explicit values are validated against the same two criteria.
    """

    potential: object
    k: float
    ctx: UnitContext = field(default_factory=UnitContext)
    r_min: float | None = None
    r_max: float | None = None
    tolerance: float = DEFAULT_TOLERANCE
    badness_max: float = DEFAULT_BADNESS
    v_ratio_max: float = DEFAULT_V_RATIO
    max_steps: int = DEFAULT_MAX_STEPS
    boundary_order: int = 2

    def __post_init__(self):
        if not self.k > 0:
            raise DomainError(f"wavenumber must be positive, got {self.k}")
        if not 0 < self.tolerance <= 1e-3:
            raise DomainError(f"tolerance must lie in (0, 1e-3], got {self.tolerance}")
        if self.boundary_order not in (1, 2):
            raise DomainError("boundary_order must be 1 or 2")
        r_min = self._place_r_min() if self.r_min is None else float(self.r_min)
        r_max = self._place_r_max(r_min) if self.r_max is None else float(self.r_max)
        if not 0 < r_min < r_max:
            raise BoundaryPlacementError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
        b = wkb_badness(self.potential, self.ctx, self.k, r_min)
        if b > self.badness_max:
            raise BoundaryPlacementError(
                f"WKB badness {b:.3g} at r_min={r_min:.4g} Å exceeds {self.badness_max:g}; decrease r_min"
            )
        ratio = abs(self.potential(r_max)) / self.energy
        if ratio > self.v_ratio_max * (1 + 1e-9):
            raise BoundaryPlacementError(
                f"|V|/E = {ratio:.3g} at r_max={r_max:.4g} Å exceeds {self.v_ratio_max:g}; increase r_max"
            )
        object.__setattr__(self, "r_min", r_min)
        object.__setattr__(self, "r_max", r_max)

    @property
    def energy(self) -> float:
        return energy_from_wavenumber(self.ctx, self.k)

    def _place_r_min(self) -> float:
        p, ctx, k, thr = self.potential, self.ctx, self.k, self.badness_max
        if isinstance(p, FreeSpace):
            raise BoundaryPlacementError("free space has no reflection region; give r_min explicitly")
        hi = reflection_distance_r0(p, self.energy) / 4.0
        if wkb_badness(p, ctx, k, hi) <= thr:
            return hi
        lo = hi * 1e-30
        if wkb_badness(p, ctx, k, lo) > thr:
            raise BoundaryPlacementError("could not find a radius satisfying the WKB criterion")

        def g(t):
            return math.log(wkb_badness(p, ctx, k, math.exp(t)) / thr)

        t = brentq(g, math.log(lo), math.log(hi), xtol=1e-10)
        # step just inside the admissible side
        return math.exp(t) * (1 - 1e-9)

    def _place_r_max(self, r_min: float) -> float:
        if isinstance(self.potential, FreeSpace):
            return r_min + 10 * 2 * math.pi / self.k
        r = _solve_abs_v(self.potential, self.v_ratio_max * self.energy, (1e-3, 1e14))
        return max(r * (1 + 1e-9), 2 * r_min)


@dataclass(frozen=True)
class SolverSettings:
    """Numerical knobs shared by every solve in a scan or fit."""

    tolerance: float = DEFAULT_TOLERANCE
    badness_max: float = DEFAULT_BADNESS
    v_ratio_max: float = DEFAULT_V_RATIO
    max_steps: int = DEFAULT_MAX_STEPS
    boundary_order: int = 2

    def problem(self, potential, k: float, ctx: UnitContext) -> ScatteringProblem:
        return ScatteringProblem(
            potential, k, ctx, tolerance=self.tolerance, badness_max=self.badness_max,
            v_ratio_max=self.v_ratio_max, max_steps=self.max_steps, boundary_order=self.boundary_order,
        )


@dataclass(frozen=True)
class BoundaryState:
    r: float
    u: complex
    du: complex


@dataclass(frozen=True)
class ReflectionSolution:
    R: float
    reflection_amplitude: complex
    steps_taken: int
    matching_residual: float
    r_min_used: float
    r_max_used: float
    local_ratio: complex = 0j  # c(r_max), outgoing/incoming local WKB waves
    method: str = "adaptive"


def wkb_boundary_state(problem: ScatteringProblem) -> BoundaryState:
    """Incoming first-order WKB wave at r_min, phase referenced to r_min.

    u = q^(-1/2), u' = (-iq - q'/(2q)) u.
    """
    p, ctx, k, r = problem.potential, problem.ctx, problem.k, problem.r_min
    b = wkb_badness(p, ctx, k, r)
    if b > problem.badness_max:
        raise BoundaryPlacementError(f"WKB badness {b:.3g} at r_min exceeds {problem.badness_max:g}; decrease r_min")
    W, W1, _ = _reduced(p, ctx, r)
    q = math.sqrt(k * k + W)
    dq = W1 / (2 * q)
    u = q**-0.5 + 0j
    return BoundaryState(r, u, (-1j * q - dq / (2 * q)) * u)


def wkb_wave(problem: ScatteringProblem, r: float) -> complex:
    """The incoming WKB wave of `wkb_boundary_state` continued to radius r."""
    p, ctx, k = problem.potential, problem.ctx, problem.k
    S = wkb_phase(p, ctx, k, problem.r_min, r)
    return local_wavenumber(p, ctx, k, r) ** -0.5 * np.exp(-1j * S)


def _start_ratio(problem) -> complex:
    model, p0, p1 = problem.potential.kernel_params(problem.ctx)
    cr, ci = _kernels.start_ratio(model, p0, p1, problem.k, problem.r_min, problem.boundary_order)
    return complex(cr, ci)


def _plane_wave_split(k, r, u, du):
    """B/A for u = A e^{-ikr} + B e^{ikr} from the Wronskian pair."""
    A = (1j * k * u - du) * np.exp(1j * k * r)
    B = (1j * k * u + du) * np.exp(-1j * k * r)
    return B / A


def _finish(problem, c, r_end, steps, method):
    p, ctx, k = problem.potential, problem.ctx, problem.k
    W, _, _ = _reduced(p, ctx, r_end)
    q = math.sqrt(k * k + W)
    # u ∝ q^(-1/2)(1 + c), u' ∝ -i q^(1/2)(1 - c); factored to keep small |c| exact
    amp = np.exp(-2j * k * r_end) * ((k - q) + (k + q) * c) / ((k + q) + (k - q) * c)
    # the tail beyond r_end is adiabatic: c less its local adiabatic part is
    # already the converged amplitude, while the plane-wave split carries a
    # sudden-cutoff error ~ W/(4k²)
    model, p0, p1 = p.kernel_params(ctx)
    ar, ai = _kernels.start_ratio(model, p0, p1, k, r_end, 2)
    R = abs(c - complex(ar, ai)) ** 2
    Rpw = abs(amp) ** 2
    if not np.isfinite(R):
        raise ConvergenceError("non-finite reflection coefficient", r=r_end, steps=steps)
    if R > 1 + 1e-9:
        raise UnitarityError(f"R = {R!r} exceeds unity; solver bounds or tolerance are inadequate")
    resid = abs(Rpw - R) / R if R > 0 else abs(Rpw)
    if Rpw > 0:
        amp = amp * math.sqrt(R / Rpw)
    return ReflectionSolution(
        R=float(min(R, 1.0)),
        reflection_amplitude=complex(amp),
        steps_taken=int(steps),
        matching_residual=float(resid),
        r_min_used=problem.r_min,
        r_max_used=float(r_end),
        local_ratio=complex(c),
        method=method,
    )


def solve_reflection(problem: ScatteringProblem) -> ReflectionSolution:
    model, p0, p1 = problem.potential.kernel_params(problem.ctx)
    c0 = _start_ratio(problem)
    cr, ci, r_end, acc, rej, status = _kernels.riccati_dp45(
        model, p0, p1, problem.k, problem.r_min, problem.r_max,
        problem.tolerance, c0.real, c0.imag, problem.max_steps,
    )
    if status != _kernels.OK:
        why = "step budget exhausted" if status == _kernels.MAX_STEPS else "step size underflow"
        raise ConvergenceError(
            f"adaptive integration failed ({why}) at r={r_end:.6g} Å",
            r=r_end, accepted=acc, rejected=rej, k=problem.k,
        )
    return _finish(problem, complex(cr, ci), r_end, acc, "adaptive")


def solve_reflection_reference(problem: ScatteringProblem, phase_step: float = 0.01) -> ReflectionSolution:
    """Independent check: fixed-step RK4 on (u, u'), uniform in WKB phase.

    Uses the same inner boundary state as `solve_reflection`.  Costs about
    ``(∫q dr)/phase_step`` steps, so it is meant for verification only.
    """
    model, p0, p1 = problem.potential.kernel_params(problem.ctx)
    c0 = _start_ratio(problem)
    W, _, _ = _reduced(problem.potential, problem.ctx, problem.r_min)
    q = math.sqrt(problem.k**2 + W)
    u = q**-0.5 * (1 + c0)
    du = -1j * q**0.5 * (1 - c0)
    r, ur, ui, vr, vi, n, status = _kernels.direct_rk4_phase(
        model, p0, p1, problem.k, problem.r_min, problem.r_max, phase_step,
        u.real, u.imag, du.real, du.imag, problem.max_steps,
    )
    if status != _kernels.OK:
        raise ConvergenceError("fixed-step integration exhausted its step budget", r=r, steps=n)
    u = complex(ur, ui)
    du = complex(vr, vi)
    # same decomposition as the adaptive path, via the local ratio at r
    W, _, _ = _reduced(problem.potential, problem.ctx, r)
    q = math.sqrt(problem.k**2 + W)
    c = (u - 1j * du / q) / (u + 1j * du / q)
    return _finish(problem, c, r, n, "fixed-step-rk4")


def max_wkb_badness(p, ctx: UnitContext, k: float, r_range=(1e-3, 1e9)):
    """(max badness, r at max) over r, by log grid search plus refinement."""
    lr = np.linspace(math.log(r_range[0]), math.log(r_range[1]), 400)
    vals = wkb_badness(p, ctx, k, np.exp(lr))
    i = int(np.argmax(vals))
    lo, hi = lr[max(i - 1, 0)], lr[min(i + 1, len(lr) - 1)]
    res = minimize_scalar(
        lambda t: -wkb_badness(p, ctx, k, math.exp(t)), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-10},
    )
    best = max(-res.fun, vals[i])
    return float(best), float(math.exp(res.x if -res.fun >= vals[i] else lr[i]))


def critical_energy_wkb(p, ctx: UnitContext, level: float = 2 * math.pi, bracket=(1e-16, 1e3)) -> float:
    """Normal energy (meV) at which the peak WKB badness reaches ``level``.

    Below this energy the WKB picture breaks down somewhere along the path,
    the traditional criterion for the onset of quantum reflection.  The
    default ``level = 2π`` is |dƛ/dr| = 1 for the reduced wavelength ƛ = 1/q;
    pass ``level=1`` for the same condition on λ = 2π/q.
    """
    from .units import wavenumber_from_energy

    def g(t):
        k = wavenumber_from_energy(ctx, math.exp(t))
        return math.log(max_wkb_badness(p, ctx, k)[0] / level)

    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    glo, ghi = g(lo), g(hi)
    if not (glo > 0 > ghi):
        raise NoSolutionError(f"peak WKB badness does not cross {level:g} for E in {bracket} meV")
    return math.exp(brentq(g, lo, hi, xtol=1e-10))
