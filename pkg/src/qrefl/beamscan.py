"""Beam kinematics and θ-2θ reflectivity scans.

A scan at incidence angle θᵢ (measured from the surface normal) probes the
normal energy ``E₀cos²θᵢ``.  The beam has a spread of de Broglie
wavelengths; modelled as a Gaussian in λ truncated at ±3 standard
deviations and integrated with a Gauss rule built for that weight.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, QReflError
from .roughness import RoughnessModel, roughness_factor
from .solver import SolverSettings, solve_reflection
from .units import HELIUM3, UM, ParticleSpecies, UnitContext, wavenumber_from_energy

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
TRUNCATION = 3.0
DEFAULT_NODES = 7
WORKERS_ENV = "QREFL_WORKERS"


@dataclass(frozen=True)
class BeamModel:
    E0: float = 0.63  # meV
    wavelength_spread_rel: float = 0.20  # relative FWHM in λ
    delta_theta: float = math.radians(0.17)
    species: ParticleSpecies = HELIUM3

    def __post_init__(self):
        if not self.E0 > 0:
            raise DomainError("beam energy E0 must be positive")
        if not 0 <= self.wavelength_spread_rel < 0.5:
            raise DomainError("relative wavelength spread must lie in [0, 0.5)")
        if not self.delta_theta > 0:
            raise DomainError("angular resolution must be positive")

    @property
    def ctx(self) -> UnitContext:
        return UnitContext(self.species)

    @property
    def k0(self) -> float:
        return wavenumber_from_energy(self.ctx, self.E0)

    @property
    def wavelength(self) -> float:
        """Mean de Broglie wavelength in Å."""
        return 2.0 * math.pi / self.k0


def _check_theta(theta_i):
    th = np.asarray(theta_i, dtype=float)
    if np.any(th < 0) or np.any(th >= math.pi / 2):
        raise DomainError("incidence angle must lie in [0, pi/2)")
    return th


def normal_energy(beam: BeamModel, theta_i):
    E = beam.E0 * np.cos(_check_theta(theta_i)) ** 2
    return float(E) if np.ndim(E) == 0 else E


def normal_wavenumber(beam: BeamModel, theta_i, wavelength: float | None = None):
    lam = beam.wavelength if wavelength is None else wavelength
    k = 2.0 * math.pi * np.cos(_check_theta(theta_i)) / lam
    return float(k) if np.ndim(k) == 0 else k


def coherence_length(wavelength: float, delta_theta: float, theta_i):
    """Transfer width λ/(Δθ cosθᵢ) in µm (λ in Å)."""
    if not delta_theta > 0:
        raise DomainError("angular resolution must be positive")
    w = wavelength / (delta_theta * np.cos(_check_theta(theta_i))) / UM
    return float(w) if np.ndim(w) == 0 else w


def k_i_a(beam: BeamModel, theta_i, a: float):
    """Dimensionless normal wavenumber at the beam-mean wavelength."""
    return normal_wavenumber(beam, theta_i) * a


@lru_cache(maxsize=64)
def truncated_normal_rule(n: int, cut: float = TRUNCATION):
    """Gauss nodes/weights for the standard normal truncated to [-cut, cut].

    Recurrence coefficients come from a discretised Stieltjes procedure on a
    fine Gauss-Legendre grid; nodes and weights then follow from the Jacobi
    matrix (Golub-Welsch).  Weights sum to one.
    """
    if n < 1:
        raise DomainError("need at least one quadrature node")
    x, w = np.polynomial.legendre.leggauss(max(200, 4 * n))
    x = cut * x
    w = w * np.exp(-0.5 * x**2)
    w /= w.sum()
    alpha = np.zeros(n)
    beta = np.zeros(n)
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    norm_prev = 1.0
    for j in range(n):
        norm = np.sum(w * p * p)
        alpha[j] = np.sum(w * x * p * p) / norm
        beta[j] = norm / norm_prev if j > 0 else 0.0
        p_prev, p = p, (x - alpha[j]) * p - beta[j] * p_prev
        norm_prev = norm
    J = np.diag(alpha) + np.diag(np.sqrt(beta[1:]), 1) + np.diag(np.sqrt(beta[1:]), -1)
    nodes, vecs = np.linalg.eigh(J)
    weights = vecs[0] ** 2
    return nodes, weights / weights.sum()


def wavelength_nodes(beam: BeamModel, nodes: int = DEFAULT_NODES):
    """(λ_j, w_j) for the beam's wavelength distribution."""
    lam = beam.wavelength
    if beam.wavelength_spread_rel == 0:
        return np.array([lam]), np.array([1.0])
    s = beam.wavelength_spread_rel * FWHM_TO_SIGMA
    x, w = truncated_normal_rule(nodes)
    return lam * (1.0 + s * x), w


def beam_averaged_reflection(beam: BeamModel, potential, theta_i: float, nodes: int = DEFAULT_NODES,
                             settings: SolverSettings = SolverSettings()) -> float:
    ctx = beam.ctx
    lams, w = wavelength_nodes(beam, nodes)
    ks = normal_wavenumber(beam, theta_i, 1.0) / lams
    Rs = [solve_reflection(settings.problem(potential, float(k), ctx)).R for k in np.atleast_1d(ks)]
    return float(np.dot(w, Rs))


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n >= 1:
            return n
    return os.cpu_count() or 1


def parallel_map(fn, items, workers: int | None = None):
    """Order-preserving map; exceptions are returned in place of results."""
    items = list(items)
    workers = worker_count() if workers is None else workers

    def safe(x):
        try:
            return fn(x)
        except QReflError as exc:
            return exc

    if workers <= 1 or len(items) <= 1:
        return [safe(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(safe, items))


@dataclass(frozen=True)
class ScanCurve:
    """A reflectivity curve; ``R_rough`` is present for simulated rough surfaces."""

    theta_i: np.ndarray
    k_normal: np.ndarray
    k_i_a: np.ndarray
    R: np.ndarray
    R_err: np.ndarray | None = None
    R_rough: np.ndarray | None = None
    failures: tuple = ()  # (index, message)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("theta_i", "k_normal", "k_i_a", "R", "R_err", "R_rough"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=float))
        n = len(self.R)
        for name in ("theta_i", "k_normal", "k_i_a", "R_err", "R_rough"):
            v = getattr(self, name)
            if v is not None and len(v) != n:
                raise DomainError(f"column {name} has {len(v)} entries, expected {n}")
        ok = self.R[np.isfinite(self.R)]
        if np.any(ok < 0):
            raise DomainError("reflection coefficients must be non-negative")
        th = self.theta_i[np.isfinite(self.theta_i)]
        if len(th) > 1:
            d = np.diff(th)
            # duplicates are tolerated so that measured repeats survive loading
            if not (np.all(d >= 0) or np.all(d <= 0)):
                raise DomainError("incidence angles must be monotone")

    def __len__(self):
        return len(self.R)


def simulate_scan(beam: BeamModel, potential, theta_grid, roughness: RoughnessModel | None = None,
                  a: float = 2.65, nodes: int = DEFAULT_NODES, settings: SolverSettings = SolverSettings(),
                  workers: int | None = None) -> ScanCurve:
    """Beam-averaged smooth (and optionally rough) R over an angle grid.

    Solves at every (angle, wavelength node) pair in parallel; a failing
    solve marks its angle as failed (R = NaN) without aborting the scan.
    """
    theta = _check_theta(np.atleast_1d(np.asarray(theta_grid, dtype=float)))
    ctx = beam.ctx
    lams, w = wavelength_nodes(beam, nodes)
    m = len(lams)
    base = normal_wavenumber(beam, theta, 1.0) if len(theta) else np.array([])
    tasks = [float(b / lam) for b in np.atleast_1d(base) for lam in lams]
    out = parallel_map(lambda k: solve_reflection(settings.problem(potential, k, ctx)).R, tasks, workers)
    R = np.full(len(theta), np.nan)
    failures = []
    for i in range(len(theta)):
        chunk = out[i * m:(i + 1) * m]
        bad = [x for x in chunk if isinstance(x, Exception)]
        if bad:
            failures.append((i, f"{type(bad[0]).__name__}: {bad[0]}"))
        else:
            R[i] = float(np.dot(w, chunk))
    k_mean = normal_wavenumber(beam, theta) if len(theta) else np.array([])
    rough = None
    if roughness is not None:
        rough = np.array([roughness_factor(roughness, k, t) for k, t in zip(k_mean, theta)]) * R
    return ScanCurve(theta, k_mean, k_mean * a, R, None, rough, tuple(failures))
