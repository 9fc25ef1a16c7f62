"""Least-squares estimation of l, σ and C₄ from reflectivity curves.

Residuals are formed in smooth-surface space: measured rough-surface data
are divided by the roughness factor at the current σ and compared with the
beam-averaged smooth-surface model.  Fitting corrected data and fitting raw
data with σ held fixed therefore perform identical arithmetic.
"""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .beamscan import (
    DEFAULT_NODES,
    BeamModel,
    ScanCurve,
    beam_averaged_reflection,
    normal_wavenumber,
    parallel_map,
)
from .errors import ConfigError, ConvergenceError, DataError, QReflError
from .potential import CasimirVdWPotential
from .roughness import RoughnessModel, roughness_factor
from .solver import SolverSettings

PARAMETERS = ("l", "sigma", "c4")
LOSS_SPACES = ("loglog_R", "log_R")


class ResidualEvaluationError(ConvergenceError):
    pass


class ForwardModel:
    """Beam-averaged smooth-surface R(θ) for a Casimir-van der Waals surface.

    Results are memoised on (c4, l, θ); the cache is shared by every fit
    that uses this instance and is safe under concurrent evaluation.
    """

    def __init__(self, beam: BeamModel, c4: float, l: float, roughness: RoughnessModel | None = None,
                 a: float = 2.65, nodes: int = DEFAULT_NODES, settings: SolverSettings = SolverSettings(),
                 workers: int | None = None):
        self.beam = beam
        self.defaults = {"c4": float(c4), "l": float(l)}
        if roughness is not None:
            self.defaults["sigma"] = roughness.sigma
        self.roughness = roughness
        self.a = a
        self.nodes = nodes
        self.settings = settings
        self.workers = workers
        self._cache: dict = {}
        self._lock = threading.Lock()
        self.evaluations = 0

    def resolve(self, params: dict) -> dict:
        out = dict(self.defaults)
        out.update(params)
        return out

    def _point(self, key):
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        c4, l, theta = key
        R = beam_averaged_reflection(self.beam, CasimirVdWPotential(c4, l), theta, self.nodes, self.settings)
        with self._lock:
            self._cache[key] = R
            self.evaluations += 1
        return R

    def smooth(self, params: dict, theta) -> np.ndarray:
        p = self.resolve(params)
        keys = [(p["c4"], p["l"], float(t)) for t in np.atleast_1d(theta)]
        out = parallel_map(self._point, keys, self.workers)
        for i, v in enumerate(out):
            if isinstance(v, Exception):
                raise ResidualEvaluationError(
                    f"forward model failed at point {i} (theta={math.degrees(keys[i][2]):.4f} deg): {v}",
                    index=i,
                )
        return np.array(out)

    def roughness_factor(self, params: dict, theta) -> np.ndarray:
        if self.roughness is None:
            return np.ones(len(np.atleast_1d(theta)))
        m = self.roughness.with_sigma(self.resolve(params)["sigma"])
        k = np.atleast_1d(normal_wavenumber(self.beam, np.atleast_1d(theta)))
        return np.array([roughness_factor(m, kk, t) for kk, t in zip(k, np.atleast_1d(theta))])


def _transform(R, space):
    if space == "log_R":
        return np.log(R)
    return np.log(-np.log(R))


def _transform_sigma(R, R_err, space):
    if space == "log_R":
        return R_err / R
    return R_err / (R * np.abs(np.log(R)))


@dataclass
class FitProblem:
    data: ScanCurve
    model: object
    free: dict  # name -> (lo, hi)
    loss_space: str = "loglog_R"
    data_is_rough: bool = False
    starts: list | None = None  # explicit starting points, dicts of free values
    n_starts: int = 3
    xatol: float = 1e-4  # on the normalised log coordinates

    def __post_init__(self):
        if self.loss_space not in LOSS_SPACES:
            raise ConfigError(f"loss space must be one of {LOSS_SPACES}")
        if not self.free:
            raise ConfigError("at least one free parameter is required")
        for name, (lo, hi) in self.free.items():
            if name not in PARAMETERS:
                raise ConfigError(f"unknown parameter {name!r}; choose from {PARAMETERS}")
            if not (np.isfinite(lo) and np.isfinite(hi) and 0 < lo < hi):
                raise ConfigError(f"bounds for {name} must be finite, positive and increasing")
        if "sigma" in self.free and getattr(self.model, "roughness", None) is None:
            raise ConfigError("sigma can only be fitted when a roughness model is configured")
        if len(self.data) < 2 * len(self.free):
            raise DataError(f"{len(self.data)} points is too few for {len(self.free)} free parameters")
        R = self.data.R
        if np.any(~np.isfinite(R)) or np.any(R <= 0):
            raise DataError("fits need finite, strictly positive R data")
        if self.loss_space == "loglog_R" and np.any(R >= 1):
            raise DataError("loglog_R loss needs R < 1 at every point")
        if self.n_starts < 3 and self.starts is None:
            raise ConfigError("multi-start needs at least 3 starts")

    @property
    def names(self):
        return tuple(self.free)

    def to_params(self, x) -> dict:
        return dict(zip(self.names, (float(v) for v in x)))

    def _to_unit(self, x):
        return np.array([math.log(v / lo) / math.log(hi / lo) for v, (lo, hi) in zip(x, self.free.values())])

    def _from_unit(self, u):
        return np.array([lo * (hi / lo) ** min(max(t, 0.0), 1.0) for t, (lo, hi) in zip(u, self.free.values())])

    def start_points(self):
        if self.starts is not None:
            return [np.array([s[n] for n in self.names], dtype=float) for s in self.starts]
        fr = (np.arange(self.n_starts) + 1.0) / (self.n_starts + 1.0)
        return [self._from_unit(np.full(len(self.free), f)) for f in fr]


def corrected_data(problem: FitProblem, params: dict):
    """Data in smooth-surface space at the given σ: (R, R_err or None)."""
    d = problem.data
    if not problem.data_is_rough:
        return d.R, d.R_err
    f = problem.model.roughness_factor(params, d.theta_i)
    return d.R / f, (None if d.R_err is None else d.R_err / f)


def residuals(problem: FitProblem, x) -> np.ndarray:
    params = problem.to_params(x)
    for n, v in params.items():
        lo, hi = problem.free[n]
        if not lo * (1 - 1e-12) <= v <= hi * (1 + 1e-12):
            raise DataError(f"parameter {n}={v} outside bounds [{lo}, {hi}]")
    Rd, Rerr = corrected_data(problem, params)
    Rm = problem.model.smooth(params, problem.data.theta_i)
    space = problem.loss_space
    if np.any(Rm <= 0) or (space == "loglog_R" and np.any(Rm >= 1)):
        raise ResidualEvaluationError("model R left the domain of the loss transform")
    r = _transform(Rm, space) - _transform(Rd, space)
    if Rerr is not None:
        r = r / _transform_sigma(Rd, Rerr, space)
    return r


def loss(problem: FitProblem, x) -> float:
    r = residuals(problem, x)
    return float(r @ r)


@dataclass
class FitResult:
    estimates: dict
    uncertainties: dict
    residual_rms: float
    iterations: int
    converged: bool
    loss: float
    covariance: np.ndarray
    noise_scale: float  # loss increase corresponding to one standard deviation
    at_bound: tuple = ()
    starts: list = field(default_factory=list)  # (start, estimate, loss, success)

    @property
    def x(self):
        return np.array(list(self.estimates.values()))


def _hessian(f, x, rel=1e-3, bounds=None):
    n = len(x)
    h = np.array([rel * abs(v) for v in x])
    if bounds is not None:
        for i, (lo, hi) in enumerate(bounds):
            h[i] = min(h[i], 0.5 * (x[i] - lo) if x[i] - lo > 0 else h[i], 0.5 * (hi - x[i]) if hi - x[i] > 0 else h[i])
    f0 = f(x)
    H = np.zeros((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


def _noise_scale(problem, S, n_free):
    if problem.data.R_err is not None:
        return 1.0
    dof = len(problem.data) - n_free
    return S / dof if dof > 0 else float("nan")


def _minimise(problem, f, x0, fixed=None):
    """Bounded Nelder-Mead in normalised log coordinates."""
    u0 = problem._to_unit(x0)

    def g(u):
        return f(problem._from_unit(u))

    res = minimize(g, u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(u0),
                   options={"xatol": problem.xatol, "fatol": 1e-12, "maxiter": 2000 * len(u0)})
    return problem._from_unit(res.x), float(res.fun), bool(res.success), int(res.nit)


def fit(problem: FitProblem) -> FitResult:
    def f(x):
        return loss(problem, x)

    runs = []
    total_iter = 0
    last_error = None
    for x0 in problem.start_points():
        try:
            x, S, ok, nit = _minimise(problem, f, x0)
        except QReflError as exc:
            last_error = exc
            runs.append((x0, None, math.inf, False))
            continue
        total_iter += nit
        runs.append((x0, x, S, ok))
    good = [r for r in runs if r[3]]
    if not good:
        best = min(runs, key=lambda r: r[2])
        raise ConvergenceError(
            f"no start converged (last error: {last_error})", best=None if best[1] is None else problem.to_params(best[1]),
            best_loss=best[2],
        )
    x, S = min(good, key=lambda r: r[2])[1:3]
    p = len(x)
    scale = _noise_scale(problem, S, p)
    bounds = list(problem.free.values())
    try:
        H = _hessian(f, x, bounds=bounds)
        cov = 2.0 * np.linalg.inv(H) * scale
    except (np.linalg.LinAlgError, QReflError):
        cov = np.full((p, p), np.nan)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    at_bound = tuple(
        n for n, v in zip(problem.names, x) if abs(math.log(v / problem.free[n][0])) < 1e-3
        or abs(math.log(problem.free[n][1] / v)) < 1e-3
    )
    if at_bound:
        warnings.warn(f"best fit sits at a bound for {at_bound}; check data normalisation", stacklevel=2)
    return FitResult(
        estimates=problem.to_params(x),
        uncertainties=dict(zip(problem.names, (float(e) for e in err))),
        residual_rms=math.sqrt(S / len(problem.data)),
        iterations=total_iter,
        converged=True,
        loss=S,
        covariance=cov,
        noise_scale=scale,
        at_bound=at_bound,
        starts=[(problem.to_params(r[0]), None if r[1] is None else problem.to_params(r[1]), r[2], r[3]) for r in runs],
    )


@dataclass(frozen=True)
class ProfileInterval:
    parameter: str
    lower: float
    upper: float
    lower_open: bool = False
    upper_open: bool = False


def profile_uncertainty(problem: FitProblem, result: FitResult, parameter: str) -> ProfileInterval:
    """One-sigma interval where the profiled loss rises by ``result.noise_scale``.

    Other free parameters are re-optimised at every trial value.  A side that
    never reaches the threshold inside the bounds is reported open, with the
    bound as its value.
    """
    if parameter not in problem.free:
        raise ConfigError(f"{parameter!r} is not a free parameter of this fit")
    names = problem.names
    i = names.index(parameter)
    best = result.x
    S0 = result.loss
    target = result.noise_scale
    others = [n for n in names if n != parameter]
    lo_b, hi_b = problem.free[parameter]

    def prof(v):
        if not others:
            x = best.copy()
            x[i] = v
            return loss(problem, x) - S0
        sub = FitProblem(problem.data, problem.model, {n: problem.free[n] for n in others},
                         problem.loss_space, problem.data_is_rough, starts=[{n: result.estimates[n] for n in others}],
                         xatol=problem.xatol)

        def f(y):
            x = best.copy()
            x[[names.index(n) for n in others]] = y
            x[i] = v
            return loss(problem, x)

        _, S, _, _ = _minimise(sub, f, np.array([result.estimates[n] for n in others]))
        return min(S, f(np.array([result.estimates[n] for n in others]))) - S0

    sd = result.uncertainties.get(parameter)
    step0 = sd if sd and np.isfinite(sd) and sd > 0 else 0.01 * best[i]

    def side(sign, bound):
        v0 = best[i]
        step = step0
        prev = v0
        while True:
            v = v0 + sign * step
            if (sign > 0 and v >= bound) or (sign < 0 and v <= bound):
                if prof(bound) < target:
                    return bound, True
                v = bound
            d = prof(v) - target
            if d >= 0:
                g = lambda t: prof(t) - target
                a, b = (prev, v) if sign > 0 else (v, prev)
                return brentq(g, a, b, xtol=1e-10 * abs(v0), rtol=1e-10), False
            prev = v
            step *= 1.6

    lower, lo_open = side(-1, lo_b)
    upper, hi_open = side(+1, hi_b)
    return ProfileInterval(parameter, lower, upper, lo_open, hi_open)
