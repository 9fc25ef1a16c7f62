"""Command-line interface: ``qrefl <subcommand> [options]``."""
from __future__ import annotations

import argparse
import datetime
import sys
import warnings

import numpy as np

from . import __version__
from .asymptotics import (
    SystemParameters,
    fit_asymptote_line,
    loglog_transform,
    validity_window,
)
from .beamscan import normal_energy, normal_wavenumber, simulate_scan
from .config import RunConfig, load_config
from .dataset import config_header, format_table, parse_dataset, with_kinematics
from .errors import ConfigError, DataError, QReflError
from .fitting import FitProblem, ForwardModel, fit, profile_uncertainty
from .potential import evaluate, reflection_distance_r0
from .roughness import roughness_factor, smooth_from_rough
from .solver import critical_energy_wkb, solve_reflection
from .units import energy_from_wavenumber


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    s = cfg.scan
    if getattr(args, "theta_min", None) is not None:
        s.theta_min_deg = args.theta_min
    if getattr(args, "theta_max", None) is not None:
        s.theta_max_deg = args.theta_max
    if getattr(args, "theta_steps", None) is not None:
        s.theta_steps = args.theta_steps
    if getattr(args, "margin", None) is not None:
        cfg.asymptote.margin = args.margin
    if getattr(args, "free", None):
        cfg.fit.free = [v.strip() for v in args.free.split(",") if v.strip()]
    return cfg.validate()


def _emit(args, cfg, columns, data, extra_meta=None):
    meta = {"qrefl": __version__, "command": args.command}
    meta.update(extra_meta or {})
    meta["config"] = config_header(cfg.to_dict())
    footer = None
    if not args.deterministic:
        footer = "generated: " + datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    text = format_table(columns, data, meta, footer)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read(path, cfg, column="R", kinematics=True):
    if path is None:
        raise DataError("this subcommand needs --input")
    try:
        curve = parse_dataset(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if kinematics:
        curve = with_kinematics(curve, cfg.beam_model(), cfg.material.well_minimum_a)
    if column != "R":
        vals = getattr(curve, column, None) if column == "R_rough" else None
        if vals is None:
            raise DataError(f"{path}: no column {column!r}")
        curve = type(curve)(curve.theta_i, curve.k_normal, curve.k_i_a, vals, None, None, (), curve.metadata)
    return curve


def cmd_potential(args, cfg):
    p = cfg.potential_model()
    r = np.geomspace(args.r_min, args.r_max, args.r_steps)
    V = evaluate(p, r)
    vdw = -p.c3 / r**3
    cas = -p.c4 / r**4
    _emit(args, cfg, ["r_A", "V_meV", "V_vdw_meV", "V_casimir_meV"], [r, V, vdw, cas])


def cmd_solve(args, cfg):
    ctx = cfg.ctx()
    p = cfg.potential_model()
    st = cfg.solver_settings()
    if args.k:
        ks = [float(v) for v in args.k.split(",")]
    else:
        th = np.radians(cfg.theta_grid_deg())
        ks = list(np.atleast_1d(normal_wavenumber(cfg.beam_model(), th)))
    cols = {n: [] for n in ("k", "E_meV", "R", "steps", "matching_residual", "r_min_A", "r_max_A")}
    for k in ks:
        sol = solve_reflection(st.problem(p, k, ctx))
        cols["k"].append(k)
        cols["E_meV"].append(energy_from_wavenumber(ctx, k))
        cols["R"].append(sol.R)
        cols["steps"].append(float(sol.steps_taken))
        cols["matching_residual"].append(sol.matching_residual)
        cols["r_min_A"].append(sol.r_min_used)
        cols["r_max_A"].append(sol.r_max_used)
    _emit(args, cfg, list(cols), list(cols.values()))


def cmd_scan(args, cfg):
    theta = np.radians(cfg.theta_grid_deg())
    curve = simulate_scan(cfg.beam_model(), cfg.potential_model(), theta, cfg.roughness_model(),
                          a=cfg.material.well_minimum_a, nodes=cfg.scan.nodes, settings=cfg.solver_settings())
    for i, msg in curve.failures:
        print(f"warning: point {i} failed: {msg}", file=sys.stderr)
    cols, data = ["k_i_a", "R"], [curve.k_i_a, curve.R]
    if curve.R_rough is not None:
        cols.append("R_rough")
        data.append(curve.R_rough)
    _emit(args, cfg, cols, data, {"failed_points": len(curve.failures)})


def cmd_correct(args, cfg):
    m = cfg.roughness_model()
    if m is None:
        raise ConfigError("correct needs roughness.enabled: true")
    curve = _read(args.input, cfg, args.column)
    has_err = curve.R_err is not None
    err = curve.R_err if has_err else np.zeros(len(curve))
    out = [smooth_from_rough(m, k, t, R, e) for k, t, R, e in zip(curve.k_normal, curve.theta_i, curve.R, err)]
    absc = curve.metadata.get("abscissa", "theta_deg")
    x = np.degrees(curve.theta_i) if absc == "theta_deg" else curve.k_i_a
    cols, data = [absc, "R"], [x, [o.value for o in out]]
    if has_err:
        # statistical part only, so that a fit of this table weights points
        # exactly as a fit of the raw data would
        cols.append("R_err")
        f = np.array([roughness_factor(m, k, t) for k, t in zip(curve.k_normal, curve.theta_i)])
        data.append(curve.R_err / f)
    cols += ["R_band_minus", "R_band_plus"]
    data += [[o.err_minus for o in out], [o.err_plus for o in out]]
    _emit(args, cfg, cols, data)


def _window_scan(cfg, win, points=40):
    ctx = cfg.ctx()
    p = cfg.potential_model()
    st = cfg.solver_settings()
    lo, hi = win.k_bounds()
    ks = np.geomspace(lo, hi, points + 2)[1:-1]
    R = np.array([solve_reflection(st.problem(p, float(k), ctx)).R for k in ks])
    return ks * cfg.material.well_minimum_a, R


def cmd_asymptote(args, cfg):
    ctx = cfg.ctx()
    a = cfg.material.well_minimum_a
    sysp = SystemParameters.from_potential(ctx, cfg.potential_model(), a, cfg.material.well_depth_V0)
    win = validity_window(cfg.asymptote.n, sysp, cfg.asymptote.margin)
    if args.input:
        curve = _read(args.input, cfg, args.column, kinematics=False)
        if np.any(~np.isfinite(curve.k_i_a)):
            curve = with_kinematics(curve, cfg.beam_model(), a)
        ka, R, Rerr = curve.k_i_a, curve.R, curve.R_err
    else:
        if win.empty:
            raise DataError(f"the n={win.n} validity window is empty at margin {win.margin:g}")
        ka, R = _window_scan(cfg, win)
        Rerr = None
    pts = loglog_transform(ka, R, Rerr)
    for i, why in pts.rejected:
        print(f"warning: point {i} rejected: {why}", file=sys.stderr)
    lf = fit_asymptote_line(pts, a, win, weighted=args.weighted)
    nan = "nan"
    meta = {
        "window_n": win.n, "window_kbeta": f"{win.lower!r} {win.upper!r}",
        "slope": repr(lf.slope), "intercept": repr(lf.intercept),
        "n_inferred": repr(lf.n_inferred), "n_nearest": lf.n_nearest,
        "beta_inferred_A": nan if lf.beta_inferred is None else repr(lf.beta_inferred),
        "C_n_inferred": nan if lf.beta_inferred is None else repr(lf.c_n(ctx)),
        "physical": lf.physical, "residual_rms": repr(lf.residual_rms),
        "points_used": lf.n_points,
    }
    inside = win.contains_ka(np.exp(pts.x), a)
    _emit(args, cfg, ["ln_k_i_a", "ln_minus_ln_R", "in_window"], [pts.x, pts.y, inside.astype(float)], meta)


def cmd_fit(args, cfg):
    curve = _read(args.input, cfg, args.column)
    f = cfg.fit
    model = ForwardModel(cfg.beam_model(), cfg.c4(), cfg.potential.l, cfg.roughness_model(),
                         a=cfg.material.well_minimum_a, nodes=cfg.scan.nodes, settings=cfg.solver_settings())
    free = {n: tuple(f.bounds[n]) for n in f.free}
    rough = f.data_is_rough or args.column == "R_rough"
    prob = FitProblem(curve, model, free, f.loss_space, rough, n_starts=f.n_starts)
    res = fit(prob)
    names = list(free)
    cols = [names, [res.estimates[n] for n in names], [res.uncertainties[n] for n in names]]
    headers = ["parameter", "estimate", "uncertainty"]
    if args.profile:
        lo, hi = [], []
        for n in names:
            iv = profile_uncertainty(prob, res, n)
            lo.append(iv.lower)
            hi.append(iv.upper)
        headers += ["profile_lower", "profile_upper"]
        cols += [lo, hi]
    meta = {"loss": repr(res.loss), "residual_rms": repr(res.residual_rms),
            "iterations": res.iterations, "converged": res.converged,
            "at_bound": ",".join(res.at_bound) or "none"}
    _emit(args, cfg, headers, cols, meta)


def cmd_diagnose(args, cfg):
    ctx = cfg.ctx()
    p = cfg.potential_model()
    mat = cfg.material
    a = mat.well_minimum_a
    sysp = SystemParameters.from_potential(ctx, p, a, mat.well_depth_V0)
    rows = [("C4", p.c4, "meV A^4"), ("l", p.l, "A"), ("C3", p.c3, "meV A^3"),
            ("rho", sysp.rho, "1"), ("beta3", sysp.beta3, "A"), ("beta4", sysp.beta4, "A")]
    for n in (3, 4):
        w = validity_window(n, sysp, cfg.asymptote.margin)
        e_lo, e_hi = w.energy_bounds(ctx)
        rows += [(f"window{n}_kbeta_lower", w.lower, "1"), (f"window{n}_kbeta_upper", w.upper, "1"),
                 (f"window{n}_E_lower", e_lo, "meV"), (f"window{n}_E_upper", e_hi, "meV"),
                 (f"window{n}_empty", float(w.empty), "bool")]
        if w.quoted_lower_energy is not None:
            rows.append((f"window{n}_E_lower_quoted", w.quoted_lower_energy, "meV"))
    ec = critical_energy_wkb(p, ctx)
    rows += [("E_critical_wkb", ec, "meV"), ("E_critical_wkb_over_V0", ec / mat.well_depth_V0, "1")]
    beam = cfg.beam_model()
    th = np.radians([cfg.scan.theta_min_deg, cfg.scan.theta_max_deg])
    E = np.atleast_1d(normal_energy(beam, th))
    for tag, e in (("max", E.max()), ("min", E.min())):
        rows += [(f"E_scan_{tag}", e, "meV"), (f"r0_at_E_scan_{tag}", reflection_distance_r0(p, e), "A")]
    _emit(args, cfg, ["quantity", "value", "unit"], [list(c) for c in zip(*rows)])


COMMANDS = {
    "potential": cmd_potential, "solve": cmd_solve, "scan": cmd_scan, "correct": cmd_correct,
    "asymptote": cmd_asymptote, "fit": cmd_fit, "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                        help="omit the timestamp footer (default: on)")
    angles = argparse.ArgumentParser(add_help=False)
    angles.add_argument("--theta-min", type=float, help="degrees")
    angles.add_argument("--theta-max", type=float, help="degrees")
    angles.add_argument("--theta-steps", type=int)
    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", help="dataset file")
    data.add_argument("--column", default="R", choices=["R", "R_rough"], help="measured column")

    ap = argparse.ArgumentParser(prog="qrefl", description="Quantum reflection of atoms from surfaces.")
    ap.add_argument("--version", action="version", version=f"qrefl {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("potential", parents=[common], help="tabulate V(r)")
    sp.add_argument("--r-min", type=float, default=1.0)
    sp.add_argument("--r-max", type=float, default=1e4)
    sp.add_argument("--r-steps", type=int, default=200)
    sp = sub.add_parser("solve", parents=[common, angles], help="R at given normal wavenumbers")
    sp.add_argument("--k", help="comma-separated k in 1/A (default: scan angles)")
    sub.add_parser("scan", parents=[common, angles], help="simulate a reflectivity scan")
    sub.add_parser("correct", parents=[common, data], help="remove roughness from measured R")
    sp = sub.add_parser("asymptote", parents=[common, data], help="ln(-ln R) analysis")
    sp.add_argument("--margin", type=float)
    sp.add_argument("--weighted", action="store_true")
    sp = sub.add_parser("fit", parents=[common, data], help="fit l, sigma, c4 to a dataset")
    sp.add_argument("--free", help="comma-separated subset of l,sigma,c4")
    sp.add_argument("--profile", action="store_true", help="add profile-likelihood intervals")
    sp = sub.add_parser("diagnose", parents=[common, angles], help="system parameters and windows")
    sp.add_argument("--margin", type=float)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda m, *a, **k: print(f"warning: {m}", file=sys.stderr)
            cfg = _apply_overrides(load_config(args.config), args)
            COMMANDS[args.command](args, cfg)
    except QReflError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
