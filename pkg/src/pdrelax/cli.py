"""Command-line entry point: ``pdrelax <subcommand> ...``.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numeric failure.  Errors are reported as one JSON object on stderr.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import config as C
from . import report as R
from .errors import ConfigurationError, NumericFailure, PdRelaxError, ValidationFailure
from .euler_solver import init_data, simulate
from .fieldio import read_field, read_fields, write_fields
from .littlewood_paley import BesovIndex, SpectralField, besov_norm, split_norms
from .pme_solver import PmeState, simulate_pme
from .relaxation import ERROR_COLUMNS, X_SUMMANDS, run_sweep, uniform_bound_check
from .sk_analysis import lyapunov_search, omega_samples, sk_condition
from .spectral_symbol import asymptotic_check, sweep
from .system_model import validate


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def _emit(text, path=None):
    if path is None:
        sys.stdout.write(text)
    else:
        R.write_text(path, text)


def _r_value(text):
    return float("inf") if text.strip().lower() in ("inf", "infinity") else float(text)


def _omegas(system, count):
    return omega_samples(system.d, count) if count else None


# -- subcommands ------------------------------------------------------------------

def cmd_validate(args):
    cfg = C.resolve(C.load_config(args.config))
    rep = validate(C.system_from_config(cfg))
    _emit(R.json_text(rep.to_dict()), args.out)
    if not rep.all_ok:
        raise ValidationFailure("structural hypotheses fail")


def cmd_sk_check(args):
    cfg = C.resolve(C.load_config(args.config))
    system = C.system_from_config(cfg)
    rep = sk_condition(system, _omegas(system, args.omega_samples))
    _emit(R.json_text(rep.to_dict()), args.out)
    if not rep.sk_holds:
        raise ValidationFailure("the SK condition fails")


def cmd_lyapunov(args):
    cfg = C.resolve(C.load_config(args.config))
    system = C.system_from_config(cfg)
    rho = np.logspace(-3, 3, args.rho_points)
    cert = lyapunov_search(system, rho_grid=rho, omegas=_omegas(system, args.omega_samples))
    _emit(R.json_text(cert.to_dict()), args.out)


def cmd_symbol_sweep(args):
    cfg = C.resolve(C.load_config(args.config))
    system = C.system_from_config(cfg)
    if not (args.xi_max > 0 and args.points >= 2 and args.epsilon > 0):
        raise ConfigurationError("need --xi-max > 0, --epsilon > 0 and --points >= 2")
    xi = args.xi_max * np.arange(1, args.points + 1) / args.points
    curve = sweep(system, args.epsilon, xi)
    summary = {"epsilon": args.epsilon, "omega": list(curve.omega),
               "transition": None if curve.transition is None else list(curve.transition),
               "points": args.points, "xi_max": args.xi_max}
    if validate(system).struct_A11_zero and np.any(args.epsilon * xi <= 0.1):
        a = asymptotic_check(curve, args.epsilon, system)
        summary["asymptotics"] = {"slow_branch_ratio": a.slow_branch_ratio,
                                  "fast_branch_ratio": a.fast_branch_ratio,
                                  "points": a.points, "passed": a.passed}
    _emit(R.json_text(summary), args.out)
    lam = curve.eigenvalues
    n = lam.shape[1]
    options = {"epsilon": args.epsilon, "xi_max": args.xi_max, "points": args.points}
    if args.csv:
        cols = (["xi"] + [f"re_lambda_{i + 1}" for i in range(n)]
                + [f"im_lambda_{i + 1}" for i in range(n)]
                + ["regime"])
        rows = [[x] + list(l.real) + list(l.imag) + [reg]
                for x, l, reg in zip(curve.xi, lam, curve.regimes)]
        R.write_text(args.csv, R.csv_text(cols, rows, "symbol-sweep", options, cfg))
    if args.svg:
        re = np.sort(lam.real, axis=1)
        positive = np.all(re > 0)
        series = [R.Series(f"Re lambda_{i + 1}", tuple(curve.xi), tuple(re[:, i]), markers=False)
                  for i in range(n)]
        style = R.PlotStyle(title=f"decay rates, epsilon={args.epsilon:g}", xlabel="|xi|",
                            ylabel="Re lambda", logx=bool(positive), logy=bool(positive))
        R.emit_svg(series, args.svg, style)


def cmd_besov_norm(args):
    if args.component is None:
        f = read_field(args.field)
    else:
        comps = read_fields(args.field)
        if not 0 <= args.component < len(comps):
            raise ConfigurationError(f"{args.field}: no component {args.component}")
        f = comps[args.component]
    idx = BesovIndex(args.s, args.p, args.r)
    out = {"field": os.path.basename(args.field), "s": idx.s, "p": idx.p, "r": idx.r,
           "d": f.grid.d, "N": f.grid.N, "L_len": f.grid.L_len}
    if args.split is None:
        out["norm"] = besov_norm(f, idx)
    else:
        hi = idx if args.s_high is None else BesovIndex(args.s_high, args.p, args.r)
        low, high = split_norms(f, idx, hi, args.split)
        out.update({"J": args.split, "low": low, "high": high, "s_high": hi.s})
    _emit(R.json_text(out), args.out)


def _write_table(path, columns, rows, command, cfg):
    _emit(R.csv_text(columns, rows, command, {}, cfg), path)


def _euler_rows(traj):
    names = sorted(traj.records[0].norms) if traj.records else []
    cols = ["t", "mass", "energy", "damped_mode"] + names
    rows = [[r.t, r.mass, r.energy, r.damped_mode_norm] + [r.norms[k] for k in names]
            for r in traj.records]
    return cols, rows


def _snapshot_dir(path):
    if path:
        os.makedirs(path, exist_ok=True)
    return path


def cmd_simulate_euler(args):
    cfg = C.resolve(C.load_config(args.config), ("euler", "solver", "initial", "diagnostics"))
    params = C.euler_params(cfg)
    sc = C.solver_config(cfg)
    ini = cfg.section("initial")
    state = init_data(ini["kind"], ini["amplitude"], ini["seed"], sc.grid, params,
                      k0=ini["k0"], band=ini["band"], path=ini.get("path"))
    snap = _snapshot_dir(args.snapshots)
    if snap:
        sc = C.replace_snapshots(sc, args.snapshot_every)
    try:
        traj = simulate(state, sc, params.epsilon)
    except NumericFailure as exc:
        if exc.trajectory is not None and exc.trajectory.records:
            cols, rows = _euler_rows(exc.trajectory)
            _write_table(args.out, cols, rows, "simulate-euler", cfg)
        raise
    cols, rows = _euler_rows(traj)
    _write_table(args.out, cols, rows, "simulate-euler", cfg)
    if snap:
        for i, s in enumerate(traj.snapshots):
            write_fields(os.path.join(snap, f"euler_{i:05d}.fld"), [s.c_tilde, *s.v])


def _pme_rows(traj):
    names = sorted(traj.records[0].norms) if traj.records else []
    cols = ["t", "mass", "deviation_l2"] + names
    rows = [[r.t, r.mass, r.deviation_l2] + [r.norms[k] for k in names] for r in traj.records]
    return cols, rows


def cmd_simulate_pme(args):
    cfg = C.resolve(C.load_config(args.config), ("euler", "solver", "initial", "diagnostics"))
    params = C.euler_params(cfg)
    pc = C.pme_config(cfg)
    ini = cfg.section("initial")
    pert = init_data(ini["kind"], ini["amplitude"], ini["seed"], pc.grid, params,
                     k0=ini["k0"], band=ini["band"], path=ini.get("path")).c_tilde
    N0 = SpectralField(pc.grid, values=params.rho_bar + pert.values)
    snap = _snapshot_dir(args.snapshots)
    if snap:
        pc = C.replace_snapshots(pc, args.snapshot_every)
    try:
        traj = simulate_pme(PmeState(N0, 0.0, params), pc)
    except NumericFailure as exc:
        if exc.trajectory is not None and exc.trajectory.records:
            cols, rows = _pme_rows(exc.trajectory)
            _write_table(args.out, cols, rows, "simulate-pme", cfg)
        raise
    cols, rows = _pme_rows(traj)
    _write_table(args.out, cols, rows, "simulate-pme", cfg)
    if snap:
        for i, s in enumerate(traj.snapshots):
            write_fields(os.path.join(snap, f"pme_{i:05d}.fld"), [s.N_field])


def cmd_relax_sweep(args):
    cfg = C.resolve(C.load_config(args.config), ("euler", "grid", "sweep"))
    cfg.sections["grid"].setdefault("N", 512)
    sc = C.sweep_config(cfg)
    fit = len(sc.epsilons) >= 3 if args.fit is None else args.fit
    if fit and len(sc.epsilons) < 3:
        raise ConfigurationError(f"a rate fit needs at least three epsilons, got {len(sc.epsilons)}")
    rep = run_sweep(sc, fit=fit, workers=args.workers)
    out = rep.to_dict()
    out["config"] = C.emit_config(cfg)
    if args.uniform:
        out["uniform_unscaled"] = uniform_bound_check(sc, workers=args.workers).to_dict()
    _emit(R.json_text(out), args.out)
    if args.csv:
        cols = (["eps", "J", "steps", "dt"] + list(ERROR_COLUMNS) + ["X", "data_norm", "X_ratio"]
                + [f"X_{k}" for k in X_SUMMANDS])
        rows = [[r["eps"], r["J"], r["steps"], r["dt"]] + [r[c] for c in ERROR_COLUMNS]
                + [r["X"], r["data_norm"], r["X_ratio"]] + [r["X_summands"][k] for k in X_SUMMANDS]
                for r in rep.rows]
        opts = {"fit": fit}
        for c in rep.slopes:
            opts[f"slope_{c}"] = rep.slopes[c]
            opts[f"residual_{c}"] = rep.residuals[c]
        R.write_text(args.csv, R.csv_text(cols, rows, "relax-sweep", opts, cfg))
    if args.svg:
        eps = [r["eps"] for r in rep.rows]
        series = [R.Series(c, tuple(eps), tuple(r[c] for r in rep.rows)) for c in ERROR_COLUMNS]
        for c in rep.slopes:
            e = np.array(eps)
            fitted = np.exp(rep.intercepts[c]) * e ** rep.slopes[c]
            series.append(R.Series(f"fit {c}: slope {rep.slopes[c]:.3f}", tuple(eps),
                                   tuple(fitted), dashed=True, markers=False))
        style = R.PlotStyle(title="relaxation error against epsilon", xlabel="epsilon",
                            ylabel="error", logx=True, logy=True, width=760)
        R.emit_svg(series, args.svg, style)


# -- parser -----------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="pdrelax", description="Partially dissipative systems and relaxation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, helptext, config=True):
        sp = sub.add_parser(name, help=helptext)
        if config:
            sp.add_argument("--config", required=True, help="INI configuration file")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.set_defaults(func=fn)
        return sp

    add("validate", cmd_validate, "check structural hypotheses")
    sp = add("sk-check", cmd_sk_check, "Shizuta-Kawashima condition")
    sp.add_argument("--omega-samples", type=int, default=0, help="directions for d=2 (default 64)")
    sp = add("lyapunov", cmd_lyapunov, "search a Lyapunov certificate")
    sp.add_argument("--omega-samples", type=int, default=0)
    sp.add_argument("--rho-points", type=int, default=32)
    sp = add("symbol-sweep", cmd_symbol_sweep, "eigenvalues of the symbol along |xi|")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--xi-max", type=float, required=True)
    sp.add_argument("--points", type=int, default=400)
    sp.add_argument("--csv")
    sp.add_argument("--svg")
    sp = add("besov-norm", cmd_besov_norm, "Besov norm of a stored field", config=False)
    sp.add_argument("--field", required=True, help="binary field file or .csv")
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--r", type=_r_value, default=1.0)
    sp.add_argument("--split", type=int, help="threshold J for low/high norms")
    sp.add_argument("--component", type=int, help="component of a multi-field file (from 0)")
    sp.add_argument("--s-high", type=float, help="regularity of the high part (default --s)")
    for name, fn in (("simulate-euler", cmd_simulate_euler), ("simulate-pme", cmd_simulate_pme)):
        sp = add(name, fn, "time integration with diagnostics")
        sp.add_argument("--snapshots", help="directory for field snapshots")
        sp.add_argument("--snapshot-every", type=int, default=0,
                        help="steps between snapshots (default: from config, else final only)")
    sp = add("relax-sweep", cmd_relax_sweep, "epsilon sweep against the porous-media limit")
    sp.add_argument("--csv")
    sp.add_argument("--svg")
    sp.add_argument("--fit", action=argparse.BooleanOptionalAction, default=None,
                    help="fit log-log slopes (default: when at least three epsilons)")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--uniform", action="store_true",
                    help="also run the uniform bound in unscaled variables")
    return p


def _fail(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    suggested = getattr(exc, "suggested_dt", None)
    if suggested is not None:
        payload["suggested_dt"] = float(suggested)
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except PdRelaxError as exc:
        return _fail(exc, exc.exit_code)
    except OSError as exc:
        return _fail(exc, 2)
    except Exception as exc:  # noqa: BLE001  any other failure is numeric
        return _fail(exc, 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
