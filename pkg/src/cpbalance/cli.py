"""Command-line entry point: ``cpbalance <verb> [options]``.

Exit codes: 0 success, 1 configuration error, 2 verification failure,
3 infeasible or unstable request.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import reporting
from .config import ExperimentConfig
from .errors import ConfigError, CpBalanceError, DegenerateRegionError
from .gain_design import (
    PlateauWarning,
    design_point,
    instability_tau,
    optimal_gain,
    sweep_tau,
    tau_threshold_seconds,
)
from .robust_tube import feasibility_check, invariant_tube, ratio_closed_form, ratio_series
from .simulator import DisturbanceModel, generate_reference, rollout, sweep_and_measure, worst_case_horizon
from .stability import Gains, default_plot_window, is_stable, reference_curves, region_raster, stability_region
from .verification import CHECKS, run_checks

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_INFEASIBLE = 0, 1, 2, 3


def _emit(cfg: ExperimentConfig, name: str, csv_text: str | None = None, svg_text: str | None = None) -> list[Path]:
    written = []
    if csv_text is not None and "csv" in cfg.formats:
        written.append(reporting.write_atomic(cfg.out_dir / f"{name}.csv", csv_text))
    if svg_text is not None and "svg" in cfg.formats:
        written.append(reporting.write_atomic(cfg.out_dir / f"{name}.svg", svg_text))
    for p in written:
        print(f"wrote {p}")
    return written


def cmd_stability_region(cfg: ExperimentConfig, args) -> int:
    params = cfg.params()
    try:
        reg = stability_region(params)
    except DegenerateRegionError as e:
        raise ConfigError(f"system.tau: {e}") from None
    n = args.resolution or cfg["region"]["resolution"]
    (l0, l1), (k0, k1) = default_plot_window(params)
    rows = region_raster(params, np.linspace(l0, l1, n), np.linspace(k0, k1, n))
    print(f"omega={params.omega:g} 1/s, tau={params.tau:g} s, omega*tau={params.omega_tau:.6g}")
    print(f"lambda in ({reg.lambda_min:.17g}, {reg.lambda_max:.17g}) s")
    print(f"1/k    in ({reg.k_inv_min:.17g}, {reg.k_inv_max:.17g})")
    print(f"k*lambda < {reg.k_lambda_max:.17g} s")
    svg = reporting.region_svg(params, rows, n, n, reg.vertices(), reference_curves(params)) if "svg" in cfg.formats else None
    _emit(cfg, "region", reporting.region_csv(rows), svg)
    return EXIT_OK


def cmd_ratio(cfg: ExperimentConfig, args) -> int:
    taus = args.tau or [cfg.params().tau]
    print(f"{'k':>8} {'tau_s':>9} {'omega_tau':>10} {'branch':>10} {'r':>14} {'rk':>14} valid")
    any_invalid = False
    for k in cfg.k_values():
        g = cfg.gains(k)
        for tau in taus:
            params = cfg.params(tau)
            if cfg.cp_line:
                r = ratio_closed_form(params, g)
                e = math.expm1(params.omega_tau)
                branch = "undefined" if r is None else ("plateau" if (k - 1.0) * e <= 1.0 else "degrading")
            else:
                r = ratio_series(params, g) if is_stable(g, params) else None
                branch = "series" if r is not None else "undefined"
            any_invalid |= r is None
            rs = "-" if r is None else f"{r:.10g}"
            rk = "-" if r is None else f"{r * k:.10g}"
            print(f"{k:>8.4g} {tau:>9.4g} {params.omega_tau:>10.5g} {branch:>10} {rs:>14} {rk:>14} {r is not None}")
    return EXIT_INFEASIBLE if any_invalid else EXIT_OK


def cmd_design(cfg: ExperimentConfig, args) -> int:
    budget = cfg.budget()
    k_star, p_star = optimal_gain(budget)
    tau0 = tau_threshold_seconds(k_star, cfg.omega)
    print(f"budget: xi_hat_span={budget.xi_hat_span:g} m, n_hat_span={budget.n_hat_span:g} m")
    print(f"k*        = {k_star:.10g}")
    print(f"p*_span   = {p_star:.10g} m ({100 * p_star:.6g} cm)")
    print(f"tau0      = {tau0:.10g} s ({1000 * tau0:.4g} ms)")
    print(f"unstable  at tau >= {instability_tau(k_star, cfg.omega):.6g} s")
    params = cfg.params()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PlateauWarning)
        if params.tau > tau0:
            warnings.warn(f"tau={params.tau:g} s exceeds tau0={tau0:.4g} s; the closed-form optimum does not apply",
                          PlateauWarning)
        dp = design_point(budget, params, k_star)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if not dp.feasible:
        print(f"at tau={params.tau:g} s: closed loop unstable")
        return EXIT_INFEASIBLE
    print(f"at tau={params.tau:g} s: r={dp.r:.10g}, p_span={dp.p_span:.10g} m")
    gains = Gains.cp_line(k_star, cfg.omega)
    rep = feasibility_check(cfg.interval("p_ref_range"), cfg.interval("support_polygon"), cfg.interval("n_set"),
                            params, gains, cfg.w(k_star))
    lo, hi = rep.tightened_bounds
    tight = f"[{lo:.6g}, {hi:.6g}]" + (" (empty)" if rep.tightened.is_empty else "")
    print(f"CoP error bound KZ+W = [{rep.cop_error.lo:.6g}, {rep.cop_error.hi:.6g}] m")
    print(f"tightened CoP set P-N-KZ-W = {tight}; margin {rep.cop_margin:.3g} m; feasible={rep.feasible}")
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def cmd_sweep_tau(cfg: ExperimentConfig, args) -> int:
    budget, k = cfg.budget(), cfg.k
    grid = cfg.tau_grid()
    pts = sweep_tau(budget, k, grid, cfg.omega)
    tau0 = tau_threshold_seconds(k, cfg.omega)
    plateau = [d.p_span for d in pts if d.feasible and d.tau <= tau0]
    print(f"k={k:g}, omega={cfg.omega:g}: tau0={1000 * tau0:.4g} ms, unstable from {1000 * instability_tau(k, cfg.omega):.4g} ms")
    if plateau:
        print(f"plateau span {100 * plateau[0]:.6g} cm (variation {max(plateau) - min(plateau):.2e} m)")
    print(f"{sum(not d.feasible for d in pts)} of {len(pts)} grid points infeasible")
    svg = reporting.sweep_svg(pts, tau0) if "svg" in cfg.formats else None
    _emit(cfg, "sweep_tau", reporting.sweep_csv(pts), svg)
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    sim = cfg["simulation"]
    taus = args.tau or sim["taus"]
    budget = cfg.budget()
    gains = cfg.gains()
    dist_cfg = sim["disturbance"]
    plan = cfg.plan()
    any_diverged = False
    for tau in taus:
        params = cfg.params(tau)
        ref = generate_reference(plan, params, cfg.base_tick)
        dm = DisturbanceModel(dist_cfg.get("kind", "worst_case_sign"), budget.xi_hat_span, budget.n_hat_span,
                              seed=sim["seed"], freq=dist_cfg.get("freq", 0.5), level=dist_cfg.get("level", 1.0),
                              horizon=dist_cfg.get("horizon"))
        tr = rollout(params, gains, ref, dm, divergence_limit=sim["divergence_limit"])
        bound = None
        if is_stable(gains, params):
            bound = ratio_series(params, gains, 1e-10) * budget.disturbance_span(gains.k)
        b = "unstable" if bound is None else f"{100 * bound:.5g} cm"
        print(f"tau={1000 * tau:g} ms: p~ span {100 * tr.p_tilde_span:.5g} cm, "
              f"at updates {100 * tr.p_tilde_span_at_updates:.5g} cm (bound {b}), "
              f"max|xi~| {100 * tr.max_abs_xi_tilde:.4g} cm, diverged={tr.diverged}")
        any_diverged |= tr.diverged
        name = f"trace_tau{1000 * tau:g}ms"
        svg = reporting.trace_svg(tr, f"{plan.axis} CP/CoP, k={gains.k:g}, tau={1000 * tau:g} ms") if "svg" in cfg.formats else None
        _emit(cfg, name, reporting.trace_csv(tr), svg)
    if args.measure:
        rows = sweep_and_measure(cfg.omega, gains, budget, taus, trials=sim["trials"], seed=sim["seed"],
                                 base_tick=cfg.base_tick)
        for r in rows:
            a = "-" if r.analytic_span is None else f"{100 * r.analytic_span:.5g}"
            print(f"measure tau={1000 * r.tau:g} ms: analytic {a} cm, worst-case {100 * r.worst_case_span:.5g} cm, "
                  f"random {100 * r.random_span:.5g} cm, diverged={r.diverged}")
        _emit(cfg, "measure", reporting.measure_csv(rows))
    return EXIT_INFEASIBLE if any_diverged else EXIT_OK


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    names = list(args.only or cfg["verify"]["checks"] or CHECKS)
    unknown = [n for n in names + list(args.skip or []) if n not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown check(s) {unknown}; available: {sorted(CHECKS)}")
    names = [n for n in names if n not in set(args.skip or [])]
    results = run_checks(names, samples=cfg["verify"]["samples"], seed=cfg["simulation"]["seed"])
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {
    "stability-region": cmd_stability_region,
    "ratio": cmd_ratio,
    "design": cmd_design,
    "sweep-tau": cmd_sweep_tau,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment configuration")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="random seed (overrides simulation.seed)")
    common.add_argument("--format", choices=["csv", "svg", "both"], help="output formats")
    common.add_argument("--omega", type=float, help="pendulum natural frequency [1/s]")
    common.add_argument("--k", type=float, action="append", help="feedback gain (repeatable for ratio)")
    common.add_argument("--lambda", dest="lam", help="velocity weight [s] or 'cp-line'")
    common.add_argument("--tau", type=float, action="append", help="sampling period [s] (repeatable for ratio/simulate)")
    common.add_argument("--xi-span", type=float, help="CP estimation error span [m]")
    common.add_argument("--n-span", type=float, help="model error span [m]")

    parser = argparse.ArgumentParser(prog="cpbalance", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("stability-region", parents=[common], help="stable (lambda, 1/k) triangle and gray region")
    p.add_argument("--resolution", type=int, help="raster points per axis (default 400)")
    sub.add_parser("ratio", parents=[common], help="amplification ratio per (k, tau)")
    sub.add_parser("design", parents=[common], help="optimal gain, minimal span, tau0")
    p = sub.add_parser("sweep-tau", parents=[common], help="CoP error span vs sampling period")
    p.add_argument("--tau-min", type=float)
    p.add_argument("--tau-max", type=float)
    p.add_argument("--tau-step", type=float)
    p = sub.add_parser("simulate", parents=[common], help="closed-loop rollouts")
    p.add_argument("--disturbance", choices=["none", "worst_case_sign", "uniform_random", "constant", "sinusoidal"])
    p.add_argument("--trials", type=int)
    p.add_argument("--measure", action="store_true", help="also run the analytic vs empirical sweep")
    p = sub.add_parser("verify", parents=[common], help="run the oracle cross-checks")
    p.add_argument("--only", action="append", metavar="CHECK", help=f"run only these checks: {', '.join(CHECKS)}")
    p.add_argument("--skip", action="append", metavar="CHECK", help="skip these checks")
    p.add_argument("--samples", type=int, help="random samples per sampled check")
    return parser


def _overrides(args) -> dict:
    o: dict = {}

    def put(section, key, value):
        if value is not None:
            o.setdefault(section, {})[key] = value

    put("output", "dir", args.out)
    put("output", "format", args.format)
    put("simulation", "seed", args.seed)
    put("system", "omega", args.omega)
    if args.k:
        put("gains", "k", args.k if len(args.k) > 1 else args.k[0])
    if args.lam is not None:
        try:
            put("gains", "lambda", args.lam if args.lam == "cp-line" else float(args.lam))
        except ValueError:
            raise ConfigError(f"--lambda: expected a number or 'cp-line', got {args.lam!r}") from None
    if args.tau and args.command not in ("ratio", "simulate"):
        put("system", "tau", args.tau[0])
    put("budget", "xi_hat_span", args.xi_span)
    put("budget", "n_hat_span", args.n_span)
    if args.command == "sweep-tau" and any(v is not None for v in (args.tau_min, args.tau_max, args.tau_step)):
        put("system", "tau_grid", {"start": args.tau_min or 0.01, "stop": args.tau_max or 0.34,
                                   "step": args.tau_step or 0.001})
    if args.command == "simulate":
        if args.disturbance:
            put("simulation", "disturbance", {"kind": args.disturbance})
        put("simulation", "trials", args.trials)
    if args.command == "verify":
        put("verify", "samples", args.samples)
    return o


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config, _overrides(args))
        return COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CpBalanceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
