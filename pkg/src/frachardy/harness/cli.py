"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 solver failure,
3 verdict failure (a checked bound or property does not hold).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from ..errors import FracHardyError, ParameterError, RegimeError, SolverError
from ..fode import FodeProblem, blowup_time, lower_bound_check, volterra_solve
from ..fracops import TimeGrid
from ..pde_radial import RadialGrid, Thresholds, eigen_first, solve
from .config import ExperimentConfig, load_config_file, parse_float_list
from .experiments import (
    apriori_for,
    build_problem,
    build_spec,
    fode_comparison_campaign,
    identity_check,
    run_threshold_sweep,
    run_truncation_study,
    verify_apriori,
    verify_hardy,
)
from .io import OUTPUT_ENV, TRAJECTORY_COLUMNS, OutputBundle, to_jsonable, trajectory_rows

__all__ = ["cli_dispatch", "main", "build_parser", "EXIT_OK", "EXIT_USAGE", "EXIT_SOLVER", "EXIT_VERDICT"]

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERDICT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _number(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}") from None
        if isinstance(value, float) and math.isnan(value):
            raise argparse.ArgumentTypeError("nan is not allowed")
        return value

    return parse


def _level(text):
    if text.strip().lower() in ("none", "inf", "untruncated"):
        return "untruncated"
    return _number(float)(text)


def _exponent(text):
    return text if text in ("hardy", "printed") else _number(float)(text)


def _float_list(text):
    try:
        return parse_float_list(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


F, I = _number(float), _number(int)
# dest -> (flag, type, help)
OPTIONS = {
    "alpha": ("--alpha", F, "fractional order in (0, 1)"),
    "q": ("--q", F, "exponent of the scalar nonlinearity (> 1)"),
    "u0": ("--u0", F, "scalar initial value (> 0)"),
    "scheme": ("--scheme", str, "scalar stepper: trapezoid or l1"),
    "n": ("--n", F, "dimension (> p)"),
    "p": ("--p", F, "p-Laplacian exponent (> 2)"),
    "R": ("--R", F, "ball radius"),
    "mu_ratio": ("--mu-ratio", F, "coupling as a multiple of the Hardy constant"),
    "N": ("--N", _level, "truncation level (>= 1) or 'untruncated'"),
    "boundary_exponent": ("--boundary-exponent", _exponent, "hardy, printed, or a positive number"),
    "amplitude": ("--amplitude", F, "multiple of the unit-L2 bump used as u0"),
    "sigma": ("--sigma", F, "gradient regularization"),
    "m": ("--m", I, "radial nodes"),
    "steps": ("--steps", I, "time steps K"),
    "horizon": ("--horizon", F, "final time"),
    "grading": ("--grading", F, "time mesh grading exponent (1 = uniform)"),
    "l2_threshold": ("--l2-threshold", F, "blow-up threshold on the L2(Q_t) norm"),
    "w1p_threshold": ("--w1p-threshold", F, "blow-up threshold on the W^{1,p}(Q_t) seminorm"),
    "mu_ratios": ("--mu-ratios", _float_list, "comma-separated mu/Lambda values"),
    "schedule": ("--schedule", _float_list, "comma-separated truncation levels"),
    "trials": ("--trials", I, "number of random trials"),
    "slack": ("--slack", F, "slack factor on the a priori bounds"),
    "hardy_slack": ("--hardy-slack", F, "relative slack below the Hardy constant"),
    "step_list": ("--step-list", _float_list, "comma-separated step counts"),
    "min_order": ("--min-order", F, "required empirical order"),
    "workers": ("--workers", I, "parallel worker cap"),
    "seed": ("--seed", I, "random seed"),
}

METAVARS = {"n": "DIM", "N": "LEVEL", "R": "RADIUS", "p": "P"}
PDE = ["n", "p", "R", "mu_ratio", "N", "boundary_exponent", "amplitude", "sigma", "alpha", "m", "steps", "horizon", "grading", "l2_threshold", "w1p_threshold"]
COMMANDS = {
    "fode-solve": ("fode", ["alpha", "q", "u0", "scheme", "steps", "horizon", "grading"], "solve D^a u = u^q and check the lower bound"),
    "fode-blowup-time": ("fode", ["alpha", "q", "u0"], "closed-form blow-up time of the scalar subsolution"),
    "fode-compare": ("fode", ["trials", "seed", "steps", "horizon"], "random scalar comparison-principle campaign"),
    "pde-solve": ("pde", PDE, "solve the truncated radial problem"),
    "eigen": ("eigen", ["n", "p", "R", "mu_ratio", "N", "boundary_exponent", "m"], "weighted first eigenvalue"),
    "sweep": ("sweep", PDE + ["mu_ratios", "workers"], "bounded / blow-up classification across mu"),
    "truncation": ("truncation", PDE + ["schedule", "workers"], "distances between truncation levels"),
    "verify-apriori": ("verify", PDE + ["slack"], "check the space-time a priori bounds"),
    "verify-hardy": ("verify", ["n", "p", "R", "boundary_exponent", "m", "trials", "seed", "hardy_slack"], "Hardy inequality on random profiles"),
    "identity-check": ("verify", ["alpha", "step_list", "min_order"], "refinement study of the quadratic identity"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frachardy", description="Time-fractional p-Laplacian blow-up experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, dests, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--config", help="INI config file; flags override its values")
        sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV}/<command> or ./frachardy-out/<command>)")
        sp.add_argument("--no-files", action="store_true", help="print the summary without writing files")
        for dest in dests:
            flag, typ, h = OPTIONS[dest]
            sp.add_argument(flag, dest=dest, type=typ, default=None, help=h, metavar=METAVARS.get(dest))
    return parser


def _resolve(args) -> tuple[ExperimentConfig, set]:
    kind = COMMANDS[args.command][0]
    values = {}
    if args.config:
        values.update(load_config_file(args.config))
    for dest in COMMANDS[args.command][1]:
        v = getattr(args, dest)
        if v is not None:
            values[dest] = None if v == "untruncated" else v
    values["kind"] = kind
    if args.command == "fode-compare" and "trials" not in values:
        values["trials"] = 50
    explicit = set(values)
    config = ExperimentConfig(**values).validate()
    return config, explicit


def _output_dir(args, command: str) -> str:
    if args.out:
        return args.out
    root = os.environ.get(OUTPUT_ENV) or os.path.join(os.getcwd(), "frachardy-out")
    return os.path.join(root, command)


# handlers return (summary dict, verdict flag) and add files to the bundle


def _fode_solve(cfg: ExperimentConfig, explicit: set, bundle: OutputBundle):
    problem = FodeProblem(cfg.alpha, cfg.q, cfg.u0)
    est = blowup_time(problem)
    horizon = cfg.horizon
    if "horizon" not in explicit:
        horizon = 1.2 * est.t_m if math.isfinite(est.t_m) else 1.0
    grid = TimeGrid.graded(horizon, cfg.steps, cfg.grading)
    traj = volterra_solve(problem, grid, scheme=cfg.scheme)
    lb = lower_bound_check(traj, est, problem)
    bundle.add_csv("trajectory.csv", ("step", "time", "u"), [(k, grid.nodes[k], traj.values[k]) for k in range(traj.last_index + 1)])
    summary = {
        "case": est.case.value,
        "delta": est.params.delta,
        "t_m": est.t_m,
        "horizon": horizon,
        "blowup_flag": traj.blowup_flag,
        "blowup_time": traj.blowup_time,
        "flag_within_bound": traj.blowup_flag and traj.blowup_time <= 1.05 * est.t_m,
        "lower_bound_passed": lb.passed,
        "lower_bound_max_violation": lb.max_violation,
    }
    return summary, lb.passed


def _fode_blowup_time(cfg, explicit, bundle):
    problem = FodeProblem(cfg.alpha, cfg.q, cfg.u0)
    est = blowup_time(problem)
    summary = {
        "case": est.case.value,
        "delta": est.params.delta,
        "w0": est.params.w0,
        "t_m": est.t_m,
        "delta_printed": est.delta_printed,
        "t_m_printed": est.t_m_printed,
    }
    return summary, True


def _fode_compare(cfg, explicit, bundle):
    steps = cfg.steps if "steps" in explicit else 400
    horizon = cfg.horizon if "horizon" in explicit else 2.0
    results = fode_comparison_campaign(cfg.trials, cfg.seed, steps, horizon)
    rows = []
    for i, (params, rep) in enumerate(results):
        rows.append((i, params["alpha"], rep.lipschitz, rep.leading_coefficient_min, rep.precondition_ok, rep.ordered, rep.min_margin))
    bundle.add_csv("trials.csv", ("trial", "alpha", "lipschitz", "leading_coefficient_min", "precondition_ok", "ordered", "min_margin"), rows)
    ok = all(rep.precondition_ok and rep.ordered for _, rep in results)
    summary = {
        "trials": len(results),
        "violations": sum(1 for _, r in results if r.precondition_ok and not r.ordered),
        "precondition_failures": sum(1 for _, r in results if not r.precondition_ok),
        "min_margin": min((r.min_margin for _, r in results), default=None),
    }
    return summary, ok


def _pde_solve(cfg, explicit, bundle):
    problem = build_problem(cfg)
    report = solve(problem, _thr(cfg), store=False)
    bundle.add_csv("trajectory.csv", TRAJECTORY_COLUMNS, trajectory_rows(report))
    summary = {
        "mu": problem.mu,
        "hardy": problem.spec.hardy,
        "steps_completed": report.steps,
        "blowup_flag": report.blowup_flag,
        "blowup_time": report.blowup_time,
        "blowup_reason": report.blowup_reason,
        "thresholds": {"l2": report.thresholds.l2, "w1p": report.thresholds.w1p},
        "l2_q_norm": float(report.l2_q_norm[-1]),
        "w1p_q_norm": float(report.w1p_q_norm[-1]),
        "grad_p_integral": float(report.grad_p_integral[-1]),
        "lp_integral": float(report.lp_integral[-1]),
        "picard_sweeps": report.picard_sweeps,
        "newton_fallbacks": report.newton_fallbacks,
    }
    return summary, True


def _thr(cfg):
    return Thresholds(cfg.l2_threshold, cfg.w1p_threshold)


def _eigen(cfg, explicit, bundle):
    spec = build_spec(cfg)
    grid = RadialGrid(spec.domain, cfg.m)
    res = eigen_first(spec, cfg.N, grid)
    bundle.add_csv("profile.csv", ("node", "r", "profile"), [(j, grid.nodes[j], res.profile[j]) for j in range(grid.m)])
    summary = {
        "lambda_n": res.lambda_n,
        "hardy": spec.hardy,
        "ratio_to_hardy": res.lambda_n / spec.hardy,
        "residual": res.residual,
        "iterations": res.iterations,
        "mu_above_lambda": spec.mu > res.lambda_n,
    }
    return summary, True


def _sweep(cfg, explicit, bundle):
    rep = run_threshold_sweep(cfg)
    table = rep.table()
    cols = ("mu_ratio", "mu", "status", "blowup_time", "certified", "subsolution_t_m", "error")
    bundle.add_csv("phase_table.csv", cols, [tuple(row[c] for c in cols) for row in table])
    summary = {"hardy": rep.hardy, "cells": table}
    ok = all(row["status"] != "error" and row["certified"] is not False for row in table)
    return summary, ok


def _truncation(cfg, explicit, bundle):
    rep = run_truncation_study(cfg)
    cols = ("N", "N_next", "levels", "l2_distance", "lp_distance", "monotonicity_violation")
    bundle.add_csv("distances.csv", cols, [tuple(getattr(p, c) for c in cols) for p in rep.pairs])
    summary = {
        "schedule": list(rep.schedule),
        "distances_decreasing": rep.distances_decreasing,
        "max_monotonicity_violation": rep.max_monotonicity_violation,
        "errors": {repr(k): v for k, v in rep.errors.items()},
        "blowup": {repr(k): v for k, v in rep.blowup.items()},
    }
    return summary, not rep.errors


def _verify_apriori(cfg, explicit, bundle):
    problem = build_problem(cfg)
    if not problem.mu < problem.spec.hardy:
        raise RegimeError("verify-apriori needs mu below the Hardy constant")
    constants = apriori_for(problem)
    report = solve(problem, _thr(cfg), store=False)
    bundle.add_csv("trajectory.csv", TRAJECTORY_COLUMNS, trajectory_rows(report))
    verdict = verify_apriori(report, constants, cfg.slack)
    summary = {
        "constants": {k: getattr(constants, k) for k in ("epsilon", "omega0", "gamma", "c3", "a1", "a2", "hardy", "mu")},
        "grad_integral": verdict.grad_integral,
        "lp_integral": verdict.lp_integral,
        "grad_ratio": verdict.grad_ratio,
        "lp_ratio": verdict.lp_ratio,
        "slack": verdict.slack,
        "passed": verdict.passed,
    }
    return summary, verdict.passed


def _verify_hardy(cfg, explicit, bundle):
    spec = build_spec(cfg, 0.0)
    m = cfg.m if "m" in explicit else 2000
    grid = RadialGrid(spec.domain, m)
    v = verify_hardy(spec, grid, cfg.trials, cfg.seed, cfg.hardy_slack)
    bundle.add_csv("ratios.csv", ("trial", "ratio", "ratio_to_hardy"), [(i, r, r / v.hardy) for i, r in enumerate(v.ratios)])
    summary = {
        "hardy": v.hardy,
        "min_ratio": v.min_ratio,
        "min_ratio_to_hardy": v.min_ratio / v.hardy,
        "threshold": v.threshold,
        "near_extremal_ratio_to_hardy": v.near_extremal_ratio / v.hardy,
        "closed_form_ratio_to_hardy": v.closed_form_ratio / v.hardy,
        "passed": v.passed,
    }
    return summary, v.passed


def _identity_check(cfg, explicit, bundle):
    rep = identity_check(cfg.alpha, tuple(int(k) for k in cfg.step_list))
    bundle.add_csv("residuals.csv", ("steps", "residual"), list(zip(rep.steps, rep.residuals)))
    ok = bool(rep.orders) and rep.min_order >= cfg.min_order
    summary = {"alpha": rep.alpha, "orders": list(rep.orders), "min_order": rep.min_order, "required": cfg.min_order, "passed": ok}
    return summary, ok


HANDLERS = {
    "fode-solve": _fode_solve,
    "fode-blowup-time": _fode_blowup_time,
    "fode-compare": _fode_compare,
    "pde-solve": _pde_solve,
    "eigen": _eigen,
    "sweep": _sweep,
    "truncation": _truncation,
    "verify-apriori": _verify_apriori,
    "verify-hardy": _verify_hardy,
    "identity-check": _identity_check,
}


def cli_dispatch(argv=None) -> int:
    """Parse ``argv``, run the subcommand, write outputs, return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        config, explicit = _resolve(args)
    except (ParameterError, TypeError, ValueError) as exc:
        print(f"frachardy {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    bundle = OutputBundle(args.command, config.snapshot())
    try:
        summary, ok = HANDLERS[args.command](config, explicit, bundle)
    except (ParameterError, RegimeError) as exc:
        print(f"frachardy {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, FracHardyError, FloatingPointError) as exc:
        print(f"frachardy {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    summary = {"command": args.command, "verdict": "pass" if ok else "fail", **summary}
    bundle.add_json("summary.json", summary)
    print(json.dumps(to_jsonable(summary), sort_keys=True, indent=2))
    if not args.no_files:
        bundle.write(_output_dir(args, args.command), {"passed": ok})
    return EXIT_OK if ok else EXIT_VERDICT


def main() -> None:
    sys.exit(cli_dispatch())
