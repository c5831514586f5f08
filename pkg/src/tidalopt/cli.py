"""Command-line entry point: ``tidalopt <subcommand> [--config FILE] [options]``.

Exit status is 0 on success, 1 for invalid input, 2 when a solver fails and
3 when a checked property does not hold.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .adjoint import AdjointSources, duality_check, solve_adjoint, solve_tangent, taylor_test
from .config import ConfigError, default_config, parse_config
from .cost import adjoint_sources, control_zero, eval_cost, run_state, second_order_scan, smooth_random_field
from .fileio import FieldFormatError, write_field, write_rows_csv, write_trajectory
from .forward import energy, energy_equality_residual, solve_forward
from .grid import Grid, SolverError
from .optimize import LineSearchError, OptimizeSettings, assimilate_initial, minimize_control, uniqueness_horizon
from .verify import (
    PropertyReport,
    bound_monitors,
    gradient_fd_check,
    inequality_suite,
    ladyzhenskaya_eigenfunction,
    operator_property_suite,
    tangent_bound_margins,
    write_reports,
)

SUBCOMMANDS = ("forward", "tangent", "adjoint", "gradcheck", "taylor", "optimize", "assimilate",
               "uniqueness", "secondorder", "verify")

OK, INVALID, SOLVER_FAILED, PROPERTY_FAILED = 0, 1, 2, 3


class PropertyFailure(Exception):
    pass


def _tau_seq(text):
    try:
        taus = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if len(taus) < 2 or min(taus) <= 0:
        raise argparse.ArgumentTypeError("need at least two positive step sizes")
    return taus


def build_parser():
    parser = argparse.ArgumentParser(prog="tidalopt", description="Optimal control of a shallow-water tidal model.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, help="JSON scenario file (default: built-in sloping basin)")
    parser.add_argument("--out", type=Path, help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="random seed (overrides the config)")
    parser.add_argument("--mode", choices=("paper", "exact"), help="friction Jacobian used by tangent and adjoint")
    parser.add_argument("--tau-seq", type=_tau_seq, default=[1e-1, 1e-2, 1e-3, 1e-4], help="Taylor test steps, comma separated")
    parser.add_argument("--theta-samples", type=int, default=500, help="theta tuples in the second-order scan")
    parser.add_argument("--max-iters", type=int, help="optimizer iteration limit")
    parser.add_argument("--tol", type=float, help="optimizer relative residual tolerance")
    parser.add_argument("--trials", type=int, default=100, help="random trials in the verify suites")
    return parser


class Run:
    """State shared by the subcommand handlers."""

    def __init__(self, args):
        cfg = parse_config(args.config) if args.config else default_config()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed", "must be nonnegative")
            cfg.seed = args.seed
        if args.mode is not None:
            cfg.jacobian = args.mode
        if args.max_iters is not None:
            cfg.optimizer["max_iters"] = args.max_iters
        if args.tol is not None:
            cfg.optimizer["tol"] = args.tol
        self.args = args
        self.cfg = cfg
        self.settings = OptimizeSettings(**cfg.optimizer)
        self.out = Path(args.out) if args.out else cfg.resolve(cfg.output)
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "config.json").write_text(json.dumps(cfg.as_dict(), indent=2), encoding="utf-8")
        self.model = cfg.build_model()
        self.spec = cfg.build_cost(self.model)
        self.rng = np.random.default_rng(cfg.seed)

    def direction(self):
        m = self.model
        if self.spec.initial:
            return smooth_random_field(m.grid, self.rng)
        return smooth_random_field(m.grid, self.rng, count=m.time.steps + 1)

    def save_state(self, traj, prefix=""):
        t = self.model.time.times
        write_trajectory(self.out, f"{prefix}u", t, traj.u)
        write_trajectory(self.out, f"{prefix}xi", t, traj.xi)

    def reports(self, reports, name):
        write_reports(reports, self.out / f"{name}.json", self.out / f"{name}.csv")


def cmd_forward(run):
    m = run.model
    control = control_zero(m, run.spec)
    traj = run_state(m, run.spec, control)
    run.save_state(traj)
    e = energy(m, traj)
    resid = np.concatenate([[np.nan], energy_equality_residual(m, traj), [np.nan]])
    write_rows_csv(run.out / "energy.csv", ["t", "energy", "equality_residual"], zip(m.time.times, e, resid))
    cost = eval_cost(m, run.spec, traj, control)
    return f"forward: J={cost:.6g} steps={m.time.steps}"


def cmd_tangent(run):
    m = run.model
    base = solve_forward(m)
    v = smooth_random_field(m.grid, run.rng, count=m.time.steps + 1)
    tan = solve_tangent(m, base, v)
    run.save_state(tan, "tangent_")
    margins = tangent_bound_margins(m, base, v)
    scale = max(float(np.abs(margins).max()), np.finfo(float).tiny)
    report = PropertyReport("tangent_estimate", len(margins), float(margins.min() / scale),
                            bool(margins.min() >= -1e-12 * scale), 1e-12, "linearized energy estimate")
    run.reports([report], "tangent_report")
    if not report.passed:
        raise PropertyFailure(f"tangent: energy estimate violated (worst margin {report.worst_margin:.3g})")
    return f"tangent: worst margin={report.worst_margin:.6g} final |w|={np.sqrt(m.grid.inner(tan.u[-1], tan.u[-1])):.6g}"


def cmd_adjoint(run):
    m, g = run.model, run.model.grid
    control = control_zero(m, run.spec)
    traj = run_state(m, run.spec, control)
    sources = adjoint_sources(m, run.spec, traj)
    adj = solve_adjoint(m, traj, sources)
    write_trajectory(run.out, "p", m.time.times, adj.p)
    write_trajectory(run.out, "phi", m.time.times, adj.phi)
    rand = AdjointSources(smooth_random_field(g, run.rng, count=m.time.steps + 1),
                          smooth_random_field(g, run.rng, rank=1, count=m.time.steps + 1),
                          smooth_random_field(g, run.rng), smooth_random_field(g, run.rng, rank=1))
    v = smooth_random_field(g, run.rng, count=m.time.steps + 1)
    defect = duality_check(m, traj, v, rand, smooth_random_field(g, run.rng), smooth_random_field(g, run.rng, rank=1))
    report = PropertyReport("duality", 1, -defect, defect <= 1e-10, 1e-10, "tangent/adjoint pairing identity, relative defect")
    run.reports([report], "adjoint_report")
    if not report.passed:
        raise PropertyFailure(f"adjoint: duality defect {defect:.3g} exceeds 1e-10")
    return f"adjoint: duality defect={defect:.3g} |p(0)|={np.sqrt(g.inner(adj.p_initial, adj.p_initial)):.6g}"


def cmd_gradcheck(run):
    m = run.model
    control = run.direction()
    dirs = [run.direction() for _ in range(3)]
    err = gradient_fd_check(m, run.spec, control, dirs)
    tol = 1e-9 if m.params.r == 0 else 1e-6
    report = PropertyReport("gradient_fd", len(dirs), -err, err <= tol, tol, "adjoint vs central difference, relative error")
    run.reports([report], "gradcheck_report")
    if not report.passed:
        raise PropertyFailure(f"gradcheck: relative error {err:.3g} exceeds {tol:g}")
    return f"gradcheck: {run.spec.kind} relative error={err:.3g}"


def cmd_taylor(run):
    m = run.model
    initial = run.spec.initial
    control = run.direction()
    direction = run.direction()
    res = taylor_test(m, control, direction, run.args.tau_seq, initial=initial)
    write_rows_csv(run.out / "taylor.csv", ["tau", "residual_linf_l2", "residual_l2_h1"],
                   zip(res.taus, res.residual_linf_l2, res.residual_l2_h1))
    if res.exact_to_rounding:
        return "taylor: remainder at rounding level (linear map)"
    ok = abs(res.slope - 2.0) <= 0.1
    line = f"taylor: slope={res.slope:.4f} (L2H1 {res.slope_l2_h1:.4f}) mode={m.jacobian}"
    if m.jacobian == "exact" and not ok:
        raise PropertyFailure(line + " outside 2 +- 0.1")
    return line


def _optimize(run):
    if run.spec.initial:
        return assimilate_initial(run.model, run.spec, settings=run.settings)
    return minimize_control(run.model, run.spec, settings=run.settings)


def _save_optimum(run, res):
    write_rows_csv(run.out / "trace.csv", ["iteration", "cost", "grad_norm", "residual", "step"], res.trace.rows())
    run.save_state(res.trajectory)
    if run.spec.initial:
        write_field(run.out / "control.tdf", res.control)
    else:
        write_trajectory(run.out, "control", run.model.time.times, res.control)


def cmd_optimize(run):
    if run.spec.initial:
        raise ConfigError("cost.kind", "use the assimilate subcommand for initial-data costs")
    res = _optimize(run)
    _save_optimum(run, res)
    line = f"optimize: J={res.cost:.6g} residual={res.residual:.3g} iterations={len(res.trace) - 1}"
    if not res.converged:
        raise PropertyFailure(line + " (not converged)")
    return line


def cmd_assimilate(run):
    if not run.spec.initial:
        raise ConfigError("cost.kind", "assimilate needs cost kind 'assimilation'")
    res = _optimize(run)
    _save_optimum(run, res)
    j0 = res.trace.cost[0]
    ratio = res.cost / j0 if j0 > 0 else 0.0
    size = np.sqrt(run.model.grid.inner(res.control, res.control))
    line = f"assimilate: J={res.cost:.6g} ratio={ratio:.4g} |U0|={size:.4g} iterations={len(res.trace) - 1}"
    if not res.converged:
        raise PropertyFailure(line + " (not converged)")
    return line


def cmd_uniqueness(run):
    m = run.model
    traj = solve_forward(m)
    horizon = uniqueness_horizon(m, traj)
    (run.out / "uniqueness.json").write_text(json.dumps({"horizon": horizon}), encoding="utf-8")
    return f"uniqueness: T_u={'none' if horizon is None else f'{horizon:.6g}'}"


def cmd_secondorder(run):
    if run.spec.initial:
        raise ConfigError("cost.kind", "the second-order scan needs a distributed control")
    res = _optimize(run)
    _save_optimum(run, res)
    pert = run.direction()
    rep = second_order_scan(run.model, run.spec, res.control, pert, res.trajectory, res.adjoint,
                            theta_samples=run.args.theta_samples, seed=run.cfg.seed)
    write_rows_csv(run.out / "second_order.csv", ["theta1", "theta2", "theta3", "theta4", "value"],
                   [(*t, v) for t, v in zip(rep.thetas, rep.values)])
    summary = {k: getattr(rep, k) for k in ("s_min", "s_max", "theta_samples", "stronger_check", "sup_adjoint_norm",
                                            "pointwise_threshold", "pointwise_satisfied", "necessary_satisfied")}
    summary["sufficient_satisfied"] = rep.sufficient_satisfied
    (run.out / "second_order.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    line = f"secondorder: max S={rep.s_max:.6g} min S={rep.s_min:.6g} sufficient={rep.sufficient_satisfied}"
    if not rep.necessary_satisfied:
        raise PropertyFailure(line)
    return line


def cmd_verify(run):
    m = run.model
    reports = operator_property_suite(m, trials=run.args.trials, seed=run.cfg.seed)
    big = Grid(128, 128)
    lhs, bound = ladyzhenskaya_eigenfunction(big)
    exact_l4, exact_bound = np.sqrt(3 / 8), 2**0.25 * np.sqrt(np.pi / (2 * np.sqrt(2)))
    err = max(abs(lhs / exact_l4 - 1), abs(bound / exact_bound - 1))
    reports.append(PropertyReport("ladyzhenskaya_eigenfunction", 1, 0.01 - err, err <= 0.01, 0.0,
                                  "first eigenfunction matches closed-form L4 norm and bound within 1%",
                                  {"lhs": float(lhs), "bound": float(bound)}))
    reports += inequality_suite(Grid(64, 64), trials=20, seed=run.cfg.seed)
    reports += bound_monitors(m, spec=run.spec if not run.spec.initial else None, seed=run.cfg.seed)
    run.reports(reports, "verify_report")
    failed = [r.name for r in reports if not r.passed]
    worst = min(r.worst_margin for r in reports if np.isfinite(r.worst_margin))
    line = f"verify: {len(reports) - len(failed)}/{len(reports)} passed, worst margin={worst:.3g}"
    if failed:
        raise PropertyFailure(line + f" failed: {', '.join(failed)}")
    return line


HANDLERS = {name: globals()[f"cmd_{name}"] for name in SUBCOMMANDS}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        run = Run(args)
        print(HANDLERS[args.subcommand](run))
        return OK
    except PropertyFailure as exc:
        print(exc)
        return PROPERTY_FAILED
    except (ConfigError, FieldFormatError, ValueError, OSError) as exc:
        print(f"{args.subcommand}: invalid input: {exc}", file=sys.stderr)
        return INVALID
    except (SolverError, LineSearchError, FloatingPointError) as exc:
        print(f"{args.subcommand}: solver failure: {exc}", file=sys.stderr)
        return SOLVER_FAILED


if __name__ == "__main__":
    sys.exit(main())
