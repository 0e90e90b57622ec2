"""Command-line entry point.

Exit codes: 0 on success, 1 when a solver fails to converge, 2 on an invalid
configuration or usage error.
"""
import argparse
import logging
import sys

import numpy as np

from .config import build_problem, config_hash, load_config
from .convergence import (RefinementPlan, continuous_dependence_probe, mosco_diagnostic,
                          refine_study)
from .errors import ConfigError, NonConvergenceError
from .functionals import compute_constants
from .io import write_reports
from .periodic import find_periodic, x_sequence
from .stepper import run_trajectory

log = logging.getLogger("kwcperiodic")

COMMANDS = ("constants", "run-trajectory", "solve-periodic", "refine-study",
            "mosco-check", "dependence-probe")


def _constants(problem):
    f = problem.forcing()
    seed = problem.seed_state()
    return compute_constants(problem.model, problem.scheme, problem.grid, f.R0,
                             initial=(seed.eta, seed.theta))


def cmd_constants(problem, cfg):
    c = _constants(problem)
    return {"report": {"constants": c.to_dict(), "model": problem.model.describe()}}


def cmd_run_trajectory(problem, cfg):
    c = _constants(problem)
    traj = run_trajectory(problem.grid, problem.seed_state(), problem.forcing(),
                          problem.scheme, problem.model)
    xs = x_sequence(traj, c)
    d = traj.diagnostics
    report = {
        "constants": c.to_dict(),
        "energy_inequality_holds": all(
            x.dissipation_lhs <= x.dissipation_rhs + 1e-6 * max(1.0, x.dissipation_rhs) for x in d),
        "max_sup": max(st.sup for st in traj.states),
        "R0": traj.R0,
        "x_sequence": {"stays_inside": xs.stays_inside, "energy_bounded": xs.energy_bounded,
                       "starts_inside": xs.starts_inside},
    }
    return {"report": report, "trajectory": traj, "R_star": c.R_star}


def cmd_solve_periodic(problem, cfg):
    c = _constants(problem)
    sol = find_periodic(problem.grid, problem.forcing(), problem.scheme, problem.model,
                        seed=problem.seed_state(), constants=c)
    report = {
        "constants": c.to_dict(),
        "fp_residual": sol.fp_residual,
        "fp_tol": problem.scheme.fixed_point_tol(problem.grid),
        "iterations": sol.iterations,
        "periodicity_gap": sol.periodicity_gap,
        "membership": sol.membership,
        "residual_history": sol.residual_history,
        "relaxation_history": sol.relaxation_history,
    }
    return {"report": report, "trajectory": sol.trajectory, "R_star": c.R_star}


def _plan(problem, opts):
    levels = int(opts.get("levels", 4))
    if opts.get("plan", "default") == "epsilon_only":
        return RefinementPlan.epsilon_only(problem.scheme.nu, problem.scheme.m, levels)
    return RefinementPlan.default(problem.model.nu0, levels, int(opts.get("m_base", 16)),
                                  int(opts.get("m_cap", 128)))


def cmd_refine_study(problem, cfg):
    opts = cfg["options"]["refine"]
    plan = _plan(problem, opts)
    bad = plan.violations(problem.model, problem.scheme.T)
    if bad:
        raise ConfigError(bad)
    rep = refine_study(plan, problem, workers=int(opts.get("workers", 1)))
    out = {"report": rep.to_dict(), "plot_data": rep.plot_data()}
    if not all(lv.converged for lv in rep.levels):
        failed = [k for k, lv in enumerate(rep.levels) if not lv.converged]
        out["failure"] = f"levels {failed} did not converge"
    return out


def cmd_mosco_check(problem, cfg):
    """Random converging sequences against the configured grid and model."""
    opts = cfg["options"]["mosco"]
    grid, p, s = problem.grid, problem.model, problem.scheme
    rng = np.random.default_rng(opts.get("rng_seed", 0))
    levels = int(opts.get("levels", 8))
    eps_lim = float(opts.get("eps_lim", 0.0))
    nu_lim = float(opts.get("nu_lim", p.nu0))
    n = np.arange(1, levels + 1)
    reports = []
    for _ in range(int(opts.get("sequences", 20))):
        eta_lim = rng.uniform(-1, 1, grid.shape)
        eta_seq = [eta_lim + 2.0**-k * rng.uniform(-1, 1, grid.shape) for k in n]
        theta = rng.uniform(-1, 1, grid.shape)
        rep = mosco_diagnostic(grid, eta_seq, eta_lim, theta, nu_lim + 2.0**-n,
                               eps_lim + 2.0**-n, nu_lim, eps_lim, p)
        reports.append(rep.to_dict())
    ok = all(r["all_hold"] for r in reports)
    return {"report": {"all_hold": ok, "sequences": reports}}


def cmd_dependence_probe(problem, cfg):
    opts = cfg["options"]["dependence"]
    rep = continuous_dependence_probe(problem, opts.get("deltas", [0.1]), int(opts.get("mode", 1)))
    return {"report": rep.to_dict()}


HANDLERS = {
    "constants": cmd_constants,
    "run-trajectory": cmd_run_trajectory,
    "solve-periodic": cmd_solve_periodic,
    "refine-study": cmd_refine_study,
    "mosco-check": cmd_mosco_check,
    "dependence-probe": cmd_dependence_probe,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML or JSON configuration file")
    common.add_argument("--out", metavar="DIR", default="kwc-out", help="output directory")
    common.add_argument("--override", metavar="KEY=VALUE", action="append", default=[],
                        help="dotted-key override, e.g. scheme.m=64 (repeatable)")
    common.add_argument("--snapshots", action="store_true",
                        help="also write per-step field snapshots")
    common.add_argument("--seed", type=int, metavar="N", help="random seed for seed states")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="kwc-periodic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name in COMMANDS:
        doc = (HANDLERS[name].__doc__ or "").strip().splitlines()
        sub.add_parser(name, parents=[common], help=doc[0] if doc else None)
    return parser


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.override, args.seed)
        problem = build_problem(cfg)
        digest = config_hash(cfg)
        log.info("config %s, command %s", digest[:12], args.command)
        outputs = HANDLERS[args.command](problem, cfg)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"nonconvergence: {exc}", file=sys.stderr)
        return 1
    outputs.update(command=args.command, config_hash=digest)
    try:
        paths = write_reports(outputs, args.out, snapshots=args.snapshots)
    except OSError as exc:
        print(exc, file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    if "failure" in outputs:
        print(f"nonconvergence: {outputs['failure']}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(cli_main())
