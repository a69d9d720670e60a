#!/usr/bin/env python3
"""Command-line front end for the frac-schrodinger tools.

Usage:
    python -m frac_schrodinger.tool.cli mlf scan --alpha 0.5 --beta 0.5
    python -m frac_schrodinger.tool.cli solve --alpha 0.6 --M 16 --forcing ensemble
    python -m frac_schrodinger.tool.cli verify ialpha --alpha 0.5
    python -m frac_schrodinger.tool.cli semilinear --alpha 0.6 --M 16 --amplitude 0.02
    python -m frac_schrodinger.tool.cli accept --quick

Exit codes: 0 success, 1 failed check, 2 usage or validation error,
3 fixed-point divergence or ball escape.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List

import mpmath
import numpy as np

from .acceptance import AcceptanceSettings, oracle_reach, run_acceptance
from .config import ConfigError, RunConfig, default_log_level, parse_config
from .fracalc import TimeGrid
from .maxreg import (EnsembleSpec, RegularityReport, coercivity_ensemble, continuity_check,
                     da_estimate_check, default_s_samples, embedding_check,
                     estimate_mr_constant, generate_forcing, generate_trajectories,
                     homogeneous_checks, homogeneous_decay_check, i_alpha_check,
                     mikhlin_scan)
from .mlf import MLError, MLParams, crossover_radius, ml_bound_constant, ml_eval
from .nonlinear import (BallFunctional, ConstantForcing, DiagonalFamily, FractionalDamping,
                        IterationError, IterationTrace, SumMap, cubic_nls, fk_lemma_ensemble,
                        quasilinear_solve, semilinear_solve)
from .oracle import MAX_DIGITS, OracleError, highprec_ml_many
from .output import (ML_HEADER, MODE_HEADER, PHYSICAL_HEADER, PLOT_NORMS_HEADER,
                     PLOT_TX_HEADER, REPORT_HEADER, TRACE_HEADER, report_rows, write_csv)
from .solver import SolveConfig, solve_full
from .spectral import (DiagonalOperator, SineCollocation, SpectralError, SpectralField,
                       SpectralVector, field_da_norms, field_norms)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
LOG_DATE = "%H:%M:%S"

CHECKS = ("coercivity", "mrconstant", "ialpha", "mikhlin", "homogeneous", "continuity",
          "embedding", "fklemma", "daestimate")
ORACLE_HEADER = ("alpha", "beta", "t", "re", "im")

# Flags that map one-to-one onto RunConfig fields
RUN_FLAGS = {
    "alpha": float, "p": float, "T": float, "N": int, "M": int, "operator": str,
    "ensemble": int, "seed": int, "mode_decay": float, "smoothness": int, "output": str,
    "workers": int, "beta": float, "t_max": float, "samples": int, "s_max": float,
    "tol": float, "max_iter": int, "radius": float, "delta": float, "amplitude": float,
    "digits": int, "quadrature": str, "forcing": str, "damping": float, "only": str,
}
FLAG_HELP = {
    "quadrature": "Duhamel weights: moments (default, exact for piecewise-linear f) or midpoint",
    "only": "Comma-separated acceptance criteria to run, e.g. 1,3,15",
    "operator": "dirichlet_laplacian_1d(M) or a comma-separated eigenvalue list",
}

log = logging.getLogger("frac-schrodinger.cli")


# --- Builders ---

def build_operator(cfg: RunConfig) -> DiagonalOperator:
    return DiagonalOperator.from_spec(cfg.operator, cfg.M)


def build_ensemble(cfg: RunConfig) -> EnsembleSpec:
    return EnsembleSpec(cfg.ensemble, cfg.seed, cfg.mode_decay, cfg.smoothness, cfg.workers)


def build_solve_config(cfg: RunConfig) -> SolveConfig:
    return SolveConfig(cfg.alpha, TimeGrid(cfg.T, cfg.N), build_operator(cfg), cfg.quadrature)


def initial_data(M: int, amplitude: float) -> SpectralVector:
    """u0_n = amplitude n^{-4}."""
    n = np.arange(1, M + 1, dtype=float)
    return SpectralVector(amplitude * n ** -4.0)


def build_forcing(cfg: RunConfig, solve_cfg: SolveConfig) -> SpectralField:
    grid, operator = solve_cfg.grid, solve_cfg.operator
    if cfg.forcing == "zero":
        return SpectralField.zeros(grid, operator.M)
    values = generate_forcing(build_ensemble(cfg), grid, operator.eigenvalues, 0)
    return SpectralField(grid, values)


# --- Writers ---

def _output_dir(cfg: RunConfig) -> Path:
    return Path(cfg.output)


def write_solution(cfg: RunConfig, u: SpectralField, operator: DiagonalOperator) -> None:
    out = _output_dir(cfg)
    t = u.grid.nodes
    mode_rows = ((t[k], n + 1, u.coeffs[n, k].real, u.coeffs[n, k].imag)
                 for k in range(t.size) for n in range(u.M))
    write_csv(out / "solution_modes.csv", MODE_HEADER, mode_rows)

    colloc = SineCollocation(u.M)
    x = colloc.points
    phys = colloc.to_physical(u.coeffs)
    phys_rows = ((t[k], x[j], phys[j, k].real, phys[j, k].imag, abs(phys[j, k]) ** 2)
                 for k in range(t.size) for j in range(x.size))
    write_csv(out / "solution_physical.csv", PHYSICAL_HEADER, phys_rows)

    if cfg.plot_data:
        write_csv(out / "plot_t_x.csv", PLOT_TX_HEADER,
                  ((t[k], x[j], abs(phys[j, k]) ** 2)
                   for k in range(t.size) for j in range(x.size)))
        h_norms = field_norms(u.coeffs)
        da_norms = field_da_norms(operator, u.coeffs)
        write_csv(out / "plot_norms.csv", PLOT_NORMS_HEADER,
                  zip(t, h_norms, da_norms))
    log.info("Wrote solution CSVs to %s", out)


def write_trace(cfg: RunConfig, trace: IterationTrace) -> None:
    write_csv(_output_dir(cfg) / "trace.csv", TRACE_HEADER, trace.rows())


def write_reports(cfg: RunConfig, filename: str, reports: List[RegularityReport]) -> int:
    path = write_csv(_output_dir(cfg) / filename, REPORT_HEADER, report_rows(reports))
    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        print(f"[{status}] {report.name}: lhs={report.lhs:.6g} rhs={report.rhs:.6g} "
              f"constant={report.constant_estimate:.6g}")
    print(f"Report: {path}")
    return 0 if all(r.passed for r in reports) else 1


# --- Commands ---

def cmd_mlf(cfg: RunConfig, args) -> int:
    """Mittag-Leffler values on the ray z = -i t."""
    params = MLParams(cfg.alpha, 1.0 if cfg.beta is None else cfg.beta)
    if args.mlf_action == "eval":
        t = np.asarray(args.t or [1.0], dtype=float)
    else:
        t = np.geomspace(1e-3, cfg.t_max, cfg.samples)
    rows = []
    for value in t:
        result = ml_eval(params, -1j * value)
        rows.append((value, result.value.real, result.value.imag, abs(result.value),
                     result.method.value, result.err_estimate))
    path = write_csv(_output_dir(cfg) / f"mlf_{args.mlf_action}.csv", ML_HEADER, rows)
    if args.mlf_action == "eval":
        for row in rows:
            print(f"t={row[0]:g}: {row[1]!r} {row[2]:+.17g}i ({row[4]}, err {row[5]:.2g})")
    else:
        print(f"Crossover radius R*: {crossover_radius(params):.6g}")
        print(f"C0 estimate on [-{cfg.t_max:g}, {cfg.t_max:g}]: "
              f"{ml_bound_constant(params, cfg.t_max, cfg.samples):.6g}")
    print(f"Table: {path}")
    return 0


def cmd_solve(cfg: RunConfig, args) -> int:
    solve_cfg = build_solve_config(cfg)
    u0 = initial_data(solve_cfg.operator.M, cfg.amplitude)
    u = solve_full(solve_cfg, u0, build_forcing(cfg, solve_cfg))
    write_solution(cfg, u, solve_cfg.operator)
    print(f"Solved alpha={cfg.alpha:g} on N={cfg.N}, M={solve_cfg.operator.M}: "
          f"sup ||u(t)|| = {field_norms(u.coeffs).max():.6g}")
    return 0


def run_check(cfg: RunConfig, check: str) -> List[RegularityReport]:
    if check == "ialpha":
        return [i_alpha_check(cfg.alpha, cfg.s_max)]
    if check == "mikhlin":
        return [mikhlin_scan(build_operator(cfg), cfg.alpha, default_s_samples(2 * cfg.samples))]
    grid = TimeGrid(cfg.T, cfg.N)
    ensemble = build_ensemble(cfg)
    if check == "coercivity":
        return [coercivity_ensemble(cfg.alpha, grid, ensemble)]
    if check == "embedding":
        return [embedding_check(cfg.alpha, cfg.p, generate_trajectories(ensemble, grid))]
    solve_cfg = build_solve_config(cfg)
    if check == "mrconstant":
        return [estimate_mr_constant(solve_cfg, cfg.p, ensemble)]
    if check == "continuity":
        return [continuity_check(solve_cfg, cfg.p, ensemble)]
    if check == "daestimate":
        return [da_estimate_check(solve_cfg, cfg.p, ensemble)]
    if check == "fklemma":
        return [fk_lemma_ensemble(cfg.alpha, cfg.p, grid, solve_cfg.operator, ensemble)]
    if check == "homogeneous":
        u0 = initial_data(solve_cfg.operator.M, cfg.amplitude)
        reports = homogeneous_checks(solve_cfg, u0, cfg.p)
        try:
            reports.append(homogeneous_decay_check(solve_cfg))
        except SpectralError:
            log.info("operator %s has no refinement; skipping the mode scan",
                     solve_cfg.operator.spec())
        return reports
    raise ValueError(f"unknown check '{check}'")


def cmd_verify(cfg: RunConfig, args) -> int:
    return write_reports(cfg, f"verify_{args.check}.csv", run_check(cfg, args.check))


def _run_iteration(cfg: RunConfig, solve, *solve_args, **solve_kwargs) -> int:
    try:
        u, trace = solve(*solve_args, **solve_kwargs)
    except IterationError as e:
        write_trace(cfg, e.trace)
        raise
    write_trace(cfg, trace)
    write_solution(cfg, u, solve_args[0].operator)
    status = "converged" if trace.converged else "stopped at max_iter"
    print(f"Picard iteration {status} after {trace.iterations} iterations "
          f"(final ratio {trace.final_ratio:.4g})")
    return 0


def cmd_semilinear(cfg: RunConfig, args) -> int:
    """Cubic nonlinearity u - |u|^2 u, optionally damped and forced."""
    solve_cfg = build_solve_config(cfg)
    M = solve_cfg.operator.M
    u0 = initial_data(M, cfg.amplitude)
    parts = [cubic_nls(M)]
    if cfg.beta is not None and cfg.damping != 0.0:
        parts.append(FractionalDamping(cfg.alpha, cfg.beta, cfg.damping, u0))
    if cfg.forcing != "zero":
        parts.append(ConstantForcing(build_forcing(cfg, solve_cfg)))
    F = parts[0] if len(parts) == 1 else SumMap(*parts)
    return _run_iteration(cfg, semilinear_solve, solve_cfg, u0, F,
                          tol=cfg.tol, max_iter=cfg.max_iter, p=cfg.p)


def cmd_quasilinear(cfg: RunConfig, args) -> int:
    """A(u) = (1 + delta min(1, ||u||/r)) A inside the MR ball of radius r."""
    solve_cfg = build_solve_config(cfg)
    u0 = initial_data(solve_cfg.operator.M, cfg.amplitude)
    family = DiagonalFamily(solve_cfg.operator, cfg.delta, BallFunctional(cfg.radius))
    ensemble = build_ensemble(cfg).with_count(min(cfg.ensemble, 20))
    return _run_iteration(cfg, quasilinear_solve, solve_cfg, u0, family, cfg.radius,
                          tol=cfg.tol, max_iter=cfg.max_iter, p=cfg.p, ensemble=ensemble)


def cmd_oracle_regen(cfg: RunConfig, args) -> int:
    """Extended-precision E_{alpha,beta}(-i t) table for beta in {1, alpha, alpha+1}."""
    alpha = cfg.alpha
    t_top = min(cfg.t_max, oracle_reach(alpha, cfg.digits, MAX_DIGITS))
    t = np.geomspace(1e-3, t_top, cfg.samples)
    rows = []
    for beta in (1.0, alpha, alpha + 1.0):
        values = highprec_ml_many(alpha, beta, -1j * t, cfg.digits)
        for tk, v in zip(t, values):
            rows.append((alpha, beta, tk, mpmath.nstr(v.real, cfg.digits),
                         mpmath.nstr(v.imag, cfg.digits)))
    path = write_csv(_output_dir(cfg) / f"oracle_ml_alpha{alpha:g}.csv", ORACLE_HEADER, rows)
    print(f"Wrote {len(rows)} reference values (t <= {t_top:.4g}) to {path}")
    return 0


def cmd_accept(cfg: RunConfig, args) -> int:
    settings = AcceptanceSettings(seed=cfg.seed, workers=cfg.workers, quick=cfg.quick)
    only = [int(part) for part in cfg.only.split(",") if part.strip()] or None
    return write_reports(cfg, "accept.csv", run_acceptance(settings, only))


# --- Parser ---

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file ([run] plus per-subcommand sections)")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING (default: env or WARNING)")
    for name, kind in RUN_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        common.add_argument(flag, dest=name, type=kind, default=None, help=FLAG_HELP.get(name))
    common.add_argument("--plot-data", dest="plot_data", action="store_true", default=None,
                        help="Also write plot_t_x.csv and plot_norms.csv")
    common.add_argument("--quick", dest="quick", action="store_true", default=None,
                        help="Desk-size acceptance run")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        description="Time-fractional Schrodinger equations: solver and maximal-regularity checks"
    )
    subparsers = parser.add_subparsers(dest="action", help="Command")

    mlf_parser = subparsers.add_parser("mlf", help="Mittag-Leffler evaluation on the -i ray")
    mlf_sub = mlf_parser.add_subparsers(dest="mlf_action")
    eval_parser = mlf_sub.add_parser("eval", parents=[common], help="Evaluate at given t")
    eval_parser.add_argument("--t", type=float, action="append", help="Ray parameter (repeatable)")
    mlf_sub.add_parser("scan", parents=[common], help="Log-spaced table up to --t-max")

    subparsers.add_parser("solve", parents=[common], help="Linear solve, modes + physical CSV")

    verify_parser = subparsers.add_parser("verify", parents=[common],
                                          help="Run one inequality check")
    verify_parser.add_argument("check", choices=CHECKS)

    subparsers.add_parser("semilinear", parents=[common], help="Cubic semilinear Picard run")
    subparsers.add_parser("quasilinear", parents=[common], help="Diagonal-family quasilinear run")

    oracle_parser = subparsers.add_parser("oracle", help="Reference computations")
    oracle_sub = oracle_parser.add_subparsers(dest="oracle_action")
    oracle_sub.add_parser("regen", parents=[common], help="Regenerate the extended-precision table")

    subparsers.add_parser("accept", parents=[common], help="Run the acceptance suite")
    return parser


def subcommand_name(args) -> str:
    if args.action == "mlf":
        return f"mlf {args.mlf_action}"
    if args.action == "verify":
        return f"verify {args.check}"
    if args.action == "oracle":
        return f"oracle {args.oracle_action}"
    return args.action


def _overrides(args) -> Dict[str, Any]:
    keys = list(RUN_FLAGS) + ["plot_data", "quick"]
    return {key: getattr(args, key, None) for key in keys}


COMMANDS = {
    "mlf": cmd_mlf,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "semilinear": cmd_semilinear,
    "quasilinear": cmd_quasilinear,
    "oracle": cmd_oracle_regen,
    "accept": cmd_accept,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.action:
        parser.print_help()
        return 0
    if args.action == "mlf" and not args.mlf_action:
        parser.parse_args(["mlf", "--help"])
    if args.action == "oracle" and not args.oracle_action:
        parser.parse_args(["oracle", "--help"])

    level = (getattr(args, "log_level", None) or default_log_level()).upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format=LOG_FORMAT, datefmt=LOG_DATE)

    try:
        cfg = parse_config(args.config, _overrides(args), subcommand_name(args))
        cfg.write_effective(_output_dir(cfg))
        return COMMANDS[args.action](cfg, args)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return 2
    except IterationError as e:
        print(f"Iteration error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except (MLError, OracleError) as e:
        print(f"Numerical error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main() or 0)
