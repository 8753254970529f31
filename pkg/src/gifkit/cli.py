"""
Command-line driver.

Exit codes: 0 success, 1 a checked property failed, 2 usage or configuration
error.  Errors are reported as one JSON object on standard error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from gifkit import __version__
from gifkit.brenier import (
    ActionProblem,
    FinalConfiguration,
    SolveOptions,
    eta_from_map,
    independent_coupling,
    solve_min_action,
)
from gifkit.config import BrenierConfig, BuildParams, ConfigError, load_model
from gifkit.constructors import (
    DiscreteClassicalFlow,
    from_classical_flow,
    krylov_bogolioubov_average,
    stopping_rotation,
)
from gifkit.ergodic import AverageProfile, check_maximal_inequality
from gifkit.errors import GifError
from gifkit.path_measure import (
    Marginal,
    Observable,
    StateSpace,
    TimeGrid,
    check_incompressible,
    load_measure,
    measure_to_dict,
)
from gifkit.report import (
    SUITE_COLUMNS,
    SWEEP_COLUMNS,
    emit_report,
    profile_rows,
    sweep_rows,
    to_json,
    write_csv,
    write_json,
)
from gifkit.structure import (
    decompose,
    is_ergodic,
    is_weak_ergodic,
    lemma53_check,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(GifError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(data, out: str | None) -> None:
    if out:
        write_json(out, data)
    else:
        sys.stdout.write(to_json(data))


def _space(cfg) -> StateSpace:
    return StateSpace(cfg.kind, cfg.n_cells, cfg.circumference)


def _grid(cfg) -> TimeGrid:
    return TimeGrid(cfg.horizon, cfg.n_steps, cfg.mode)


def _read_json(source: str):
    text = source if source.lstrip().startswith(("[", "{")) else None
    try:
        return json.loads(text if text is not None else Path(source).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {source}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source} is not valid JSON: {exc}") from exc


def _observable(source: str) -> Observable:
    data = _read_json(source)
    if isinstance(data, dict):
        data = data.get("values")
    if not isinstance(data, list):
        raise ConfigError("observable must be a list of values or {\"values\": [...]}")
    return Observable(data)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


# -----------------------------------------------------------------------------
# Subcommands
# -----------------------------------------------------------------------------
def cmd_build(args) -> int:
    p = load_model(BuildParams, args.params or {})
    if args.kind in ("classical", "stopping-rotation"):
        if p.space is None or p.grid is None:
            raise ConfigError(f"{args.kind} needs space and grid parameters")
        space, grid = _space(p.space), _grid(p.grid)
    if args.kind == "classical":
        if p.step_map is not None:
            flow = DiscreteClassicalFlow(space, np.array(p.step_map))
        elif p.shift is not None:
            flow = DiscreteClassicalFlow.rotation(space, p.shift)
        else:
            flow = DiscreteClassicalFlow.identity(space)
        mu = Marginal(p.marginal) if p.marginal is not None else None
        q = from_classical_flow(flow, mu, grid, tol=args.tol)
    elif args.kind == "stopping-rotation":
        q = stopping_rotation(space, grid)
    else:
        if p.measure is None or p.n is None:
            raise ConfigError("kb-average needs measure and n")
        q = krylov_bogolioubov_average(load_measure(p.measure), p.n)
    _emit(measure_to_dict(q), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    q = load_measure(args.measure)
    rep = check_incompressible(q, args.tol)
    _emit(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_ergodic(args) -> int:
    q = load_measure(args.measure)
    f = _observable(args.observable)
    alphas = _floats(args.alphas) if args.alphas else []
    prof = AverageProfile.of(q, f)
    rows, cols = profile_rows(prof, alphas)
    report = args.report or (str(Path(args.out) / "profile.csv") if args.out else None)
    if report:
        write_csv(report, rows, cols)
    result = {"n_atoms": q.n_atoms, "n_steps": q.grid.n_steps, "alphas": alphas}
    code = EXIT_OK
    if alphas:
        sweep = check_maximal_inequality(q, f, alphas, tol=args.tol)
        result["sweep"] = sweep_rows(sweep)
        result["violations_factor3"] = sum(not r.pass3 for r in sweep)
        result["pass_rate_factor1"] = sum(r.pass1 for r in sweep) / len(sweep)
        if args.out:
            emit_report(result, args.out, "sweep", sweep_rows(sweep), SWEEP_COLUMNS,
                        plot="sweep" if args.plot else None)
        if result["violations_factor3"]:
            code = EXIT_FAIL
    if args.out and args.plot:
        emit_report({"report": report}, args.out, "profile_plot", rows, None, plot="profile")
    if not args.out:
        sys.stdout.write(to_json(result))
    return code


def cmd_structure(args) -> int:
    q = load_measure(args.measure)
    cells = [int(c) for c in _floats(args.cells)] if args.cells else None
    code = EXIT_OK
    if args.check == "ergodic":
        out = {"check": "ergodic", **is_ergodic(q, atol=args.atol).to_dict()}
    elif args.check == "weak-ergodic":
        out = {"check": "weak-ergodic", **is_weak_ergodic(q, restricted=args.restricted, tol=args.tol).to_dict()}
    elif args.check == "decompose":
        if cells is None:
            v = is_weak_ergodic(q, restricted=args.restricted, tol=args.tol)
            if v.weak_ergodic:
                _emit({"check": "decompose", "decomposed": False, "reason": "measure is weak ergodic",
                       "verdict": v.to_dict()}, args.out)
                return EXIT_OK
            cells = list(v.witness)
        try:
            d = decompose(q, cells, tol=args.tol)
        except GifError as exc:
            _emit({"check": "decompose", "decomposed": False, "cells": cells, "reason": str(exc)}, args.out)
            return EXIT_FAIL
        out = {"check": "decompose", "decomposed": True, **d.to_dict()}
    else:
        if cells is None:
            raise UsageError("lemma53 needs --cells")
        shifts = [args.shift] if args.shift is not None else list(range(1, q.grid.last_index + 1))
        reps = [lemma53_check(q, cells, s, tol=args.tol) for s in shifts]
        out = {"check": "lemma53", "cells": cells,
               "results": [{"s": s, **r.to_dict()} for s, r in zip(shifts, reps)],
               "all_equal": all(r.equal for r in reps)}
        code = EXIT_OK if out["all_equal"] else EXIT_FAIL
    _emit(out, args.out)
    return code


def _problem(cfg: BrenierConfig) -> ActionProblem:
    space, grid = _space(cfg.space), _grid(cfg.grid)
    if cfg.eta.map is not None:
        eta = eta_from_map(cfg.eta.map, space)
    elif cfg.eta.matrix is not None:
        eta = FinalConfiguration(np.array(cfg.eta.matrix))
    else:
        eta = independent_coupling(space)
    pot = np.array(cfg.potential) if cfg.potential is not None else None
    rho = np.array(cfg.rho) if cfg.rho is not None else None
    return ActionProblem(space, grid, eta, potential=pot, rho=rho)


def cmd_brenier(args) -> int:
    cfg = load_model(BrenierConfig, args.config)
    s = cfg.solver
    opts = SolveOptions(enumeration_cap=s.enumeration_cap, tol=s.tol, probe_degeneracy=s.probe_degeneracy,
                        oracle=s.oracle, oracle_cap=s.oracle_cap, seed=s.seed,
                        warm_start=load_measure(cfg.warm_start) if cfg.warm_start else None)
    rep = solve_min_action(_problem(cfg), opts)
    _emit(rep.to_dict(), args.out)
    ok = rep.incompressibility_residual <= s.tol and rep.coupling_residual <= s.tol
    return EXIT_OK if ok else EXIT_FAIL


def cmd_suite(args) -> int:
    from gifkit.suite import run_suite

    only = [c.strip() for c in args.only.split(",")] if args.only else None
    results = run_suite(args.seed, only)
    rows = [{"criterion": r.criterion, "name": r.name, "passed": r.passed, "summary": r.summary()}
            for r in results]
    doc = {"seed": args.seed, "all_passed": all(r.passed for r in results),
           "criteria": [r.to_dict() for r in results]}
    if args.out:
        emit_report(doc, args.out, "suite", rows, SUITE_COLUMNS)
    for r in results:
        sys.stdout.write(f"criterion {r.criterion}: {'PASS' if r.passed else 'FAIL'}  {r.name}\n")
    return EXIT_OK if doc["all_passed"] else EXIT_FAIL


# -----------------------------------------------------------------------------
# Parser
# -----------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=7, help="seed for randomized runs")
    common.add_argument("--tol", type=float, default=1e-12, help="numerical tolerance")
    common.add_argument("--out", default=None, help="output file or directory")

    parser = _Parser(prog="gifkit", description="Generalized incompressible flow toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build", parents=[common], help="construct a path measure")
    p.add_argument("--kind", required=True, choices=["classical", "stopping-rotation", "kb-average"])
    p.add_argument("--params", help="JSON parameters (inline or file path)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("check", parents=[common], help="check incompressibility")
    p.add_argument("--measure", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("ergodic", parents=[common], help="ergodic averages and maximal inequality")
    p.add_argument("--measure", required=True)
    p.add_argument("--observable", required=True, help="JSON list of cell values (inline or file)")
    p.add_argument("--alphas", help="comma-separated levels for the maximal inequality")
    p.add_argument("--report", help="CSV path for the average profile")
    p.add_argument("--plot", action="store_true", help="also write SVG plots into --out")
    p.set_defaults(func=cmd_ergodic)

    p = sub.add_parser("structure", parents=[common], help="invariance and decomposition checks")
    p.add_argument("--measure", required=True)
    p.add_argument("--check", required=True, choices=["ergodic", "weak-ergodic", "decompose", "lemma53"])
    p.add_argument("--cells", help="comma-separated cell indices")
    p.add_argument("--shift", type=int, help="single shift for lemma53 (default: all)")
    p.add_argument("--restricted", action="store_true", help="component scan instead of exhaustive")
    p.add_argument("--atol", type=float, default=0.0, help="shift-invariance tolerance")
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("brenier", parents=[common], help="solve the minimum-action problem")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_brenier)

    p = sub.add_parser("suite", parents=[common], help="run the acceptance battery")
    p.add_argument("--only", help="comma-separated criterion ids")
    p.set_defaults(func=cmd_suite)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_USAGE)
    except GifError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_USAGE)
    except (OSError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
