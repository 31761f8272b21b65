"""Command line front end.

Subcommands map one to one onto the library operations; every command
writes CSV to stdout (or --out) and, where it makes sense, JSON-lines
event logs (--log).  Exit codes: 0 on success, 1 on usage/configuration
problems, 2 on numerical failures inside a run.  Run outcomes such as
blow-up or step underflow are data in the CSV, never exit codes.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io
from .config import parse_config
from .errors import (ConfigError, GridError, NumericalInstability,
                     QuadratureError, SolverError)
from .experiments import run_dichotomy
from .norms import NormSpec, evaluate_norm
from .params import ProblemParams, Regime
from .solver import solve
from .special import PsiSpec
from .traces import check_envelope, envelope_constant, measure_trace
from .validate import format_suite_csv, run_suite


class _Usage(Exception):
    """Argument or configuration problem found before any numerics ran."""


_USAGE_ERRORS = (ConfigError, GridError, SolverError, QuadratureError,
                 ValueError, OSError)


def _prepare(fn, *args, **kw):
    # phase 1: anything thrown while assembling inputs is a usage error
    try:
        return fn(*args, **kw)
    except _USAGE_ERRORS as exc:
        raise _Usage(str(exc)) from exc


def _load_spec(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text)


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        _write_file(out, text)


def _write_file(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_log(path, lines):
    if path is not None:
        _write_file(path, "".join(line + "\n" for line in lines))


def _cmd_solve(args) -> int:
    spec = _prepare(_load_spec, args.config)
    report = solve(spec.solver)
    _emit(io.format_series_csv(report), args.out)
    if args.field_out is not None:
        t_last, f_last = report.snapshots[-1]
        _write_file(args.field_out,
                    io.format_field_csv(f_last, t=t_last, params=spec.params))
    _write_log(args.log, [io.event_line(
        "solve", status=report.status, t_final=report.t_final,
        steps=report.steps, blow_time=report.blow_time)])
    return 0


def _cmd_norm(args) -> int:
    def build():
        fld, meta = io.read_field_csv(args.field)
        kind = args.kind.replace("-", "_")
        if kind == "morrey":
            if args.q is None:
                raise ConfigError("--kind morrey requires --q")
            return fld, NormSpec(kind="morrey", q=args.q, alpha=args.alpha,
                                 cap=args.cap), meta.get("params")
        prm = meta.get("params")
        if prm is None:
            raise ConfigError("orlicz-eta needs a problem header in the "
                              "field file (write it with solve --field-out)")
        if prm.regime() is not Regime.CRITICAL:
            raise ConfigError("the log-weighted functional is defined on "
                              "the borderline p = m + 2/N only")
        return fld, NormSpec(kind="orlicz_eta", psi=PsiSpec(args.alpha),
                             horizon=args.horizon, cap=args.cap), prm

    fld, spec, prm = _prepare(build)
    value = evaluate_norm(fld, spec, prm)
    _emit(io.format_norm_csv(args.kind, value), args.out)
    return 0


def _cmd_dichotomy(args) -> int:
    spec = _prepare(_load_spec, args.config)
    if not (0.0 < args.c_lo < args.c_hi):
        raise _Usage(f"need 0 < --c-lo < --c-hi, got "
                     f"({args.c_lo}, {args.c_hi})")
    if args.steps < 1:
        raise _Usage(f"--steps must be >= 1, got {args.steps}")
    result = run_dichotomy(spec.params, args.c_lo, args.c_hi, args.steps,
                           spec.dichotomy)
    _emit(io.format_dichotomy_csv(result), args.out)
    lines = [io.event_line("trial", c=c, status=s) for c, s in result.outcomes]
    lines.append(io.event_line("bracket", c_exist=result.c_exist,
                               c_blow=result.c_blow))
    _write_log(args.log, lines)
    return 0


def _cmd_trace_check(args) -> int:
    spec = _prepare(_load_spec, args.config)
    if not (0.0 < args.sigma_min < args.sigma_max):
        raise _Usage(f"need 0 < --sigma-min < --sigma-max, got "
                     f"({args.sigma_min}, {args.sigma_max})")
    if args.count < 4:
        raise _Usage(f"--count must be >= 4, got {args.count}")
    if args.envelope:
        cap = spec.solver.horizon ** spec.params.theta
        if args.sigma_max > cap * (1.0 + 1e-12):
            raise _Usage(f"--envelope is only defined for radii up to "
                         f"horizon^theta = {cap!r}; lower --sigma-max")
    sigmas = np.geomspace(args.sigma_min, args.sigma_max, args.count)
    report = solve(spec.solver)
    est = measure_trace(report, sigmas, args.tau0)
    check = None
    if args.envelope:
        const = envelope_constant(spec.params, spec.solver.horizon)
        check = check_envelope(est, const.spec)
    _emit(io.format_trace_csv(est, check), args.out)
    return 0


def _cmd_constants(args) -> int:
    prm = _prepare(ProblemParams, args.N, args.m, args.p)
    if not args.T > 0.0:
        raise _Usage(f"--T must be positive, got {args.T}")
    const = envelope_constant(prm, args.T)
    _emit(io.format_constants_csv(const), args.out)
    return 0


def _cmd_validate(args) -> int:
    checks = run_suite()
    _emit(format_suite_csv(checks), args.out)
    return 0 if all(c.passed for c in checks) else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmelab",
        description="Numerical laboratory for slow diffusion with a "
                    "power source.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="integrate one configured problem")
    s.add_argument("config", help="experiment config file")
    s.add_argument("--out", help="write the step series CSV here "
                                 "(default: stdout)")
    s.add_argument("--field-out", help="also write the final state as a "
                                       "field CSV")
    s.add_argument("--log", help="write JSON-lines events here")
    s.set_defaults(func=_cmd_solve)

    n = sub.add_parser("norm", help="evaluate a localized norm of a saved "
                                    "field")
    n.add_argument("field", help="field CSV (see solve --field-out)")
    n.add_argument("--kind", required=True, choices=["morrey", "orlicz-eta"])
    n.add_argument("--q", type=float, help="integrability exponent (morrey)")
    n.add_argument("--alpha", type=float, default=1.0,
                   help="average power (morrey) or log power (orlicz-eta)")
    n.add_argument("--cap", type=float, help="largest window radius")
    n.add_argument("--horizon", type=float, default=1.0,
                   help="time scale for the orlicz-eta weight")
    n.add_argument("--out")
    n.set_defaults(func=_cmd_norm)

    d = sub.add_parser("dichotomy", help="bisect the existence/blow-up "
                                         "threshold of the singular family")
    d.add_argument("config")
    d.add_argument("--c-lo", type=float, required=True, dest="c_lo")
    d.add_argument("--c-hi", type=float, required=True, dest="c_hi")
    d.add_argument("--steps", type=int, required=True)
    d.add_argument("--out")
    d.add_argument("--log")
    d.set_defaults(func=_cmd_dichotomy)

    t = sub.add_parser("trace-check", help="measure sup-ball masses of an "
                                           "early snapshot over a radius "
                                           "ladder")
    t.add_argument("config")
    t.add_argument("--tau0", type=float, help="snapshot time (default: "
                                              "first settled snapshot)")
    t.add_argument("--sigma-min", type=float, required=True, dest="sigma_min")
    t.add_argument("--sigma-max", type=float, required=True, dest="sigma_max")
    t.add_argument("--count", type=int, default=16, help="ladder size")
    t.add_argument("--envelope", action="store_true",
                   help="also check the measured masses against the "
                        "admissible envelope constant")
    t.add_argument("--out")
    t.set_defaults(func=_cmd_trace_check)

    c = sub.add_parser("constants", help="print the admissible envelope "
                                         "constant and its schedule")
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--m", type=float, required=True)
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--T", type=float, default=1.0, help="horizon")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_constants)

    v = sub.add_parser("validate", help="run the built-in oracle suite")
    v.add_argument("--out")
    v.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems and 0 on --help; fold into
        # the documented contract (1 = usage, 0 = success)
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"pmelab: {exc}", file=sys.stderr)
        return 1
    except (SolverError, NumericalInstability, GridError,
            QuadratureError) as exc:
        print(f"pmelab: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
