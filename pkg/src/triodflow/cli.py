"""Command line front end.

Subcommands::

    triodflow run <config>        integrate and write the configured outputs
    triodflow check <config>      admissibility and ellipticity of the initial data
    triodflow steiner <config>    equilibrium junction of the straight triod
    triodflow rate-fit <csv>      fit C / sqrt(T - t) to a curvature series
    triodflow wulff <config> <n>  sample the Wulff shape boundary

Exit codes: 0 on success, 1 on solver failure or a failed check, 2 on
unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .anisotropy import ellipticity_bounds, wulff_boundary
from .diagnostics import rate_fit, steiner_point
from .errors import FitDegenerate, IoError, ParseError, TriodFlowError, ValidationError
from .flow import run
from .geometry import admissibility_report
from .io import RunWriter, build_network, load_config

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    net = build_network(cfg)
    base = os.path.dirname(os.path.abspath(args.config))
    try:
        writer = RunWriter(cfg.output, cfg.anisotropy, net, base)
    except IoError as exc:
        print(f"error: cannot open outputs: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        state, stop = run(net, cfg.anisotropy, cfg.flow, writer)
    except BaseException:
        writer.close()
        raise
    try:
        writer.close(stop)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"stop: {stop}")
    print(f"t = {_fmt(state.t)}  steps = {state.step_index}  junction = {_fmt(state.net.junction[0])} {_fmt(state.net.junction[1])}")
    return EXIT_FAIL if stop.kind == "SolverFailure" else EXIT_OK


def _cmd_check(args) -> int:
    cfg = load_config(args.config)
    net = build_network(cfg)
    m, M = ellipticity_bounds(cfg.anisotropy)
    report = admissibility_report(net, cfg.anisotropy, cfg.flow.admissibility_tol, cfg.flow.a0_floor)
    print(f"ellipticity bounds: m = {_fmt(m)}  M = {_fmt(M)}")
    print(report)
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_steiner(args) -> int:
    cfg = load_config(args.config)
    q0 = cfg.initial.junction if cfg.initial.kind == "straight" else cfg.initial.curves[0][0]
    res = steiner_point(cfg.anisotropy, np.array(cfg.endpoints), q0)
    print(f"q* = {_fmt(res.point[0])} {_fmt(res.point[1])}")
    print(f"herring residual = {res.residual:.3e}")
    if res.degenerate:
        print("degenerate: the minimizer is an endpoint")
    return EXIT_OK


def _read_series(path):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    if not lines:
        raise ParseError("empty series file")
    first = lines[0].split(",")
    cols = (0, 1)
    try:
        [float(v) for v in first]
        body = lines
    except ValueError:
        names = [c.strip() for c in first]
        t_col = names.index("t") if "t" in names else 0
        y_col = names.index("kphi_l2sq") if "kphi_l2sq" in names else (1 if t_col != 1 else 0)
        cols = (t_col, y_col)
        body = lines[1:]
    data = []
    for k, ln in enumerate(body):
        parts = ln.split(",")
        try:
            data.append((float(parts[cols[0]]), float(parts[cols[1]])))
        except (ValueError, IndexError):
            raise ParseError(f"malformed row: {ln!r}", line=k + 1) from None
    return data


def _cmd_rate_fit(args) -> int:
    series = _read_series(args.csv)
    try:
        fit = rate_fit(series)
    except FitDegenerate as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"C = {_fmt(fit.C)}")
    print(f"T_est = {_fmt(fit.T)}")
    print(f"rms = {_fmt(fit.rms)}")
    return EXIT_OK


def _cmd_wulff(args) -> int:
    cfg = load_config(args.config)
    if args.n < 4:
        raise ValidationError("n", "at least 4 points are required")
    for p in wulff_boundary(cfg.anisotropy, args.n):
        print(f"{_fmt(p[0])} {_fmt(p[1])}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="triodflow", description="Anisotropic curvature flow of planar triods.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("run", help="integrate the flow and write outputs")
    s.add_argument("config")
    s.set_defaults(func=_cmd_run)
    s = sub.add_parser("check", help="admissibility report of the initial network")
    s.add_argument("config")
    s.set_defaults(func=_cmd_check)
    s = sub.add_parser("steiner", help="equilibrium junction of the straight triod")
    s.add_argument("config")
    s.set_defaults(func=_cmd_steiner)
    s = sub.add_parser("rate-fit", help="fit C/sqrt(T - t) to a CSV series")
    s.add_argument("csv")
    s.set_defaults(func=_cmd_rate_fit)
    s = sub.add_parser("wulff", help="print Wulff boundary points")
    s.add_argument("config")
    s.add_argument("n", type=int)
    s.set_defaults(func=_cmd_wulff)
    return p


def dispatch(argv=None) -> int:
    """Run one subcommand and return its exit code."""
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TriodFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main() -> None:
    sys.exit(dispatch())
