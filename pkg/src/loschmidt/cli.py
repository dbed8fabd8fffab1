"""Command-line front end: reproducible CSV/JSON datasets and a validation run."""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from importlib.metadata import PackageNotFoundError, version

from . import analysis, echo, planar
from .numerics import IMAGINARY_TIME, REAL_TIME, TimeArgument

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_DOMAIN = 0, 1, 2, 3

COMMANDS = ("amplitude", "dfe", "contour", "critical", "qsl", "errors", "impurity", "thermal", "validate")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _artifact_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:  # pragma: no cover
        return "unknown"


def parse_range(text: str, flag: str) -> list[float]:
    """``min:max:steps`` (inclusive, steps intervals) or a single value."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) != 3:
            raise ValueError
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"{flag}: expected min:max:steps or a number, got {text!r}") from None
    if steps < 1 or lo > hi:
        raise UsageError(f"{flag}: need steps >= 1 and min <= max, got {text!r}")
    # exact endpoints, evenly spaced interior
    return [lo + (hi - lo) * k / steps for k in range(steps)] + [hi]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="loschmidt", description="Loschmidt echo of the XY chain via random matrices")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--n", type=int, default=10)
        s.add_argument("--ell", type=str, default=None, help="L/N as a rational, e.g. 3 or 5/2")
        s.add_argument("--tau", type=str, default=None, help="min:max:steps or a single value")
        s.add_argument("--gamma", type=str, default=None, help="min:max:steps or a single value")
        s.add_argument("--boundary", choices=("pbc", "abc"), default="pbc")
        s.add_argument("--time", choices=("real", "imaginary"), default="real")
        s.add_argument("--format", choices=("csv", "json"), default="json" if name in ("critical", "validate") else "csv")
        s.add_argument("--out", type=str, default=None)
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--kmax", type=int, default=8)
        s.add_argument("--points", type=int, default=512)
        s.add_argument("--p", type=int, default=2, help="largest impurity order")
    return p


# ---------------------------------------------------------------------------
# row producers (top level so worker processes can pickle them)


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(float(x))  # plain repr, also for numpy scalars
    return "" if x is None else str(x)


def _amplitude_row(spec, kind, x):
    n = spec.n_flipped
    r = echo.amplitude(spec, TimeArgument.from_scaled(kind, x, n))
    return {
        "x": x,
        "value": r.time.value,
        "log_magnitude": r.amplitude.log_magnitude,
        "phase": r.amplitude.phase,
        "echo_log": r.echo_log,
        "free_energy": r.free_energy,
    }


def _dfe_row(spec, tau):
    r = echo.sweep_row(spec, tau)
    return {"tau": r.tau, "t": r.t, "log_echo": r.log_echo, "f": r.f, "phase": r.phase}


def _contour_rows(boundary, n_points, tau):
    c = planar.trace_contour(boundary, tau, n_points)
    if isinstance(c, planar.PinchedContour):
        return [{"tau": tau, "index": None, "re": None, "im": None, "residual": None, "status": "pinched"}]
    return [
        {"tau": tau, "index": i, "re": float(z.real), "im": float(z.imag), "residual": float(r), "status": "ok"}
        for i, (z, r) in enumerate(zip(c.points, c.level_residuals))
    ]


def _errors_row(n, ell, kind, boundary, x):
    e = analysis.error_E(n, ell, x, kind, boundary)
    r = None
    if kind == REAL_TIME and boundary == "pbc":
        try:
            r = analysis.error_R(n, ell, x)
        except ValueError:
            r = None
    return {"x": x, "ell": str(ell), "E": e, "R": r}


def _impurity_rows(n, p_max, tau):
    t = n * tau
    rows = []
    for p in range(p_max + 1):
        v = echo.impurity_ratio(n, t, p)
        planar_v = (-1j * t) ** p / math.factorial(p)
        rows.append({"tau": tau, "t": t, "p": p, "re": v.real, "im": v.imag, "planar_re": planar_v.real, "planar_im": planar_v.imag})
    return rows


def _thermal_row(spec, gamma):
    n = spec.n_flipped
    beta = n * gamma
    r = echo.amplitude(spec, TimeArgument(IMAGINARY_TIME, beta, gamma))
    d = float(echo.log_amplitude_derivatives(spec, TimeArgument(IMAGINARY_TIME, beta, gamma), 1)[0].real) / n
    _, planar_d = planar.planar_free_energy(spec.boundary, IMAGINARY_TIME, gamma)
    return {"gamma": gamma, "beta": beta, "log_amplitude": r.amplitude.log_magnitude, "F": r.free_energy, "dF": d, "dF_planar": planar_d}


def _map(func, items, workers):
    if workers <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _grid(args, flag: str) -> list[float]:
    value = getattr(args, flag)
    if value is None:
        raise UsageError(f"--{flag} is required for '{args.command}'")
    return parse_range(value, f"--{flag}")


def _ell(args):
    from fractions import Fraction

    if args.ell is None:
        return None
    try:
        ell = Fraction(args.ell)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--ell: not a rational number: {args.ell!r}") from None
    L = ell * args.n
    if L.denominator != 1:
        raise UsageError(f"--ell: L = ell*N = {float(L)} must be an integer")
    return ell


def _spec(args, sites=None):
    try:
        return echo.ChainSpec(args.n, sites, args.boundary)
    except echo.InvalidSpecError as e:
        raise UsageError(f"--n/--ell: {e}") from None


def run_command(args) -> tuple[list[dict], dict]:
    """Compute the dataset for a parsed command; returns (rows, extra meta)."""
    cmd = args.command
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    if cmd == "critical":
        d = planar.critical_data()
        return [{"tau_cr": d.tau_cr, "ell_star": d.ell_star, "z0_imag": d.z0_imag, "tau_cr_contour": planar.critical_time_via_contour()}], {}
    if cmd == "qsl":
        if args.kmax < 1:
            raise UsageError("--kmax must be >= 1")
        ns = [2 * k + 1 for k in range(1, args.kmax + 1)]
        recs = _map(analysis.qsl_time, ns, args.workers)
        return [{"n": r.n_flipped, "tau_qsl": r.tau_qsl, "t_zero": r.t_zero} for r in recs], {}
    if cmd == "contour":
        rows = _map(partial(_contour_rows, args.boundary, args.points), _grid(args, "tau"), args.workers)
        return [r for block in rows for r in block], {}
    ell = _ell(args)
    sites = None if ell is None else int(ell * args.n)
    if cmd == "amplitude":
        kind = REAL_TIME if args.time == "real" else IMAGINARY_TIME
        xs = _grid(args, "tau" if kind == REAL_TIME else "gamma")
        return _map(partial(_amplitude_row, _spec(args, sites), kind), xs, args.workers), {}
    if cmd == "dfe":
        return _map(partial(_dfe_row, _spec(args, sites)), _grid(args, "tau"), args.workers), {}
    if cmd == "errors":
        if ell is None:
            raise UsageError("--ell is required for 'errors'")
        kind = REAL_TIME if args.time == "real" else IMAGINARY_TIME
        xs = _grid(args, "tau" if kind == REAL_TIME else "gamma")
        return _map(partial(_errors_row, args.n, ell, kind, args.boundary), xs, args.workers), {}
    if cmd == "impurity":
        if not 0 <= args.p <= args.n:
            raise UsageError("--p must lie in 0..N")
        rows = _map(partial(_impurity_rows, args.n, args.p), _grid(args, "tau"), args.workers)
        return [r for block in rows for r in block], {}
    if cmd == "thermal":
        return _map(partial(_thermal_row, _spec(args, sites)), _grid(args, "gamma"), args.workers), {}
    raise UsageError(f"unknown command {cmd!r}")


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return {"special": "inf" if v > 0 else "-inf"}
    return v


def render(rows: list[dict], fmt: str, meta: dict) -> str:
    if fmt == "json":
        data = [{k: _json_value(v) for k, v in r.items()} for r in rows]
        return json.dumps({"meta": meta, "data": data}, indent=1) + "\n"
    buf = io.StringIO()
    if rows:
        cols = list(rows[0])
        buf.write(",".join(cols) + "\n")
        for r in rows:
            buf.write(",".join(_fmt(r[c]) for c in cols) + "\n")
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _meta(args) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "workers")}
    return {"artifact_version": _artifact_version(), "config": config}


def _origin(exc: BaseException) -> str:
    """Package module where the exception was raised."""
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        path = os.path.normpath(frame.filename).split(os.sep)
        if len(path) > 1 and path[-2] == "loschmidt":
            return os.path.splitext(path[-1])[0].lstrip("_")
    return type(exc).__module__


def _params(args) -> str:
    keep = ("n", "ell", "tau", "gamma", "boundary", "time", "kmax", "p")
    return " ".join(f"--{k} {getattr(args, k)}" for k in keep if getattr(args, k, None) is not None)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    start = time.perf_counter()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        if args.command == "validate":
            from .validation import run_validation

            report = run_validation()
            for line in report["lines"]:
                print(line)
            text = json.dumps({"meta": _meta(args), "data": report["checks"]}, indent=1) + "\n"
            if args.out:
                write_atomic(args.out, text)
            else:
                sys.stdout.write(text)
            return EXIT_OK if report["passed"] else EXIT_VALIDATION
        rows, extra = run_command(args)
        _emit(render(rows, args.format, {**_meta(args), **extra}), args.out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, RuntimeError) as e:
        print(f"numerical-domain error in {_origin(e)} ({type(e).__name__}): {e} [{args.command} {_params(args)}]", file=sys.stderr)
        return EXIT_DOMAIN
    print(f"{args.command}: rows={len(rows)} wall={time.perf_counter() - start:.3f}s", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
