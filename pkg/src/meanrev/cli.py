"""Command-line front end.

Five commands: ``estimate`` turns a price CSV into instance matrices,
``solve`` runs the two-stage solver on an instance, ``backtest`` replays
the band strategy for a solved portfolio, ``pipeline`` chains all three,
and ``selfcheck`` runs the built-in verification suites.

Settings resolve in precedence order: command-line flag, then config
file (a flat JSON object keyed by flag name with underscores), then the
library defaults baked into the config dataclasses. Exit codes: 0 ok,
1 usage or generic input error, 2 infeasible, 3 ingest error,
4 estimation error, 5 convergence failure, 6 flat spread.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Sequence

import numpy as np

from . import serialize
from .backtest import evaluate
from .errors import (
    ConvergenceFailure,
    DegenerateFace,
    DualUnbounded,
    EstimationError,
    Infeasible,
    IngestError,
    InsufficientData,
    InvalidPrice,
    MeanRevError,
    NoVolatility,
)
from .estimation import EstimationConfig, build_instance, load_prices
from .figures import render_report_figures
from .greedy import greedy_improve
from .penalty import PdConfig, pd_solve
from .restricted import solve_restricted
from .selfcheck import run_suites

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_INGEST = 3
EXIT_ESTIMATION = 4
EXIT_CONVERGENCE = 5
EXIT_FLAT = 6

DEFAULT_K_CAP = 4

# flag name -> (type, which config consumes it)
_SETTING_TYPES = {
    "k": int,
    "phi_multiplier": float,
    "ridge_b": float,
    "ridge_m": float,
    "ridge_a": float,
    "rho0": float,
    "rho_growth": float,
    "inner_tol": float,
    "outer_tol": float,
    "max_inner": int,
    "max_outer": int,
    "swap_size": int,
    "decrease_tol": float,
    "threads": int,
    "band_d": float,
    "seed": int,
}


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors, which this tool reserves
    # for infeasible instances; route any nonzero parser exit to code 1.
    def exit(self, status=0, message=None):  # noqa: A003 - argparse API
        if message:
            sys.stderr.write(message)
        raise SystemExit(EXIT_USAGE if status else 0)


def _parser() -> argparse.ArgumentParser:
    top = _Parser(prog="meanrev", description=__doc__.split("\n\n")[0])
    sub = top.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON file with default settings")
        p.add_argument("--out", default=".", help="output directory (default: current)")

    def add_estimation(p):
        p.add_argument("--phi-multiplier", type=float, dest="phi_multiplier")
        p.add_argument("--ridge-b", type=float, dest="ridge_b")
        p.add_argument("--ridge-m", type=float, dest="ridge_m")
        p.add_argument("--ridge-a", type=float, dest="ridge_a")

    def add_solver(p):
        p.add_argument("--k", type=int)
        p.add_argument("--rho0", type=float)
        p.add_argument("--rho-growth", type=float, dest="rho_growth")
        p.add_argument("--inner-tol", type=float, dest="inner_tol")
        p.add_argument("--outer-tol", type=float, dest="outer_tol")
        p.add_argument("--max-inner", type=int, dest="max_inner")
        p.add_argument("--max-outer", type=int, dest="max_outer")
        p.add_argument("--swap-size", type=int, dest="swap_size")
        p.add_argument("--decrease-tol", type=float, dest="decrease_tol")
        p.add_argument("--threads", type=int)

    def add_backtest(p):
        p.add_argument("--band-d", type=float, dest="band_d")
        p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("estimate", help="estimate instance matrices from a price CSV")
    p.add_argument("prices")
    add_estimation(p)
    add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("solve", help="run the two-stage solver on an instance file")
    p.add_argument("instance")
    add_solver(p)
    add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("backtest", help="replay the band strategy for a solution")
    p.add_argument("prices")
    p.add_argument("solution")
    add_backtest(p)
    add_common(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("pipeline", help="estimate, solve, and backtest in one run")
    p.add_argument("prices")
    add_estimation(p)
    add_solver(p)
    add_backtest(p)
    add_common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("selfcheck", help="run the built-in verification suites")
    p.add_argument("--seed", type=int)
    p.add_argument("--quick", action="store_true", help="reduced case counts")
    p.add_argument(
        "--inject-faults",
        action="store_true",
        help="test mode: perturb tolerances so failures are reported",
    )
    p.add_argument("--config", help="JSON file with default settings")
    p.set_defaults(func=cmd_selfcheck)

    return top


def _load_config_file(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"config file is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise CliError("config file must hold a JSON object")
    out = {}
    for key, value in raw.items():
        if key not in _SETTING_TYPES:
            raise CliError(f"unknown config key {key!r}")
        try:
            out[key] = _SETTING_TYPES[key](value)
        except (TypeError, ValueError):
            raise CliError(f"config key {key!r} has invalid value {value!r}")
    return out


class CliError(Exception):
    """Bad invocation or malformed auxiliary input; exits with code 1."""


class Settings:
    """Flag values resolved against a config file and library defaults."""

    def __init__(self, args: argparse.Namespace):
        self._args = args
        self._file = _load_config_file(getattr(args, "config", None))

    def get(self, key: str, fallback: Any = None) -> Any:
        value = getattr(self._args, key, None)
        if value is None:
            value = self._file.get(key)
        return fallback if value is None else value

    def overrides(self, *keys: str, rename: dict[str, str] | None = None) -> dict[str, Any]:
        """Collect explicitly-set values, mapped to dataclass field names."""
        rename = rename or {}
        out = {}
        for key in keys:
            value = self.get(key)
            if value is not None:
                out[rename.get(key, key)] = value
        return out


def _estimation_config(settings: Settings) -> EstimationConfig:
    kwargs = settings.overrides(
        "phi_multiplier", "ridge_b", "ridge_m", "ridge_a",
        rename={"ridge_b": "ridge_B", "ridge_m": "ridge_M", "ridge_a": "ridge_A"},
    )
    return EstimationConfig(**kwargs)


def _pd_config(settings: Settings) -> PdConfig:
    kwargs = settings.overrides(
        "rho0", "rho_growth", "inner_tol", "outer_tol", "max_inner", "max_outer",
        rename={"rho_growth": "growth"},
    )
    return PdConfig(**kwargs)


def _ensure_out(settings: Settings) -> str:
    out = settings.get("out", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _default_k(n: int) -> int:
    return min(DEFAULT_K_CAP, n - 1)


def _estimate(settings: Settings, prices_path: str, out: str):
    pm = load_prices(prices_path)
    cfg = _estimation_config(settings)
    k = settings.get("k", _default_k(pm.n))
    inst = build_instance(pm, k, cfg)
    doc = serialize.instance_document(inst, pm.tickers)
    path = os.path.join(out, "instance.json")
    serialize.write_text(path, serialize.dumps(doc))
    if pm.dropped_rows:
        print(f"dropped {pm.dropped_rows} incomplete rows")
    print(f"instance.json: {pm.n} assets, {pm.t} dates, phi={inst.phi:.6g}")
    return pm, inst


def _solve(settings: Settings, inst, tickers: Sequence[str], out: str):
    cfg = _pd_config(settings)
    y, support, diag = pd_solve(inst, cfg)
    swap = settings.get("swap_size", 2)
    sol, trace = greedy_improve(
        inst,
        support,
        s=swap,
        decrease_tol=settings.get("decrease_tol", 1e-8),
        threads=settings.get("threads", 1),
    )
    # the final support's certified solve supplies the reported dual gap
    final = solve_restricted(inst, sol.support)
    doc = serialize.solution_document(
        tickers=tickers,
        x=sol.x,
        support=sol.support,
        objective=sol.objective,
        kkt_residual=sol.kkt_residual,
        dual_gap=final.certificate.gap,
        stage_one_objective=trace.iterations[0][1],
        variance=float(sol.x @ inst.A @ sol.x),
        trace_iterations=trace.iterations,
        swap_size=trace.swap_size,
        evaluated_count=trace.evaluated_count,
    )
    path = os.path.join(out, "solution.json")
    serialize.write_text(path, serialize.dumps(doc))
    names = ",".join(str(tickers[i]) for i in sol.support)
    print(
        f"solution.json: support [{names}] objective {sol.objective:.6g} "
        f"(stage one {trace.iterations[0][1]:.6g}, {trace.evaluated_count} restricted solves)"
    )
    return sol


def _backtest(settings: Settings, pm, x: np.ndarray, out: str):
    report = evaluate(pm, x, d=settings.get("band_d", 1.0))
    serialize.write_text(
        os.path.join(out, "report.json"),
        serialize.dumps(serialize.report_document(report)),
    )
    serialize.write_text(
        os.path.join(out, "spread.csv"),
        serialize.spread_csv(report, dates=getattr(pm, "dates", None)),
    )
    extra = ""
    if not settings.get("no_plots", False):
        paths = render_report_figures(report, out)
        extra = " + " + ", ".join(os.path.basename(p) for p in paths)
    flag = " (degenerate)" if report.sharpe_degenerate else ""
    print(
        f"report.json, spread.csv{extra}: {report.trades.n_trades} trades, "
        f"cumulative P&L {report.cum_pnl:.6g}, Sharpe {report.sharpe:.6g}{flag}"
    )
    return report


def cmd_estimate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    out = _ensure_out(settings)
    _estimate(settings, args.prices, out)
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    settings = Settings(args)
    out = _ensure_out(settings)
    doc = serialize.read_json(args.instance)
    n = len(doc.get("tickers", ()))
    k = settings.get("k", _default_k(n))
    inst, tickers = serialize.parse_instance(doc, k)
    _solve(settings, inst, tickers, out)
    return EXIT_OK


def cmd_backtest(args: argparse.Namespace) -> int:
    settings = Settings(args)
    out = _ensure_out(settings)
    pm = load_prices(args.prices)
    x, support = serialize.parse_solution(serialize.read_json(args.solution))
    if x.shape != (pm.n,):
        raise CliError(
            f"solution has {x.shape[0]} weights but the panel has {pm.n} assets"
        )
    _backtest(settings, pm, x, out)
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    settings = Settings(args)
    out = _ensure_out(settings)
    pm, inst = _estimate(settings, args.prices, out)
    sol = _solve(settings, inst, pm.tickers, out)
    _backtest(settings, pm, sol.x, out)
    return EXIT_OK


def cmd_selfcheck(args: argparse.Namespace) -> int:
    settings = Settings(args)
    results = run_suites(
        seed=settings.get("seed", 0),
        quick=args.quick,
        inject=args.inject_faults,
    )
    return EXIT_OK if all(r.ok for r in results) else EXIT_USAGE


def _exit_code(exc: MeanRevError) -> int:
    if isinstance(exc, (IngestError, InsufficientData, InvalidPrice)):
        return EXIT_INGEST
    if isinstance(exc, EstimationError):
        return EXIT_ESTIMATION
    if isinstance(exc, Infeasible):
        return EXIT_INFEASIBLE
    if isinstance(exc, (ConvergenceFailure, DualUnbounded, DegenerateFace)):
        return EXIT_CONVERGENCE
    if isinstance(exc, NoVolatility):
        return EXIT_FLAT
    return EXIT_USAGE


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IngestError as exc:
        where = ""
        if exc.row is not None:
            where = f" (row {exc.row}" + (f", column {exc.column})" if exc.column else ")")
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_INGEST
    except MeanRevError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    raise SystemExit(main())
