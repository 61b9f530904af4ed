"""Artifact writers and readers for the command-line pipeline.

Structured artifacts are JSON, series are CSV. Every float is emitted
with 17 significant digits, which is enough to round-trip an IEEE double
exactly, so identical inputs produce byte-identical files and the
round trip parse(serialize(report)) reproduces the report field for
field. Key order is fixed by construction (the emitter preserves dict
insertion order) rather than by sorting, so the files stay diffable.
"""
from __future__ import annotations

import io
import json
import math
from typing import Any, Sequence

import numpy as np

from .backtest import BacktestReport, TradeEvent, TradeLog
from .errors import InvalidInput
from .model import ProblemInstance

SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise InvalidInput(f"cannot serialize non-finite number {x!r}")
    return format(float(x), ".17g")


def dumps(obj: Any) -> str:
    """Serialize nested dicts/lists/scalars to canonical JSON text."""
    out = io.StringIO()
    _emit(obj, out, 0)
    out.write("\n")
    return out.getvalue()


def _emit(obj: Any, out: io.StringIO, depth: int) -> None:
    pad = "  " * depth
    inner = "  " * (depth + 1)
    if isinstance(obj, dict):
        if not obj:
            out.write("{}")
            return
        out.write("{\n")
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise InvalidInput(f"JSON keys must be strings, got {key!r}")
            out.write(f"{inner}{json.dumps(key)}: ")
            _emit(value, out, depth + 1)
            out.write(",\n" if i + 1 < len(obj) else "\n")
        out.write(pad + "}")
    elif isinstance(obj, (list, tuple)):
        items = list(obj)
        if not items:
            out.write("[]")
            return
        # Flat numeric rows stay on one line; anything nested goes multiline.
        if all(isinstance(v, (int, float, bool)) or v is None for v in items):
            out.write("[" + ", ".join(_scalar(v) for v in items) + "]")
            return
        out.write("[\n")
        for i, value in enumerate(items):
            out.write(inner)
            _emit(value, out, depth + 1)
            out.write(",\n" if i + 1 < len(items) else "\n")
        out.write(pad + "]")
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), out, depth)
    else:
        out.write(_scalar(obj))


def _scalar(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt(float(v))
    if isinstance(v, str):
        return json.dumps(v)
    raise InvalidInput(f"cannot serialize value of type {type(v).__name__}")


def loads(text: str) -> Any:
    return json.loads(text)


# ---------------------------------------------------------------------------
# instance.json


def instance_document(inst: ProblemInstance, tickers: Sequence[str]) -> dict:
    tickers = [str(t) for t in tickers]
    if len(tickers) != inst.n:
        raise InvalidInput(
            f"{len(tickers)} tickers for an instance of size {inst.n}"
        )
    return {
        "schema": SCHEMA_VERSION,
        "kind": "instance",
        "tickers": tickers,
        "phi": inst.phi,
        "M": inst.M,
        "A": inst.A,
    }


def parse_instance(doc: dict, k: int) -> tuple[ProblemInstance, list[str]]:
    """Rebuild a ProblemInstance from a parsed instance document."""
    try:
        tickers = [str(t) for t in doc["tickers"]]
        m = np.asarray(doc["M"], dtype=np.float64)
        a = np.asarray(doc["A"], dtype=np.float64)
        phi = float(doc["phi"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed instance document: {exc}") from exc
    inst = ProblemInstance(M=m, A=a, phi=phi, k=k)
    if len(tickers) != inst.n:
        raise InvalidInput(
            f"{len(tickers)} tickers for an instance of size {inst.n}"
        )
    return inst, tickers


# ---------------------------------------------------------------------------
# solution.json


def solution_document(
    tickers: Sequence[str],
    x: np.ndarray,
    support: Sequence[int],
    objective: float,
    kkt_residual: float,
    dual_gap: float,
    stage_one_objective: float,
    variance: float,
    trace_iterations: Sequence[tuple[Sequence[int], float]],
    swap_size: int,
    evaluated_count: int,
) -> dict:
    support = [int(i) for i in support]
    return {
        "schema": SCHEMA_VERSION,
        "kind": "solution",
        "x": np.asarray(x, dtype=np.float64),
        "support": {
            "indices": support,
            "tickers": [str(tickers[i]) for i in support],
        },
        "objective": float(objective),
        "variance": float(variance),
        "kkt_residual": float(kkt_residual),
        "dual_gap": float(dual_gap),
        "stage_one_objective": float(stage_one_objective),
        "final_objective": float(objective),
        "trace": {
            "swap_size": int(swap_size),
            "evaluated_count": int(evaluated_count),
            "iterations": [
                {"support": [int(i) for i in sup], "value": float(val)}
                for sup, val in trace_iterations
            ],
        },
    }


def parse_solution(doc: dict) -> tuple[np.ndarray, tuple[int, ...]]:
    """Extract the weight vector and support indices from a solution doc."""
    try:
        x = np.asarray(doc["x"], dtype=np.float64)
        support = tuple(int(i) for i in doc["support"]["indices"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed solution document: {exc}") from exc
    return x, support


# ---------------------------------------------------------------------------
# report.json + spread.csv


def report_document(report: BacktestReport) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "report",
        "steps": int(report.spread.shape[0]),
        "band_mu": report.band_mu,
        "band_sigma": report.band_sigma,
        "band_d": report.band_d,
        "gross_exposure": report.gross_exposure,
        "cum_pnl": report.cum_pnl,
        "roi_mean": report.roi_mean,
        "roi_std": report.roi_std,
        "sharpe": report.sharpe,
        "sharpe_degenerate": report.sharpe_degenerate,
        "n_trades": report.trades.n_trades,
        "trades": [
            {"t": ev.t, "action": ev.action, "spread": ev.spread}
            for ev in report.trades.events
        ],
        "spread": report.spread,
        "pnl": report.pnl,
        "roi": report.roi,
    }


def parse_report(doc: dict) -> BacktestReport:
    """Rebuild a BacktestReport from a parsed report document."""
    try:
        events = tuple(
            TradeEvent(t=int(ev["t"]), action=str(ev["action"]), spread=float(ev["spread"]))
            for ev in doc["trades"]
        )
        return BacktestReport(
            spread=np.asarray(doc["spread"], dtype=np.float64),
            pnl=np.asarray(doc["pnl"], dtype=np.float64),
            roi=np.asarray(doc["roi"], dtype=np.float64),
            cum_pnl=float(doc["cum_pnl"]),
            sharpe=float(doc["sharpe"]),
            sharpe_degenerate=bool(doc["sharpe_degenerate"]),
            roi_mean=float(doc["roi_mean"]),
            roi_std=float(doc["roi_std"]),
            gross_exposure=float(doc["gross_exposure"]),
            band_mu=float(doc["band_mu"]),
            band_sigma=float(doc["band_sigma"]),
            band_d=float(doc["band_d"]),
            trades=TradeLog(events=events),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed report document: {exc}") from exc


def reports_equal(a: BacktestReport, b: BacktestReport) -> bool:
    """Exact field-for-field equality (arrays compared elementwise)."""
    return (
        np.array_equal(a.spread, b.spread)
        and np.array_equal(a.pnl, b.pnl)
        and np.array_equal(a.roi, b.roi)
        and a.cum_pnl == b.cum_pnl
        and a.sharpe == b.sharpe
        and a.sharpe_degenerate == b.sharpe_degenerate
        and a.roi_mean == b.roi_mean
        and a.roi_std == b.roi_std
        and a.gross_exposure == b.gross_exposure
        and a.band_mu == b.band_mu
        and a.band_sigma == b.band_sigma
        and a.band_d == b.band_d
        and a.trades == b.trades
    )


def spread_csv(report: BacktestReport, dates: Sequence[str] | None = None) -> str:
    """Render the per-step series as CSV text.

    When ``dates`` is given it must match the series length and becomes
    the second column; otherwise only the step index labels rows.
    """
    steps = report.spread.shape[0]
    if dates is not None:
        if len(dates) != steps:
            raise InvalidInput(f"{len(dates)} dates for {steps} rows")
        header = "t,date,spread,pnl,roi,cum_pnl"
    else:
        header = "t,spread,pnl,roi,cum_pnl"
    lines = [header]
    running = 0.0
    for t in range(steps):
        running += float(report.pnl[t])
        cells = [str(t)]
        if dates is not None:
            cells.append(str(dates[t]))
        cells.extend(
            _fmt(v)
            for v in (report.spread[t], report.pnl[t], report.roi[t], running)
        )
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_json(path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
