"""Figure rendering for backtest reports.

Renders the spread with its trading bands and markers for every trade
event, plus the cumulative P&L path. Files land next to the delimited
output. Import of matplotlib is deferred so headless commands that skip
plotting never pay for it; the Agg backend keeps rendering display-free.
"""
from __future__ import annotations

import os

from .backtest import CLOSE, OPEN_LONG, OPEN_SHORT, BacktestReport

SPREAD_FIGURE = "spread.png"
PNL_FIGURE = "cumulative_pnl.png"


def render_report_figures(report: BacktestReport, out_dir: str) -> list[str]:
    """Write spread and cumulative P&L figures, returning their paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps = report.spread.shape[0]
    t = range(steps)

    fig, ax = plt.subplots(figsize=(9.0, 4.5))
    ax.plot(t, report.spread, color="#1f4e79", linewidth=1.1, label="spread")
    mu, sig, d = report.band_mu, report.band_sigma, report.band_d
    ax.axhline(mu, color="#666666", linewidth=0.9, linestyle="--", label="mean")
    for level in (mu + d * sig, mu - d * sig):
        ax.axhline(level, color="#b22222", linewidth=0.8, linestyle=":")
    markers = {OPEN_LONG: ("^", "#2e7d32"), OPEN_SHORT: ("v", "#c62828"), CLOSE: ("o", "#555555")}
    seen = set()
    for ev in report.trades.events:
        marker, color = markers[ev.action]
        label = ev.action if ev.action not in seen else None
        seen.add(ev.action)
        ax.plot([ev.t], [ev.spread], marker=marker, color=color, markersize=6,
                linestyle="none", label=label)
    ax.set_xlabel("step")
    ax.set_ylabel("spread")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    spread_path = os.path.join(out_dir, SPREAD_FIGURE)
    fig.savefig(spread_path, dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(9.0, 3.5))
    cum = report.pnl.cumsum()
    ax.plot(t, cum, color="#1f4e79", linewidth=1.2)
    ax.axhline(0.0, color="#666666", linewidth=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("cumulative P&L")
    fig.tight_layout()
    pnl_path = os.path.join(out_dir, PNL_FIGURE)
    fig.savefig(pnl_path, dpi=120)
    plt.close(fig)

    return [spread_path, pnl_path]
