"""Band-trading evaluation of a portfolio on a held-out price window.

The portfolio's spread is its weight vector dotted with log prices. The
strategy opens short at mean + d*std, opens long at mean - d*std, closes
when the spread comes back through the mean, and force-closes at the end
of the window. P&L accrues per step from the spread change times the held
direction; ROI divides by the gross exposure ||y||_1 and the Sharpe ratio
is its mean over its population standard deviation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, InvalidPrice, NoVolatility

OPEN_LONG = "open_long"
OPEN_SHORT = "open_short"
CLOSE = "close"
_ACTIONS = (OPEN_LONG, OPEN_SHORT, CLOSE)


@dataclass(frozen=True)
class TradeEvent:
    t: int
    action: str
    spread: float


@dataclass(frozen=True)
class TradeLog:
    """Chronological open/close events; every open is eventually closed."""

    events: tuple[TradeEvent, ...]

    def __post_init__(self):
        open_at: int | None = None
        last_t = -1
        for ev in self.events:
            if ev.action not in _ACTIONS:
                raise InvalidInput(f"unknown trade action {ev.action!r}")
            if ev.t < last_t:
                raise InvalidInput("trade events must be in chronological order")
            last_t = ev.t
            if ev.action == CLOSE:
                if open_at is None:
                    raise InvalidInput(f"close at t={ev.t} without an open position")
                if ev.t <= open_at:
                    raise InvalidInput(f"close at t={ev.t} does not follow its open")
                open_at = None
            else:
                if open_at is not None:
                    raise InvalidInput(f"open at t={ev.t} while a position is held")
                open_at = ev.t
        if open_at is not None:
            raise InvalidInput(f"position opened at t={open_at} is never closed")

    @property
    def n_trades(self) -> int:
        return sum(1 for ev in self.events if ev.action != CLOSE)


@dataclass(frozen=True)
class BacktestReport:
    spread: np.ndarray
    pnl: np.ndarray
    roi: np.ndarray
    cum_pnl: float
    sharpe: float
    sharpe_degenerate: bool
    roi_mean: float
    roi_std: float
    gross_exposure: float
    band_mu: float
    band_sigma: float
    band_d: float
    trades: TradeLog


def compute_spread(p, y: np.ndarray) -> np.ndarray:
    """Spread series y' log(p_t); accepts a PriceMatrix or a T x N array."""
    prices = np.asarray(getattr(p, "prices", p), dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if prices.ndim != 2:
        raise InvalidInput(f"prices must be 2-D, got shape {prices.shape}")
    if y.shape != (prices.shape[1],):
        raise InvalidInput(
            f"portfolio has {y.size} weights for {prices.shape[1]} assets"
        )
    if not np.all(np.isfinite(y)):
        raise InvalidInput("portfolio weights contain non-finite entries")
    if not np.all(np.isfinite(prices)) or np.any(prices <= 0.0):
        raise InvalidPrice("prices must be finite and strictly positive")
    return np.log(prices) @ y


def run_strategy(spread: np.ndarray, d: float = 1.0) -> TradeLog:
    """Apply the band rule to a spread series and return the trade log.

    Opens only while flat and never at the last index; a close and a
    fresh open can share a timestamp when the spread jumps across both
    the mean and the far band in one step. A flat series has no band to
    trade and raises NoVolatility.
    """
    spread = np.asarray(spread, dtype=np.float64)
    if spread.ndim != 1 or spread.size < 2:
        raise InvalidInput("spread must be a 1-D series of length >= 2")
    if not np.all(np.isfinite(spread)):
        raise InvalidInput("spread contains non-finite entries")
    if not (d > 0.0 and np.isfinite(d)):
        raise InvalidInput(f"band width d must be positive, got {d}")
    mu = float(spread.mean())
    sigma = float(spread.std())
    # a constant series can still show std ~1 ulp because the mean rounds;
    # check constancy directly so flat data never trades roundoff noise
    if sigma == 0.0 or np.all(spread == spread[0]):
        raise NoVolatility("spread has zero standard deviation; no bands to trade")
    hi = mu + d * sigma
    lo = mu - d * sigma
    events: list[TradeEvent] = []
    pos = 0
    last = spread.size - 1
    for t in range(spread.size):
        s = float(spread[t])
        if pos == 1 and s >= mu:
            events.append(TradeEvent(t, CLOSE, s))
            pos = 0
        elif pos == -1 and s <= mu:
            events.append(TradeEvent(t, CLOSE, s))
            pos = 0
        if pos == 0 and t < last:
            if s >= hi:
                events.append(TradeEvent(t, OPEN_SHORT, s))
                pos = -1
            elif s <= lo:
                events.append(TradeEvent(t, OPEN_LONG, s))
                pos = 1
    if pos != 0:
        events.append(TradeEvent(last, CLOSE, float(spread[last])))
    return TradeLog(events=tuple(events))


def pnl_series(spread: np.ndarray, log: TradeLog) -> np.ndarray:
    """Per-step profit: held direction times the spread change.

    Entry t carries the position taken at t - 1, so pnl[0] is always 0
    and a position opened at t first pays at t + 1.
    """
    spread = np.asarray(spread, dtype=np.float64)
    if spread.ndim != 1:
        raise InvalidInput("spread must be a 1-D series")
    if log.events and log.events[-1].t >= spread.size:
        raise InvalidInput("trade log extends past the end of the spread series")
    pos = np.zeros(spread.size)
    cur = 0.0
    ei = 0
    for t in range(spread.size):
        while ei < len(log.events) and log.events[ei].t == t:
            action = log.events[ei].action
            cur = 0.0 if action == CLOSE else (1.0 if action == OPEN_LONG else -1.0)
            ei += 1
        pos[t] = cur
    pnl = np.zeros(spread.size)
    pnl[1:] = pos[:-1] * np.diff(spread)
    return pnl


def sharpe_ratio(roi: np.ndarray) -> float:
    """Mean over population standard deviation; 0 when that is undefined."""
    roi = np.asarray(roi, dtype=np.float64)
    if roi.size == 0:
        return 0.0
    std = float(roi.std())
    if std == 0.0:
        return 0.0
    return float(roi.mean()) / std


def evaluate(p, y: np.ndarray, d: float = 1.0) -> BacktestReport:
    """Full backtest: spread, band trades, P&L, ROI, and Sharpe.

    The Sharpe window drops the leading pnl entry (always zero by
    construction); a zero or undefined ROI spread is flagged and reported
    as Sharpe 0.
    """
    spread = compute_spread(p, y)
    log = run_strategy(spread, d)
    pnl = pnl_series(spread, log)
    y = np.asarray(y, dtype=np.float64)
    gross = float(np.sum(np.abs(y)))
    roi = pnl / gross
    window = roi[1:]
    std = float(window.std()) if window.size else 0.0
    degenerate = window.size == 0 or std == 0.0
    return BacktestReport(
        spread=spread,
        pnl=pnl,
        roi=roi,
        cum_pnl=float(np.sum(pnl)),
        sharpe=sharpe_ratio(window),
        sharpe_degenerate=degenerate,
        roi_mean=float(window.mean()) if window.size else 0.0,
        roi_std=std,
        gross_exposure=gross,
        band_mu=float(spread.mean()),
        band_sigma=float(spread.std()),
        band_d=float(d),
        trades=log,
    )
