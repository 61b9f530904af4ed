"""Price ingestion and construction of the problem matrices.

A CSV of dated prices becomes a PriceMatrix; log-prices are centered
column-wise, a first-order vector autoregression is fit by ridge least
squares, and the predictability numerator B' Cov B together with the
covariance itself yields (M, A) plus the variance floor phi, set to a
multiplier times one fifth of the median asset variance.
"""
from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    EstimationError,
    IngestError,
    InsufficientData,
    InvalidInput,
    InvalidMatrix,
    NotPositiveDefinite,
)
from .linalg import cholesky, solve_cholesky
from .model import ProblemInstance


@dataclass(frozen=True)
class PriceMatrix:
    """Strictly positive T x N price panel with aligned dates and tickers.

    Rows dropped during ingestion (blank cells) are only counted here;
    the stored panel has no gaps. Requires T >= N + 2 so the regression
    below has enough rows.
    """

    tickers: tuple[str, ...]
    dates: tuple[str, ...]
    prices: np.ndarray
    dropped_rows: int = 0

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=np.float64)
        object.__setattr__(self, "prices", prices)
        if prices.ndim != 2:
            raise InvalidInput(f"prices must be 2-D, got shape {prices.shape}")
        t, n = prices.shape
        if len(self.tickers) != n:
            raise InvalidInput(f"{len(self.tickers)} tickers for {n} price columns")
        if len(self.dates) != t:
            raise InvalidInput(f"{len(self.dates)} dates for {t} price rows")
        if n == 0:
            raise InvalidInput("price panel has no columns")
        if not all(self.tickers):
            raise InvalidInput("tickers must be non-empty strings")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0.0):
            raise InvalidInput("prices must be finite and strictly positive")
        if any(b < a for a, b in zip(self.dates, self.dates[1:])):
            raise InvalidInput("dates must be sorted ascending")
        if t < n + 2:
            raise InsufficientData(
                f"{t} usable rows for {n} assets; need at least {n + 2}"
            )

    @property
    def t(self) -> int:
        return self.prices.shape[0]

    @property
    def n(self) -> int:
        return self.prices.shape[1]


@dataclass(frozen=True)
class EstimationConfig:
    """Regularization and floor settings for build_instance.

    ridge_B is added to the regression normal matrix as-is; ridge_M and
    ridge_A are scaled by trace(Cov)/N before being added, so they act
    relative to the data's own units.
    """

    ridge_B: float = 1e-6
    ridge_M: float = 1e-8
    ridge_A: float = 1e-8
    phi_multiplier: float = 1.0

    def __post_init__(self):
        if self.ridge_B < 0.0 or self.ridge_M < 0.0 or self.ridge_A < 0.0:
            raise InvalidInput("ridge coefficients must be nonnegative")
        if not self.phi_multiplier > 0.0:
            raise InvalidInput("phi_multiplier must be positive")


def load_prices(path) -> PriceMatrix:
    """Parse a price CSV with header ``date,TICKER1,TICKER2,...``.

    Rows with blank cells are dropped (counted in the result); rows are
    sorted by their ISO dates. Unparsable or nonpositive cells raise
    IngestError with 1-based row and column; fewer than N + 2 usable rows
    raises InsufficientData.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise IngestError(f"{path} is empty")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise IngestError("header must name a date column and at least one ticker")
    tickers = tuple(header[1:])
    if not all(tickers):
        raise IngestError("header has a blank ticker name")

    parsed: list[tuple[str, list[float]]] = []
    dropped = 0
    for rownum, raw in enumerate(rows[1:], start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) > len(header):
            raise IngestError(
                f"row has {len(raw)} cells, header has {len(header)}", row=rownum
            )
        cells = [c.strip() for c in raw] + [""] * (len(header) - len(raw))
        if any(c == "" for c in cells):
            dropped += 1
            continue
        try:
            date = datetime.date.fromisoformat(cells[0])
        except ValueError as exc:
            raise IngestError(
                f"unparsable date {cells[0]!r}", row=rownum, column=1
            ) from exc
        values = []
        for j, cell in enumerate(cells[1:], start=2):
            try:
                v = float(cell)
            except ValueError as exc:
                raise IngestError(
                    f"unparsable price {cell!r}", row=rownum, column=j
                ) from exc
            if not np.isfinite(v) or v <= 0.0:
                raise IngestError(
                    f"price must be positive and finite, got {cell!r}",
                    row=rownum,
                    column=j,
                )
            values.append(v)
        parsed.append((date.isoformat(), values))

    parsed.sort(key=lambda item: item[0])
    if len(parsed) < len(tickers) + 2:
        raise InsufficientData(
            f"{len(parsed)} usable rows for {len(tickers)} assets; "
            f"need at least {len(tickers) + 2}"
        )
    dates = tuple(d for d, _ in parsed)
    prices = np.array([v for _, v in parsed], dtype=np.float64)
    return PriceMatrix(tickers=tickers, dates=dates, prices=prices, dropped_rows=dropped)


def log_centered(prices: np.ndarray) -> np.ndarray:
    """Column-centered log prices."""
    s = np.log(np.asarray(prices, dtype=np.float64))
    return s - s.mean(axis=0)


def var_coefficient(s: np.ndarray, ridge_b: float) -> np.ndarray:
    """Lag-one autoregression coefficient B with S_2..T ~ S_1..T-1 B.

    Solves the ridge normal equations (S1'S1 + ridge I) B = S1'S2 by
    Cholesky; a singular system raises EstimationError.
    """
    s1, s2 = s[:-1], s[1:]
    n = s.shape[1]
    gram = s1.T @ s1 + ridge_b * np.eye(n)
    try:
        lo = cholesky(gram)
    except NotPositiveDefinite as exc:
        raise EstimationError(
            "regression normal equations are singular; raise ridge_B or check data"
        ) from exc
    rhs = s1.T @ s2
    b = np.empty((n, n))
    for j in range(n):
        b[:, j] = solve_cholesky(lo, rhs[:, j])
    return b


def covariance(s: np.ndarray) -> np.ndarray:
    """Sample covariance of the centered series, divisor T - 1."""
    t = s.shape[0]
    return (s.T @ s) / (t - 1)


def build_instance(
    p: PriceMatrix, k: int, cfg: EstimationConfig | None = None
) -> ProblemInstance:
    """Assemble the portfolio problem (M, A, phi, k) from a price panel.

    M is the autoregression's predictability numerator B' Cov B and A the
    covariance itself, each with a trace-scaled ridge; phi is
    phi_multiplier times one fifth of the median asset variance. Flat or
    otherwise degenerate data raises EstimationError.
    """
    cfg = cfg or EstimationConfig()
    s = log_centered(p.prices)
    gamma = covariance(s)
    trace = float(np.trace(gamma))
    if not trace > 0.0:
        raise EstimationError("price panel has no variance; cannot estimate")
    b = var_coefficient(s, cfg.ridge_B)
    scale = trace / p.n
    eye = np.eye(p.n)
    m = b.T @ gamma @ b + cfg.ridge_M * scale * eye
    a = gamma + cfg.ridge_A * scale * eye
    phi = cfg.phi_multiplier * float(np.median(np.diag(gamma))) / 5.0
    try:
        return ProblemInstance(M=m, A=a, phi=phi, k=k)
    except (InvalidMatrix, NotPositiveDefinite, InvalidInput) as exc:
        raise EstimationError(f"estimated matrices rejected: {exc}") from exc
