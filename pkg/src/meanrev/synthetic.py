"""Deterministic generators for test instances and planted price panels.

Everything takes an explicit numpy Generator, so a fixed seed pins every
byte of the output. Used by the self-check suites and the test suite; not
part of the solving path.
"""
from __future__ import annotations

import datetime

import numpy as np

from .estimation import PriceMatrix
from .model import ProblemInstance


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-ish orthogonal matrix with a fixed sign convention."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.where(np.diag(r) == 0.0, 1.0, np.diag(r)))


def random_spd(
    rng: np.random.Generator, n: int, cond: float = 10.0, scale: float = 1.0
) -> np.ndarray:
    """Random SPD matrix with the given condition number and middle scale.

    Eigenvalues are geometrically spaced over [scale/sqrt(cond),
    scale*sqrt(cond)] in a random orthonormal frame.
    """
    if n == 1:
        return np.array([[scale]])
    w = scale * cond ** np.linspace(-0.5, 0.5, n)
    q = random_orthogonal(rng, n)
    m = (q * w) @ q.T
    return (m + m.T) / 2.0


def random_instance(
    rng: np.random.Generator,
    n: int,
    k: int,
    cond: float = 10.0,
    phi_fraction: float = 0.4,
) -> ProblemInstance:
    """Generic dense instance; the floor defaults to a fraction of the
    median asset variance so size-k supports are comfortably feasible."""
    m = random_spd(rng, n, cond)
    a = random_spd(rng, n, cond)
    phi = phi_fraction * float(np.median(np.diag(a)))
    return ProblemInstance(M=m, A=a, phi=phi, k=k)


def planted_instance(
    rng: np.random.Generator, n: int, k: int, strength: float = 0.02
) -> tuple[ProblemInstance, tuple[int, ...]]:
    """Block instance whose first k indices carry a dominant low block.

    M is block-diagonal: a small SPD block (scale ``strength``) on
    {0..k-1} and an O(1) SPD block elsewhere; A is the identity. The
    unique best support is the planted block by a wide margin.
    """
    m = np.zeros((n, n))
    m[:k, :k] = strength * random_spd(rng, k, cond=2.0)
    m[k:, k:] = random_spd(rng, n - k, cond=2.0, scale=1.0) + np.eye(n - k)
    inst = ProblemInstance(M=m, A=np.eye(n), phi=0.5, k=k)
    return inst, tuple(range(k))


def planted_ou_prices(
    rng: np.random.Generator,
    n_walks: int = 9,
    t: int = 500,
    theta: float = 0.15,
    ou_std: float = 0.25,
    walk_scale: float = 0.02,
    base: float = 100.0,
) -> tuple[PriceMatrix, tuple[int, ...]]:
    """Price panel hiding a mean-reverting triple among random walks.

    Three columns s1, s2, s3 satisfy s1 + s2 + s3 = z for a stationary
    AR(1) process z, so the equally weighted triple has a mean-reverting
    spread while every other cross-section drifts. Columns are shuffled;
    the planted triple's final positions are returned alongside the
    panel.

    The defaults make the plant decisively detectable: in-sample
    regressions on random walks manufacture spurious mean reversion, so
    the true spread must revert hard (small theta) at a variance that
    clears the default floor without inflating its own predictability.
    """
    n = n_walks + 3
    cols = []
    for _ in range(n_walks + 2):
        cols.append(np.cumsum(rng.standard_normal(t) * walk_scale))
    z = np.empty(t)
    z[0] = 0.0
    noise = ou_std * np.sqrt(1.0 - theta * theta)
    eps = rng.standard_normal(t)
    for i in range(1, t):
        z[i] = theta * z[i - 1] + noise * eps[i]
    s1, s2 = cols[n_walks], cols[n_walks + 1]
    cols.append(z - s1 - s2)

    perm = rng.permutation(n)
    logp = np.empty((t, n))
    for dst, src in enumerate(perm):
        logp[:, dst] = cols[src]
    planted = tuple(sorted(int(np.flatnonzero(perm == src)[0]) for src in (n_walks, n_walks + 1, n_walks + 2)))

    start = datetime.date(2020, 1, 1)
    dates = tuple((start + datetime.timedelta(days=i)).isoformat() for i in range(t))
    tickers = tuple(f"S{i:02d}" for i in range(n))
    pm = PriceMatrix(tickers=tickers, dates=dates, prices=base * np.exp(logp))
    return pm, planted


def write_prices_csv(path, pm: PriceMatrix) -> None:
    """Write a PriceMatrix in the ingestion format with full precision."""
    with open(path, "w", newline="") as fh:
        fh.write("date," + ",".join(pm.tickers) + "\n")
        for i, date in enumerate(pm.dates):
            row = ",".join(format(v, ".17g") for v in pm.prices[i])
            fh.write(f"{date},{row}\n")
