"""Log-factorials and log falling-factorial ratios.

``log_factorial`` uses an exact table for small arguments and the Stirling
series with four correction terms above it.  At the switch point the
truncation error of the series is below ``1e-30``, so the result is
accurate to a couple of ulps everywhere.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["TABLE_SIZE", "log_factorial", "log_falling_ratio", "falling_ratio_table"]

#: Arguments below this use the table.
TABLE_SIZE = 1024

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _build_table(size: int) -> np.ndarray:
    # fsum of correctly rounded logs: error is a few ulps even at the top
    logs = [0.0] + [math.log(i) for i in range(1, size)]
    out = np.empty(size)
    acc = []
    for m in range(size):
        acc.append(logs[m])
        out[m] = math.fsum(acc)
    return out


_TABLE = _build_table(TABLE_SIZE)


def _stirling(m: np.ndarray) -> np.ndarray:
    # log m! = (m + 1/2) log m - m + log(2 pi)/2 + 1/(12m) - 1/(360m^3) + 1/(1260m^5) - 1/(1680m^7)
    inv = 1.0 / m
    inv2 = inv * inv
    series = inv * (1 / 12 - inv2 * (1 / 360 - inv2 * (1 / 1260 - inv2 / 1680)))
    return (m + 0.5) * np.log(m) - m + _HALF_LOG_2PI + series


def log_factorial(m):
    """Return ``log(m!)`` for a non-negative integer or an integer array."""
    arr = np.asarray(m)
    if np.any(arr < 0):
        raise ValueError("log_factorial needs non-negative arguments")
    if arr.ndim == 0:
        mi = int(arr)
        if mi < TABLE_SIZE:
            return float(_TABLE[mi])
        return float(_stirling(np.float64(mi)))
    arr = arr.astype(np.int64)
    out = np.empty(arr.shape)
    small = arr < TABLE_SIZE
    out[small] = _TABLE[arr[small]]
    big = ~small
    if np.any(big):
        out[big] = _stirling(arr[big].astype(np.float64))
    return out


def log_falling_ratio(M: int, k: int) -> float:
    """``log[M (M-1) ... (M-k+1) / M**k]``, i.e. ``sum_{j<k} log1p(-j/M)``.

    Evaluated term by term, so the result is accurate even when it is tiny
    compared with ``log M!``.  Returns ``-inf`` when ``k > M``.
    """
    if k > M:
        return -math.inf
    if k <= 1:
        return 0.0
    j = np.arange(1, k, dtype=np.float64)
    return math.fsum(np.log1p(-j / M))


def falling_ratio_table(M: int, kmax: int) -> np.ndarray:
    """Array ``t`` with ``t[k] = log_falling_ratio(M, k)`` for ``k = 0..kmax``.

    Entries with ``k > M`` are ``-inf``.
    """
    kmax = int(kmax)
    out = np.full(kmax + 1, -np.inf)
    top = min(kmax, M)
    if top >= 0:
        out[0] = 0.0
    if top >= 1:
        terms = np.log1p(-np.arange(0, top, dtype=np.float64) / M)
        out[1 : top + 1] = np.cumsum(terms)
    return out
