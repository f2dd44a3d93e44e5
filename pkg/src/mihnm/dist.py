"""The MIH and NM laws: log-masses, support tables and samplers.

The NM log-mass is evaluated from log-factorials.  The MIH log-mass is the
NM log-mass plus the exact log-ratio

    log P/Q = sum_{i<=d+1} log[(N p_i)_{k_i} / (N p_i)^{k_i}]
              - log[(N)_{k+} / N^{k+}],

where ``(M)_k`` is the falling factorial.  This is an algebraic identity
for the two mass functions; evaluating it term by term avoids the
cancellation between ``log N!``-sized quantities that a literal evaluation
of the factorial formula suffers from.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .laws import DiscreteLaw
from .params import ModelParams, ParameterError, ZeroMassError, check_count_vector
from .special import falling_ratio_table, log_factorial, log_falling_ratio

__all__ = [
    "DEFAULT_EPSILON",
    "chi_square_gof",
    "MAX_POINTS",
    "SupportTooLargeError",
    "enumerate_mih_support",
    "exact_log_ratio",
    "make_rng",
    "mih_log_pmf",
    "mih_log_pmf_factorial",
    "mih_marginal_logsf",
    "nm_log_pmf",
    "nm_marginal_logsf",
    "sample_mih",
    "sample_nm",
    "truncate_mih_support",
    "truncate_nm_support",
]

DEFAULT_EPSILON = 1e-12
#: Largest table any enumeration may build.
MAX_POINTS = 4_000_000


class SupportTooLargeError(ValueError):
    """Raised when an enumeration would exceed the point cap."""


def make_rng(seed=None) -> np.random.Generator:
    """Counter-based (Philox) generator; splittable through ``SeedSequence.spawn``."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


# log-masses ----------------------------------------------------------------


def nm_log_pmf(params: ModelParams, k) -> float:
    """Log-mass of ``k`` under NM(n, p)."""
    k = check_count_vector(params, k)
    kp = params.n + int(k.sum())
    p = params.p_float
    return (
        log_factorial(kp - 1)
        - log_factorial(params.n - 1)
        - float(np.sum(log_factorial(k)))
        + float(np.dot(k, np.log(p)))
        + params.n * math.log(params.q_float)
    )


def _require_mih_support(params: ModelParams, k: np.ndarray) -> None:
    params.require_finite()
    counts = params.counts
    for i, (ki, ci) in enumerate(zip(k, counts), 1):
        if ki > ci:
            raise ZeroMassError(f"k_{i}={int(ki)} exceeds the category size N*p_{i}={ci}; MIH mass is zero")


def exact_log_ratio(params: ModelParams, k) -> float:
    """``log P_{N,n,p}(k) - log Q_{n,p}(k)`` evaluated without cancellation."""
    k = check_count_vector(params, k)
    _require_mih_support(params, k)
    counts = params.counts
    kp = params.n + int(k.sum())
    total = math.fsum(log_falling_ratio(c, int(ki)) for c, ki in zip(counts, list(k) + [params.n]))
    return total - log_falling_ratio(params.N, kp)


def mih_log_pmf(params: ModelParams, k) -> float:
    """Log-mass of ``k`` under MIH(N, n, p).

    Raises :class:`ZeroMassError` for points outside the support.
    """
    return nm_log_pmf(params, k) + exact_log_ratio(params, k)


def mih_log_pmf_factorial(params: ModelParams, k) -> float:
    """Literal log-factorial evaluation of the MIH mass function.

    Kept as an independent route for cross-checks; it loses absolute
    accuracy of order ``eps * N log N``.
    """
    k = check_count_vector(params, k)
    _require_mih_support(params, k)
    N, n = params.N, params.n
    kp = n + int(k.sum())
    counts = params.counts
    out = log_factorial(kp - 1) - log_factorial(n - 1) - float(np.sum(log_factorial(k)))
    out += log_factorial(N - kp) - log_factorial(N)
    for c, ki in zip(counts, list(k) + [n]):
        out += log_factorial(c) - log_factorial(c - int(ki))
    return out


def _box_points(caps) -> np.ndarray:
    axes = [np.arange(c + 1, dtype=np.int64) for c in caps]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _check_box(caps) -> None:
    size = math.prod(int(c) + 1 for c in caps)
    if size > MAX_POINTS:
        raise SupportTooLargeError(f"support too large: {size} points exceeds the cap of {MAX_POINTS}")


def _nm_log_pmf_grid(params: ModelParams, pts: np.ndarray) -> np.ndarray:
    kp = params.n + pts.sum(axis=1)
    return (
        log_factorial(kp - 1)
        - log_factorial(params.n - 1)
        - log_factorial(pts).sum(axis=1)
        + pts @ np.log(params.p_float)
        + params.n * math.log(params.q_float)
    )


def _mih_log_pmf_grid(params: ModelParams, pts: np.ndarray) -> np.ndarray:
    counts = params.counts
    kp = params.n + pts.sum(axis=1)
    ratio = np.zeros(pts.shape[0])
    for i in range(params.d):
        ratio += falling_ratio_table(counts[i], int(pts[:, i].max()))[pts[:, i]]
    ratio += log_falling_ratio(counts[-1], params.n)
    ratio -= falling_ratio_table(params.N, int(kp.max()))[kp]
    return _nm_log_pmf_grid(params, pts) + ratio


# support tables ------------------------------------------------------------


def enumerate_mih_support(params: ModelParams) -> DiscreteLaw:
    """Every point of the MIH support with its log-mass; ``tail_mass = 0``."""
    params.require_finite()
    caps = params.counts[:-1]
    _check_box(caps)
    pts = _box_points(caps)
    return DiscreteLaw(pts, _mih_log_pmf_grid(params, pts), 0.0, params, "mih")


def nm_marginal_logsf(params: ModelParams, i: int, c) -> np.ndarray:
    """``log P(L_i > c)`` for the NM coordinate ``L_i``.

    ``L_i`` counts category-``i`` draws before the ``n``-th failure, so it is
    negative binomial with success probability ``q / (p_i + q)``.
    """
    pi = float(params.p[i])
    q = params.q_float
    return stats.nbinom.logsf(np.asarray(c), params.n, q / (pi + q))


def mih_marginal_logsf(params: ModelParams, i: int) -> np.ndarray:
    """``log P(K_i > c)`` for ``c = 0 .. N p_i`` as an array."""
    mp = params.marginal(i)
    lp = _mih_log_pmf_grid(mp, np.arange(mp.counts[0] + 1, dtype=np.int64).reshape(-1, 1))
    # reversed running log-sum-exp gives log P(K >= c); shift by one for P(K > c)
    tail_ge = np.logaddexp.accumulate(lp[::-1])[::-1]
    out = np.full(lp.shape, -np.inf)
    out[:-1] = tail_ge[1:]
    return out


def _smallest_cap_nm(params: ModelParams, i: int, log_target: float) -> int:
    hi = max(1, int(math.ceil(params.n * float(params.p[i]) / params.q_float)))
    while nm_marginal_logsf(params, i, hi) > log_target:
        hi *= 2
        if hi > 10 * MAX_POINTS:
            raise SupportTooLargeError(f"NM truncation cap exploded beyond {hi} on coordinate {i + 1}")
    lo = 0
    if nm_marginal_logsf(params, i, 0) <= log_target:
        return 0
    # invariant: sf(lo) > target >= sf(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if nm_marginal_logsf(params, i, mid) <= log_target:
            hi = mid
        else:
            lo = mid
    return hi


def truncate_nm_support(params: ModelParams, epsilon: float = DEFAULT_EPSILON) -> DiscreteLaw:
    """NM law on a box ``[0, c_1] x ... x [0, c_d]`` with ``tail_mass <= epsilon``.

    Each cap is the smallest integer whose marginal survival probability is
    at most ``epsilon / d``; the reported tail is the sum of those marginal
    survival probabilities.  For ``d = 1`` this is the exact tail mass, for
    ``d > 1`` it is an upper bound (union bound).
    """
    if not 0 < epsilon < 1:
        raise ParameterError(f"epsilon={epsilon} must lie in (0, 1)")
    log_target = math.log(epsilon / params.d)
    caps = [_smallest_cap_nm(params, i, log_target) for i in range(params.d)]
    _check_box(caps)
    tail = math.fsum(math.exp(float(nm_marginal_logsf(params, i, c))) for i, c in enumerate(caps))
    pts = _box_points(caps)
    nm_params = ModelParams(None, params.n, params.p)
    return DiscreteLaw(pts, _nm_log_pmf_grid(params, pts), tail, nm_params, "nm")


def truncate_mih_support(params: ModelParams, epsilon: float = DEFAULT_EPSILON) -> DiscreteLaw:
    """MIH law on a box with ``tail_mass <= epsilon``; same scheme as the NM version.

    Caps never exceed the category sizes, so a large ``epsilon`` budget is
    not needed to get the full finite support back.
    """
    params.require_finite()
    if not 0 < epsilon < 1:
        raise ParameterError(f"epsilon={epsilon} must lie in (0, 1)")
    log_target = math.log(epsilon / params.d)
    caps, tail = [], []
    for i in range(params.d):
        logsf = mih_marginal_logsf(params, i)
        c = int(np.argmax(logsf <= log_target))
        caps.append(c)
        tail.append(math.exp(float(logsf[c])))
    _check_box(caps)
    pts = _box_points(caps)
    return DiscreteLaw(pts, _mih_log_pmf_grid(params, pts), math.fsum(tail), params, "mih")


# samplers ------------------------------------------------------------------


def sample_mih(params: ModelParams, rng=None, size: int | None = None) -> np.ndarray:
    """Draw from MIH(N, n, p) by removing objects from an urn.

    Each step picks a category with probability proportional to what is
    left of it and decrements that count, until ``n`` failures have been
    drawn.  All ``size`` draws advance in lockstep.
    """
    params.require_finite()
    rng = make_rng(rng)
    m = 1 if size is None else int(size)
    d = params.d
    remaining = np.tile(np.array(params.counts, dtype=np.int64), (m, 1))
    drawn = np.zeros((m, d + 1), dtype=np.int64)
    active = np.arange(m)
    while active.size:
        rem = remaining[active]
        cum = np.cumsum(rem, axis=1)
        r = rng.integers(0, cum[:, -1])
        cat = (cum > r[:, None]).argmax(axis=1)
        remaining[active, cat] -= 1
        drawn[active, cat] += 1
        active = active[drawn[active, d] < params.n]
    out = drawn[:, :d]
    return out[0] if size is None else out


def sample_nm(params: ModelParams, rng=None, size: int | None = None) -> np.ndarray:
    """Draw from NM(n, p) by independent categorical trials until ``n`` failures."""
    rng = make_rng(rng)
    m = 1 if size is None else int(size)
    d = params.d
    cum = np.cumsum(np.append(params.p_float, params.q_float))
    cum[-1] = 1.0
    drawn = np.zeros((m, d + 1), dtype=np.int64)
    active = np.arange(m)
    while active.size:
        u = rng.random(active.size)
        cat = np.searchsorted(cum, u, side="right")
        np.add.at(drawn, (active, cat), 1)
        active = active[drawn[active, d] < params.n]
    out = drawn[:, :d]
    return out[0] if size is None else out


def chi_square_gof(samples: np.ndarray, law: DiscreteLaw, min_expected: float = 5.0):
    """Pearson chi-square test of ``samples`` against ``law``.

    Cells with expected count below ``min_expected`` are pooled, together
    with the law's tail and any sample outside the table, into one cell.
    Returns ``(statistic, pvalue, dof)``.
    """
    samples = np.asarray(samples).reshape(len(samples), -1)
    total = samples.shape[0]
    expected = law.mass * total
    index = {k: j for j, k in enumerate(law.entries())}
    observed = np.zeros(len(law))
    outside = 0
    keys, counts = np.unique(samples, axis=0, return_counts=True)
    for k, c in zip(keys, counts):
        j = index.get(tuple(int(v) for v in k))
        if j is None:
            outside += c
        else:
            observed[j] += c
    big = expected >= min_expected
    obs = list(observed[big])
    exp = list(expected[big])
    pooled_exp = expected[~big].sum() + law.tail_mass * total
    pooled_obs = observed[~big].sum() + outside
    if pooled_exp > 0 or pooled_obs > 0:
        obs.append(pooled_obs)
        exp.append(pooled_exp)
    obs = np.array(obs)
    exp = np.array(exp)
    exp *= obs.sum() / exp.sum()
    res = stats.chisquare(obs, exp)
    return float(res.statistic), float(res.pvalue), len(obs) - 1

