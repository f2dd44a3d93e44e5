"""Local expansion of the MIH/NM log-ratio in powers of ``1/N``.

With ``k_{d+1} = n`` and ``p_{d+1} = q``,

    log P/Q = A1/N + A2/N^2 + O(R3/N^3),
    A1 = (k+^2/2 - k+/2) - sum_i (k_i^2/2 - k_i/2) / p_i,
    A2 = (k+^3/6 - k+^2/4 + k+/12) - sum_i (k_i^3/6 - k_i^2/4 + k_i/12) / p_i^2,
    R3 = k+^4 + sum_i (k_i^4/p_i^3 + k_i^2/p_i^2),

uniformly on ``max_i k_i / p_i <= gamma N``.  The sums run over all
``d + 1`` categories.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dist import exact_log_ratio
from .params import ModelParams, ParameterError, RegionError, as_fraction, check_count_vector, lattice_base

__all__ = [
    "DEFAULT_GAMMA",
    "ExpansionTerms",
    "RegionSpec",
    "ResidualRow",
    "expansion_residual",
    "expansion_terms",
    "fit_loglog_slope",
    "in_region",
    "residual_sweep",
    "sweep_N_values",
]

DEFAULT_GAMMA = Fraction(3, 4)


@dataclass(frozen=True)
class RegionSpec:
    """Validity region ``A(gamma) = {k : max_i k_i / p_i <= gamma N}``."""

    gamma: Fraction = DEFAULT_GAMMA

    def __post_init__(self):
        g = as_fraction(self.gamma)
        if not 0 < g < 1:
            raise ParameterError(f"gamma={g} must lie in (0, 1)")
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class ExpansionTerms:
    first_order: float
    second_order: float
    remainder_scale: float
    gamma: Fraction

    def partial_sum(self, order: int) -> float:
        return (0.0, self.first_order, self.first_order + self.second_order)[order]


def _region(region) -> RegionSpec:
    if region is None:
        return RegionSpec()
    if isinstance(region, RegionSpec):
        return region
    return RegionSpec(region)


def in_region(params: ModelParams, k, region: RegionSpec | None = None) -> bool:
    """True iff ``k`` is in the MIH support and ``max_i k_i/p_i <= gamma N``."""
    region = _region(region)
    params.require_finite()
    k = check_count_vector(params, k)
    if any(int(ki) > c for ki, c in zip(k, params.counts)):
        return False
    bound = region.gamma * params.N
    return all(Fraction(int(ki)) / pi <= bound for ki, pi in zip(k, params.p))


def _brackets(kp: int, ks, ws) -> tuple[float, float, float]:
    # exact rational arithmetic, converted once at the end
    def first(x):
        return Fraction(x * x, 2) - Fraction(x, 2)

    def second(x):
        return Fraction(x**3, 6) - Fraction(x * x, 4) + Fraction(x, 12)

    a1 = first(kp) - sum(first(k) / w for k, w in zip(ks, ws))
    a2 = second(kp) - sum(second(k) / w**2 for k, w in zip(ks, ws))
    r3 = Fraction(kp**4) + sum(Fraction(k**4) / w**3 + Fraction(k * k) / w**2 for k, w in zip(ks, ws))
    return a1, a2, r3


def expansion_terms(params: ModelParams, k, region: RegionSpec | None = None) -> ExpansionTerms:
    """First- and second-order terms and the remainder scale at ``k``.

    Needs ``n <= N q / 2`` and ``k`` inside the region; raises
    :class:`ParameterError` / :class:`RegionError` otherwise.
    """
    region = _region(region)
    params.require_finite()
    if not params.half_condition:
        raise ParameterError(f"expansion needs n <= N q / 2; got n={params.n}, N q={params.N * params.q}")
    k = check_count_vector(params, k)
    if not in_region(params, k, region):
        raise RegionError(f"k={k.tolist()} is outside the region max_i k_i/p_i <= {region.gamma} * N")
    ks = [int(v) for v in k] + [params.n]
    kp = sum(ks)
    a1, a2, r3 = _brackets(kp, ks, params.weights)
    N = params.N
    return ExpansionTerms(float(a1 / N), float(a2 / N**2), float(r3 / N**3), region.gamma)


def expansion_residual(params: ModelParams, k, order: int, region: RegionSpec | None = None) -> float:
    """Exact log-ratio minus the expansion truncated after ``order`` terms."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    terms = expansion_terms(params, k, region)
    exact = exact_log_ratio(params, k)
    if order == 0:
        return exact
    if order == 1:
        return exact - terms.first_order
    # subtract in two steps: the first-order term is much larger than the rest
    return (exact - terms.first_order) - terms.second_order


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of ``log|y|`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def sweep_N_values(params_p, n: int, k, region: RegionSpec | None = None, doublings: int = 5, start_factor: int = 64):
    """Admissible lattice sizes ``N_0 * 2^j`` for ``j = 0..doublings``.

    ``N_0`` is the smallest multiple of the lattice base that is at least
    ``start_factor`` times the base, keeps ``n <= N q / 2`` and puts ``k``
    in the region.
    """
    region = _region(region)
    base = lattice_base(params_p)
    N0 = base * start_factor
    while True:
        params = ModelParams(N0, n, params_p) if _lattice_ok(N0, n, params_p) else None
        if params is not None and params.half_condition and in_region(params, k, region):
            break
        N0 += base
    return [N0 * 2**j for j in range(doublings + 1)]


def _lattice_ok(N, n, p) -> bool:
    try:
        ModelParams(N, n, p)
    except ParameterError:
        return False
    return True


@dataclass(frozen=True)
class ResidualRow:
    N: int
    n: int
    p: tuple
    k: tuple
    gamma: Fraction
    order: int
    exact: float
    approx: float
    residual: float
    remainder_scale: float


def residual_sweep(p, n: int, k, N_values, region: RegionSpec | None = None, orders=(1, 2)) -> list[ResidualRow]:
    """Residual rows for each ``N`` in ``N_values`` and each order."""
    region = _region(region)
    rows = []
    for N in N_values:
        params = ModelParams(N, n, p)
        terms = expansion_terms(params, k, region)
        exact = exact_log_ratio(params, k)
        for order in orders:
            res = expansion_residual(params, k, order, region)
            rows.append(
                ResidualRow(
                    N, n, tuple(params.p), tuple(int(v) for v in np.atleast_1d(k)), region.gamma, order,
                    exact, terms.partial_sum(order), res, terms.remainder_scale,
                )
            )
    return rows


def third_order_coefficient(params: ModelParams, k) -> float:
    """Coefficient of ``N^-3`` in the exact log-ratio.

    Expanding every ``log1p`` in the falling-factorial form gives
    ``(1/12) [k+^2 (k+ - 1)^2 - sum_i k_i^2 (k_i - 1)^2 / p_i^3]``.
    A zero coefficient means the order-2 residual decays faster than
    ``N^-3`` at that point.
    """
    k = check_count_vector(params, k)
    ks = [int(v) for v in k] + [params.n]
    kp = sum(ks)
    c = Fraction(kp * kp * (kp - 1) ** 2) - sum(Fraction(x * x * (x - 1) ** 2) / w**3 for x, w in zip(ks, params.weights))
    return float(c / 12)


def second_order_coefficient(params: ModelParams, k) -> float:
    ks = [int(v) for v in check_count_vector(params, k)] + [params.n]
    return float(_brackets(sum(ks), ks, params.weights)[1])


def is_degenerate_cell(params: ModelParams, k) -> bool:
    """True when the exact log-ratio vanishes identically in ``N``.

    This happens iff at most one draw is made in total (``k+ <= 1``), since
    every falling-factorial ratio with fewer than two factors equals one.
    """
    return params.n + int(np.sum(k)) <= 1

