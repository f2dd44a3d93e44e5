"""Model parameters shared by every law in the package.

A :class:`ModelParams` triple ``(N, n, p)`` indexes both the multivariate
inverse hypergeometric law MIH(N, n, p) and its infinite-population limit,
the negative multinomial NM(n, p).  Category weights are stored as exact
fractions so that the lattice condition ``N * p_i in {1, 2, ...}`` is a
structural check rather than a floating point comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "INFINITE",
    "ModelParams",
    "ParameterError",
    "RegionError",
    "ZeroMassError",
    "as_fraction",
    "check_count_vector",
    "k_plus",
    "lattice_N_at_least",
    "lattice_base",
]

#: Sentinel population size for pure NM usage.
INFINITE = None


class ParameterError(ValueError):
    """Raised when a parameter invariant is violated; the message names it."""


class ZeroMassError(ValueError):
    """Raised when a point lies outside the support of a law.

    The log-mass of such a point is minus infinity; callers get this
    exception instead of a bare ``-inf``.
    """


class RegionError(ValueError):
    """Raised when a count vector lies outside a validity region."""


def as_fraction(x, *, allow_decimal: bool = True) -> Fraction:
    """Convert ``x`` to an exact :class:`Fraction`.

    Strings such as ``"3/10"`` are parsed exactly.  Floats are read through
    their shortest repr, so ``0.3`` becomes ``3/10``.  With
    ``allow_decimal=False`` only integers, fractions and ``"a/b"`` strings
    are accepted.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        s = x.strip()
        if not allow_decimal and ("." in s or "e" in s.lower()):
            raise ParameterError(
                f"decimal probability {s!r} rejected; give an exact fraction such as '1/2'"
            )
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"cannot parse probability {s!r}") from exc
    if isinstance(x, (float, np.floating)):
        if not allow_decimal:
            raise ParameterError(f"decimal probability {x!r} rejected; give an exact fraction")
        if not math.isfinite(x):
            raise ParameterError(f"probability {x!r} is not finite")
        return Fraction(repr(float(x)))
    raise ParameterError(f"unsupported probability type {type(x).__name__}")


@dataclass(frozen=True)
class ModelParams:
    """The ``(N, n, p)`` triple.

    Parameters
    ----------
    N : int or None
        Population size.  ``None`` (:data:`INFINITE`) means an infinite
        population; only NM quantities are then available.
    n : int
        Number of failures ``k_{d+1}`` that stops the sampling.
    p : sequence of fractions
        Weights of the first ``d`` categories.  The failure weight is
        ``q = 1 - sum(p)``.
    """

    N: int | None
    n: int
    p: tuple[Fraction, ...]
    q: Fraction = field(init=False)

    def __init__(self, N, n, p: Iterable, *, allow_decimal: bool = True):
        if N is not None and not (isinstance(N, float) and math.isinf(N)):
            if isinstance(N, float) and not N.is_integer():
                raise ParameterError(f"N={N!r} must be a positive integer")
            N = int(N)
            if N < 1:
                raise ParameterError(f"N={N} must be a positive integer")
        else:
            N = None
        if isinstance(n, float) and not n.is_integer():
            raise ParameterError(f"n={n!r} must be a positive integer")
        n = int(n)
        if n < 1:
            raise ParameterError(f"n={n} must be a positive integer")
        if isinstance(p, (str, int, float, Fraction)):
            p = [p]
        p = tuple(as_fraction(x, allow_decimal=allow_decimal) for x in p)
        if len(p) == 0:
            raise ParameterError("p must contain at least one category weight (d >= 1)")
        for i, pi in enumerate(p, 1):
            if pi <= 0:
                raise ParameterError(f"p_{i}={pi} must be positive")
        q = 1 - sum(p)
        if q <= 0:
            raise ParameterError(f"q = 1 - sum(p) = {q} must be positive")
        if N is not None:
            for i, pi in enumerate(p, 1):
                if (N * pi).denominator != 1:
                    raise ParameterError(
                        f"lattice condition violated: N*p_{i} = {N}*{pi} = {N * pi} is not an integer"
                    )
            if (N * q).denominator != 1:
                raise ParameterError(f"lattice condition violated: N*q = {N * q} is not an integer")
            if n > N * q:
                raise ParameterError(f"n={n} exceeds the failure population N*q={N * q}")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def d(self) -> int:
        return len(self.p)

    @property
    def finite(self) -> bool:
        return self.N is not None

    @property
    def p_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.p])

    @property
    def q_float(self) -> float:
        return float(self.q)

    @property
    def weights(self) -> tuple[Fraction, ...]:
        """All ``d + 1`` weights, failure category last."""
        return self.p + (self.q,)

    @property
    def counts(self) -> tuple[int, ...]:
        """Category sizes ``N p_1, ..., N p_d, N q`` of a finite population."""
        self.require_finite()
        return tuple(int(self.N * w) for w in self.weights)

    @property
    def half_condition(self) -> bool:
        """Whether ``n <= N q / 2``, the standing assumption of the local expansion."""
        return self.finite and 2 * self.n <= self.N * self.q

    def require_finite(self) -> None:
        if self.N is None:
            raise ParameterError("this operation needs a finite population size N (MIH); got N = infinity")

    def in_theta(self, b) -> bool:
        """Membership in ``Theta_b``: ``sum(p) < 1`` and ``min(p_1..p_d, q) >= b``."""
        b = as_fraction(b)
        if not 0 < b < 1:
            raise ParameterError(f"b={b} must lie in (0, 1)")
        return min(self.weights) >= b

    def require_theta(self, b) -> None:
        if not self.in_theta(b):
            raise ParameterError(
                f"parameters outside Theta_b: min(p, q) = {min(self.weights)} < b = {as_fraction(b)}"
            )

    def marginal(self, i: int) -> "ModelParams":
        """Parameters of the law of ``K_i`` alone.

        Only category ``i`` and the failure category matter for ``K_i``, so
        the marginal is a one-dimensional law on the sub-population of size
        ``N (p_i + q)`` with weight ``p_i / (p_i + q)``.
        """
        pi = self.p[i]
        w = pi / (pi + self.q)
        N = None if self.N is None else int(self.N * (pi + self.q))
        return ModelParams(N, self.n, (w,))

    def with_N(self, N) -> "ModelParams":
        return ModelParams(N, self.n, self.p)

    def to_dict(self) -> dict:
        return {"N": self.N, "n": self.n, "p": [str(x) for x in self.p]}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls(data.get("N"), data["n"], data["p"])

    def __repr__(self) -> str:
        p = ", ".join(str(x) for x in self.p)
        return f"ModelParams(N={self.N}, n={self.n}, p=({p}))"


def lattice_base(p: Sequence) -> int:
    """Smallest N for which every ``N p_i`` (and ``N q``) is an integer."""
    return math.lcm(*(as_fraction(x).denominator for x in p))


def lattice_N_at_least(target, n: int, p: Sequence) -> int:
    """Smallest admissible ``N >= target`` (lattice condition and ``n <= N q``)."""
    base = lattice_base(p)
    q = 1 - sum(as_fraction(x) for x in p)
    N = max(base, -(-math.ceil(target) // base) * base)
    while n > N * q:
        N += base
    return N


def k_plus(params: ModelParams, k) -> int:
    """Total number of draws ``n + sum(k)``."""
    return params.n + int(np.sum(k))


def check_count_vector(params: ModelParams, k) -> np.ndarray:
    k = np.asarray(k)
    if k.ndim == 0:
        k = k.reshape(1)
    if k.shape != (params.d,):
        raise ParameterError(f"count vector has shape {k.shape}, expected ({params.d},)")
    if not np.issubdtype(k.dtype, np.integer):
        if not np.all(np.equal(np.mod(k, 1), 0)):
            raise ParameterError(f"count vector {k.tolist()} must be integral")
        k = k.astype(np.int64)
    if np.any(k < 0):
        raise ParameterError(f"count vector {k.tolist()} has negative entries")
    return k.astype(np.int64)
