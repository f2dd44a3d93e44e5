"""Distances between enumerated laws, jittered laws and Gaussians.

Conventions: ``H(a, b) = sqrt(1 - sum sqrt(a b))`` so that ``H`` lies in
``[0, 1]``; total variation is half the L1 distance.  Every function
returns a :class:`DistanceReport` whose ``error_estimate`` bounds the
combined effect of truncated tails and quadrature error.

A jittered law spreads the mass of each lattice point ``k`` uniformly on
the unit cell ``k + (-1/2, 1/2)^d``.  Distances between a jittered law and
a Gaussian only need integrals over the cells that carry mass: outside
them the jittered density is zero, and the Gaussian mass there is one
minus the mass of the cells.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg, stats

from .laws import DiscreteLaw
from .quadrature import integrate_boxes

__all__ = [
    "AbsoluteContinuityError",
    "DegenerateCovarianceError",
    "DistanceReport",
    "JitteredLaw",
    "NormalSpec",
    "QuadratureError",
    "hellinger_discrete",
    "hellinger_jittered",
    "hellinger_jittered_vs_normal",
    "hellinger_normals",
    "kl_discrete",
    "kolmogorov_discrete",
    "kolmogorov_discrete_vs_normal",
    "tv_discrete",
    "tv_discrete_vs_rounded_normal",
    "tv_jittered_vs_normal",
]

DEFAULT_NODES = 16


def coarser_nodes(nodes: int) -> int:
    """Node count of the comparison rule used for refinement estimates."""
    return nodes // 2 if nodes >= 2 else 2


class DegenerateCovarianceError(ValueError):
    """Raised when a covariance matrix is not strictly positive definite."""


class AbsoluteContinuityError(ValueError):
    """Raised when a KL divergence would be infinite."""


class QuadratureError(ValueError):
    """Raised when the requested tolerance cannot be certified."""


@dataclass(frozen=True)
class DistanceReport:
    value: float
    metric: str
    method: str
    truncation_tail: float = 0.0
    quadrature_nodes: int = 0
    error_estimate: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def __float__(self) -> float:
        return float(self.value)


# Gaussians -----------------------------------------------------------------


class NormalSpec:
    """Mean vector and covariance matrix of a Gaussian on ``R^d``."""

    def __init__(self, mean, covariance):
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(covariance, dtype=np.float64))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        self.mean = mean
        self.covariance = 0.5 * (cov + cov.T)
        self._chol = None

    @property
    def d(self) -> int:
        return self.mean.size

    @property
    def diagonal(self) -> bool:
        return np.count_nonzero(self.covariance - np.diag(np.diag(self.covariance))) == 0

    def cholesky(self) -> np.ndarray:
        if self._chol is None:
            try:
                chol = linalg.cholesky(self.covariance, lower=True)
            except linalg.LinAlgError as exc:
                raise DegenerateCovarianceError(f"covariance is not positive definite: {self.covariance.tolist()}") from exc
            if np.any(np.diag(chol) <= 0):
                raise DegenerateCovarianceError(f"covariance is not positive definite: {self.covariance.tolist()}")
            self._chol = chol
        return self._chol

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        chol = self.cholesky()
        flat = (x - self.mean).reshape(-1, self.d)
        z = linalg.solve_triangular(chol, flat.T, lower=True)
        quad = np.sum(z * z, axis=0)
        logdet = np.sum(np.log(np.diag(chol)))
        out = -0.5 * quad - logdet - 0.5 * self.d * math.log(2 * math.pi)
        return out.reshape(x.shape[:-1])

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def box_masses(self, lower, upper, nodes: int = DEFAULT_NODES) -> tuple[np.ndarray, float]:
        """Gaussian mass of each box, with an error estimate.

        Exact (through the normal CDF) when the covariance is diagonal;
        otherwise tensor Gauss-Legendre with a half-resolution comparison.
        """
        lower = np.atleast_2d(np.asarray(lower, dtype=np.float64))
        upper = np.atleast_2d(np.asarray(upper, dtype=np.float64))
        if self.diagonal:
            self.cholesky()
            sd = np.sqrt(np.diag(self.covariance))
            a = (lower - self.mean) / sd
            b = (upper - self.mean) / sd
            return np.prod(normal_interval(a, b), axis=1), 0.0
        fine = integrate_boxes(lambda x, idx: self.pdf(x), lower, upper, nodes)
        coarse = integrate_boxes(lambda x, idx: self.pdf(x), lower, upper, coarser_nodes(nodes))
        return fine, float(np.abs(fine - coarse).sum())

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "covariance": self.covariance.tolist()}

    def __repr__(self) -> str:
        return f"NormalSpec(mean={self.mean.tolist()}, covariance={self.covariance.tolist()})"


def normal_interval(a, b) -> np.ndarray:
    """``Phi(b) - Phi(a)`` for standardized bounds, accurate in both tails."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    upper_side = a > 0
    return np.where(upper_side, stats.norm.sf(a) - stats.norm.sf(b), stats.norm.cdf(b) - stats.norm.cdf(a))


# jittered laws -------------------------------------------------------------


class JitteredLaw:
    """A lattice law convolved with the uniform law on ``(-1/2, 1/2)^d``."""

    def __init__(self, base: DiscreteLaw):
        self.base = base
        self._lo, self._grid = base.dense()

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def tail_mass(self) -> float:
        return self.base.tail_mass

    def total_mass(self) -> float:
        return 1.0 - self.base.tail_mass

    def cells(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(lower, upper, mass)`` for every cell that carries mass."""
        k = self.base.support.astype(np.float64)
        return k - 0.5, k + 0.5, self.base.mass

    def density(self, x) -> np.ndarray:
        """Density at points ``x`` of shape ``(..., d)``; half-integers round to even."""
        x = np.asarray(x, dtype=np.float64)
        idx = np.rint(x).astype(np.int64) - self._lo
        shape = np.array(self._grid.shape)
        inside = np.all((idx >= 0) & (idx < shape), axis=-1)
        out = np.zeros(x.shape[:-1])
        sel = idx[inside]
        out[inside] = self._grid[tuple(sel.T)]
        return out


# discrete-discrete ---------------------------------------------------------


def _align(a: DiscreteLaw, b: DiscreteLaw):
    if a.d != b.d:
        raise ValueError(f"laws live in different dimensions ({a.d} and {b.d})")
    pts = np.vstack([a.support, b.support])
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    la = np.full(len(uniq), -np.inf)
    lb = np.full(len(uniq), -np.inf)
    la[inv[: len(a)]] = a.logp
    lb[inv[len(a) :]] = b.logp
    return uniq, la, lb


def _half_sq_sqrt_diff(la: np.ndarray, lb: np.ndarray) -> np.ndarray:
    # (sqrt a - sqrt b)^2 = max(a, b) * expm1(-|la - lb| / 2)^2, no cancellation
    hi = np.maximum(la, lb)
    lo = np.minimum(la, lb)
    with np.errstate(invalid="ignore"):
        gap = np.where(np.isfinite(lo), hi - lo, np.inf)
    return np.exp(hi) * np.expm1(-0.5 * gap) ** 2


def hellinger_discrete(a: DiscreteLaw, b: DiscreteLaw) -> DistanceReport:
    """Hellinger distance between two enumerated laws."""
    pts, la, lb = _align(a, b)
    ta, tb = a.tail_mass, b.tail_mass
    h2_upper = 0.5 * math.fsum(_half_sq_sqrt_diff(la, lb)) + 0.5 * (ta + tb)
    in_a = np.isfinite(la)
    in_b = np.isfinite(lb)
    a_out = math.fsum(np.exp(la[in_a & ~in_b])) if tb > 0 else 0.0
    b_out = math.fsum(np.exp(lb[in_b & ~in_a])) if ta > 0 else 0.0
    unknown = math.sqrt(ta * tb) + math.sqrt(tb * a_out) + math.sqrt(ta * b_out)
    h2_upper = min(max(h2_upper, 0.0), 1.0)
    value = math.sqrt(h2_upper)
    err = value - math.sqrt(max(h2_upper - unknown, 0.0))
    return DistanceReport(value, "hellinger", "closed-sum", ta + tb, 0, err)


def tv_discrete(a: DiscreteLaw, b: DiscreteLaw) -> DistanceReport:
    """Total variation between two enumerated laws.

    Tail masses are counted as if they sat where the other law has no
    mass, which makes the value an upper bound; it is exact when one law
    is tail-free and its support lies inside the other's table.
    """
    pts, la, lb = _align(a, b)
    ta, tb = a.tail_mass, b.tail_mass
    diff = np.abs(np.exp(la) - np.exp(lb))
    value = min(0.5 * (math.fsum(diff) + ta + tb), 1.0)
    in_a = np.isfinite(la)
    in_b = np.isfinite(lb)
    if (ta == 0 and (tb == 0 or np.all(in_b[in_a]))) or (tb == 0 and np.all(in_a[in_b])):
        err = 0.0
    else:
        err = ta + tb
    return DistanceReport(value, "tv", "closed-sum", ta + tb, 0, err)


def kl_discrete(a: DiscreteLaw, b: DiscreteLaw) -> DistanceReport:
    """Kullback-Leibler divergence ``KL(a || b)``.

    Raises :class:`AbsoluteContinuityError` naming the first point of
    ``a``'s table with no mass under ``b``.  With ``a.tail_mass > 0`` the
    value omits the tail and the error estimate is infinite.
    """
    pts, la, lb = _align(a, b)
    in_a = np.isfinite(la)
    bad = in_a & ~np.isfinite(lb)
    if np.any(bad):
        k = pts[np.argmax(bad)].tolist()
        raise AbsoluteContinuityError(f"KL is infinite: k={k} has mass under the first law but not the second")
    terms = np.exp(la[in_a]) * (la[in_a] - lb[in_a])
    value = math.fsum(terms)
    err = 0.0 if a.tail_mass == 0 else math.inf
    return DistanceReport(max(value, 0.0), "kl", "closed-sum", a.tail_mass + b.tail_mass, 0, err)


def kolmogorov_discrete(a: DiscreteLaw, b: DiscreteLaw) -> DistanceReport:
    """Sup-distance between the CDFs of two one-dimensional laws."""
    if a.d != 1 or b.d != 1:
        raise ValueError("the Kolmogorov distance is only implemented for d = 1")
    pts, la, lb = _align(a, b)
    fa = np.cumsum(np.exp(la))
    fb = np.cumsum(np.exp(lb))
    value = float(np.max(np.abs(fa - fb))) if len(pts) else 0.0
    tails = max(a.tail_mass, b.tail_mass)
    return DistanceReport(value, "kolmogorov", "closed-sum", a.tail_mass + b.tail_mass, 0, tails)


# jittered vs jittered (quadrature route) -------------------------------------


def hellinger_jittered(x: JitteredLaw, y: JitteredLaw, nodes: int = 4) -> DistanceReport:
    """Hellinger distance of two jittered laws by integrating their densities.

    Equal to :func:`hellinger_discrete` of the base laws, since both are
    smoothed by the same kernel; computed independently here as
    ``(1/2) integral (sqrt f - sqrt g)^2`` over the piecewise-constant
    densities.
    """
    if x.d != y.d:
        raise ValueError("laws live in different dimensions")
    pts = np.unique(np.vstack([x.base.support, y.base.support]), axis=0).astype(np.float64)

    def f(z, idx):
        return (np.sqrt(x.density(z)) - np.sqrt(y.density(z))) ** 2

    h2 = 0.5 * math.fsum(integrate_boxes(f, pts - 0.5, pts + 0.5, nodes))
    tails = x.tail_mass + y.tail_mass
    h2 = min(h2 + 0.5 * tails, 1.0)
    return DistanceReport(math.sqrt(h2), "hellinger", "quadrature", tails, nodes, _sqrt_band(h2, 0.5 * tails))


# jittered vs Gaussian ------------------------------------------------------


def _sqrt_band(h2: float, delta: float) -> float:
    h2 = max(h2, 0.0)
    return math.sqrt(h2 + delta) - math.sqrt(max(h2 - delta, 0.0))


def _check_tol(report: DistanceReport, tol: float | None) -> DistanceReport:
    if tol is not None and report.error_estimate > tol:
        raise QuadratureError(
            f"error estimate {report.error_estimate:.3g} exceeds the requested tolerance {tol:.3g}; "
            "raise the node count or shrink the tail"
        )
    return report


def hellinger_jittered_vs_normal(j: JitteredLaw, g: NormalSpec, nodes: int = DEFAULT_NODES, tol: float | None = None) -> DistanceReport:
    """Hellinger distance between a jittered law and a Gaussian.

    ``H^2 = 1 - sum_k sqrt(m_k) * integral over cell k of sqrt(phi)``, each
    cell integral by tensor Gauss-Legendre with ``nodes`` points per axis.
    The error estimate adds the change against a half-resolution rule and
    a Cauchy-Schwarz bound for the law's tail.
    """
    if j.d != g.d:
        raise ValueError("dimension mismatch")
    g.cholesky()
    lower, upper, mass = j.cells()
    root = np.sqrt(mass)

    def f(x, idx):
        return np.exp(0.5 * g.logpdf(x))

    fine = integrate_boxes(f, lower, upper, nodes)
    coarse = integrate_boxes(f, lower, upper, coarser_nodes(nodes))
    bc = math.fsum(root * fine)
    refine = abs(bc - math.fsum(root * coarse))
    g_cells, g_err = g.box_masses(lower, upper, nodes)
    outside = max(0.0, 1.0 - math.fsum(g_cells))
    unknown = math.sqrt(j.tail_mass * min(1.0, outside + g_err))
    h2 = min(max(1.0 - bc, 0.0), 1.0)
    err = _sqrt_band(h2, refine + unknown)
    rep = DistanceReport(math.sqrt(h2), "hellinger", "quadrature", j.tail_mass, nodes, err)
    return _check_tol(rep, tol)


def _tv_cells_exact_1d(c: np.ndarray, lower: np.ndarray, upper: np.ndarray, mu: float, sd: float) -> np.ndarray:
    # integral over [l, u] of |c - phi| with the crossing points phi = c split out
    level = c * sd * math.sqrt(2 * math.pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        half = sd * np.sqrt(np.where(level < 1, -2.0 * np.log(level), 0.0))
    r1 = np.clip(mu - half, lower, upper)
    r2 = np.clip(mu + half, lower, upper)
    edges = np.stack([lower, r1, r2, upper], axis=1)
    a = edges[:, :-1]
    b = edges[:, 1:]
    gauss = normal_interval((a - mu) / sd, (b - mu) / sd)
    return np.abs(c[:, None] * (b - a) - gauss).sum(axis=1)


def tv_jittered_vs_normal(
    j: JitteredLaw, g: NormalSpec, nodes: int = DEFAULT_NODES, method: str = "auto", tol: float | None = None
) -> DistanceReport:
    """Total variation between a jittered law and a Gaussian.

    ``TV = (1/2) [sum_k integral over cell k of |m_k - phi| + Gaussian mass
    outside the cells]``.  In one dimension (``method="auto"`` or
    ``"cdf"``) each cell integral is exact: the cell is split at the points
    where ``phi`` crosses ``m_k`` and each piece is a difference of normal
    CDFs.  Otherwise (``"quadrature"``) the cell integrals use tensor
    Gauss-Legendre and the error estimate includes the change against a
    half-resolution rule.
    """
    if j.d != g.d:
        raise ValueError("dimension mismatch")
    g.cholesky()
    lower, upper, mass = j.cells()
    if method == "auto":
        method = "cdf" if j.d == 1 else "quadrature"
    g_cells, g_err = g.box_masses(lower, upper, nodes)
    outside = max(0.0, 1.0 - math.fsum(g_cells))
    if method == "cdf":
        if j.d != 1:
            raise ValueError("the CDF method needs d = 1")
        sd = math.sqrt(g.covariance[0, 0])
        cells = _tv_cells_exact_1d(mass, lower[:, 0], upper[:, 0], float(g.mean[0]), sd)
        value = 0.5 * (math.fsum(cells) + outside)
        refine, used = 0.0, 0
    elif method == "quadrature":

        def f(x, idx):
            return np.abs(mass[idx, None] - g.pdf(x))

        fine = math.fsum(integrate_boxes(f, lower, upper, nodes))
        coarse = math.fsum(integrate_boxes(f, lower, upper, coarser_nodes(nodes)))
        value = 0.5 * (fine + outside)
        refine, used = 0.5 * abs(fine - coarse) + g_err, nodes
    else:
        raise ValueError(f"unknown method {method!r}")
    err = refine + j.tail_mass
    rep = DistanceReport(min(value, 1.0), "tv", "quadrature" if used else "cdf", j.tail_mass, used, err)
    return _check_tol(rep, tol)


def tv_discrete_vs_rounded_normal(a: DiscreteLaw, g: NormalSpec, nodes: int = DEFAULT_NODES) -> DistanceReport:
    """Total variation between ``a`` and the law of ``round(Z)``, ``Z ~ g``.

    The rounded Gaussian puts mass ``P(Z in k + [-1/2, 1/2)^d)`` on ``k``; only
    the cells of ``a``'s table are integrated, the rest of the Gaussian
    mass counts in full.
    """
    if a.d != g.d:
        raise ValueError("dimension mismatch")
    k = a.support.astype(np.float64)
    g_cells, g_err = g.box_masses(k - 0.5, k + 0.5, nodes)
    outside = max(0.0, 1.0 - math.fsum(g_cells))
    value = 0.5 * (math.fsum(np.abs(a.mass - g_cells)) + outside)
    method = "cdf" if g.diagonal else "quadrature"
    return DistanceReport(min(value, 1.0), "tv", method, a.tail_mass, 0 if g.diagonal else nodes, a.tail_mass + g_err)


def kolmogorov_discrete_vs_normal(a: DiscreteLaw, g: NormalSpec) -> DistanceReport:
    """Sup-distance between the CDF of the jittered law and the Gaussian CDF (d = 1).

    On each cell the difference is ``F(l) + m (x - l) - Phi(x)``; its extrema
    lie at the cell edges or where ``phi(x) = m``, all of which are checked.
    """
    if a.d != 1 or g.d != 1:
        raise ValueError("the Kolmogorov distance is only implemented for d = 1")
    mu = float(g.mean[0])
    sd = math.sqrt(g.covariance[0, 0])
    if not sd > 0:
        raise DegenerateCovarianceError("variance must be positive")
    lo, dense = a.dense()
    m = dense.reshape(-1)
    left = lo[0] - 0.5 + np.arange(len(m), dtype=np.float64)
    right = left + 1.0
    f_left = np.concatenate([[0.0], np.cumsum(m)[:-1]])
    level = m * sd * math.sqrt(2 * math.pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        half = sd * np.sqrt(np.where(level < 1, -2.0 * np.log(level), 0.0))
    cands = np.stack([left, right, np.clip(mu - half, left, right), np.clip(mu + half, left, right)], axis=1)
    diff = f_left[:, None] + m[:, None] * (cands - left[:, None]) - stats.norm.cdf((cands - mu) / sd)
    value = float(np.max(np.abs(diff)))
    total = 1.0 - a.tail_mass
    value = max(value, float(stats.norm.cdf((left[0] - mu) / sd)), abs(total - 1.0))
    return DistanceReport(value, "kolmogorov", "cdf", a.tail_mass, 0, a.tail_mass)


def hellinger_normals(g: NormalSpec, h: NormalSpec) -> DistanceReport:
    """Closed-form Hellinger distance between two Gaussians."""
    if g.d != h.d:
        raise ValueError("dimension mismatch")
    avg = NormalSpec(0.5 * (g.mean + h.mean), 0.5 * (g.covariance + h.covariance))
    lg = np.sum(np.log(np.diag(g.cholesky())))
    lh = np.sum(np.log(np.diag(h.cholesky())))
    la = np.sum(np.log(np.diag(avg.cholesky())))
    delta = g.mean - h.mean
    z = linalg.solve_triangular(avg.cholesky(), delta, lower=True)
    log_bc = 0.5 * (lg + lh) - la - 0.125 * float(z @ z)
    h2 = -math.expm1(log_bc)
    return DistanceReport(math.sqrt(max(h2, 0.0)), "hellinger", "closed-form", 0.0, 0, 0.0)
