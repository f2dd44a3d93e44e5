"""Experiments, Markov kernels and constructive deficiency upper bounds.

The MIH experiment is compared with three Gaussian families:

* ``Normal-Q``: mean ``n p/q``, covariance ``n [diag(p/q) + (p/q)(p/q)^T]``,
  the mean and covariance of the NM law;
* ``Normal-Qbar``: mean ``n p/q``, covariance ``n diag(p/q)``;
* ``Normal-Qstar``: mean ``sqrt(n p/q)``, covariance ``diag(1/4)``.

The deficiency in the direction MIH -> Gaussian is bounded by the total
variation between the jittered MIH law and the Gaussian (kernel: add a
uniform on the unit cell; for ``Normal-Qstar`` also take square roots).
The reverse direction uses the kernel that undoes it (round, or square and
round), so the reverse bound can never exceed the forward one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dist import DEFAULT_EPSILON, enumerate_mih_support, mih_marginal_logsf, truncate_mih_support
from .laws import DiscreteLaw, TailTooLargeError
from .metrics import (
    DEFAULT_NODES,
    coarser_nodes,
    DistanceReport,
    JitteredLaw,
    NormalSpec,
    hellinger_jittered_vs_normal,
    normal_interval,
    tv_discrete_vs_rounded_normal,
    tv_jittered_vs_normal,
)
from .params import ModelParams, ParameterError, as_fraction
from .quadrature import integrate_boxes

__all__ = [
    "FAMILY_KINDS",
    "JITTER",
    "ROUND",
    "SQRT_JITTER",
    "SQUARE_ROUND",
    "ConcentrationRow",
    "ConcentrationSweep",
    "DeficiencyBoundReport",
    "ExperimentFamily",
    "KernelSpec",
    "apply_jitter",
    "concentration_check",
    "concentration_tail",
    "deficiency_upper_bound_PQ",
    "deficiency_upper_bound_QP",
    "log_concentration_bound",
    "log_concentration_tail",
    "normal_family_spec",
    "round_pushforward",
    "tv_sqrt_jittered_vs_normal",
]

FAMILY_KINDS = ("MIH", "NM", "Normal-Q", "Normal-Qbar", "Normal-Qstar")
NORMAL_KINDS = FAMILY_KINDS[2:]
#: joint enumeration is used for concentration tails up to this many points
JOINT_LIMIT = 200_000


@dataclass(frozen=True)
class ExperimentFamily:
    """A family of laws indexed by ``Theta_b = {p : min(p_1..p_d, q) >= b}``.

    ``b = None`` disables the gate.
    """

    kind: str
    b: Fraction | None = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}; expected one of {FAMILY_KINDS}")
        if self.b is not None:
            b = as_fraction(self.b)
            if not 0 < b < 1:
                raise ParameterError(f"b={b} must lie in (0, 1)")
            object.__setattr__(self, "b", b)

    def admits(self, params: ModelParams) -> bool:
        return self.b is None or params.in_theta(self.b)

    def require(self, params: ModelParams) -> None:
        if not self.admits(params):
            raise ParameterError(f"parameters outside Theta_b: min(p_1..p_d, q) = {min(params.weights)} < b = {self.b}")


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    direction: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "direction": self.direction}


JITTER = KernelSpec("jitter-uniform-half", "discrete->continuous")
ROUND = KernelSpec("round-nearest-integer", "continuous->discrete")
SQRT_JITTER = KernelSpec("jitter-uniform-half+sqrt", "discrete->continuous")
SQUARE_ROUND = KernelSpec("square+round-nearest-integer", "continuous->discrete")


@dataclass(frozen=True)
class DeficiencyBoundReport:
    """Upper bound on a deficiency through an explicit kernel.

    ``theoretical_rhs`` is the shape ``d / sqrt(n)`` with constant one;
    sweeps fit the constant.  ``components`` lists the distances behind the
    bound (the total variation, plus a Hellinger value for reference).
    """

    direction: str
    upper_bound: float
    via: KernelSpec
    components: tuple[DistanceReport, ...]
    theoretical_rhs: float
    error_estimate: float
    family: str
    forward_bound: float | None = None
    forward_error: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "upper_bound": self.upper_bound,
            "error_estimate": self.error_estimate,
            "via": self.via.to_dict(),
            "family": self.family,
            "theoretical_rhs": self.theoretical_rhs,
            "forward_bound": self.forward_bound,
            "forward_error": self.forward_error,
            "components": [c.to_dict() for c in self.components],
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# kernels -------------------------------------------------------------------


def apply_jitter(law: DiscreteLaw) -> JitteredLaw:
    """Law of ``K + U`` with ``U`` uniform on ``(-1/2, 1/2)^d``."""
    return JitteredLaw(law)


def _default_window(g: NormalSpec, width: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    sd = np.sqrt(np.diag(g.covariance))
    lo = np.floor(g.mean - width * sd - 1).astype(np.int64)
    hi = np.ceil(g.mean + width * sd + 1).astype(np.int64)
    return lo, hi


def round_pushforward(source, window=None, *, max_tail: float = 1e-6, nodes: int = DEFAULT_NODES) -> DiscreteLaw:
    """Law of the coordinatewise nearest integer of ``Z``.

    ``source`` is a :class:`NormalSpec` or a :class:`JitteredLaw`.  Masses
    are integrals of the source over the unit cells of the window
    ``(lower_corner, upper_corner)``; ``tail_mass`` is the source mass left
    outside.  Raises :class:`TailTooLargeError` above ``max_tail``.
    """
    if window is None:
        if isinstance(source, JitteredLaw):
            window = source.base.bounding_box()
        else:
            window = _default_window(source)
    lo = np.atleast_1d(np.asarray(window[0], dtype=np.int64))
    hi = np.atleast_1d(np.asarray(window[1], dtype=np.int64))
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    pts = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    cells = pts.astype(np.float64)
    if isinstance(source, JitteredLaw):
        # the density is constant on each cell, so one node per axis is exact
        masses = integrate_boxes(lambda x, idx: source.density(x), cells - 0.5, cells + 0.5, 1)
        tail = source.tail_mass + max(0.0, source.base.total_mass() - math.fsum(masses))
    else:
        masses, _ = source.box_masses(cells - 0.5, cells + 0.5, nodes)
        tail = max(0.0, 1.0 - math.fsum(masses))
    if tail > max_tail:
        raise TailTooLargeError(f"window leaves mass {tail:.3g} outside, above max_tail={max_tail:.3g}")
    keep = masses > 0
    return DiscreteLaw(pts[keep], np.log(masses[keep]), tail, kind="rounded")


# normal families -------------------------------------------------------------


def normal_family_spec(params: ModelParams, kind: str, *, literal_sigma: bool = False) -> NormalSpec:
    """Mean and covariance of the Gaussian family ``kind`` at ``(n, p)``.

    ``literal_sigma=True`` uses ``diag(p/q) - (p/q)(p/q)^T`` for ``Normal-Q``
    instead of the NM covariance; that matrix is singular or indefinite on
    part of the parameter space and then raises
    :class:`DegenerateCovarianceError`.
    """
    if kind not in NORMAL_KINDS:
        raise ValueError(f"kind must be one of {NORMAL_KINDS}, got {kind!r}")
    r = params.p_float / params.q_float
    n = params.n
    if kind == "Normal-Q":
        sign = -1.0 if literal_sigma else 1.0
        g = NormalSpec(n * r, n * (np.diag(r) + sign * np.outer(r, r)))
    elif kind == "Normal-Qbar":
        g = NormalSpec(n * r, n * np.diag(r))
    else:
        g = NormalSpec(np.sqrt(n * r), 0.25 * np.eye(params.d))
    g.cholesky()
    return g


# concentration -------------------------------------------------------------


def _caps(params: ModelParams, gamma) -> list[int]:
    # K_i > gamma N p_i  <=>  K_i > floor(gamma N p_i)
    gamma = as_fraction(gamma)
    return [math.floor(gamma * params.N * pi) for pi in params.p]


def log_concentration_tail(params: ModelParams, gamma) -> tuple[float, str]:
    """``log P{exists i: K_i > gamma N p_i}`` under MIH and the method used.

    Exact from the marginal for ``d = 1`` and from the joint table when it
    has at most ``JOINT_LIMIT`` points; otherwise the union bound over the
    exact marginal tails (an upper bound), reported as ``"union-bound"``.
    """
    params.require_finite()
    caps = _caps(params, gamma)
    marg = []
    for i, c in enumerate(caps):
        if c >= params.counts[i]:
            marg.append(-math.inf)
        else:
            marg.append(float(mih_marginal_logsf(params, i)[c]))
    if params.d == 1:
        return marg[0], "exact-marginal"
    size = math.prod(c + 1 for c in params.counts[:-1])
    if size <= JOINT_LIMIT:
        law = enumerate_mih_support(params)
        bad = np.any(law.support > np.array(caps), axis=1)
        if not np.any(bad):
            return -math.inf, "exact-enumeration"
        lp = law.logp[bad]
        top = lp.max()
        return float(top + math.log(math.fsum(np.exp(lp - top)))), "exact-enumeration"
    finite = [m for m in marg if m > -math.inf]
    if not finite:
        return -math.inf, "union-bound"
    top = max(finite)
    return top + math.log(math.fsum(math.exp(m - top) for m in finite)), "union-bound"


def concentration_tail(params: ModelParams, gamma) -> float:
    """``P{exists i: K_i > gamma N p_i}`` under MIH (see :func:`log_concentration_tail`)."""
    return math.exp(log_concentration_tail(params, gamma)[0])


def log_concentration_bound(params: ModelParams) -> float:
    """``log(100 d) - q min(p) N^2 / (100 n)``."""
    params.require_finite()
    return math.log(100 * params.d) - float(params.q * min(params.p) * params.N**2) / (100 * params.n)


@dataclass(frozen=True)
class ConcentrationRow:
    N: int
    log_tail: float
    log_bound: float
    method: str

    @property
    def holds(self) -> bool:
        return self.log_tail <= self.log_bound


@dataclass(frozen=True)
class ConcentrationSweep:
    """Exact tails against the exponential bound over an ``N`` grid.

    ``threshold`` is the smallest grid ``N`` from which the bound holds at
    every larger grid point, or ``None`` when it fails at the largest one.
    """

    n: int
    p: tuple
    gamma: Fraction
    rows: tuple[ConcentrationRow, ...]

    @property
    def threshold(self) -> int | None:
        t = None
        for row in reversed(self.rows):
            if not row.holds:
                break
            t = row.N
        return t

    @property
    def passed(self) -> bool:
        return self.threshold is not None


def concentration_check(p, n: int, N_values, gamma=Fraction(3, 4)) -> ConcentrationSweep:
    """Compare exact concentration tails with the bound along ``N_values``.

    Comparisons are made on the log scale, since both sides underflow
    double precision for large ``N``.
    """
    rows = []
    for N in sorted(N_values):
        params = ModelParams(N, n, p)
        lt, method = log_concentration_tail(params, gamma)
        rows.append(ConcentrationRow(N, lt, log_concentration_bound(params), method))
    return ConcentrationSweep(n, tuple(ModelParams(N_values[0], n, p).p), as_fraction(gamma), tuple(rows))


# square-root transform -------------------------------------------------------


def tv_sqrt_jittered_vs_normal(law: DiscreteLaw, g: NormalSpec, nodes: int = 32) -> DistanceReport:
    """TV between ``sqrt(max(K + U, 0))`` (coordinatewise) and a Gaussian.

    Cell ``k`` maps to the box with sides ``[sqrt(max(k_i - 1/2, 0)),
    sqrt(k_i + 1/2)]`` where the density is ``m_k prod_i 2 y_i``.  On a zero
    coordinate half of the cell lands on ``y_i = 0``; that part is singular
    with respect to the Gaussian and counts in full.
    """
    if law.d != g.d:
        raise ValueError("dimension mismatch")
    g.cholesky()
    k = law.support.astype(np.float64)
    lower = np.sqrt(np.maximum(k - 0.5, 0.0))
    upper = np.sqrt(k + 0.5)
    mass = law.mass
    share = np.prod(np.where(law.support == 0, 0.5, 1.0), axis=1)
    singular = math.fsum(mass * (1.0 - share))

    def f(x, idx):
        return np.abs(mass[idx, None] * np.prod(2.0 * x, axis=-1) - g.pdf(x))

    fine = math.fsum(integrate_boxes(f, lower, upper, nodes))
    coarse = math.fsum(integrate_boxes(f, lower, upper, coarser_nodes(nodes)))
    g_cells, g_err = g.box_masses(lower, upper, nodes)
    outside = max(0.0, 1.0 - math.fsum(g_cells))
    value = min(0.5 * (fine + singular + outside), 1.0)
    err = 0.5 * abs(fine - coarse) + g_err + law.tail_mass
    return DistanceReport(value, "tv", "quadrature", law.tail_mass, nodes, err)


def _square_round_masses(support: np.ndarray, g: NormalSpec) -> np.ndarray:
    # P(round(Z_i^2) = k_i) = P(|Z_i| in [sqrt(max(k_i - 1/2, 0)), sqrt(k_i + 1/2)))
    if not g.diagonal:
        raise ValueError("square-rounding needs a diagonal covariance")
    k = support.astype(np.float64)
    a = np.sqrt(np.maximum(k - 0.5, 0.0))
    b = np.sqrt(k + 0.5)
    sd = np.sqrt(np.diag(g.covariance))
    mu = g.mean
    pos = normal_interval((a - mu) / sd, (b - mu) / sd)
    neg = normal_interval((-b - mu) / sd, (-a - mu) / sd)
    return np.prod(pos + neg, axis=1)


# deficiency bounds -----------------------------------------------------------


def _mih_table(params: ModelParams, epsilon: float) -> DiscreteLaw:
    return truncate_mih_support(params, epsilon)


def _shape(params: ModelParams) -> float:
    return params.d / math.sqrt(params.n)


def _family(target) -> ExperimentFamily:
    fam = target if isinstance(target, ExperimentFamily) else ExperimentFamily(target)
    if fam.kind not in NORMAL_KINDS:
        raise ValueError(f"target must be a Gaussian family, got {fam.kind}")
    return fam


def deficiency_upper_bound_PQ(
    params: ModelParams, target, *, nodes: int = DEFAULT_NODES, epsilon: float = DEFAULT_EPSILON, law: DiscreteLaw | None = None
) -> DeficiencyBoundReport:
    """Bound on the deficiency of the MIH experiment with respect to ``target``.

    The bound is ``TV(jitter(MIH), target)``; for ``Normal-Qstar`` the
    jittered law is first mapped through ``x -> sqrt(max(x, 0))``.
    """
    fam = _family(target)
    fam.require(params)
    if params.d > 3:
        raise ValueError("quadrature is limited to d <= 3")
    g = normal_family_spec(params, fam.kind)
    law = law if law is not None else _mih_table(params, epsilon)
    if fam.kind == "Normal-Qstar":
        tv = tv_sqrt_jittered_vs_normal(law, g, max(nodes, 32))
        comps = (tv,)
        via = SQRT_JITTER
    else:
        j = apply_jitter(law)
        tv = tv_jittered_vs_normal(j, g, nodes)
        comps = (tv, hellinger_jittered_vs_normal(j, g, nodes))
        via = JITTER
    return DeficiencyBoundReport("P->Q", tv.value, via, comps, _shape(params), tv.error_estimate, fam.kind)


def deficiency_upper_bound_QP(
    params: ModelParams,
    source,
    *,
    nodes: int = DEFAULT_NODES,
    epsilon: float = DEFAULT_EPSILON,
    forward: DeficiencyBoundReport | None = None,
    law: DiscreteLaw | None = None,
) -> DeficiencyBoundReport:
    """Bound on the deficiency of ``source`` with respect to the MIH experiment.

    The bound is ``TV(MIH, kernel # source)`` where the kernel rounds
    (``Normal-Q``, ``Normal-Qbar``) or squares and rounds
    (``Normal-Qstar``).  The forward bound is attached for the
    data-processing check; pass ``forward`` to reuse one.
    """
    fam = _family(source)
    fam.require(params)
    g = normal_family_spec(params, fam.kind)
    law = law if law is not None else _mih_table(params, epsilon)
    if fam.kind == "Normal-Qstar":
        gm = _square_round_masses(law.support, g)
        outside = max(0.0, 1.0 - math.fsum(gm))
        value = min(0.5 * (math.fsum(np.abs(law.mass - gm)) + outside), 1.0)
        tv = DistanceReport(value, "tv", "cdf", law.tail_mass, 0, law.tail_mass)
        via = SQUARE_ROUND
    else:
        tv = tv_discrete_vs_rounded_normal(law, g, nodes)
        via = ROUND
    if forward is None:
        forward = deficiency_upper_bound_PQ(params, fam, nodes=nodes, epsilon=epsilon, law=law)
    return DeficiencyBoundReport(
        "Q->P", tv.value, via, (tv,), _shape(params), tv.error_estimate, fam.kind, forward.upper_bound, forward.error_estimate
    )

