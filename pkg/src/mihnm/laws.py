"""Enumerated discrete laws on the integer lattice.

A :class:`DiscreteLaw` is a finite table of support points with their
log-masses plus a ``tail_mass`` that accounts for probability left outside
the table (zero for laws with a finite, fully enumerated support).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams, ParameterError

__all__ = [
    "DiscreteLaw",
    "MomentSummary",
    "TailTooLargeError",
    "exact_moments",
    "point_mass",
]


class TailTooLargeError(ValueError):
    """Raised when a truncated law leaves too much mass unaccounted for."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteLaw:
    """Support points, their log-masses and the mass left outside the table.

    Points with zero mass are never stored.  Arrays are read-only.
    """

    support: np.ndarray
    logp: np.ndarray
    tail_mass: float = 0.0
    params: ModelParams | None = None
    kind: str = "custom"
    _index: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        if support.ndim == 1:
            support = support.reshape(-1, 1)
        logp = np.asarray(self.logp, dtype=np.float64).reshape(-1)
        if support.shape[0] != logp.shape[0]:
            raise ValueError("support and logp lengths differ")
        if not np.all(np.isfinite(logp)):
            raise ValueError("log-masses must be finite; drop zero-mass points instead")
        if self.tail_mass < 0 or not math.isfinite(self.tail_mass):
            raise ValueError(f"tail_mass={self.tail_mass} must be a finite non-negative number")
        object.__setattr__(self, "support", _frozen(support))
        object.__setattr__(self, "logp", _frozen(logp))
        object.__setattr__(self, "tail_mass", float(self.tail_mass))

    @property
    def d(self) -> int:
        return self.support.shape[1]

    def __len__(self) -> int:
        return self.support.shape[0]

    @property
    def mass(self) -> np.ndarray:
        return np.exp(self.logp)

    def total_mass(self) -> float:
        return math.fsum(self.mass)

    def entries(self) -> dict[tuple[int, ...], float]:
        """Mapping from support point to log-mass."""
        return {tuple(int(v) for v in k): float(lp) for k, lp in zip(self.support, self.logp)}

    def log_mass_of(self, k) -> float:
        """Log-mass of ``k``; ``-inf`` when ``k`` is not in the table."""
        if self._index is None:
            object.__setattr__(self, "_index", self.entries())
        return self._index.get(tuple(int(v) for v in np.atleast_1d(k)), -math.inf)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.support.min(axis=0), self.support.max(axis=0)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Masses on the bounding box as a dense ``d``-dimensional array.

        Returns ``(lower_corner, array)``.
        """
        lo, hi = self.bounding_box()
        grid = np.zeros(tuple(hi - lo + 1))
        grid[tuple((self.support - lo).T)] = self.mass
        return lo, grid

    def marginal(self, i: int) -> "DiscreteLaw":
        """Law of coordinate ``i``; the tail mass carries over unchanged."""
        vals, inv = np.unique(self.support[:, i], return_inverse=True)
        m = np.zeros(len(vals))
        np.add.at(m, inv, self.mass)
        keep = m > 0
        return DiscreteLaw(vals[keep].reshape(-1, 1), np.log(m[keep]), self.tail_mass, kind=f"{self.kind}-marginal")

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": None if self.params is None else self.params.to_dict(),
            "d": self.d,
            "entries": [{"k": [int(v) for v in k], "logp": float(lp)} for k, lp in zip(self.support, self.logp)],
            "tail_mass": self.tail_mass,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteLaw":
        entries = data["entries"]
        d = data.get("d") or (len(entries[0]["k"]) if entries else 1)
        support = np.array([e["k"] for e in entries], dtype=np.int64).reshape(-1, d)
        logp = np.array([e["logp"] for e in entries], dtype=np.float64)
        params = None if data.get("params") is None else ModelParams.from_dict(data["params"])
        return cls(support, logp, data.get("tail_mass", 0.0), params, data.get("kind", "custom"))

    @classmethod
    def from_json(cls, text: str) -> "DiscreteLaw":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# kind={self.kind}\n")
        params = "null" if self.params is None else json.dumps(self.params.to_dict())
        buf.write(f"# params={params}\n")
        buf.write(f"# tail_mass={self.tail_mass!r}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"k{i + 1}" for i in range(self.d)] + ["logp"])
        for k, lp in zip(self.support, self.logp):
            w.writerow([int(v) for v in k] + [repr(float(lp))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteLaw":
        meta = {}
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            elif line.strip():
                rows.append(line)
        reader = csv.reader(rows)
        header = next(reader)
        d = len(header) - 1
        body = list(reader)
        support = np.array([[int(v) for v in r[:d]] for r in body], dtype=np.int64).reshape(-1, d)
        logp = np.array([float(r[d]) for r in body], dtype=np.float64)
        params = json.loads(meta.get("params", "null"))
        params = None if params is None else ModelParams.from_dict(params)
        return cls(support, logp, float(meta.get("tail_mass", "0.0")), params, meta.get("kind", "custom"))


def point_mass(k) -> DiscreteLaw:
    """Law putting all its mass on the lattice point ``k``."""
    k = np.atleast_1d(np.asarray(k, dtype=np.int64))
    return DiscreteLaw(k.reshape(1, -1), np.zeros(1), 0.0, kind="point")


@dataclass(frozen=True)
class MomentSummary:
    mean: np.ndarray
    covariance: np.ndarray
    method: str = "exact-enumeration"


def exact_moments(law: DiscreteLaw, *, max_tail: float = 1e-9) -> MomentSummary:
    """Mean and covariance by direct summation over the table.

    Raises :class:`TailTooLargeError` when ``law.tail_mass > max_tail``.
    """
    if law.tail_mass > max_tail:
        raise TailTooLargeError(f"tail_mass={law.tail_mass:.3g} exceeds the moment tolerance {max_tail:.3g}")
    if len(law) == 0:
        raise ParameterError("law has an empty support")
    w = law.mass
    w = w / math.fsum(w)
    x = law.support.astype(np.float64)
    mean = w @ x
    centred = x - mean
    cov = (centred * w[:, None]).T @ centred
    cov = 0.5 * (cov + cov.T)
    return MomentSummary(mean, cov, "exact-enumeration")
