"""Verification sweeps: expansion rates, distance/deficiency bounds, metric grids.

Each driver takes a :class:`SweepConfig`, returns a plain ``dict`` report
with a ``passed`` flag, and can render it as JSON or CSV.  Output is
deterministic: rows are ordered by parameter key, floats are written with
``repr`` and JSON keys are sorted.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction

import numpy as np

from .dist import truncate_mih_support, truncate_nm_support
from .expansion import (
    RegionSpec,
    fit_loglog_slope,
    in_region,
    is_degenerate_cell,
    residual_sweep,
    sweep_N_values,
)
from .experiments import (
    apply_jitter,
    concentration_check,
    deficiency_upper_bound_PQ,
    deficiency_upper_bound_QP,
    normal_family_spec,
)
from .metrics import (
    hellinger_discrete,
    hellinger_jittered_vs_normal,
    hellinger_normals,
    kl_discrete,
    kolmogorov_discrete,
    kolmogorov_discrete_vs_normal,
    tv_discrete,
    tv_jittered_vs_normal,
)
from .params import ModelParams, ParameterError, RegionError, as_fraction, lattice_N_at_least

__all__ = [
    "SweepConfig",
    "bounds_report",
    "distance_sweep",
    "expansion_check",
    "render",
]

log = logging.getLogger(__name__)

DEFAULT_EXPANSION_GRID = (
    {"n": 1, "p": ["1/2"], "k": [2]},
    {"n": 2, "p": ["1/2"], "k": [2]},
    {"n": 4, "p": ["1/2"], "k": [3]},
    {"n": 1, "p": ["3/10", "1/5"], "k": [1, 2]},
    {"n": 2, "p": ["3/10", "1/5"], "k": [1, 1]},
    {"n": 4, "p": ["3/10", "1/5"], "k": [2, 1]},
)

DEFAULT_P_GRID = (("1/5",), ("1/2",), ("1/5", "1/5"), ("2/5", "1/5"))


@dataclass
class SweepConfig:
    """Everything a sweep needs; loaded from a JSON document.

    Unknown keys are rejected so that typos do not silently fall back to
    defaults.
    """

    seed: int = 0
    jobs: int = 1
    gamma: Fraction = Fraction(3, 4)
    # expansion-check
    expansion_grid: list = field(default_factory=lambda: [dict(c) for c in DEFAULT_EXPANSION_GRID])
    doublings: int = 5
    start_factor: int = 64
    slope1: tuple = (-2.3, -1.7)
    slope2: tuple = (-3.4, -2.6)
    constant_ratio_max: float = 3.0
    # bounds-report and sweep
    b: Fraction = Fraction(1, 5)
    d: list = field(default_factory=lambda: [1, 2])
    n: list = field(default_factory=lambda: [16, 36, 64])
    p: list = field(default_factory=lambda: [list(x) for x in DEFAULT_P_GRID])
    N: list | None = None
    families: list = field(default_factory=lambda: ["Normal-Q", "Normal-Qbar", "Normal-Qstar"])
    nodes: int = 16
    epsilon: float = 1e-12
    hellinger_ratio_max: float = 10.0
    cb_ratio_max: float = 3.0
    concentration_start: int = 4

    def __post_init__(self):
        self.gamma = as_fraction(self.gamma)
        self.b = as_fraction(self.b)
        RegionSpec(self.gamma)
        if not 0 < self.b < 1:
            raise ParameterError(f"b={self.b} must lie in (0, 1)")
        self.slope1 = tuple(self.slope1)
        self.slope2 = tuple(self.slope2)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, Fraction) else v
        out["slope1"] = list(self.slope1)
        out["slope2"] = list(self.slope2)
        return out

    def result_dict(self) -> dict:
        """Settings that can change the numbers; ``jobs`` only affects scheduling."""
        out = self.to_dict()
        del out["jobs"]
        return out


def _pmap(func, items, jobs: int):
    if jobs <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def _ratio(values) -> float:
    vals = [v for v in values if v > 0]
    if not vals:
        return 1.0
    return max(vals) / min(vals)


def _pstr(p) -> str:
    return ",".join(str(as_fraction(x)) for x in p)


# expansion -----------------------------------------------------------------


def _expansion_cell(cell: dict, cfg: SweepConfig) -> dict:
    region = RegionSpec(cfg.gamma)
    n, p, k = int(cell["n"]), list(cell["p"]), [int(v) for v in cell["k"]]
    key = {"n": n, "p": _pstr(p), "k": k}
    try:
        if "N" in cell:
            N_values = sorted(int(v) for v in cell["N"])
        else:
            N_values = sweep_N_values(p, n, k, region, cfg.doublings, cfg.start_factor)
        for N in N_values:
            params = ModelParams(N, n, p)
            if not params.half_condition:
                raise ParameterError(f"n={n} > N q / 2 at N={N}")
            if not in_region(params, k, region):
                raise RegionError(f"k={k} outside the region at N={N}, gamma={region.gamma}")
        rows = residual_sweep(p, n, k, N_values, region)
    except (ParameterError, RegionError) as exc:
        log.warning("skipping expansion cell %s: %s", key, exc)
        return {**key, "status": "skipped", "reason": str(exc), "rows": []}
    params = ModelParams(N_values[0], n, p)
    if is_degenerate_cell(params, k):
        zero = all(r.residual == 0.0 for r in rows)
        return {**key, "status": "identically-zero", "passed": zero, "rows": rows,
                "slope1": None, "slope2": None, "constant": 0.0, "constant_ratio": 1.0}
    res1 = [r for r in rows if r.order == 1]
    res2 = [r for r in rows if r.order == 2]
    s1 = fit_loglog_slope([r.N for r in res1], [r.residual for r in res1])
    s2 = fit_loglog_slope([r.N for r in res2], [r.residual for r in res2])
    consts = [abs(r.residual) / r.remainder_scale for r in res2]
    c_ratio = _ratio(consts)
    ok1 = cfg.slope1[0] <= s1 <= cfg.slope1[1]
    ok2 = cfg.slope2[0] <= s2 <= cfg.slope2[1]
    ok_c = c_ratio <= cfg.constant_ratio_max
    return {**key, "status": "checked", "passed": ok1 and ok2 and ok_c, "rows": rows,
            "slope1": s1, "slope2": s2, "slope1_ok": ok1, "slope2_ok": ok2,
            "constant": max(consts), "constant_ratio": c_ratio, "constant_ok": ok_c}


def expansion_check(cfg: SweepConfig) -> dict:
    """Residual rows, fitted slopes and remainder constants for each grid cell."""
    cells = _pmap(lambda c: _expansion_cell(c, cfg), cfg.expansion_grid, cfg.jobs)
    checked = [c for c in cells if c["status"] != "skipped"]
    constant = max((c["constant"] for c in checked), default=0.0)
    for c in checked:
        for r in c["rows"]:
            if r.order == 2 and abs(r.residual) > constant * r.remainder_scale:
                c["passed"] = False
    failing = [{"n": c["n"], "p": c["p"], "k": c["k"]} for c in checked if not c["passed"]]
    return {
        "kind": "expansion-check",
        "gamma": str(cfg.gamma),
        "constant": constant,
        "cells": cells,
        "failing": failing,
        "passed": not failing,
    }


def _expansion_csv(report: dict) -> str:
    rows = [r for c in report["cells"] for r in c["rows"]]
    dmax = max((len(r.p) for r in rows), default=1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "n", "d"] + [f"p{i + 1}" for i in range(dmax)] + [f"k{i + 1}" for i in range(dmax)]
               + ["gamma", "order", "exact", "approx", "residual", "remainder_scale"])
    for r in rows:
        pad = [""] * (dmax - len(r.p))
        w.writerow([r.N, r.n, len(r.p)] + [str(x) for x in r.p] + pad + list(r.k) + pad
                   + [str(r.gamma), r.order, repr(r.exact), repr(r.approx), repr(r.residual), repr(r.remainder_scale)])
    return buf.getvalue()


def _expansion_summary(report: dict) -> dict:
    out = {k: v for k, v in report.items() if k != "cells"}
    out["cells"] = [{k: v for k, v in c.items() if k != "rows"} for c in report["cells"]]
    return out


# bounds --------------------------------------------------------------------


def _grid_points(cfg: SweepConfig):
    points = []
    for p in cfg.p:
        d = len(p)
        if d not in cfg.d:
            continue
        for n in cfg.n:
            Ns = [lattice_N_at_least(n**3 / d, n, p)] if cfg.N is None else [int(v) for v in cfg.N]
            for N in Ns:
                points.append((d, tuple(str(as_fraction(x)) for x in p), int(n), N))
    return sorted(points, key=lambda t: (t[0], t[1], t[2], t[3]))


def _bounds_point(point, cfg: SweepConfig) -> dict:
    d, p, n, N = point
    row = {"d": d, "p": ",".join(p), "n": n, "N": N}
    try:
        params = ModelParams(N, n, list(p))
    except ParameterError as exc:
        return {**row, "status": "rejected", "reason": str(exc)}
    if N * d < n**3:
        return {**row, "status": "rejected", "reason": f"N={N} < n^3/d={Fraction(n**3, d)}"}
    if not params.in_theta(cfg.b):
        return {**row, "status": "rejected", "reason": f"min(p, q)={min(params.weights)} < b={cfg.b}"}
    if not params.half_condition:
        return {**row, "status": "rejected", "reason": f"n={n} > N q / 2"}
    mih = truncate_mih_support(params, cfg.epsilon)
    nm = truncate_nm_support(params, cfg.epsilon)
    h_pq = hellinger_discrete(mih, nm)
    q = float(params.q)
    h_ratio = h_pq.value**2 * N * q**2 / (d * n**2)
    g = normal_family_spec(params, "Normal-Q")
    h_normal = hellinger_jittered_vs_normal(apply_jitter(mih), g, cfg.nodes)
    out = {**row, "status": "ok", "hellinger_mih_nm": h_pq.to_dict(), "hellinger_ratio": h_ratio,
           "hellinger_mih_normal": h_normal.to_dict(), "shape": d / math.sqrt(n), "families": {}}
    for fam in cfg.families:
        fwd = deficiency_upper_bound_PQ(params, fam, nodes=cfg.nodes, epsilon=cfg.epsilon, law=mih)
        back = deficiency_upper_bound_QP(params, fam, nodes=cfg.nodes, epsilon=cfg.epsilon, law=mih, forward=fwd)
        out["families"][fam] = {
            "PQ": fwd.to_dict(),
            "QP": back.to_dict(),
            "dpi_ok": back.upper_bound <= fwd.upper_bound + fwd.error_estimate + back.error_estimate,
            "scaled": fwd.upper_bound * math.sqrt(n) / d,
        }
    if "Normal-Q" in out["families"] and "Normal-Qbar" in out["families"]:
        # triangle inequality through Normal-Q, with TV(Q, Qbar) <= sqrt(2) H(Q, Qbar)
        hq = hellinger_normals(g, normal_family_spec(params, "Normal-Qbar")).value
        lhs = out["families"]["Normal-Qbar"]["PQ"]
        rhs = out["families"]["Normal-Q"]["PQ"]
        slack = lhs["error_estimate"] + rhs["error_estimate"]
        out["triangle"] = {"lhs": lhs["upper_bound"], "rhs": rhs["upper_bound"] + math.sqrt(2) * hq,
                           "ok": lhs["upper_bound"] <= rhs["upper_bound"] + math.sqrt(2) * hq + slack}
    return out


def _concentration_task(key, cfg: SweepConfig) -> dict:
    d, p, n = key
    target = n**3 / d
    Ns = []
    j = cfg.concentration_start
    while True:
        N = lattice_N_at_least(n * 2**j, n, list(p))
        if not Ns or N > Ns[-1]:
            Ns.append(N)
        if N >= target:
            break
        j += 1
    sweep = concentration_check(list(p), n, Ns, cfg.gamma)
    return {
        "d": d, "p": ",".join(p), "n": n, "gamma": str(cfg.gamma), "threshold": sweep.threshold, "passed": sweep.passed,
        "rows": [{"N": r.N, "log_tail": r.log_tail, "log_bound": r.log_bound, "method": r.method, "holds": r.holds}
                 for r in sweep.rows],
    }


def bounds_report(cfg: SweepConfig) -> dict:
    """Hellinger ratios, deficiency bounds in both directions and concentration checks."""
    points = _grid_points(cfg)
    rows = _pmap(lambda pt: _bounds_point(pt, cfg), points, cfg.jobs)
    for r in rows:
        if r["status"] == "rejected":
            log.warning("rejected grid point d=%s p=%s n=%s N=%s: %s", r["d"], r["p"], r["n"], r["N"], r["reason"])
    ok = [r for r in rows if r["status"] == "ok"]
    conc_keys = sorted({(r["d"], tuple(r["p"].split(",")), r["n"]) for r in ok})
    conc = _pmap(lambda k: _concentration_task(k, cfg), conc_keys, cfg.jobs)

    checks = {}
    dpi_fail = [(r["d"], r["p"], r["n"], r["N"], f) for r in ok for f, v in r["families"].items() if not v["dpi_ok"]]
    checks["data_processing"] = {"passed": not dpi_fail, "failing": [list(x) for x in dpi_fail]}
    h_ratio = _ratio([r["hellinger_ratio"] for r in ok])
    checks["hellinger_shape"] = {
        "passed": h_ratio <= cfg.hellinger_ratio_max,
        "max_over_min": h_ratio,
        "limit": cfg.hellinger_ratio_max,
        "values": [r["hellinger_ratio"] for r in ok],
    }
    cb = {}
    for r in ok:
        if "Normal-Q" in r["families"]:
            cb.setdefault(f"d={r['d']} p={r['p']}", []).append(r["families"]["Normal-Q"]["scaled"])
    cb_ratios = {k: _ratio(v) for k, v in cb.items()}
    checks["cb_stability"] = {
        "passed": all(v <= cfg.cb_ratio_max for v in cb_ratios.values()),
        "max_over_min": cb_ratios,
        "fitted_cb": {k: max(v) for k, v in cb.items()},
        "limit": cfg.cb_ratio_max,
    }
    checks["concentration"] = {
        "passed": all(c["passed"] for c in conc),
        "failing": [{"d": c["d"], "p": c["p"], "n": c["n"]} for c in conc if not c["passed"]],
    }
    tri = [r for r in ok if "triangle" in r]
    checks["triangle"] = {"passed": all(r["triangle"]["ok"] for r in tri)}
    return {
        "kind": "bounds-report",
        "config": cfg.result_dict(),
        "points": rows,
        "concentration": conc,
        "checks": checks,
        "passed": all(c["passed"] for c in checks.values()),
    }


def _bounds_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "d", "p", "n", "N", "family", "direction", "quantity", "value", "error_estimate", "note"])
    for r in report["points"]:
        base = ["point", r["d"], r["p"], r["n"], r["N"]]
        if r["status"] != "ok":
            w.writerow(base + ["", "", "rejected", "", "", r["reason"]])
            continue
        h = r["hellinger_mih_nm"]
        w.writerow(base + ["NM", "", "hellinger", repr(h["value"]), repr(h["error_estimate"]), ""])
        w.writerow(base + ["NM", "", "hellinger_ratio", repr(r["hellinger_ratio"]), repr(h["error_estimate"]), ""])
        h = r["hellinger_mih_normal"]
        w.writerow(base + ["Normal-Q", "", "hellinger_jittered", repr(h["value"]), repr(h["error_estimate"]), ""])
        for fam, v in sorted(r["families"].items()):
            for direction in ("PQ", "QP"):
                rep = v[direction]
                w.writerow(base + [fam, rep["direction"], "tv_bound", repr(rep["upper_bound"]), repr(rep["error_estimate"]),
                                   rep["via"]["kind"]])
    for c in report["concentration"]:
        for row in c["rows"]:
            w.writerow(["concentration", c["d"], c["p"], c["n"], row["N"], "MIH", "", "log_tail",
                        repr(row["log_tail"]), "0.0", row["method"]])
            w.writerow(["concentration", c["d"], c["p"], c["n"], row["N"], "MIH", "", "log_bound",
                        repr(row["log_bound"]), "0.0", "holds" if row["holds"] else "violated"])
    for name, chk in sorted(report["checks"].items()):
        w.writerow(["check", "", "", "", "", "", "", name, "pass" if chk["passed"] else "fail", "", ""])
    return buf.getvalue()


# metric sweep --------------------------------------------------------------


def _sweep_point(point, cfg: SweepConfig) -> list[dict]:
    d, p, n, N = point
    try:
        params = ModelParams(N, n, list(p))
    except ParameterError as exc:
        log.warning("skipping d=%s p=%s n=%s N=%s: %s", d, p, n, N, exc)
        return []
    mih = truncate_mih_support(params, cfg.epsilon)
    nm = truncate_nm_support(params, cfg.epsilon)
    reps = [("NM", hellinger_discrete(mih, nm)), ("NM", tv_discrete(mih, nm)), ("NM", kl_discrete(mih, nm))]
    g = normal_family_spec(params, "Normal-Q")
    j = apply_jitter(mih)
    reps += [("Normal-Q", hellinger_jittered_vs_normal(j, g, cfg.nodes)), ("Normal-Q", tv_jittered_vs_normal(j, g, cfg.nodes))]
    if d == 1:
        reps += [("NM", kolmogorov_discrete(mih, nm)), ("Normal-Q", kolmogorov_discrete_vs_normal(mih, g))]
    return [{"d": d, "p": ",".join(p), "n": n, "N": N, "versus": v, **rep.to_dict()} for v, rep in reps]


def distance_sweep(cfg: SweepConfig) -> dict:
    """Every metric between MIH and NM / Normal-Q over the bounds grid."""
    points = _grid_points(cfg)
    rows = [r for rs in _pmap(lambda pt: _sweep_point(pt, cfg), points, cfg.jobs) for r in rs]
    return {"kind": "sweep", "config": cfg.result_dict(), "rows": rows, "passed": True}


def _sweep_csv(report: dict) -> str:
    cols = ["metric", "method", "value", "error_estimate", "truncation_tail", "quadrature_nodes", "versus", "d", "p", "n", "N"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in report["rows"]:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
    return buf.getvalue()


# rendering -----------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable({f: getattr(obj, f) for f in obj.__dataclass_fields__})
    return obj


def render(report: dict, fmt: str = "json") -> str:
    """Serialize a report; CSV carries the row data, JSON everything."""
    if fmt == "json":
        body = report if report["kind"] != "expansion-check" else _expansion_summary(report)
        return json.dumps(_jsonable(body), sort_keys=True, indent=2) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    if report["kind"] == "expansion-check":
        return _expansion_csv(report)
    if report["kind"] == "bounds-report":
        return _bounds_csv(report)
    return _sweep_csv(report)
