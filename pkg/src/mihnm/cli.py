"""Command-line front end.

Exit status: 0 when every check passes, 1 when a verification check fails,
2 on invalid input.

Law descriptors used by ``distance`` are colon-separated::

    mih:N=4:n=1:p=1/2          nm:n=1:p=1/2         point:k=0,1
    normal-q:n=16:p=1/2        normal-qbar:...      normal-qstar:...
    normal:mean=0,1:var=1,2    (independent coordinates)
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .dist import DEFAULT_EPSILON, enumerate_mih_support, make_rng, mih_log_pmf, nm_log_pmf, sample_mih, sample_nm, truncate_nm_support
from .laws import DiscreteLaw, point_mass
from .metrics import (
    AbsoluteContinuityError,
    DistanceReport,
    JitteredLaw,
    NormalSpec,
    QuadratureError,
    hellinger_discrete,
    hellinger_jittered_vs_normal,
    hellinger_normals,
    kl_discrete,
    kolmogorov_discrete,
    kolmogorov_discrete_vs_normal,
    tv_discrete,
    tv_discrete_vs_rounded_normal,
    tv_jittered_vs_normal,
)
from .experiments import normal_family_spec
from .params import ModelParams, ParameterError, ZeroMassError
from .reports import SweepConfig, bounds_report, distance_sweep, expansion_check, render

log = logging.getLogger("mihnm")

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class InputError(ValueError):
    """Invalid command-line input; maps to exit status 2."""


# argument helpers ----------------------------------------------------------


def _parse_p(text: str) -> list[str]:
    return [s for s in text.split(",") if s.strip()]


def _params(dist: str, N, n, p) -> ModelParams:
    if dist == "mih":
        if N is None:
            raise InputError("MIH needs a population size -N")
        return ModelParams(N, n, _parse_p(p), allow_decimal=False)
    return ModelParams(None, n, _parse_p(p))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _global_parent(suppress: bool) -> argparse.ArgumentParser:
    # the same flags are accepted before and after the subcommand
    def default(value):
        return argparse.SUPPRESS if suppress else value

    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=default(None), help="RNG seed (default 0, or the config value)")
    g.add_argument("--jobs", type=int, default=default(None), help="worker threads for sweeps (default 1)")
    g.add_argument("--format", choices=["json", "csv"], default=default("json"), help="output format")
    g.add_argument("--out", metavar="PATH", default=default(None), help="write output to PATH instead of stdout")
    g.add_argument("--config", metavar="PATH", default=default(None), help="JSON sweep configuration")
    return g


def _config(args) -> SweepConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
    data["seed"] = args.seed if args.seed is not None else data.get("seed", 0)
    data["jobs"] = args.jobs if args.jobs is not None else data.get("jobs", 1)
    for key in ("gamma", "doublings", "b", "nodes", "epsilon"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    for key in ("n", "d", "N"):
        val = getattr(args, f"grid_{key}", None)
        if val is not None:
            data[key] = val
    if getattr(args, "grid_p", None):
        data["p"] = [_parse_p(s) for s in args.grid_p]
    return SweepConfig.from_dict(data)


# descriptors ---------------------------------------------------------------


def parse_descriptor(text: str, epsilon: float = DEFAULT_EPSILON):
    """Turn a descriptor string into a :class:`DiscreteLaw` or :class:`NormalSpec`."""
    kind, *parts = text.strip().split(":")
    kind = kind.lower()
    fields = {}
    for part in parts:
        key, sep, value = part.partition("=")
        if not sep:
            raise InputError(f"malformed descriptor field {part!r} in {text!r}")
        fields[key.strip()] = value.strip()

    def need(key):
        if key not in fields:
            raise InputError(f"descriptor {text!r} lacks {key}=")
        return fields[key]

    if kind == "mih":
        return enumerate_mih_support(_params("mih", int(need("N")), int(need("n")), need("p")))
    if kind == "nm":
        return truncate_nm_support(_params("nm", None, int(need("n")), need("p")), epsilon)
    if kind == "point":
        return point_mass([int(v) for v in need("k").split(",")])
    if kind in ("normal-q", "normal-qbar", "normal-qstar"):
        fam = {"normal-q": "Normal-Q", "normal-qbar": "Normal-Qbar", "normal-qstar": "Normal-Qstar"}[kind]
        return normal_family_spec(_params("nm", None, int(need("n")), need("p")), fam)
    if kind == "normal":
        mean = [float(v) for v in need("mean").split(",")]
        var = [float(v) for v in need("var").split(",")]
        if len(var) != len(mean):
            raise InputError("mean and var must have the same length")
        return NormalSpec(mean, np.diag(var))
    raise InputError(f"unknown law kind {kind!r}")


def compute_distance(a, b, metric: str, nodes: int = 16, rounded: bool = False) -> DistanceReport:
    """Dispatch a metric on any pair of discrete laws and Gaussians."""
    a_disc = isinstance(a, DiscreteLaw)
    b_disc = isinstance(b, DiscreteLaw)
    if a_disc and b_disc:
        fn = {"hellinger": hellinger_discrete, "tv": tv_discrete, "kl": kl_discrete, "kolmogorov": kolmogorov_discrete}[metric]
        return fn(a, b)
    if not a_disc and not b_disc:
        if metric != "hellinger":
            raise InputError("between two Gaussians only the hellinger metric is available")
        return hellinger_normals(a, b)
    if metric == "kl":
        raise InputError("kl is only available between discrete laws")
    law, g = (a, b) if a_disc else (b, a)
    if metric == "hellinger":
        return hellinger_jittered_vs_normal(JitteredLaw(law), g, nodes)
    if metric == "tv":
        return tv_discrete_vs_rounded_normal(law, g, nodes) if rounded else tv_jittered_vs_normal(JitteredLaw(law), g, nodes)
    return kolmogorov_discrete_vs_normal(law, g)


# subcommands ---------------------------------------------------------------


def cmd_pmf(args) -> int:
    params = _params(args.dist, args.N, args.n, args.p)
    if args.enumerate:
        law = enumerate_mih_support(params) if args.dist == "mih" else truncate_nm_support(params, args.epsilon)
        _emit(law.to_json(indent=2) + "\n" if args.format == "json" else law.to_csv(), args.out)
        return EXIT_OK
    if args.k is None:
        raise InputError("give -k K... or --enumerate")
    k = [int(v) for v in args.k]
    lp = mih_log_pmf(params, k) if args.dist == "mih" else nm_log_pmf(params, k)
    if args.format == "json":
        _emit(json.dumps({"dist": args.dist, "params": params.to_dict(), "k": k, "logp": lp}) + "\n", args.out)
    else:
        _emit("".join(f"k{i + 1}," for i in range(len(k))) + "logp\n" + ",".join(map(str, k)) + f",{lp!r}\n", args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    params = _params(args.dist, args.N, args.n, args.p)
    seed = 0 if args.seed is None else args.seed
    rng = make_rng(seed)
    draws = sample_mih(params, rng, args.size) if args.dist == "mih" else sample_nm(params, rng, args.size)
    if args.format == "json":
        doc = {"dist": args.dist, "params": params.to_dict(), "seed": seed, "samples": draws.tolist()}
        _emit(json.dumps(doc) + "\n", args.out)
    else:
        head = ",".join(f"k{i + 1}" for i in range(params.d))
        _emit(f"# seed={seed}\n{head}\n" + "".join(",".join(map(str, r)) + "\n" for r in draws), args.out)
    return EXIT_OK


def cmd_distance(args) -> int:
    a = parse_descriptor(args.a, args.epsilon)
    b = parse_descriptor(args.b, args.epsilon)
    if a.d != b.d:
        raise InputError(f"dimension mismatch: {a.d} and {b.d}")
    rep = compute_distance(a, b, args.metric, args.nodes, args.rounded)
    if args.format == "json":
        _emit(json.dumps(rep.to_dict(), sort_keys=True) + "\n", args.out)
    else:
        d = rep.to_dict()
        cols = ["metric", "method", "value", "error_estimate", "truncation_tail", "quadrature_nodes"]
        _emit(",".join(cols) + "\n" + ",".join(repr(d[c]) if isinstance(d[c], float) else str(d[c]) for c in cols) + "\n", args.out)
    return EXIT_OK


def _run_report(report: dict, args) -> int:
    _emit(render(report, args.format), args.out)
    if not report["passed"]:
        failing = report.get("failing") or [k for k, v in report.get("checks", {}).items() if not v["passed"]]
        log.error("checks failed: %s", failing)
        return EXIT_FAIL
    return EXIT_OK


def cmd_expansion_check(args) -> int:
    return _run_report(expansion_check(_config(args)), args)


def cmd_bounds_report(args) -> int:
    return _run_report(bounds_report(_config(args)), args)


def cmd_sweep(args) -> int:
    return _run_report(distance_sweep(_config(args)), args)


# parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mihnm",
        description="MIH and NM laws, their distances and deficiency bounds.",
        parents=[_global_parent(False)],
    )
    common = _global_parent(True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def law_args(p):
        p.add_argument("dist", choices=["mih", "nm"])
        p.add_argument("-N", type=int, default=None, help="population size (MIH only)")
        p.add_argument("-n", type=int, required=True, help="number of failures")
        p.add_argument("-p", required=True, help="category weights as exact fractions, e.g. 3/10,1/5")

    p = sub.add_parser("pmf", parents=[common], help="log-mass at a point or the whole law")
    law_args(p)
    p.add_argument("-k", nargs="+", default=None, help="count vector")
    p.add_argument("--enumerate", action="store_true", help="print the full (or truncated) law")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="NM truncation tail")
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("sample", parents=[common], help="draw from a law")
    law_args(p)
    p.add_argument("--size", type=int, default=1)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("distance", parents=[common], help="distance between two law descriptors")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--metric", choices=["hellinger", "tv", "kl", "kolmogorov"], default="hellinger")
    p.add_argument("--nodes", type=int, default=16, help="Gauss-Legendre nodes per axis per cell")
    p.add_argument("--rounded", action="store_true", help="tv against the rounded Gaussian instead of the jittered law")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="NM truncation tail")
    p.set_defaults(func=cmd_distance)

    def grid_args(p):
        p.add_argument("--gamma", default=None, help="region threshold, e.g. 3/4")
        p.add_argument("--b", default=None, help="Theta_b lower bound, e.g. 1/5")
        p.add_argument("--n", dest="grid_n", type=int, nargs="+", default=None, help="values of n")
        p.add_argument("--d", dest="grid_d", type=int, nargs="+", default=None, help="dimensions to keep")
        p.add_argument("--p", dest="grid_p", nargs="+", default=None, help="weight vectors, e.g. 1/2 3/10,1/5")
        p.add_argument("--N", dest="grid_N", type=int, nargs="+", default=None, help="explicit N values")
        p.add_argument("--nodes", type=int, default=None)
        p.add_argument("--epsilon", type=float, default=None)

    p = sub.add_parser("expansion-check", parents=[common], help="residual rates of the local expansion")
    p.add_argument("--gamma", default=None)
    p.add_argument("--doublings", type=int, default=None)
    p.set_defaults(func=cmd_expansion_check)

    p = sub.add_parser("bounds-report", parents=[common], help="distance and deficiency bounds over a grid")
    grid_args(p)
    p.set_defaults(func=cmd_bounds_report)

    p = sub.add_parser("sweep", parents=[common], help="every metric over a grid")
    grid_args(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ParameterError, ZeroMassError, AbsoluteContinuityError, QuadratureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
