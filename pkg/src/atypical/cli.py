"""Command-line interface.

Subcommands: kos, milnor, tcheck, fibers, corpus.  Machine-readable reports
go to stdout (JSON, or CSV for fibers); diagnostics and timings go to
stderr.  Exit codes: 0 success, 2 input error, 3 configuration error,
4 internal invariant violation (for example an estimated Milnor value with
no matching KOS value, which signals a scan failure).

Reports serialize numbers via Python's shortest round-trip float repr and
echo the full configuration, so a report determines its run bit-exactly.
Map arguments are file paths; bare names of bundled corpus maps also work.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, corpus
from .fiberprobe import DegenerateMapError, fiber_components_2d
from .infinity import RhoSpec, singular_values_estimate
from .polymap import ComplexPolyMap, MapFileError, PolyMap, map_hash, parse_map, realify
from .sampling import ConfigError, ScanConfig, ValueCluster
from .scanner import inclusion_report, kos_scan, milnor_scan, t_probe

SCHEMA = "atypical/1"


class InvariantViolation(RuntimeError):
    """An internal consistency check failed (scan-quality problem)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise ConfigError(message)


def _load_map(arg: str) -> tuple[PolyMap, str]:
    path = Path(arg)
    if path.exists():
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise MapFileError(f"cannot read map file {arg}: {exc}") from None
    else:
        stem = path.stem if path.suffix == ".json" else arg
        if stem in corpus.NAMES and os.sep not in arg:
            text = corpus.read_text(stem)
        else:
            raise MapFileError(f"map file not found: {arg}")
    parsed = parse_map(text)
    digest = map_hash(parsed)
    pm = realify(parsed) if isinstance(parsed, ComplexPolyMap) else parsed
    return pm, digest


def _parse_radii(spec: str) -> tuple[float, float, int]:
    try:
        start, factor, count = spec.split(":")
        return float(start), float(factor), int(count)
    except ValueError:
        raise ConfigError(f"bad --radii {spec!r}; expected start:factor:count") from None


def _parse_rho(spec: str, n: int) -> RhoSpec:
    if spec in ("euclid", "euclidean"):
        return RhoSpec.euclidean()
    if spec.startswith("weighted:"):
        try:
            weights = [int(w) for w in spec.split(":", 1)[1].split(",")]
        except ValueError:
            raise ConfigError(f"bad --rho {spec!r}; expected weighted:w1,...,wn") from None
        if len(weights) != n or any(w < 1 for w in weights):
            raise ConfigError(f"--rho weights must be {n} positive integers")
        return RhoSpec.weighted(weights)
    raise ConfigError(f"bad --rho {spec!r}; expected euclid or weighted:w1,...,wn")


def _parse_vector(spec: str, what: str) -> list[float]:
    try:
        return [float(v) for v in spec.split(",")]
    except ValueError:
        raise ConfigError(f"bad {what} {spec!r}; expected comma-separated floats") from None


def _add_scan_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-dirs", type=int, default=512)
    p.add_argument("--radii", default="100:10:5", help="start:factor:count")
    p.add_argument("--window", type=float, default=10.0, help="value box half-width")
    p.add_argument("--cluster-tol", type=float, default=1e-2)
    p.add_argument("--opt-budget", type=int, default=200)
    p.add_argument("--delta", type=float, default=1e-2)
    p.add_argument("--eps-res", type=float, default=1e-6)
    p.add_argument("--eps-sing", type=float, default=1e-10)
    p.add_argument("--decay-slope", type=float, default=-0.2)
    p.add_argument("--threads", type=int, default=None)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("ATYPICAL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"bad ATYPICAL_THREADS value {env!r}") from None
    return 1


def _config(args) -> ScanConfig:
    start, factor, count = _parse_radii(args.radii)
    return ScanConfig(
        radii_start=start,
        radii_factor=factor,
        radii_count=count,
        n_dirs=args.n_dirs,
        seed=args.seed,
        delta=args.delta,
        eps_res=args.eps_res,
        eps_sing=args.eps_sing,
        cluster_tol=args.cluster_tol,
        opt_budget=args.opt_budget,
        decay_slope=args.decay_slope,
        value_window=args.window,
    )


def cluster_dict(c: ValueCluster) -> dict:
    return {
        "kind": c.kind,
        "value": [float(v) for v in c.value],
        "witnesses": [
            {
                "point": [float(v) for v in w.point],
                "radius": float(w.radius),
                "indicator": float(w.indicator),
            }
            for w in c.witnesses
        ],
        "decay_trace": [[float(r), float(v)] for r, v in c.decay_trace],
        "trace_nonincreasing": bool(c.trace_nonincreasing),
    }


def emit_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)


def parse_report(text: str) -> dict:
    return json.loads(text)


def _base_report(command: str, pm: PolyMap, digest: str, cfg: ScanConfig) -> dict:
    return {
        "schema": SCHEMA,
        "tool_version": __version__,
        "command": command,
        "map": {"name": pm.name, "hash": digest, "n": pm.n, "p": pm.p},
        "config": cfg.to_dict(),
    }


def _cmd_kos(args) -> int:
    pm, digest = _load_map(args.map_file)
    cfg = _config(args)
    started = time.perf_counter()
    clusters = kos_scan(pm, cfg, threads=_threads(args))
    elapsed = time.perf_counter() - started
    report = _base_report("kos", pm, digest, cfg)
    report["clusters"] = [cluster_dict(c) for c in clusters]
    report["wall_time_s"] = elapsed
    print(emit_report(report))
    return 0


def _cmd_milnor(args) -> int:
    pm, digest = _load_map(args.map_file)
    cfg = _config(args)
    rho = _parse_rho(args.rho, pm.n)
    started = time.perf_counter()
    clusters = milnor_scan(pm, cfg, rho, threads=_threads(args))
    singular = singular_values_estimate(pm, cfg)
    elapsed = time.perf_counter() - started
    report = _base_report("milnor", pm, digest, cfg)
    report["rho"] = {"kind": rho.kind, "weights": list(rho.weights)}
    report["clusters"] = [cluster_dict(c) for c in clusters] + [
        cluster_dict(c) for c in singular
    ]
    report["wall_time_s"] = elapsed
    print(emit_report(report))
    return 0


def _cmd_tcheck(args) -> int:
    pm, digest = _load_map(args.map_file)
    cfg = _config(args)
    direction = _parse_vector(args.direction, "--direction")
    if len(direction) != pm.n or not any(direction):
        raise ConfigError(f"--direction must be a nonzero vector of length {pm.n}")
    value = _parse_vector(args.value, "--value") if args.value else [0.0] * pm.p
    if len(value) != pm.p:
        raise ConfigError(f"--value must have length {pm.p}")
    started = time.perf_counter()
    res = t_probe(pm, cfg, direction, value, threads=_threads(args))
    elapsed = time.perf_counter() - started
    report = _base_report("tcheck", pm, digest, cfg)
    report["direction"] = list(res.point.direction)
    report["value"] = list(res.point.value)
    report["decay_trace"] = [[float(r), float(v)] for r, v in res.trace]
    report["slope"] = float(res.slope)
    report["verdict"] = res.verdict
    report["wall_time_s"] = elapsed
    print(emit_report(report))
    return 0


def _parse_t_grid(spec: str) -> list[float]:
    if ":" in spec:
        try:
            lo, hi, num = spec.split(":")
            return [float(v) for v in np.linspace(float(lo), float(hi), int(num))]
        except ValueError:
            raise ConfigError(f"bad --t-grid {spec!r}; expected lo:hi:count or v1,v2,...") from None
    return _parse_vector(spec, "--t-grid")


def _cmd_fibers(args) -> int:
    pm, _ = _load_map(args.map_file)
    if pm.n != 2 or pm.p != 1:
        raise ConfigError("fiber census supports n=2, p=1 maps only")
    ts = _parse_t_grid(args.t_grid)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["t", "count", "L", "res"])
    for t in ts:
        count = fiber_components_2d(pm, t, args.box, args.res)
        writer.writerow([repr(float(t)), count, repr(float(args.box)), args.res])
    sys.stdout.write(buf.getvalue())
    return 0


def _cmd_corpus(args) -> int:
    from . import acceptance

    only = args.only.split(",") if args.only else None
    if only:
        for name in only:
            if name not in corpus.NAMES:
                raise MapFileError(f"unknown corpus map {name!r}")
    result = acceptance.run_corpus(seed=args.seed, threads=_threads(args), only=only)
    for crit in result["criteria"]:
        status = "PASS" if crit["passed"] else ("SKIP" if crit.get("skipped") else "FAIL")
        print(f"[criterion {crit['id']}] {status} {crit['name']}", file=sys.stderr)
    print(emit_report(result))
    return 0 if all(c["passed"] or c.get("skipped") for c in result["criteria"]) else 4


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="atypical", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kos", parents=[], help="scan for asymptotic critical values")
    p.add_argument("map_file")
    _add_scan_flags(p)
    p.set_defaults(func=_cmd_kos)

    p = sub.add_parser("milnor", help="scan for asymptotic rho-nonregular values")
    p.add_argument("map_file")
    p.add_argument("--rho", default="euclid", help="euclid or weighted:w1,...,wn")
    _add_scan_flags(p)
    p.set_defaults(func=_cmd_milnor)

    p = sub.add_parser("tcheck", help="probe t-regularity at a point at infinity")
    p.add_argument("map_file")
    p.add_argument("--direction", required=True, help="comma-separated direction")
    p.add_argument("--value", default="", help="comma-separated target value (default 0)")
    _add_scan_flags(p)
    p.set_defaults(func=_cmd_tcheck)

    p = sub.add_parser("fibers", help="fiber component census for n=2, p=1 maps")
    p.add_argument("map_file")
    p.add_argument("--t-grid", required=True, help="lo:hi:count or comma list")
    p.add_argument("--box", type=float, default=20.0)
    p.add_argument("--res", type=int, default=1000)
    p.set_defaults(func=_cmd_fibers)

    p = sub.add_parser("corpus", help="run the acceptance checks on the bundled corpus")
    p.add_argument("--only", default="", help="comma-separated corpus map names")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except MapFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, DegenerateMapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
