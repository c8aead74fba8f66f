"""Command-line interface: certify, bounds and compare, with JSON reports."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from ._version import __version__
from . import quad
from .certify import (Method, MethodCompatibilityError, SearchConfig, TargetMode,
                      check_method, radius_targeted, select_target, _LINEAR_STRATEGY)
from .model import LabeledPoint, Network, NetworkFormatError, forward, load_network, load_points
from .propagation import BallSpec, output_bounds

REPORT_FORMAT = "crown-report-v1"
_NORMS = {"1": 1.0, "2": 2.0, "inf": np.inf}
_TIMING_KEYS = {"generated_at", "time_ms", "mean_time_ms"}
_NAMED_TARGETS = ("runner-up", "random", "least", "all")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); 2 is reserved for file errors
        raise UsageError(message)


def strip_timing(obj):
    """Report minus the run-dependent fields; equal across reruns with one seed."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in _TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def _target_flag(value: str) -> str:
    if value in _NAMED_TARGETS:
        return value
    try:
        int(value)
    except ValueError:
        raise UsageError(
            f"--target must be one of {', '.join(_NAMED_TARGETS)} or a class index; "
            f"got {value!r}") from None
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crowncert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--network", required=True, help="crown-net-v1 weight file")
    common.add_argument("--inputs", required=True, help="points file")
    common.add_argument("--norm", choices=sorted(_NORMS), default="inf")
    common.add_argument("--output", default=None, help="report path (default: stdout)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--jobs", type=int, default=1)

    cert = sub.add_parser("certify", parents=[common],
                          help="binary-search certified radii per point")
    cert.add_argument("--method", choices=[m.value for m in Method], default="crown-ada")
    cert.add_argument("--target", type=_target_flag, default="runner-up")
    cert.add_argument("--tol", type=float, default=1e-3, help="relative radius tolerance")
    cert.set_defaults(handler=cmd_certify)

    bnd = sub.add_parser("bounds", parents=[common],
                         help="output bounds at a fixed radius")
    bnd.add_argument("--method", choices=[m.value for m in Method], default="crown-ada")
    bnd.add_argument("--eps", type=float, required=True)
    bnd.set_defaults(handler=cmd_bounds)

    cmp_ = sub.add_parser("compare", parents=[common],
                          help="radii for several methods side by side")
    cmp_.add_argument("--methods", default="fastlin,crown-ada",
                      help="comma-separated method list")
    cmp_.add_argument("--target", type=_target_flag, default="runner-up")
    cmp_.add_argument("--tol", type=float, default=1e-3)
    cmp_.set_defaults(handler=cmd_compare)
    return parser


def _load(args) -> tuple[Network, list[LabeledPoint], dict]:
    net = load_network(args.network)
    points = load_points(args.inputs)
    for pt in points:
        if pt.x.shape[0] != net.input_dim:
            raise NetworkFormatError(
                f"point {pt.id!r} has dim {pt.x.shape[0]}, network expects {net.input_dim}")
    with open(args.network, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    info = {
        "path": args.network,
        "sha256": digest,
        "activation": net.activation.value,
        "depth": net.depth,
        "widths": net.widths,
    }
    return net, points, info


def _header(command: str, args, net_info: dict, settings: dict) -> dict:
    return {
        "format": REPORT_FORMAT,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "tool": {"name": "crowncert", "version": __version__},
        "command": command,
        "network": net_info,
        "settings": settings,
        "points": [],
        "aggregate": {},
    }


def _map_points(points, jobs: int, fn):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, range(len(points)), points))
    return [fn(i, pt) for i, pt in enumerate(points)]


def _targets_for(net: Network, x: np.ndarray, predicted: int, flag: str,
                 seed, idx: int) -> tuple[list[int], str | None]:
    """Resolve the --target flag for one point; second value is a skip reason."""
    if flag == "all":
        return [t for t in range(net.output_dim) if t != predicted], None
    if flag == "runner-up":
        return [select_target(net, x, TargetMode.RUNNER_UP)], None
    if flag == "least":
        return [select_target(net, x, TargetMode.LEAST)], None
    if flag == "random":
        return [select_target(net, x, TargetMode.RANDOM,
                              seed=[seed if seed is not None else 0, idx])], None
    t = int(flag)
    if not 0 <= t < net.output_dim:
        raise UsageError(f"--target {t} out of range for {net.output_dim} classes")
    if t == predicted:
        return [], "target equals predicted class"
    return [t], None


def _radius_records(net, x, predicted, targets, methods, p, norm_str, tol):
    records = []
    for t in targets:
        for method in methods:
            t0 = time.perf_counter()
            res = radius_targeted(net, x, predicted, t, p, method,
                                  SearchConfig(rel_tol=tol))
            ms = round(1e3 * (time.perf_counter() - t0), 3)
            records.append({
                "target": t,
                "method": method.value,
                "norm": norm_str,
                "radius": res.radius,
                "capped": res.capped,
                "iterations": res.iterations,
                "time_ms": ms,
            })
    return records


def _certify_like_point(net, pt, idx, methods, p, norm_str, flag, tol, seed) -> dict:
    logits = forward(net, pt.x)
    predicted = int(np.argmax(logits))
    entry = {"id": pt.id, "label": pt.label, "predicted": predicted,
             "skipped": False, "skip_reason": None, "records": []}
    if pt.label is not None and predicted != pt.label:
        entry["skipped"] = True
        entry["skip_reason"] = "misclassified"
        entry["radius"] = 0.0
        return entry
    targets, reason = _targets_for(net, pt.x, predicted, flag, seed, idx)
    if reason is not None:
        entry["skipped"] = True
        entry["skip_reason"] = reason
        entry["radius"] = 0.0
        return entry
    entry["records"] = _radius_records(net, pt.x, predicted, targets, methods,
                                       p, norm_str, tol)
    entry["radius"] = min(r["radius"] for r in entry["records"])
    return entry


def _mean(values) -> float | None:
    vals = list(values)
    return float(np.mean(vals)) if vals else None


def _aggregate_certify(points: list[dict], method: str) -> dict:
    live = [r for pt in points if not pt["skipped"] for r in pt["records"]]
    return {
        "points_total": len(points),
        "points_skipped": sum(1 for pt in points if pt["skipped"]),
        "records_total": len(live),
        "mean_radius": {method: _mean(r["radius"] for r in live)},
    }


def cmd_certify(args) -> dict:
    net, points, info = _load(args)
    p = _NORMS[args.norm]
    method = Method(args.method)
    check_method(net, method, p)
    if args.tol <= 0 or args.tol >= 1:
        raise UsageError("--tol must lie in (0, 1)")
    settings = {"norm": args.norm, "method": args.method, "target": args.target,
                "tol": args.tol, "seed": args.seed, "jobs": args.jobs}
    report = _header("certify", args, info, settings)
    report["points"] = _map_points(
        points, args.jobs,
        lambda i, pt: _certify_like_point(net, pt, i, [method], p, args.norm,
                                          args.target, args.tol, args.seed))
    report["aggregate"] = _aggregate_certify(report["points"], args.method)
    return report


def _aggregate_compare(points: list[dict], methods: list[str]) -> dict:
    live = [r for pt in points if not pt["skipped"] for r in pt["records"]]
    agg = {
        "points_total": len(points),
        "points_skipped": sum(1 for pt in points if pt["skipped"]),
        "records_total": len(live),
        "mean_radius": {m: _mean(r["radii"][m] for r in live) for m in methods},
    }
    if "fastlin" in methods:
        imp = {}
        for m in methods:
            if m == "fastlin":
                continue
            vals = [r["improvement_vs_fastlin"][m] for r in live
                    if r["improvement_vs_fastlin"][m] is not None]
            imp[m] = _mean(vals)
        agg["mean_improvement_vs_fastlin"] = imp
    return agg


def _compare_point(net, pt, idx, methods, p, norm_str, flag, tol, seed) -> dict:
    logits = forward(net, pt.x)
    predicted = int(np.argmax(logits))
    entry = {"id": pt.id, "label": pt.label, "predicted": predicted,
             "skipped": False, "skip_reason": None, "records": []}
    if pt.label is not None and predicted != pt.label:
        entry["skipped"] = True
        entry["skip_reason"] = "misclassified"
        return entry
    targets, reason = _targets_for(net, pt.x, predicted, flag, seed, idx)
    if reason is not None:
        entry["skipped"] = True
        entry["skip_reason"] = reason
        return entry
    for t in targets:
        rec = {"target": t, "norm": norm_str, "radii": {}, "capped": {},
               "iterations": {}, "time_ms": {}, "improvement_vs_fastlin": {}}
        for method in methods:
            t0 = time.perf_counter()
            res = radius_targeted(net, pt.x, predicted, t, p, method,
                                  SearchConfig(rel_tol=tol))
            rec["time_ms"][method.value] = round(1e3 * (time.perf_counter() - t0), 3)
            rec["radii"][method.value] = res.radius
            rec["capped"][method.value] = res.capped
            rec["iterations"][method.value] = res.iterations
        base = rec["radii"].get("fastlin")
        for method in methods:
            m = method.value
            if m == "fastlin" or base is None or base <= 0:
                rec["improvement_vs_fastlin"][m] = None
            else:
                rec["improvement_vs_fastlin"][m] = (rec["radii"][m] - base) / base
        entry["records"].append(rec)
    return entry


def cmd_compare(args) -> dict:
    net, points, info = _load(args)
    p = _NORMS[args.norm]
    slugs = [s.strip() for s in args.methods.split(",") if s.strip()]
    if not slugs:
        raise UsageError("--methods must name at least one method")
    known = {m.value for m in Method}
    for s in slugs:
        if s not in known:
            raise UsageError(f"unknown method {s!r}; choose from {sorted(known)}")
    if len(set(slugs)) != len(slugs):
        raise UsageError("--methods has duplicates")
    methods = [Method(s) for s in slugs]
    for method in methods:
        check_method(net, method, p)
    if args.tol <= 0 or args.tol >= 1:
        raise UsageError("--tol must lie in (0, 1)")
    settings = {"norm": args.norm, "methods": slugs, "target": args.target,
                "tol": args.tol, "seed": args.seed, "jobs": args.jobs}
    report = _header("compare", args, info, settings)
    report["points"] = _map_points(
        points, args.jobs,
        lambda i, pt: _compare_point(net, pt, i, methods, p, args.norm,
                                     args.target, args.tol, args.seed))
    report["aggregate"] = _aggregate_compare(report["points"], slugs)
    return report


def _aggregate_bounds(points: list[dict]) -> dict:
    widths = [w for pt in points
              for w in np.subtract(pt["gamma_upper"], pt["gamma_lower"]).tolist()]
    return {"points_total": len(points), "mean_width": _mean(widths)}


def cmd_bounds(args) -> dict:
    net, points, info = _load(args)
    p = _NORMS[args.norm]
    method = Method(args.method)
    check_method(net, method, p)
    if args.eps < 0 or not np.isfinite(args.eps):
        raise UsageError("--eps must be a finite non-negative radius")
    settings = {"norm": args.norm, "method": args.method, "eps": args.eps,
                "seed": args.seed, "jobs": args.jobs}
    report = _header("bounds", args, info, settings)

    def one(i: int, pt) -> dict:
        ball = BallSpec(pt.x, args.eps, p)
        t0 = time.perf_counter()
        if method is Method.CROWN_QUAD:
            gl, gu = quad.quad_output_bounds(net, ball)
        else:
            gl, gu, _ = output_bounds(net, ball, _LINEAR_STRATEGY[method])
        ms = round(1e3 * (time.perf_counter() - t0), 3)
        logits = forward(net, pt.x)
        return {"id": pt.id, "label": pt.label, "predicted": int(np.argmax(logits)),
                "gamma_lower": gl.tolist(), "gamma_upper": gu.tolist(),
                "time_ms": ms}

    report["points"] = _map_points(points, args.jobs, one)
    report["aggregate"] = _aggregate_bounds(report["points"])
    return report


def validate_report(report: dict) -> None:
    """Structural and consistency checks; raises ValueError on any mismatch."""
    top = {"format", "generated_at", "tool", "command", "network", "settings",
           "points", "aggregate"}
    if set(report) != top:
        raise ValueError(f"report keys {sorted(set(report) ^ top)} unexpected/missing")
    if report["format"] != REPORT_FORMAT:
        raise ValueError(f"report format must be {REPORT_FORMAT!r}")
    tool = report["tool"]
    if tool.get("name") != "crowncert" or not isinstance(tool.get("version"), str):
        raise ValueError("bad tool block")
    net = report["network"]
    if set(net) != {"path", "sha256", "activation", "depth", "widths"}:
        raise ValueError("bad network block")
    if len(net["sha256"]) != 64:
        raise ValueError("network sha256 must be a hex digest")
    command = report["command"]
    settings = report["settings"]
    points = report["points"]
    if not isinstance(points, list) or not points:
        raise ValueError("report needs a non-empty points list")

    if command == "certify":
        for pt in points:
            if pt["skipped"] != (pt["skip_reason"] is not None):
                raise ValueError(f"point {pt['id']}: skipped/skip_reason disagree")
            if pt["skipped"] and pt["records"]:
                raise ValueError(f"point {pt['id']}: skipped points carry no records")
            for rec in pt["records"]:
                if rec["method"] != settings["method"] or rec["norm"] != settings["norm"]:
                    raise ValueError(f"point {pt['id']}: record does not match settings")
                if rec["radius"] < 0:
                    raise ValueError("negative radius")
            if pt["records"] and pt["radius"] != min(r["radius"] for r in pt["records"]):
                raise ValueError(f"point {pt['id']}: summary radius mismatch")
        expect = _aggregate_certify(points, settings["method"])
    elif command == "compare":
        slugs = settings["methods"]
        for pt in points:
            for rec in pt["records"]:
                if rec["norm"] != settings["norm"]:
                    raise ValueError("record norm does not match settings")
                if set(rec["radii"]) != set(slugs):
                    raise ValueError("record methods do not match settings")
        expect = _aggregate_compare(points, slugs)
    elif command == "bounds":
        for pt in points:
            gl, gu = pt["gamma_lower"], pt["gamma_upper"]
            if len(gl) != len(gu):
                raise ValueError("gamma arrays disagree in length")
            if any(a > b for a, b in zip(gl, gu)):
                raise ValueError(f"point {pt['id']}: gamma_lower exceeds gamma_upper")
        expect = _aggregate_bounds(points)
    else:
        raise ValueError(f"unknown command {command!r}")
    if strip_timing(expect) != strip_timing(report["aggregate"]):
        raise ValueError("aggregate block does not match its records")


def _atomic_write(path: str, payload: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        report = args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NetworkFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MethodCompatibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    validate_report(report)
    payload = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.output:
        _atomic_write(args.output, payload)
    else:
        sys.stdout.write(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
