#!/usr/bin/env python3
"""Compare certified radii across methods on one network / points file.

Runs the same radius search per method and prints a per-point table plus the
mean improvement over fastlin.  Works on any crown-net-v1 net; methods that
do not apply to the network (activation / norm constraints) are dropped with
a note instead of failing the whole run.
"""

import argparse

import numpy as np

from crowncert import (Method, MethodCompatibilityError, check_method, forward,
                       load_network, load_points, radius_targeted,
                       select_target, SearchConfig, TargetMode)

NORMS = {"1": 1.0, "2": 2.0, "inf": np.inf}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--network", required=True)
    ap.add_argument("--inputs", required=True)
    ap.add_argument("--norm", choices=sorted(NORMS), default="inf")
    ap.add_argument("--methods", default="fastlin,crown-ada,crown-quad")
    ap.add_argument("--tol", type=float, default=1e-3)
    args = ap.parse_args()

    net = load_network(args.network)
    points = load_points(args.inputs)
    p = NORMS[args.norm]

    methods = []
    for slug in args.methods.split(","):
        m = Method(slug.strip())
        try:
            check_method(net, m, p)
            methods.append(m)
        except MethodCompatibilityError as exc:
            print(f"# skipping {m.value}: {exc}")
    if not methods:
        raise SystemExit("no applicable methods")

    cfg = SearchConfig(rel_tol=args.tol)
    header = ["point", "target"] + [m.value for m in methods]
    print("  ".join(f"{h:>12}" for h in header))
    radii: dict = {m: [] for m in methods}
    for pt in points:
        c = int(np.argmax(forward(net, pt.x)))
        if pt.label is not None and c != pt.label:
            print(f"{pt.id:>12}  (misclassified, skipped)")
            continue
        t = select_target(net, pt.x, TargetMode.RUNNER_UP)
        row = [f"{pt.id:>12}", f"{t:>6}"]
        for m in methods:
            r = radius_targeted(net, pt.x, c, t, p, m, cfg).radius
            radii[m].append(r)
            row.append(f"{r:>12.6f}")
        print("  ".join(row))

    if radii[methods[0]]:
        print()
        base = np.array(radii[methods[0]])
        for m in methods:
            vals = np.array(radii[m])
            line = f"mean {m.value:>14}: {vals.mean():.6f}"
            if m is not methods[0] and (base > 0).all():
                line += f"  ({np.mean((vals - base) / base):+.1%} vs {methods[0].value})"
            print(line)


if __name__ == "__main__":
    main()
