#!/usr/bin/env python3
"""Emit a random dense net in crown-net-v1 format plus a matching points file.

Weights are drawn at 1/sqrt(fan_in) scale so pre-activations stay O(1); points
are labeled with the network's own prediction, which makes every point
"correctly classified" for downstream certification runs.
"""

import argparse
import json
import os

import numpy as np

from crowncert import Activation, Layer, Network, forward, save_network


def build(widths, act: Activation, seed: int, w_scale: float, b_scale: float) -> Network:
    rng = np.random.default_rng(seed)
    layers = []
    for nin, nout in zip(widths, widths[1:]):
        W = rng.normal(size=(nout, nin)) * (w_scale / np.sqrt(nin))
        b = rng.normal(size=nout) * b_scale
        layers.append(Layer(W, b))
    return Network(layers, act)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--widths", default="8,32,32,4",
                    help="comma list, input through output (default 8,32,32,4)")
    ap.add_argument("--activation", default="relu",
                    choices=[a.value for a in Activation])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--points", type=int, default=20)
    ap.add_argument("--point-scale", type=float, default=0.5,
                    help="stddev of the sampled input points")
    ap.add_argument("--w-scale", type=float, default=1.0)
    ap.add_argument("--b-scale", type=float, default=0.1)
    ap.add_argument("--out-dir", default=".")
    args = ap.parse_args()

    widths = [int(w) for w in args.widths.split(",")]
    if len(widths) < 2:
        raise SystemExit("need at least input and output widths")
    net = build(widths, Activation(args.activation), args.seed,
                args.w_scale, args.b_scale)

    os.makedirs(args.out_dir, exist_ok=True)
    stem = f"{args.activation}_{'x'.join(map(str, widths))}_s{args.seed}"
    net_path = os.path.join(args.out_dir, f"{stem}.net.json")
    save_network(net, net_path)

    rng = np.random.default_rng(args.seed + 1)
    pts = []
    for i in range(args.points):
        x = rng.normal(size=widths[0]) * args.point_scale
        pts.append({"id": f"{stem}_p{i}",
                    "x": x.tolist(),
                    "label": int(np.argmax(forward(net, x)))})
    pts_path = os.path.join(args.out_dir, f"{stem}.points.json")
    with open(pts_path, "w") as fh:
        json.dump({"points": pts}, fh, indent=2)
        fh.write("\n")
    print(f"wrote {net_path}")
    print(f"wrote {pts_path} ({args.points} points)")


if __name__ == "__main__":
    main()
