"""Export trained models to crown-net-v1 plus points files and golden reports.

The certifier is a separate package; everything here talks to it through its
documented file formats and its CLI, never through imports.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys

import numpy as np
from torch import nn

from .data import load_split
from .specs import DEFAULT_SPECS, FixtureSpec
from .train import torch_logits, train_model

NET_FORMAT = "crown-net-v1"
MANIFEST_FORMAT = "crown-fixtures-v1"
N_EVAL = 100
N_CERTIFY = 20

# Mirrors the report writer's run-dependent keys; kept local on purpose so the
# package never imports the certifier.
_TIMING_KEYS = {"generated_at", "time_ms", "mean_time_ms"}


def strip_timing(obj):
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in _TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def run_primary(args: list[str], cwd=None) -> subprocess.CompletedProcess:
    """Invoke the certifier CLI in a subprocess."""
    cmd = [sys.executable, "-m", "crowncert", *args]
    return subprocess.run(cmd, capture_output=True, text=True, cwd=cwd)


def net_payload(model: nn.Sequential, activation: str) -> dict:
    layers = [
        {"weight": mod.weight.detach().numpy().astype(np.float64).tolist(),
         "bias": mod.bias.detach().numpy().astype(np.float64).tolist()}
        for mod in model if isinstance(mod, nn.Linear)
    ]
    return {"format": NET_FORMAT, "activation": activation, "layers": layers}


def points_payload(xs, labels, prefix: str) -> dict:
    pts = [
        {"id": f"{prefix}-{i:03d}",
         "x": np.asarray(x, dtype=np.float64).tolist(),
         "label": int(lab)}
        for i, (x, lab) in enumerate(zip(xs, labels))
    ]
    return {"points": pts}


def _write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def select_certify_points(model, x_test, y_test, n: int = N_CERTIFY):
    """First n test points the model classifies correctly."""
    pred = torch_logits(model, x_test).argmax(axis=1)
    idx = np.flatnonzero(pred == np.asarray(y_test))[:n]
    if idx.size < n:
        raise RuntimeError(
            f"only {idx.size} correctly classified test points available, need {n}")
    return x_test[idx], np.asarray(y_test)[idx]


def export_fixture(spec: FixtureSpec, model, data, out_dir: str) -> dict:
    """Write the weight file and both points files; returns a manifest entry."""
    _, _, x_test, y_test = data
    os.makedirs(out_dir, exist_ok=True)
    _write_json(net_payload(model, spec.activation),
                os.path.join(out_dir, spec.net_file))
    _write_json(points_payload(x_test[:N_EVAL], y_test[:N_EVAL], spec.name),
                os.path.join(out_dir, spec.eval_file))
    cert_x, cert_y = select_certify_points(model, x_test, y_test)
    _write_json(points_payload(cert_x, cert_y, spec.name),
                os.path.join(out_dir, spec.certify_file))
    return {
        "name": spec.name,
        "arch": spec.arch,
        "activation": spec.activation,
        "seed": spec.seed,
        "files": {"network": spec.net_file, "eval": spec.eval_file,
                  "certify": spec.certify_file},
    }


def golden_report(spec: FixtureSpec, out_dir: str) -> dict:
    """Certified l2 radii for the certify points, straight from the CLI.

    Runs with paths relative to out_dir so the pinned report is independent of
    where the directory lives; reruns over the same files reproduce it exactly
    up to timing fields.
    """
    os.makedirs(os.path.join(out_dir, "golden"), exist_ok=True)
    proc = run_primary(
        ["certify",
         "--network", spec.net_file,
         "--inputs", spec.certify_file,
         "--norm", "2",
         "--method", "crown-general",
         "--output", spec.golden_file],
        cwd=out_dir)
    if proc.returncode != 0:
        raise RuntimeError(
            f"golden certification failed for {spec.name} "
            f"(exit {proc.returncode}): {proc.stderr.strip()}")
    with open(os.path.join(out_dir, spec.golden_file), encoding="utf-8") as fh:
        return json.load(fh)


def train_and_export(spec: FixtureSpec, out_dir: str, data=None,
                     golden: bool = True):
    """Train one fixture and write all of its files; returns (entry, model).

    The manifest entry records the reached test accuracy; training below the
    spec's floor raises before anything is written.
    """
    if data is None:
        data = load_split()
    model, acc = train_model(spec, data)
    entry = export_fixture(spec, model, data, out_dir)
    entry["accuracy"] = acc
    if golden:
        golden_report(spec, out_dir)
        entry["files"]["golden"] = spec.golden_file
    return entry, model


def build_fixtures(out_dir: str, specs=DEFAULT_SPECS, data=None,
                   golden: bool = True, log=None):
    """Train and export every spec; writes manifest.json.

    Returns (manifest, models) with models keyed by fixture name.
    """
    if data is None:
        data = load_split()
    entries, models = [], {}
    for spec in specs:
        entry, model = train_and_export(spec, out_dir, data, golden=golden)
        entries.append(entry)
        models[spec.name] = model
        if log is not None:
            log(f"{spec.name}: {spec.arch} {spec.activation} "
                f"accuracy {entry['accuracy']:.4f}")
    manifest = {"format": MANIFEST_FORMAT, "fixtures": entries}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest, models
