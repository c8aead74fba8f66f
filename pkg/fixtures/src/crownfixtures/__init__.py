"""Trained MLP fixtures for the certifier.

Trains small dense classifiers (relu/tanh/sigmoid/arctan) on the 8x8 digit
set, exports them as crown-net-v1 weight files plus labeled points files, and
pins golden certification reports produced by the `crowncert` CLI.  The
certifier is only ever touched through its file formats and command line, so
this package stays honest about the serialization boundary.
"""

from .specs import ACTIVATIONS, DEFAULT_SPECS, FixtureSpec
from .data import load_split
from .train import accuracy, build_model, train_model, torch_logits
from .export import (build_fixtures, export_fixture, golden_report,
                     run_primary, strip_timing, train_and_export)

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "DEFAULT_SPECS",
    "FixtureSpec",
    "load_split",
    "accuracy",
    "build_model",
    "train_model",
    "torch_logits",
    "build_fixtures",
    "export_fixture",
    "golden_report",
    "run_primary",
    "strip_timing",
    "train_and_export",
]
