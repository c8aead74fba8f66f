"""Dense feed-forward networks and the crown-net-v1 serialization format."""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass

import numpy as np


class NetworkFormatError(ValueError):
    """A weight or points file violates the documented schema."""


class Activation(enum.Enum):
    RELU = "relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    ARCTAN = "arctan"


S_SHAPED = (Activation.TANH, Activation.SIGMOID, Activation.ARCTAN)


def act_value(act: Activation, y):
    """Elementwise activation value."""
    if act is Activation.RELU:
        return np.maximum(y, 0.0)
    if act is Activation.TANH:
        return np.tanh(y)
    if act is Activation.SIGMOID:
        y = np.asarray(y, dtype=np.float64)
        # stable in both tails
        pos = 1.0 / (1.0 + np.exp(-np.clip(y, 0.0, None)))
        ey = np.exp(np.clip(y, None, 0.0))
        neg = ey / (1.0 + ey)
        return np.where(y >= 0, pos, neg)
    if act is Activation.ARCTAN:
        return np.arctan(y)
    raise ValueError(f"unknown activation {act!r}")


@dataclass(frozen=True)
class Layer:
    """One affine layer: y = weight @ x + bias, weight is (n_out, n_in)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise NetworkFormatError(f"weight must be 2-D, got shape {w.shape}")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise NetworkFormatError(
                f"bias shape {b.shape} does not match weight rows {w.shape[0]}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise NetworkFormatError("non-finite entries in layer")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class Network:
    """m affine layers with the same activation between them (none after the last).

    Immutable after construction; weight arrays are marked read-only so the
    network can be shared across threads.
    """

    layers: tuple[Layer, ...]
    activation: Activation

    def __post_init__(self):
        layers = tuple(self.layers)
        if len(layers) < 1:
            raise NetworkFormatError("network needs at least one layer")
        if not isinstance(self.activation, Activation):
            raise NetworkFormatError(f"unknown activation {self.activation!r}")
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.n_in != prev.n_out:
                raise NetworkFormatError(
                    f"layer width mismatch: {prev.n_out} outputs feed {nxt.n_in} inputs")
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def widths(self) -> list[int]:
        """[n_0, n_1, ..., n_m]"""
        return [self.input_dim] + [lay.n_out for lay in self.layers]


@dataclass(frozen=True)
class LabeledPoint:
    id: str
    x: np.ndarray
    label: int | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 1 or not np.isfinite(x).all():
            raise NetworkFormatError(f"point {self.id!r} must be a finite 1-D vector")
        x.flags.writeable = False
        object.__setattr__(self, "x", x)


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Evaluate the network at x; accepts a single vector or a (batch, n_0) array."""
    z = np.asarray(x, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None, :]
    if z.shape[1] != net.input_dim:
        raise ValueError(f"input dim {z.shape[1]} != network input dim {net.input_dim}")
    for i, lay in enumerate(net.layers):
        z = z @ lay.weight.T + lay.bias
        if i < net.depth - 1:
            z = act_value(net.activation, z)
    return z[0] if single else z


def margin_network(net: Network, c: int, t: int) -> Network:
    """Network computing f_c - f_t: same hidden layers, last layer collapsed to one row."""
    n_out = net.output_dim
    if not (0 <= c < n_out and 0 <= t < n_out):
        raise ValueError(f"class indices ({c}, {t}) out of range for {n_out} outputs")
    if c == t:
        raise ValueError("margin requires two distinct classes")
    last = net.layers[-1]
    w = (last.weight[c] - last.weight[t])[None, :]
    b = np.array([last.bias[c] - last.bias[t]])
    return Network(net.layers[:-1] + (Layer(w, b),), net.activation)


_NET_KEYS = {"format", "activation", "layers"}
_LAYER_KEYS = {"weight", "bias"}
_POINT_KEYS = {"id", "x", "label"}

FORMAT_NAME = "crown-net-v1"


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise NetworkFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"{path} is not valid JSON: {exc}") from exc


def load_network(path: str) -> Network:
    """Parse a crown-net-v1 weight file; schema violations raise NetworkFormatError."""
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise NetworkFormatError(f"{path}: top level must be an object")
    extra = set(obj) - _NET_KEYS
    if extra:
        raise NetworkFormatError(f"{path}: unknown keys {sorted(extra)}")
    if obj.get("format") != FORMAT_NAME:
        raise NetworkFormatError(f"{path}: format must be {FORMAT_NAME!r}")
    try:
        act = Activation(obj.get("activation"))
    except ValueError:
        raise NetworkFormatError(
            f"{path}: unknown activation {obj.get('activation')!r}") from None
    raw_layers = obj.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise NetworkFormatError(f"{path}: layers must be a non-empty list")
    layers = []
    for i, entry in enumerate(raw_layers):
        if not isinstance(entry, dict):
            raise NetworkFormatError(f"{path}: layer {i} must be an object")
        extra = set(entry) - _LAYER_KEYS
        if extra:
            # catches e.g. a trailing per-layer activation entry
            raise NetworkFormatError(f"{path}: layer {i} has unknown keys {sorted(extra)}")
        if "weight" not in entry or "bias" not in entry:
            raise NetworkFormatError(f"{path}: layer {i} needs weight and bias")
        w, b = entry["weight"], entry["bias"]
        if not isinstance(w, list) or not w or not all(isinstance(r, list) for r in w):
            raise NetworkFormatError(f"{path}: layer {i} weight must be a list of rows")
        ncols = len(w[0])
        if any(len(r) != ncols for r in w) or ncols == 0:
            raise NetworkFormatError(f"{path}: layer {i} weight rows are ragged or empty")
        try:
            layers.append(Layer(np.array(w, dtype=np.float64), np.array(b, dtype=np.float64)))
        except (TypeError, ValueError) as exc:
            raise NetworkFormatError(f"{path}: layer {i}: {exc}") from exc
    return Network(tuple(layers), act)


def save_network(net: Network, path: str) -> None:
    """Write a crown-net-v1 file; round-trips bit-exactly through load_network."""
    obj = {
        "format": FORMAT_NAME,
        "activation": net.activation.value,
        "layers": [
            {"weight": lay.weight.tolist(), "bias": lay.bias.tolist()}
            for lay in net.layers
        ],
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
    os.replace(tmp, path)


def load_points(path: str) -> list[LabeledPoint]:
    """Parse a points file: {"points": [{"id", "x", "label"?}, ...]}."""
    obj = _load_json(path)
    if not isinstance(obj, dict) or set(obj) != {"points"}:
        raise NetworkFormatError(f"{path}: top level must be an object with a 'points' key")
    raw = obj["points"]
    if not isinstance(raw, list) or not raw:
        raise NetworkFormatError(f"{path}: points must be a non-empty list")
    out = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise NetworkFormatError(f"{path}: point {i} must be an object")
        extra = set(entry) - _POINT_KEYS
        if extra:
            raise NetworkFormatError(f"{path}: point {i} has unknown keys {sorted(extra)}")
        if "id" not in entry or "x" not in entry:
            raise NetworkFormatError(f"{path}: point {i} needs id and x")
        if not isinstance(entry["id"], str):
            raise NetworkFormatError(f"{path}: point {i} id must be a string")
        label = entry.get("label")
        if label is not None and not isinstance(label, int):
            raise NetworkFormatError(f"{path}: point {i} label must be an integer")
        try:
            out.append(LabeledPoint(entry["id"], np.array(entry["x"], dtype=np.float64), label))
        except (TypeError, ValueError) as exc:
            raise NetworkFormatError(f"{path}: point {i}: {exc}") from exc
    return out
