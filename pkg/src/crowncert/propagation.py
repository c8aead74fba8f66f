"""Backward propagation of bounding planes and global bound closure over lp balls."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Network
from .relaxation import LayerRelaxation, ReluLowerStrategy, build_layer_relaxation

_ALLOWED_P = (1.0, 2.0, np.inf)


@dataclass(frozen=True)
class BallSpec:
    """lp ball of radius eps around x0, p in {1, 2, inf}."""

    x0: np.ndarray
    eps: float
    p: float

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=np.float64)
        if x0.ndim != 1 or not np.isfinite(x0).all():
            raise ValueError("x0 must be a finite 1-D vector")
        if not (np.isfinite(self.eps) and self.eps >= 0):
            raise ValueError(f"eps must be finite and non-negative, got {self.eps}")
        p = float(self.p)
        if p not in _ALLOWED_P:
            raise ValueError(f"p must be 1, 2 or inf, got {self.p}")
        x0.flags.writeable = False
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "p", p)

    @property
    def q(self) -> float:
        """Dual exponent, 1/p + 1/q = 1."""
        if self.p == 1.0:
            return np.inf
        if self.p == 2.0:
            return 2.0
        return 1.0


def row_dual_norms(A: np.ndarray, p: float) -> np.ndarray:
    """Per-row norm dual to lp: ||row||_q with 1/p + 1/q = 1."""
    if p == np.inf:
        return np.abs(A).sum(axis=1)
    if p == 1.0:
        return np.abs(A).max(axis=1)
    if p == 2.0:
        return np.sqrt((A * A).sum(axis=1))
    raise ValueError(f"p must be 1, 2 or inf, got {p}")


@dataclass
class BoundingPlanes:
    """Row-wise affine envelopes of the network outputs.

    For every selected output row j and x in the ball:
        omega0[j] @ x + lower_bias[j]  <=  f_j(x)  <=  lambda0[j] @ x + upper_bias[j]
    """

    lambda0: np.ndarray
    upper_bias: np.ndarray
    omega0: np.ndarray
    lower_bias: np.ndarray

    def upper_at(self, x: np.ndarray) -> np.ndarray:
        return self.lambda0 @ x + self.upper_bias

    def lower_at(self, x: np.ndarray) -> np.ndarray:
        return self.omega0 @ x + self.lower_bias


@dataclass
class LayerBounds:
    """Pre-activation interval per hidden layer (index k-1 holds layer k)."""

    lower: list[np.ndarray]
    upper: list[np.ndarray]


def backward_plane(net: Network, relaxations: list[LayerRelaxation],
                   out_rows: np.ndarray | None = None) -> BoundingPlanes:
    """Substitute relaxations backward from the output to the input.

    relaxations[i] bounds the activation after layer i+1; out_rows (default
    identity) selects linear combinations of the outputs.  Each backward step
    picks, per coefficient sign, the relaxation side that keeps the envelope
    valid, accumulating intercepts as coefficient * delta products.
    """
    m = net.depth
    if len(relaxations) != m - 1:
        raise ValueError(f"need {m - 1} hidden-layer relaxations, got {len(relaxations)}")
    last = net.layers[-1]
    if out_rows is None:
        out_rows = np.eye(last.n_out)
    out_rows = np.asarray(out_rows, dtype=np.float64)
    if out_rows.ndim != 2 or out_rows.shape[1] != last.n_out:
        raise ValueError(f"out_rows must be (rows, {last.n_out}), got {out_rows.shape}")

    ub = out_rows @ last.bias
    lb = ub.copy()
    Cu = out_rows @ last.weight
    Cl = Cu.copy()
    for i in range(m - 2, -1, -1):
        r = relaxations[i]
        if r.width != net.layers[i].n_out:
            raise ValueError(
                f"relaxation {i} has width {r.width}, layer has {net.layers[i].n_out}")
        W, b = net.layers[i].weight, net.layers[i].bias

        pos = Cu >= 0  # ties take the upper branch
        ub += np.sum(Cu * np.where(pos, r.delta_u, r.delta_l), axis=1)
        Cu = Cu * np.where(pos, r.alpha_u, r.alpha_l)
        ub += Cu @ b
        Cu = Cu @ W

        pos = Cl >= 0
        lb += np.sum(Cl * np.where(pos, r.delta_l, r.delta_u), axis=1)
        Cl = Cl * np.where(pos, r.alpha_l, r.alpha_u)
        lb += Cl @ b
        Cl = Cl @ W

        if not (Cu.any() or Cl.any()):
            # e.g. an all-Neg relu layer zeroes every coefficient; the rest of
            # the recursion would only multiply zeros through
            Cu = np.zeros((out_rows.shape[0], net.input_dim))
            Cl = np.zeros((out_rows.shape[0], net.input_dim))
            break
    return BoundingPlanes(lambda0=Cu, upper_bias=ub, omega0=Cl, lower_bias=lb)


def global_bounds(planes: BoundingPlanes, ball: BallSpec) -> tuple[np.ndarray, np.ndarray]:
    """Close the planes over the ball: exact affine optimization via the dual norm."""
    x0 = ball.x0
    if planes.lambda0.shape[1] != x0.shape[0]:
        raise ValueError(
            f"plane dim {planes.lambda0.shape[1]} != ball dim {x0.shape[0]}")
    gamma_u = planes.upper_at(x0) + ball.eps * row_dual_norms(planes.lambda0, ball.p)
    gamma_l = planes.lower_at(x0) - ball.eps * row_dual_norms(planes.omega0, ball.p)
    return gamma_l, gamma_u


def layer_sweep(net: Network, ball: BallSpec,
                strategy: ReluLowerStrategy = ReluLowerStrategy.ADAPTIVE,
                ) -> tuple[LayerBounds, list[LayerRelaxation]]:
    """Bound every hidden pre-activation, building relaxations front to back.

    Stage k runs the backward recursion on the truncated sub-network ending at
    layer k's affine output, using the relaxations from earlier stages; no
    partial backward products are reused across stages.
    """
    lows: list[np.ndarray] = []
    ups: list[np.ndarray] = []
    relaxations: list[LayerRelaxation] = []
    for k in range(net.depth - 1):
        sub = Network(net.layers[:k + 1], net.activation)
        planes = backward_plane(sub, relaxations)
        gl, gu = global_bounds(planes, ball)
        lows.append(gl)
        ups.append(gu)
        relaxations.append(build_layer_relaxation(net.activation, gl, gu, strategy))
    return LayerBounds(lows, ups), relaxations


def output_bounds(net: Network, ball: BallSpec,
                  strategy: ReluLowerStrategy = ReluLowerStrategy.ADAPTIVE,
                  out_rows: np.ndarray | None = None,
                  ) -> tuple[np.ndarray, np.ndarray, BoundingPlanes]:
    """Full pipeline: sweep the hidden layers, then bound the requested outputs."""
    _, relaxations = layer_sweep(net, ball, strategy)
    planes = backward_plane(net, relaxations, out_rows)
    gl, gu = global_bounds(planes, ball)
    return gl, gu, planes
