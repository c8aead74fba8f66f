"""Quadratic output bounds for relu networks: one curved layer, then exact optimization.

The last hidden layer keeps a quadratic lower relaxation per neuron; everything
deeper is handled by the linear sweep.  The resulting one-layer composition is
a convex (Minimize) or concave (Maximize) quadratic over either the input ball
(two-layer nets) or the box image of the previous layer, optimized by projected
gradient with an Armijo line search.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Activation, Network, margin_network
from .propagation import BallSpec, LayerBounds, layer_sweep, row_dual_norms
from .relaxation import ReluLowerStrategy, build_layer_relaxation


class Sense(enum.Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D arrays of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()) or np.any(lo > hi):
            raise ValueError("box bounds must be finite with lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


@dataclass
class QuadraticForm:
    """value(z) = z @ Q @ z + p_lin @ z + s over the stored domain."""

    Q: np.ndarray
    p_lin: np.ndarray
    s: float
    sense: Sense
    domain: BallSpec | Box

    def value(self, z: np.ndarray) -> float:
        return float(z @ self.Q @ z + self.p_lin @ z + self.s)

    def grad(self, z: np.ndarray) -> np.ndarray:
        return 2.0 * (self.Q @ z) + self.p_lin


@dataclass(frozen=True)
class PgdConfig:
    max_iters: int = 200
    init_step: float = 1.0
    shrink: float = 0.5
    grow: float = 2.0
    armijo_c: float = 1e-4
    stop_rel: float = 1e-9


@dataclass
class PgdResult:
    value: float  # gap-adjusted optimum estimate, always on the sound side
    point: np.ndarray
    gap: float
    iterations: int
    objective_trace: list[float]


def build_quadratic(net: Network, j_row: int, layer_bounds: LayerBounds,
                    sense: Sense, ball: BallSpec | None = None) -> QuadraticForm:
    """Compose output row j_row with the curved relaxation of the last hidden layer.

    Per neuron the sign of the output weight picks the relaxation side; the
    curvature of the picked side lands on the diagonal before the affine
    substitution y = W z + b of the previous layer.  Sense Minimize yields a
    convex form, Maximize a concave one.
    """
    if net.activation is not Activation.RELU:
        raise ValueError("quadratic bounds are defined for relu networks only")
    m = net.depth
    if m < 2:
        raise ValueError("quadratic bounds need at least two layers")
    l = layer_bounds.lower[m - 2]
    u = layer_bounds.upper[m - 2]
    relax = build_layer_relaxation(Activation.RELU, l, u, quad_lower=True)

    last = net.layers[-1]
    w = last.weight[j_row]
    bj = float(last.bias[j_row])
    wpos = w >= 0
    if sense is Sense.MAXIMIZE:
        tau = np.where(wpos, relax.eta_u, relax.eta_l)
        slope = np.where(wpos, relax.alpha_u, relax.alpha_l)
        dlt = np.where(wpos, relax.delta_u, relax.delta_l)
    else:
        tau = np.where(wpos, relax.eta_l, relax.eta_u)
        slope = np.where(wpos, relax.alpha_l, relax.alpha_u)
        dlt = np.where(wpos, relax.delta_l, relax.delta_u)

    q = w * tau
    lam = w * slope
    const = float(w @ dlt) + bj

    A = net.layers[m - 2].weight
    b_prev = net.layers[m - 2].bias
    Q = A.T @ (q[:, None] * A)
    Q = 0.5 * (Q + Q.T)  # exact symmetry despite rounding
    p_lin = (2.0 * q * b_prev + lam) @ A
    s = float(q @ (b_prev * b_prev) + lam @ b_prev + const)

    if m == 2:
        if ball is None:
            raise ValueError("two-layer quadratic domain is the input ball; pass ball")
        if ball.p == 1.0:
            raise ValueError("pgd does not support the l1 ball")
        domain: BallSpec | Box = ball
    else:
        lo_prev = layer_bounds.lower[m - 3]
        hi_prev = layer_bounds.upper[m - 3]
        # z ranges over the relu image of the previous pre-activation box
        domain = Box(np.maximum(lo_prev, 0.0), np.maximum(hi_prev, 0.0))
    return QuadraticForm(Q, p_lin, s, sense, domain)


def _project(z: np.ndarray, domain) -> np.ndarray:
    if isinstance(domain, Box):
        return np.clip(z, domain.lower, domain.upper)
    if domain.p == np.inf:
        return np.clip(z, domain.x0 - domain.eps, domain.x0 + domain.eps)
    if domain.p == 2.0:
        r = z - domain.x0
        n = float(np.linalg.norm(r))
        if n <= domain.eps or n == 0.0:
            return z
        return domain.x0 + r * (domain.eps / n)
    raise ValueError("pgd does not support the l1 ball")


def _linear_closure(g: np.ndarray, z: np.ndarray, domain, maximize: bool) -> float:
    """Exact extremum of g @ (x - z) over the domain (the first-order gap)."""
    if isinstance(domain, Box):
        a = g * (domain.lower - z)
        b = g * (domain.upper - z)
        return float(np.sum(np.maximum(a, b) if maximize else np.minimum(a, b)))
    base = float(g @ (domain.x0 - z))
    slack = domain.eps * float(row_dual_norms(g[None, :], domain.p)[0])
    return base + slack if maximize else base - slack


def _check_curvature(form: QuadraticForm) -> None:
    eigs = np.linalg.eigvalsh(form.Q)
    scale = max(1.0, float(np.abs(form.Q).max(initial=0.0)))
    if form.sense is Sense.MINIMIZE and eigs[0] < -1e-9 * scale:
        raise ValueError(f"Minimize needs Q >= 0; min eigenvalue {eigs[0]:.3e}")
    if form.sense is Sense.MAXIMIZE and eigs[-1] > 1e-9 * scale:
        raise ValueError(f"Maximize needs Q <= 0; max eigenvalue {eigs[-1]:.3e}")


def pgd_optimize(form: QuadraticForm, cfg: PgdConfig | None = None) -> PgdResult:
    """Projected gradient with Armijo backtracking and a growing trial step.

    Convexity makes the linear closure of the gradient a certificate: the
    returned value is f(z) plus that closure, which brackets the true optimum
    from the sound side and collapses onto it as the gap goes to zero.  The
    gap is also the stopping criterion, so stop_rel is a rigorous relative
    optimality guarantee, and a linear form (Q = 0) is closed exactly in one
    evaluation no matter where z sits.
    """
    cfg = cfg or PgdConfig()
    _check_curvature(form)
    maximize = form.sense is Sense.MAXIMIZE
    domain = form.domain
    if isinstance(domain, Box):
        z = 0.5 * (domain.lower + domain.upper)
    else:
        z = domain.x0.copy()
    z = _project(z, domain)
    val = form.value(z)
    trace = [val]
    g = form.grad(z)
    gap = _linear_closure(g, z, domain, maximize)
    step = cfg.init_step
    iters = 0
    for _ in range(cfg.max_iters):
        if abs(gap) <= cfg.stop_rel * (1.0 + abs(val)):
            break
        iters += 1
        s = step
        moved = False
        while s > 1e-18:
            z_try = _project(z + s * g if maximize else z - s * g, domain)
            dz = z_try - z
            gain = float(g @ dz)  # >= 0 for maximize, <= 0 for minimize
            v_try = form.value(z_try)
            improve = (v_try - val) if maximize else (val - v_try)
            need = cfg.armijo_c * abs(gain)
            if improve >= need and improve > 0.0:
                z, val = z_try, v_try
                trace.append(val)
                step = s * cfg.grow
                moved = True
                break
            s *= cfg.shrink
        if not moved:
            break  # no acceptable step: stationary up to line-search resolution
        g = form.grad(z)
        gap = _linear_closure(g, z, domain, maximize)
    return PgdResult(value=val + gap, point=z, gap=gap, iterations=iters,
                     objective_trace=trace)


def crown_quad_margin(net: Network, c: int, t: int, ball: BallSpec,
                      pgd_cfg: PgdConfig | None = None) -> float:
    """Certified lower bound on f_c - f_t over the ball via the quadratic form."""
    if net.activation is not Activation.RELU:
        raise ValueError("crown-quad requires a relu network")
    gnet = margin_network(net, c, t)
    if gnet.depth < 2:
        raise ValueError("crown-quad needs at least two layers")
    bounds, _ = layer_sweep(gnet, ball, ReluLowerStrategy.ADAPTIVE)
    form = build_quadratic(gnet, 0, bounds, Sense.MINIMIZE, ball=ball)
    return float(pgd_optimize(form, pgd_cfg).value)


def quad_output_bounds(net: Network, ball: BallSpec,
                       pgd_cfg: PgdConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-output (gamma_l, gamma_u) with the quadratic treatment of the last hidden layer."""
    bounds, _ = layer_sweep(net, ball, ReluLowerStrategy.ADAPTIVE)
    n = net.output_dim
    gl = np.empty(n)
    gu = np.empty(n)
    for j in range(n):
        lo_form = build_quadratic(net, j, bounds, Sense.MINIMIZE, ball=ball)
        hi_form = build_quadratic(net, j, bounds, Sense.MAXIMIZE, ball=ball)
        gl[j] = pgd_optimize(lo_form, pgd_cfg).value
        gu[j] = pgd_optimize(hi_form, pgd_cfg).value
    return gl, gu
