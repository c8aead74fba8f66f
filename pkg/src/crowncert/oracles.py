"""Independent checking tools: sampling falsifier, interval arithmetic, exhaustive grid.

None of these share code with the certification path; they exist to catch it
lying.  The falsifier searches for real adversarial points (margin flips), the
interval and grid oracles give cheap outer and exact inner references for the
output range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Network, act_value, forward, margin_network
from .propagation import BallSpec, row_dual_norms
from .relaxation import act_deriv


@dataclass
class FalsifierReport:
    found: bool
    margin: float  # lowest true margin seen
    witness: np.ndarray  # feasible point achieving it
    evaluations: int


def sample_ball(rng: np.random.Generator, ball: BallSpec, n: int) -> np.ndarray:
    """n points drawn uniformly from the ball (direction x radial rescale)."""
    d = ball.x0.shape[0]
    if ball.eps == 0.0 or n == 0:
        return np.tile(ball.x0, (max(n, 0), 1))
    if ball.p == np.inf:
        offs = rng.uniform(-1.0, 1.0, size=(n, d))
    else:
        dirs = rng.standard_normal((n, d)) if ball.p == 2.0 else rng.laplace(size=(n, d))
        norms = np.linalg.norm(dirs, ord=ball.p, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        offs = dirs / norms * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / d)
    return ball.x0 + ball.eps * offs


def _pull_into_ball(z: np.ndarray, ball: BallSpec) -> np.ndarray:
    if ball.p == np.inf:
        return np.clip(z, ball.x0 - ball.eps, ball.x0 + ball.eps)
    r = z - ball.x0
    n = float(np.linalg.norm(r, ord=ball.p))
    if n <= ball.eps or n == 0.0:
        return z
    # radial pullback: feasible, though not the metric projection for l1
    return ball.x0 + r * (ball.eps / n)


def _steepest(g: np.ndarray, p: float) -> np.ndarray:
    """Unit descent direction for the given ball geometry."""
    if p == np.inf:
        return np.sign(g)
    if p == 2.0:
        n = float(np.linalg.norm(g))
        return g / n if n > 0 else g
    e = np.zeros_like(g)
    i = int(np.argmax(np.abs(g)))
    e[i] = np.sign(g[i])
    return e


def _margin_and_grad(gnet: Network, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched margin values and input gradients via manual backprop."""
    pres = []
    z = Z
    for i, lay in enumerate(gnet.layers):
        y = z @ lay.weight.T + lay.bias
        if i < gnet.depth - 1:
            pres.append(y)
            z = act_value(gnet.activation, y)
        else:
            out = y
    margins = out[:, 0]
    v = np.broadcast_to(gnet.layers[-1].weight, (Z.shape[0], gnet.layers[-1].n_in)).copy()
    for i in range(gnet.depth - 2, -1, -1):
        v = v * act_deriv(gnet.activation, pres[i])
        v = v @ gnet.layers[i].weight
    return margins, v


def falsify(net: Network, x0: np.ndarray, c: int, t: int, ball: BallSpec,
            n_samples: int = 2000, attack_steps: int = 50, restarts: int = 5,
            seed: int = 0) -> FalsifierReport:
    """Look for a real margin flip (f_c <= f_t) inside the ball.

    Uniform sampling plus a projected gradient attack restarted from the most
    promising samples.  found=True is a genuine counterexample to any claimed
    certification at this radius; found=False proves nothing.
    """
    gnet = margin_network(net, c, t)
    rng = np.random.default_rng(seed)
    X = np.vstack([ball.x0[None, :], sample_ball(rng, ball, n_samples)])
    margins = forward(gnet, X)[:, 0]
    evals = X.shape[0]
    order = np.argsort(margins)
    best = float(margins[order[0]])
    witness = X[order[0]].copy()

    k = min(restarts, X.shape[0])
    Z = X[order[:k]].copy()
    step = ball.eps / 10.0
    if step > 0:
        for _ in range(attack_steps):
            m, g = _margin_and_grad(gnet, Z)
            evals += k
            Z = Z - step * np.stack([_steepest(gi, ball.p) for gi in g])
            Z = np.stack([_pull_into_ball(z, ball) for z in Z])
        m, _ = _margin_and_grad(gnet, Z)
        evals += k
        i = int(np.argmin(m))
        if float(m[i]) < best:
            best = float(m[i])
            witness = Z[i].copy()
    return FalsifierReport(found=best <= 0.0, margin=best, witness=witness,
                           evaluations=evals)


def interval_bounds(net: Network, ball: BallSpec) -> tuple[np.ndarray, np.ndarray]:
    """Interval (ibp) outer bounds on the outputs; layer 1 is closed exactly."""
    W0, b0 = net.layers[0].weight, net.layers[0].bias
    mid = W0 @ ball.x0 + b0
    rad = ball.eps * row_dual_norms(W0, ball.p)
    lo, hi = mid - rad, mid + rad
    for lay in net.layers[1:]:
        lo = act_value(net.activation, lo)  # monotone, endpoints suffice
        hi = act_value(net.activation, hi)
        c = 0.5 * (lo + hi)
        r = 0.5 * (hi - lo)
        yc = lay.weight @ c + lay.bias
        yr = np.abs(lay.weight) @ r
        lo, hi = yc - yr, yc + yr
    return lo, hi


def grid_exact_bounds(net: Network, ball: BallSpec, resolution: float,
                      max_points: int = 1_000_000) -> tuple[np.ndarray, np.ndarray]:
    """Near-exact output range by exhausting a lattice over the ball.

    Lattice points outside the lp ball are projected radially onto its
    boundary so the extremes of the ball surface are represented too.  Only
    sensible for tiny inputs; dimension above 3 is refused.
    """
    d = net.input_dim
    if ball.x0.shape[0] != d:
        raise ValueError("ball dimension does not match the network input")
    if d > 3:
        raise ValueError(f"grid oracle needs input dim <= 3, got {d}")
    if not (resolution > 0 and np.isfinite(resolution)):
        raise ValueError("resolution must be a positive step size")
    eps = ball.eps
    if eps == 0.0:
        offsets = np.array([0.0])
    else:
        count = int(np.floor(2.0 * eps / resolution + 1e-9)) + 1
        if count < 2:
            offsets = np.array([0.0])  # resolution coarser than the ball
        else:
            offsets = -eps + resolution * np.arange(count)
            if eps - offsets[-1] > 1e-12 * max(eps, 1.0):
                offsets = np.append(offsets, eps)
    if len(offsets) ** d > max_points:
        raise ValueError(
            f"grid of {len(offsets)}^{d} points exceeds the {max_points} cap")
    grids = np.meshgrid(*([offsets] * d), indexing="ij")
    P = np.stack([g.ravel() for g in grids], axis=1)
    if ball.p != np.inf and eps > 0.0:
        norms = np.linalg.norm(P, ord=ball.p, axis=1)
        outside = norms > eps
        if outside.any():
            P = np.vstack([P[~outside], P[outside] * (eps / norms[outside])[:, None]])
    Y = forward(net, ball.x0 + P)
    return Y.min(axis=0), Y.max(axis=0)
