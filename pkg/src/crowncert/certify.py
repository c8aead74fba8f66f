"""Certified-radius search: margin bounds plus a bracketed binary search over eps."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import quad
from .model import Activation, Network, forward, margin_network
from .propagation import BallSpec, backward_plane, global_bounds, layer_sweep
from .relaxation import ReluLowerStrategy


class Method(enum.Enum):
    FASTLIN = "fastlin"
    CROWN_ADA = "crown-ada"
    CROWN_GENERAL = "crown-general"
    CROWN_QUAD = "crown-quad"


class TargetMode(enum.Enum):
    RUNNER_UP = "runner-up"
    RANDOM = "random"
    LEAST = "least"


class MethodCompatibilityError(ValueError):
    """The method cannot run on this network / norm combination."""


_LINEAR_STRATEGY = {
    Method.FASTLIN: ReluLowerStrategy.FASTLIN,
    Method.CROWN_ADA: ReluLowerStrategy.ADAPTIVE,
    Method.CROWN_GENERAL: ReluLowerStrategy.ADAPTIVE,
}


def check_method(net: Network, method: Method, p: float | None = None) -> None:
    """Raise MethodCompatibilityError unless the method applies to this network."""
    if method in (Method.FASTLIN, Method.CROWN_ADA, Method.CROWN_QUAD):
        if net.activation is not Activation.RELU:
            raise MethodCompatibilityError(
                f"{method.value} requires a relu network, got {net.activation.value}")
    if method is Method.CROWN_QUAD:
        if net.depth < 2:
            raise MethodCompatibilityError("crown-quad needs at least two layers")
        if net.depth == 2 and p == 1.0:
            raise MethodCompatibilityError(
                "crown-quad on a two-layer network optimizes over the input ball "
                "and does not support the l1 norm")


@dataclass(frozen=True)
class SearchConfig:
    eps_init: float = 0.05
    rel_tol: float = 1e-3
    max_doublings: int = 20
    max_bisections: int = 40

    def __post_init__(self):
        if not (self.eps_init > 0 and np.isfinite(self.eps_init)):
            raise ValueError("eps_init must be positive and finite")
        if not (0 < self.rel_tol < 1):
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_doublings < 1 or self.max_bisections < 0:
            raise ValueError("search budgets must be positive")


@dataclass
class CertificationResult:
    radius: float
    capped: bool
    iterations: int
    trace: list[tuple[float, float]] = field(repr=False)  # (eps, margin) probes in order


@dataclass
class UntargetedResult:
    radius: float
    per_target: list[tuple[int, CertificationResult]]

    @property
    def worst_target(self) -> int:
        t, _ = min(self.per_target, key=lambda item: item[1].radius)
        return t


def certify_margin(net: Network, c: int, t: int, ball: BallSpec, method: Method,
                   pgd_cfg: quad.PgdConfig | None = None) -> float:
    """Certified lower bound on f_c(x) - f_t(x) over the ball."""
    check_method(net, method, ball.p)
    if method is Method.CROWN_QUAD:
        return quad.crown_quad_margin(net, c, t, ball, pgd_cfg)
    gnet = margin_network(net, c, t)
    _, relaxations = layer_sweep(gnet, ball, _LINEAR_STRATEGY[method])
    planes = backward_plane(gnet, relaxations)
    gl, _ = global_bounds(planes, ball)
    return float(gl[0])


def _check_trace(trace: list[tuple[float, float]]) -> None:
    # the bracket search assumes the certified margin decreases with eps;
    # a crossing in the probe record means that assumption broke
    certified = [e for e, m in trace if m > 0]
    failed = [e for e, m in trace if m <= 0]
    if certified and failed and max(certified) >= min(failed):
        raise RuntimeError(
            "margin is not monotone in eps: certified at "
            f"{max(certified):.6g} but failed at {min(failed):.6g}; trace={trace}")


def radius_targeted(net: Network, x0: np.ndarray, c: int, t: int, p: float,
                    method: Method, cfg: SearchConfig | None = None,
                    pgd_cfg: quad.PgdConfig | None = None) -> CertificationResult:
    """Largest certified eps for the margin c-vs-t, by doubling/halving then bisection."""
    cfg = cfg or SearchConfig()
    check_method(net, method, p)
    trace: list[tuple[float, float]] = []

    def probe(eps: float) -> float:
        m = certify_margin(net, c, t, BallSpec(x0, eps, p), method, pgd_cfg)
        trace.append((eps, m))
        return m

    capped = False
    eps = cfg.eps_init
    lo: float | None
    hi: float | None
    if probe(eps) > 0:
        lo, hi = eps, None
        for _ in range(cfg.max_doublings):
            eps *= 2.0
            if probe(eps) > 0:
                lo = eps
            else:
                hi = eps
                break
        if hi is None:
            capped = True  # still certified at the doubling cap
    else:
        lo, hi = None, eps
        for _ in range(cfg.max_doublings):
            eps *= 0.5
            if probe(eps) > 0:
                lo = eps
                break
            hi = eps
    if lo is not None and hi is not None:
        for _ in range(cfg.max_bisections):
            if (hi - lo) / hi <= cfg.rel_tol:
                break
            mid = 0.5 * (lo + hi)
            if probe(mid) > 0:
                lo = mid
            else:
                hi = mid
    _check_trace(trace)
    return CertificationResult(radius=lo if lo is not None else 0.0, capped=capped,
                               iterations=len(trace), trace=trace)


def select_target(net: Network, x0: np.ndarray, mode: TargetMode, seed=None) -> int:
    """Pick the attack target class relative to the predicted class."""
    logits = forward(net, x0)
    n = logits.shape[0]
    if n < 2:
        raise ValueError("target selection needs at least two classes")
    c = int(np.argmax(logits))
    if mode is TargetMode.RUNNER_UP:
        z = logits.copy()
        z[c] = -np.inf
        return int(np.argmax(z))
    if mode is TargetMode.LEAST:
        z = logits.copy()
        z[c] = np.inf
        return int(np.argmin(z))
    if mode is TargetMode.RANDOM:
        rng = np.random.default_rng(seed)
        others = np.array([t for t in range(n) if t != c])
        return int(rng.choice(others))
    raise ValueError(f"unknown target mode {mode!r}")


def radius_untargeted(net: Network, x0: np.ndarray, p: float, method: Method,
                      cfg: SearchConfig | None = None,
                      pgd_cfg: quad.PgdConfig | None = None) -> UntargetedResult:
    """Minimum targeted radius over every class other than the predicted one."""
    logits = forward(net, x0)
    if logits.shape[0] < 2:
        raise ValueError("untargeted certification needs at least two classes")
    c = int(np.argmax(logits))
    per_target = []
    for t in range(logits.shape[0]):
        if t == c:
            continue
        per_target.append((t, radius_targeted(net, x0, c, t, p, method, cfg, pgd_cfg)))
    radius = min(res.radius for _, res in per_target)
    return UntargetedResult(radius=radius, per_target=per_target)
