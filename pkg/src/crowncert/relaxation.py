"""Per-neuron linear and quadratic relaxations of the supported activations.

Every relaxation is a pair of bounding functions on a pre-activation interval
[l, u]:

    h_L(y) = eta_l * y^2 + alpha_l * y + delta_l  <=  sigma(y)  <=
    h_U(y) = eta_u * y^2 + alpha_u * y + delta_u

with eta == 0 for the purely linear variants.  Intercepts are stored directly
as deltas (the product form) so that zero or near-zero slopes never force a
division.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Activation, S_SHAPED, act_value


class Segment(enum.Enum):
    POS = "pos"
    NEG = "neg"
    MIXED = "mixed"


class ReluLowerStrategy(enum.Enum):
    FASTLIN = "fastlin"
    ADAPTIVE = "adaptive"


class TangentSide(enum.Enum):
    NONNEG = "nonneg"
    NONPOS = "nonpos"


@dataclass(frozen=True)
class NeuronRelaxation:
    alpha_u: float
    delta_u: float
    alpha_l: float
    delta_l: float
    eta_u: float = 0.0
    eta_l: float = 0.0

    def upper(self, y):
        return self.eta_u * y * y + self.alpha_u * y + self.delta_u

    def lower(self, y):
        return self.eta_l * y * y + self.alpha_l * y + self.delta_l


@dataclass(frozen=True)
class LayerRelaxation:
    """NeuronRelaxations for a whole layer, stacked into arrays."""

    alpha_u: np.ndarray
    delta_u: np.ndarray
    alpha_l: np.ndarray
    delta_l: np.ndarray
    eta_u: np.ndarray
    eta_l: np.ndarray

    @property
    def width(self) -> int:
        return self.alpha_u.shape[0]

    def neuron(self, i: int) -> NeuronRelaxation:
        return NeuronRelaxation(
            float(self.alpha_u[i]), float(self.delta_u[i]),
            float(self.alpha_l[i]), float(self.delta_l[i]),
            float(self.eta_u[i]), float(self.eta_l[i]))


def act_deriv(act: Activation, y):
    y = np.asarray(y, dtype=np.float64)
    if act is Activation.RELU:
        # subgradient choice at 0 is 0
        return (y > 0).astype(np.float64)
    if act is Activation.TANH:
        t = np.tanh(y)
        return 1.0 - t * t
    if act is Activation.SIGMOID:
        s = act_value(act, y)
        return s * (1.0 - s)
    if act is Activation.ARCTAN:
        return 1.0 / (1.0 + y * y)
    raise ValueError(f"unknown activation {act!r}")


def activation_eval(act: Activation, y: float) -> tuple[float, float]:
    """(sigma(y), sigma'(y)) at a scalar point."""
    return float(act_value(act, np.float64(y))), float(act_deriv(act, np.float64(y)))


def segment(l: float, u: float) -> Segment:
    """Classify a pre-activation interval; boundaries l == 0 or u == 0 are not Mixed."""
    if not (np.isfinite(l) and np.isfinite(u)):
        raise ValueError(f"interval [{l}, {u}] must be finite")
    if l > u:
        raise ValueError(f"empty interval: l={l} > u={u}")
    if l >= 0:
        return Segment.POS
    if u <= 0:
        return Segment.NEG
    return Segment.MIXED


def _check_interval_arrays(l: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    l = np.asarray(l, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if l.shape != u.shape or l.ndim != 1:
        raise ValueError("l and u must be 1-D arrays of equal length")
    if not (np.isfinite(l).all() and np.isfinite(u).all()):
        raise ValueError("interval bounds must be finite")
    if np.any(l > u):
        i = int(np.argmax(l > u))
        raise ValueError(f"empty interval at index {i}: l={l[i]} > u={u[i]}")
    return l, u


def _relu_arrays(l, u, strategy: ReluLowerStrategy, quad_lower: bool):
    n = l.shape[0]
    au = np.zeros(n)
    du = np.zeros(n)
    al = np.zeros(n)
    dl = np.zeros(n)
    eu = np.zeros(n)
    el = np.zeros(n)

    degen = l == u
    pos = (l >= 0) & ~degen
    neg = (u <= 0) & ~degen
    mix = ~(degen | pos | neg)

    if degen.any():
        c = np.maximum(l[degen], 0.0)
        du[degen] = c
        dl[degen] = c
    au[pos] = 1.0
    al[pos] = 1.0
    # neg rows stay all-zero

    if mix.any():
        lm, um = l[mix], u[mix]
        span = um - lm
        s = um / span
        au[mix] = s
        du[mix] = -lm * s  # = -l*u/(u-l) >= 0
        if quad_lower:
            # parabola y(y-l)/(u-l): touches relu at l, 0 and u
            el[mix] = 1.0 / span
            al[mix] = -lm / span
        elif strategy is ReluLowerStrategy.FASTLIN:
            al[mix] = s
        else:
            # smaller relaxation area: slope 1 iff u >= |l|
            al[mix] = (um >= -lm).astype(np.float64)
    return au, du, al, dl, eu, el


def _tangent_g(act, d, y0, sig0):
    """g(d) = slope of chord from (y0, sigma(y0)) to d, minus sigma'(d)."""
    num = act_value(act, d) - sig0
    den = d - y0
    with np.errstate(divide="ignore", invalid="ignore"):
        chord = np.where(den == 0.0, 0.0, num / np.where(den == 0.0, 1.0, den))
    return chord - act_deriv(act, d)


def _tangent_bisect(act, y0, sig0, lo, hi, sound_lo: bool, iters: int = 120):
    """Bisect g on [lo, hi] per lane; return the bracket end on the sound side.

    For the upper-bound search (sound_lo=True) the invariant is
    g(lo) <= 0 <= g(hi) and the returned lo end has a slope at or above the
    exact tangent slope, so the resulting line stays an upper bound for any
    finite iteration count.  The lower-bound search mirrors this.
    """
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        gm = _tangent_g(act, mid, y0, sig0)
        take_lo = (gm <= 0.0) if sound_lo else (gm >= 0.0)
        lo = np.where(take_lo, mid, lo)
        hi = np.where(take_lo, hi, mid)
    return lo if sound_lo else hi


def _mixed_upper_search(act, l, u):
    """Tangent point d in [0, u] for the line anchored at (l, sigma(l)).

    Returns (d, escaped); escaped lanes have their tangent point beyond u and
    must fall back to the full chord.
    """
    sigl = act_value(act, l)
    zero = np.zeros_like(l)
    g_hi = _tangent_g(act, u, l, sigl)
    g_lo = _tangent_g(act, zero, l, sigl)
    escaped = g_hi < 0.0
    d = _tangent_bisect(act, l, sigl, zero, u, sound_lo=True)
    # rounding near l ~ 0 can make g(0) positive; d = 0 keeps the bound sound
    d = np.where(g_lo >= 0.0, 0.0, d)
    return d, escaped


def _mixed_lower_search(act, l, u):
    """Tangent point d in [l, 0] for the line anchored at (u, sigma(u))."""
    sigu = act_value(act, u)
    zero = np.zeros_like(l)
    g_lo = _tangent_g(act, l, u, sigu)
    g_hi = _tangent_g(act, zero, u, sigu)
    escaped = g_lo < 0.0
    d = _tangent_bisect(act, u, sigu, l, zero, sound_lo=False)
    d = np.where(g_hi >= 0.0, 0.0, d)
    return d, escaped


def _sshaped_arrays(act, l, u):
    n = l.shape[0]
    au = np.zeros(n)
    du = np.zeros(n)
    al = np.zeros(n)
    dl = np.zeros(n)
    zeros = np.zeros(n)

    sigl = act_value(act, l)
    sigu = act_value(act, u)
    degen = l == u
    pos = (l >= 0) & ~degen
    neg = (u <= 0) & ~degen
    mix = ~(degen | pos | neg)

    if degen.any():
        du[degen] = sigl[degen]
        dl[degen] = sigl[degen]

    span = np.where(degen, 1.0, u - l)
    chord = (sigu - sigl) / span

    if pos.any() or neg.any():
        d = 0.5 * (l + u)
        sd = act_value(act, d)
        td = act_deriv(act, d)
        # concave side: tangent above, chord below; convex side mirrored
        au[pos] = td[pos]
        du[pos] = sd[pos] - td[pos] * d[pos]
        al[pos] = chord[pos]
        dl[pos] = sigl[pos] - chord[pos] * l[pos]
        al[neg] = td[neg]
        dl[neg] = sd[neg] - td[neg] * d[neg]
        au[neg] = chord[neg]
        du[neg] = sigl[neg] - chord[neg] * l[neg]

    if mix.any():
        lm, um = l[mix], u[mix]
        d_up, esc_up = _mixed_upper_search(act, lm, um)
        slope_up = np.where(esc_up, chord[mix], act_deriv(act, d_up))
        au[mix] = slope_up
        du[mix] = sigl[mix] - slope_up * lm  # line through the left endpoint
        d_lo, esc_lo = _mixed_lower_search(act, lm, um)
        slope_lo = np.where(esc_lo, chord[mix], act_deriv(act, d_lo))
        al[mix] = slope_lo
        dl[mix] = sigu[mix] - slope_lo * um  # line through the right endpoint

    return au, du, al, dl, zeros, zeros.copy()


def build_layer_relaxation(act: Activation, l: np.ndarray, u: np.ndarray,
                           strategy: ReluLowerStrategy = ReluLowerStrategy.ADAPTIVE,
                           quad_lower: bool = False) -> LayerRelaxation:
    """Relax every neuron of a layer given its pre-activation interval."""
    l, u = _check_interval_arrays(l, u)
    if act is Activation.RELU:
        arrays = _relu_arrays(l, u, strategy, quad_lower)
    else:
        if quad_lower:
            raise ValueError("quadratic lower bound is defined for relu only")
        arrays = _sshaped_arrays(act, l, u)
    return LayerRelaxation(*arrays)


def relu_relaxation(l: float, u: float,
                    strategy: ReluLowerStrategy = ReluLowerStrategy.ADAPTIVE) -> NeuronRelaxation:
    """Linear relu relaxation on [l, u]; Mixed lower slope picked by strategy."""
    lr = build_layer_relaxation(Activation.RELU, np.array([l]), np.array([u]), strategy)
    return lr.neuron(0)


def relu_quadratic_lower(l: float, u: float) -> NeuronRelaxation:
    """Quadratic lower / linear upper relu relaxation for a Mixed interval.

    The lower parabola y(y - l)/(u - l) touches relu at l, 0 and u.  Pos and
    Neg intervals are rejected: the linear bound is already exact there.
    """
    if segment(l, u) is not Segment.MIXED:
        raise ValueError(f"[{l}, {u}] is not Mixed; the linear relaxation is exact")
    lr = build_layer_relaxation(Activation.RELU, np.array([l]), np.array([u]),
                                quad_lower=True)
    return lr.neuron(0)


def sshaped_relaxation(act: Activation, l: float, u: float) -> NeuronRelaxation:
    """Tangent/chord relaxation of tanh, sigmoid or arctan on [l, u]."""
    if act not in S_SHAPED:
        raise ValueError(f"{act} is not an s-shaped activation")
    lr = build_layer_relaxation(act, np.array([l]), np.array([u]))
    return lr.neuron(0)


def tangent_point_search(act: Activation, y0: float, side: TangentSide, far: float,
                         tol: float = 1e-9) -> float | None:
    """Find d with chord-slope((y0, sigma(y0)) -> d) == sigma'(d) on one side of 0.

    side NONNEG searches [0, far], side NONPOS searches [far, 0].  Returns None
    when the bracket is empty or the tangent point escapes it (callers then fall
    back to the chord).  The returned point errs toward the steeper-slope side
    so the induced bound stays sound.
    """
    if act not in S_SHAPED:
        raise ValueError(f"{act} is not an s-shaped activation")
    if not (np.isfinite(y0) and np.isfinite(far)):
        raise ValueError("anchor and bracket end must be finite")
    y0a = np.array([float(y0)])
    fara = np.array([float(far)])
    if side is TangentSide.NONNEG:
        if far <= 0:
            return None
        d, esc = _mixed_upper_search(act, y0a, fara)
    elif side is TangentSide.NONPOS:
        if far >= 0:
            return None
        d, esc = _mixed_lower_search(act, fara, y0a)
    else:
        raise ValueError(f"unknown side {side!r}")
    if bool(esc[0]):
        return None
    return float(d[0])
