"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line on the real stdout so the result
survives pytest's capture.  Oracles live in reference.py and were written
against the math alone, before the library code.
"""

import time

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from crowncert import (Activation, BallSpec, Layer, Method, Network,
                       ReluLowerStrategy, SearchConfig, Sense, TangentSide,
                       backward_plane, build_layer_relaxation, forward,
                       global_bounds, layer_sweep, margin_network,
                       output_bounds, pgd_optimize, quad_output_bounds,
                       radius_targeted, radius_untargeted, row_dual_norms,
                       select_target, tangent_point_search, TargetMode,
                       QuadraticForm)
from crowncert.model import act_value
from crowncert.oracles import falsify, grid_exact_bounds, sample_ball
from crowncert.relaxation import LayerRelaxation, act_deriv
from netgen import make_net, force_mixed
from reference import fastlin_reference, scan_tangent_escape

ACTS = [Activation.RELU, Activation.TANH, Activation.SIGMOID, Activation.ARCTAN]
S_SHAPED = ACTS[1:]
P_VALUES = [1.0, 2.0, np.inf]


@pytest.fixture
def report(capfd):
    """PASS/FAIL line that escapes pytest's fd capture."""
    def _report(n: int, ok: bool, detail: str) -> None:
        line = f"[criterion {n:>2}] {'PASS' if ok else 'FAIL'}  {detail}"
        with capfd.disabled():
            print(line, flush=True)
        assert ok, line
    return _report


def runner_up(net, x):
    return int(np.argmax(forward(net, x))), select_target(net, x, TargetMode.RUNNER_UP)


def test_criterion_01_relaxation_soundness(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240901)
    n = 10_000
    a = rng.uniform(-8, 8, n)
    b = rng.uniform(-8, 8, n)
    l, u = np.minimum(a, b), np.maximum(a, b)
    which = rng.integers(0, 4, n)
    t = np.linspace(0.0, 1.0, 1000)
    worst = 0.0
    checked = 0
    for ai, act in enumerate(ACTS):
        mask = which == ai
        li, ui = l[mask], u[mask]
        variants: list = [build_layer_relaxation(act, li, ui, s)
                          for s in (ReluLowerStrategy.FASTLIN,
                                    ReluLowerStrategy.ADAPTIVE)] \
            if act is Activation.RELU else [build_layer_relaxation(act, li, ui)]
        if act is Activation.RELU:
            mixed = (li < 0) & (ui > 0)
            if mixed.any():
                variants.append(build_layer_relaxation(
                    act, li[mixed], ui[mixed], quad_lower=True))
        for r in variants:
            k = r.alpha_u.shape[0]
            lo_k, hi_k = (li[mixed], ui[mixed]) if k != li.shape[0] else (li, ui)
            ys = lo_k[:, None] + t[None, :] * (hi_k - lo_k)[:, None]
            sig = act_value(act, ys)
            hu = r.eta_u[:, None] * ys * ys + r.alpha_u[:, None] * ys + r.delta_u[:, None]
            hl = r.eta_l[:, None] * ys * ys + r.alpha_l[:, None] * ys + r.delta_l[:, None]
            worst = max(worst, float((hl - sig).max()), float((sig - hu).max()))
            checked += k
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 10.0
    report(1, ok, f"relaxation soundness: max violation {worst:.2e} over {n} "
                  f"intervals ({checked} relaxations checked) in {dt:.1f}s < 10s")


def test_criterion_02_end_to_end_soundness(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = -np.inf
    instances = 0
    for i in range(50):
        act = ACTS[i % 4]
        depth = 2 + (i // 4) % 4
        hidden = [int(rng.integers(4, 33)) for _ in range(depth - 1)]
        widths = [int(rng.integers(3, 9))] + hidden + [int(rng.integers(2, 6))]
        net = make_net(widths, act, seed=900 + i)
        strategy = (ReluLowerStrategy.ADAPTIVE if i % 2 else ReluLowerStrategy.FASTLIN)
        x0 = rng.normal(size=widths[0]) * 0.5
        for p in P_VALUES:
            for eps in (0.01, 0.1, 0.5):
                ball = BallSpec(x0, eps, p)
                gl, gu, _ = output_bounds(net, ball, strategy)
                X = sample_ball(rng, ball, 10_000)
                Y = forward(net, X)
                worst = max(worst, float((gl - Y.min(axis=0)).max()),
                            float((Y.max(axis=0) - gu).max()))
                instances += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 300.0
    report(2, ok, f"end-to-end soundness: worst bound violation {worst:.2e} "
                  f"across {instances} (net, p, eps) instances in {dt:.0f}s < 300s")


def _radius_instances():
    # every method gets exercised, every activation, every norm
    table = []
    deep = force_mixed(make_net([4, 12, 10, 3], Activation.RELU, seed=301),
                       np.zeros(4), fraction=0.5, seed=1)
    for p in P_VALUES:
        for m in (Method.FASTLIN, Method.CROWN_ADA, Method.CROWN_GENERAL,
                  Method.CROWN_QUAD):
            table.append((deep, m, p))
    shallow = make_net([4, 16, 3], Activation.RELU, seed=303)
    table.append((shallow, Method.CROWN_QUAD, 2.0))
    table.append((shallow, Method.CROWN_QUAD, np.inf))
    for j, act in enumerate(S_SHAPED):
        net = make_net([4, 10, 8, 3], act, seed=310 + j)
        for p in P_VALUES:
            table.append((net, Method.CROWN_GENERAL, p))
    return table


def test_criterion_03_falsifier_never_beats_certificates(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    tried = 0
    for net, method, p in _radius_instances():
        x0 = rng.normal(size=net.input_dim) * 0.3
        c, t = runner_up(net, x0)
        res = radius_targeted(net, x0, c, t, p, method)
        assert res.radius > 0, f"degenerate instance for {method.value} p={p}"
        ball = BallSpec(x0, 0.999 * res.radius, p)
        rep = falsify(net, x0, c, t, ball, seed=tried)
        assert not rep.found, (
            f"falsifier beat {method.value} at p={p}: margin {rep.margin:.3e} "
            f"inside 0.999 * {res.radius:.6g}")
        tried += 1
    dt = time.perf_counter() - t0
    ok = dt < 600.0
    report(3, ok, f"falsification: 0 label flips inside 0.999x radius over "
                  f"{tried} certified instances (all methods) in {dt:.0f}s < 600s")


def test_criterion_04_affine_exactness(report):
    rng = np.random.default_rng(13)
    worst = 0.0
    # single affine layer: bounds must equal the dual-norm closed form
    W = rng.normal(size=(3, 5))
    bvec = rng.normal(size=3)
    net1 = Network([Layer(W, bvec)], Activation.RELU)
    x0 = rng.normal(size=5)
    for p in P_VALUES:
        for strategy in (ReluLowerStrategy.FASTLIN, ReluLowerStrategy.ADAPTIVE):
            ball = BallSpec(x0, 0.37, p)
            gl, gu, _ = output_bounds(net1, ball, strategy)
            mid = W @ x0 + bvec
            rad = 0.37 * row_dual_norms(W, p)
            worst = max(worst, float(np.abs(gl - (mid - rad)).max()),
                        float(np.abs(gu - (mid + rad)).max()))
    # all-Pos relu: the network is affine on the ball
    W1 = rng.normal(size=(6, 4))
    b1 = np.full(6, 8.0)
    W2 = rng.normal(size=(3, 6))
    b2 = rng.normal(size=3)
    net2 = Network([Layer(W1, b1), Layer(W2, b2)], Activation.RELU)
    x2 = rng.normal(size=4) * 0.2
    A = W2 @ W1
    cvec = W2 @ b1 + b2
    for p in P_VALUES:
        ball = BallSpec(x2, 0.3, p)
        lb, _ = layer_sweep(net2, ball)
        assert (lb.lower[0] > 0).all()
        gl, gu, _ = output_bounds(net2, ball)
        mid = A @ x2 + cvec
        rad = 0.3 * row_dual_norms(A, p)
        worst = max(worst, float(np.abs(gl - (mid - rad)).max()),
                    float(np.abs(gu - (mid + rad)).max()))
        if p != 1.0:
            qgl, qgu = quad_output_bounds(net2, ball)
            worst = max(worst, float(np.abs(qgl - (mid - rad)).max()),
                        float(np.abs(qgu - (mid + rad)).max()))
    # closed-form certified radius of an affine margin
    worst_rel = 0.0
    for p, q in ((1.0, np.inf), (2.0, 2.0), (np.inf, 1.0)):
        y = forward(net1, x0)
        c = int(np.argmax(y))
        t = int(np.argmin(y))
        w = W[c] - W[t]
        eps_star = (y[c] - y[t]) / np.linalg.norm(w, ord=q)
        res = radius_targeted(net1, x0, c, t, p, Method.CROWN_ADA)
        assert res.radius <= eps_star * (1 + 1e-12)
        worst_rel = max(worst_rel, abs(res.radius - eps_star) / eps_star)
    ok = worst <= 1e-10 and worst_rel <= 1e-3
    report(4, ok, f"affine exactness: bound error {worst:.2e} <= 1e-10, "
                  f"radius error {worst_rel:.2e} <= 1e-3")


def test_criterion_05_fastlin_equivalence(report):
    worst = 0.0
    rng = np.random.default_rng(17)
    for i in range(20):
        depth = 2 + i % 3
        widths = [int(rng.integers(3, 7))] + \
            [int(rng.integers(4, 17)) for _ in range(depth - 1)] + \
            [int(rng.integers(2, 5))]
        net = make_net(widths, Activation.RELU, seed=500 + i)
        x0 = rng.normal(size=widths[0]) * 0.5
        if i % 2:
            net = force_mixed(net, x0, fraction=0.5, seed=i)
        p = P_VALUES[i % 3]
        eps = (0.05, 0.1, 0.2)[i % 3]
        gl, gu, _ = output_bounds(net, BallSpec(x0, eps, p), ReluLowerStrategy.FASTLIN)
        rl, ru = fastlin_reference(net, x0, eps, p)
        worst = max(worst, float(np.abs(gl - np.asarray(rl)).max()),
                    float(np.abs(gu - np.asarray(ru)).max()))
    ok = worst <= 1e-10
    report(5, ok, f"fast-lin equivalence: max deviation {worst:.2e} <= 1e-10 "
                  f"vs the independent recursion on 20 relu nets")


def test_criterion_06_tiny_net_grid_containment(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(19)
    worst_gap = 0.0
    min_grid_margin = np.inf
    combos = 0

    relu3 = force_mixed(make_net([2, 6, 5, 3], Activation.RELU, seed=601),
                        np.zeros(2), fraction=0.5, seed=2)
    relu2 = make_net([2, 8, 3], Activation.RELU, seed=603)
    tanh2 = make_net([2, 6, 3], Activation.TANH, seed=605)
    x0 = np.array([0.15, -0.2])

    def bounders(net):
        out = [("fastlin", lambda b: output_bounds(net, b, ReluLowerStrategy.FASTLIN)[:2]),
               ("crown-ada", lambda b: output_bounds(net, b, ReluLowerStrategy.ADAPTIVE)[:2])] \
            if net.activation is Activation.RELU else \
            [("crown-general", lambda b: output_bounds(net, b)[:2])]
        if net.activation is Activation.RELU:
            out.append(("crown-quad", lambda b: quad_output_bounds(net, b)))
        return out

    for net in (relu3, relu2, tanh2):
        for p in P_VALUES:
            glo, ghi = grid_exact_bounds(net, BallSpec(x0, 0.08, p), resolution=1e-3)
            for name, fn in bounders(net):
                if name == "crown-quad" and net.depth == 2 and p == 1.0:
                    continue
                gl, gu = fn(BallSpec(x0, 0.08, p))
                worst_gap = max(worst_gap, float((gl - glo).max()),
                                float((ghi - gu).max()))
                combos += 1

    methods = {Method.FASTLIN: [relu3, relu2], Method.CROWN_ADA: [relu3, relu2],
               Method.CROWN_QUAD: [relu3], Method.CROWN_GENERAL: [tanh2]}
    for method, nets in methods.items():
        for net in nets:
            for p in P_VALUES:
                c, t = runner_up(net, x0)
                res = radius_targeted(net, x0, c, t, p, method)
                assert 0 < res.radius < 0.45, f"radius {res.radius} out of grid range"
                gnet = margin_network(net, c, t)
                ball = BallSpec(x0, 0.999 * res.radius, p)
                glo, _ = grid_exact_bounds(gnet, ball, resolution=1e-3)
                min_grid_margin = min(min_grid_margin, float(glo[0]))
                combos += 1
    dt = time.perf_counter() - t0
    ok = worst_gap <= 1e-9 and min_grid_margin > 0.0
    report(6, ok, f"tiny-net grids: containment slack {worst_gap:.2e}, minimum "
                  f"margin on certified-ball lattices {min_grid_margin:.3e} > 0 "
                  f"({combos} combos, {dt:.0f}s)")


def test_criterion_07_adaptive_improves_on_fastlin(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(23)
    base = rng.normal(size=8) * 0.4
    net = force_mixed(make_net([8, 64, 64, 64, 4], Activation.RELU, seed=701),
                      base, fraction=0.5, seed=3)
    points = [base] + [base + rng.normal(size=8) * 0.05 for _ in range(19)]
    means = {}
    for p in P_VALUES:
        radii = {Method.FASTLIN: [], Method.CROWN_ADA: []}
        for x in points:
            for method in radii:
                radii[method].append(radius_untargeted(net, x, p, method).radius)
        means[p] = (float(np.mean(radii[Method.FASTLIN])),
                    float(np.mean(radii[Method.CROWN_ADA])))
    ok = all(ada >= fl for fl, ada in means.values())
    dt = time.perf_counter() - t0
    detail = ", ".join(
        f"p={'inf' if np.isinf(p) else int(p)}: ada {ada:.4g} vs fastlin {fl:.4g}"
        f" ({(ada - fl) / fl:+.1%})" for p, (fl, ada) in means.items())
    report(7, ok, f"adaptive trend over 20 points, 3x[64] relu: {detail} ({dt:.0f}s)")


def test_criterion_08_quad_soundness_and_degeneration(report):
    rng = np.random.default_rng(29)
    # soundness under falsification, both quad domains
    checked = 0
    for widths, ps in (([6, 20, 2], [2.0, np.inf]),
                       ([6, 20, 20, 2], P_VALUES)):
        net = make_net(widths, Activation.RELU, seed=801 + len(widths))
        x0 = rng.normal(size=6) * 0.3
        net = force_mixed(net, x0, fraction=0.5, seed=4)
        c, t = runner_up(net, x0)
        for p in ps:
            res = radius_targeted(net, x0, c, t, p, Method.CROWN_QUAD)
            assert res.radius > 0
            rep = falsify(net, x0, c, t, BallSpec(x0, 0.999 * res.radius, p),
                          seed=checked)
            assert not rep.found, f"flip inside quad radius at p={p}"
            checked += 1
    # zeroed curvature degenerates to the linear recursion
    net = make_net([6, 20, 2], Activation.RELU, seed=805)
    x0 = rng.normal(size=6) * 0.3
    net = force_mixed(net, x0, fraction=0.6, seed=5)
    worst = 0.0
    for p in (2.0, np.inf):
        ball = BallSpec(x0, 0.1, p)
        gnet = margin_network(net, 0, 1)
        bounds, _ = layer_sweep(gnet, ball)
        base = build_layer_relaxation(Activation.RELU, bounds.lower[0],
                                      bounds.upper[0], quad_lower=True)
        zeroed = LayerRelaxation(base.alpha_u, base.delta_u, base.alpha_l,
                                 base.delta_l, np.zeros_like(base.eta_u),
                                 np.zeros_like(base.eta_l))
        gl, _ = global_bounds(backward_plane(gnet, [zeroed]), ball)
        w = gnet.layers[-1].weight[0]
        sel_a = np.where(w >= 0, zeroed.alpha_l, zeroed.alpha_u)
        sel_d = np.where(w >= 0, zeroed.delta_l, zeroed.delta_u)
        lam = w * sel_a
        A, b_prev = gnet.layers[0].weight, gnet.layers[0].bias
        form = QuadraticForm(np.zeros((6, 6)), lam @ A,
                             float(lam @ b_prev + w @ sel_d + gnet.layers[-1].bias[0]),
                             Sense.MINIMIZE, ball)
        worst = max(worst, abs(pgd_optimize(form).value - float(gl[0])))
    ok = worst <= 1e-10
    report(8, ok, f"crown-quad: {checked} certified radii unfalsified, zeroed "
                  f"curvature matches linear recursion within {worst:.2e} <= 1e-10")


def test_criterion_09_desk_scale_timing(report):
    net = make_net([784, 1024, 1024, 1024, 10], Activation.RELU, seed=901)
    rng = np.random.default_rng(31)
    x0 = rng.normal(size=784) * 0.1
    with threadpool_limits(limits=1):
        t0 = time.perf_counter()
        c, t = runner_up(net, x0)
        res = radius_targeted(net, x0, c, t, np.inf, Method.CROWN_ADA)
        dt = time.perf_counter() - t0
    ok = dt <= 60.0 and res.radius > 0
    report(9, ok, f"3x[1024] single-point linf certification: radius "
                  f"{res.radius:.5g} in {dt:.1f}s <= 60s single-threaded "
                  f"({res.iterations} probes)")


def test_criterion_10_tangent_residuals_and_fallback(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(37)
    n = 10_000
    ls = -rng.uniform(1e-3, 8.0, n)
    us = rng.uniform(1e-3, 8.0, n)
    worst = 0.0
    found = 0
    escapes = 0
    for i in range(n):
        act = S_SHAPED[i % 3]
        l, u = float(ls[i]), float(us[i])
        f = lambda y: act_value(act, np.asarray(y, dtype=np.float64))
        df = lambda y: act_deriv(act, np.asarray(y, dtype=np.float64))
        for y0, far, lo, hi, side in ((l, u, 0.0, u, TangentSide.NONNEG),
                                      (u, l, l, 0.0, TangentSide.NONPOS)):
            d = tangent_point_search(act, y0, side, far)
            scan_escape = scan_tangent_escape(f, df, y0, lo, hi)
            assert (d is None) == scan_escape, (
                f"fallback disagreement: {act.value} anchor {y0:.6g} far {far:.6g}")
            if d is None:
                escapes += 1
                continue
            found += 1
            g = (float(f(d)) - float(f(y0))) / (d - y0) - float(df(d))
            worst = max(worst, abs(g))
    dt = time.perf_counter() - t0
    ok = worst < 1e-8
    report(10, ok, f"tangent search: max residual {worst:.2e} < 1e-8 over "
                   f"{found} tangencies, {escapes} chord fallbacks all agree "
                   f"with the grid scan ({n} intervals, {dt:.0f}s)")
