import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrebeca.frontend import parse_expression
from hrebeca.interval import Interval
from hrebeca.flowpipe import (
    FlowSystem, FlowpipeCache, compute_flowpipes, guard_windows, hull_over, intersect_invariant,
)

E = parse_expression


def system(**rhs):
    return FlowSystem(tuple((v, E(e)) for v, e in rhs.items()))


def segs_for(rhs, init, step, horizon):
    return compute_flowpipes(system(**rhs), {k: Interval(*v) for k, v in init.items()}, step, horizon)


def rk4(f, x, t_end, n):
    h = t_end / n
    for _ in range(n):
        k1 = f(x)
        k2 = f(x + h / 2 * k1)
        k3 = f(x + h / 2 * k2)
        k4 = f(x + h * k3)
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


# -- examples -----------------------------------------------------------------------------------

def test_constant_rate_example():
    segs = segs_for({"temp": "-1"}, {"temp": (20, 20)}, 0.5, 2)
    assert len(segs) == 4
    over = hull_over(segs, Interval(1, 2))
    assert over["temp"].contains(Interval(18, 19))


def test_segment_count_is_ceiling():
    assert len(segs_for({"x": "1"}, {"x": (0, 0)}, 0.5, 1.2)) == 3
    assert len(segs_for({"x": "1"}, {"x": (0, 0)}, 0.3, 1.8)) == 6
    assert segs_for({"x": "1"}, {"x": (0, 0)}, 0.5, 0) == []


def test_zero_flow_keeps_init():
    init = {"x": (1, 2), "y": (-3, 4)}
    for sg in compute_flowpipes(FlowSystem(()), {k: Interval(*v) for k, v in init.items()}, 0.25, 3):
        assert sg.box["x"] == Interval(1, 2) and sg.box["y"] == Interval(-3, 4)


def test_exponential_example():
    (sg,) = segs_for({"x": "x"}, {"x": (1, 1)}, 0.1, 0.1)
    assert sg.box["x"].contains(Interval(1, math.exp(0.1)))
    assert sg.box["x"].high - math.exp(0.1) < 1e-9


def test_intersect_invariant_examples():
    seg = segs_for({"temp": "0"}, {"temp": (17.5, 18.5)}, 1, 1)
    (t,) = intersect_invariant(seg, E("temp >= 18"))
    assert t.box["temp"] == Interval(18, 18.5)
    assert intersect_invariant(segs_for({"temp": "0"}, {"temp": (16, 17)}, 1, 1), E("temp >= 18")) == []
    assert intersect_invariant(seg, E("true")) == seg


def test_invariant_keeps_time_connected_prefix():
    segs = segs_for({"x": "-1"}, {"x": (3, 3)}, 0.5, 4)
    kept = intersect_invariant(segs, E("x >= 1"))
    # closure semantics: the segment touching x = 1 survives, trimmed to that point
    assert kept[-1].time.high == pytest.approx(2.5) and kept[-1].box["x"] == Interval(1, 1)
    assert len(kept) == 5


def test_guard_window_examples():
    segs = segs_for({"temp": "-1"}, {"temp": (20, 20)}, 0.5, 3)
    (w,) = guard_windows(segs, E("18 < temp && temp < 19"), Interval(0, 0))
    assert w.window.low == pytest.approx(1.0) and w.window.high == pytest.approx(2.0)
    assert guard_windows(segs, E("temp > 100"), Interval(0, 0)) == []
    (w,) = guard_windows(segs, E("temp <= 20"), Interval(1.5, 1.5))
    assert w.window.low == 1.5


def test_hull_over_spanning_segments():
    segs = segs_for({"temp": "-1"}, {"temp": (20, 20)}, 0.5, 2)
    over = hull_over(segs, Interval(0.6, 1.4))
    assert over["temp"].low <= 18.5 and over["temp"].high >= 19.5


def test_cache_memoises():
    cache = FlowpipeCache()
    calls = []
    for _ in range(3):
        cache.get(("k",), lambda: calls.append(1) or [1])
    assert len(calls) == 1 and cache.hits == 2 and cache.misses == 1


# -- oracles -------------------------------------------------------------------------------------

@pytest.mark.parametrize("rate, x0, step, horizon", [(-1, 20, 0.5, 3), (2.5, -1, 0.3, 2.1), (0.1, 0, 1, 5)])
def test_constant_rate_matches_affine_form(rate, x0, step, horizon):
    segs = segs_for({"x": repr(rate)}, {"x": (x0, x0)}, step, horizon)
    for sg in segs:
        ends = sorted((x0 + rate * sg.time.low, x0 + rate * sg.time.high))
        assert sg.box["x"].low == pytest.approx(ends[0], abs=1e-9)
        assert sg.box["x"].high == pytest.approx(ends[1], abs=1e-9)
        assert sg.box["x"].low <= ends[0] + 1e-12 and sg.box["x"].high >= ends[1] - 1e-12


@pytest.mark.parametrize("a, b, lo, hi", [(1, 0, 1, 1), (-2, 3, 0, 1), (-0.5, 0, 2, 4), (0.7, -1, -1, 1)])
def test_linear_rate_contains_closed_form(a, b, lo, hi):
    segs = segs_for({"x": f"{a} * x + {b}"}, {"x": (lo, hi)}, 0.25, 2)
    k = b / a
    for sg in segs:
        for x0 in (lo, hi, (lo + hi) / 2):
            for t in (sg.time.low, (sg.time.low + sg.time.high) / 2, sg.time.high):
                exact = (x0 + k) * math.exp(a * t) - k
                assert sg.box["x"].low - 1e-6 <= exact <= sg.box["x"].high + 1e-6


def _hausdorff(a: Interval, lo, hi):
    return max(abs(a.low - lo), abs(a.high - hi))


def test_exponential_tight_at_small_step():
    segs = segs_for({"x": "x"}, {"x": (1, 1)}, 0.01, 0.5)
    assert len(segs) == 50
    for sg in segs:
        lo, hi = math.exp(sg.time.low), math.exp(sg.time.high)
        assert sg.box["x"].low <= lo and sg.box["x"].high >= hi
        assert _hausdorff(sg.box["x"], lo, hi) < 1e-3


def test_nonlinear_monte_carlo_containment():
    segs = segs_for({"x": "-(x * x)"}, {"x": (0.5, 1.5)}, 0.1, 2)
    f = lambda x: -x * x
    rng = random.Random(1)
    escapes = 0
    for _ in range(1000):
        x0 = x = rng.uniform(0.5, 1.5)
        t = 0.0
        for sg in segs:
            for target in ((sg.time.low + sg.time.high) / 2, sg.time.high):
                x = rk4(f, x, target - t, 10)
                t = target
                assert abs(x - x0 / (1 + x0 * t)) < 1e-9
                escapes += not sg.box["x"].contains_point(x)
    assert escapes == 0


def test_nonlinear_two_dimensional_soundness():
    # van der Pol-like pair; reference by fine RK4
    segs = segs_for({"x": "y", "y": "-x + 0.5 * (1 - x * x) * y"}, {"x": (1, 1.1), "y": (0, 0.1)}, 0.1, 1)
    rng = random.Random(2)
    for _ in range(200):
        p = [rng.uniform(1, 1.1), rng.uniform(0, 0.1)]
        for sg in segs:
            t = sg.time.high
            x, y = p
            h = 0.001
            for _ in range(round(t / h)):
                def f(u):
                    return (u[1], -u[0] + 0.5 * (1 - u[0] ** 2) * u[1])
                k1 = f((x, y))
                k2 = f((x + h / 2 * k1[0], y + h / 2 * k1[1]))
                k3 = f((x + h / 2 * k2[0], y + h / 2 * k2[1]))
                k4 = f((x + h * k3[0], y + h * k3[1]))
                x += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
                y += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            assert sg.box["x"].contains_point(x) and sg.box["y"].contains_point(y)


# -- properties --------------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["-1", "2", "-0.5 * x", "x + 1", "-(x * x)"]),
       st.floats(-2, 2), st.floats(0, 1), st.sampled_from([0.5, 0.25]))
def test_halving_step_never_widens(rhs, lo, w, step):
    init = {"x": (lo, lo + w)} if rhs != "-(x * x)" else {"x": (abs(lo) + 0.1, abs(lo) + 0.1 + w)}
    coarse = segs_for({"x": rhs}, init, step, 1.0)
    fine = segs_for({"x": rhs}, init, step / 2, 1.0)
    for sg in coarse:
        h = hull_over([f for f in fine if f.time.low >= sg.time.low - 1e-12 and f.time.high <= sg.time.high + 1e-12],
                      sg.time)
        slack = 0 if rhs != "-(x * x)" else 1e-9
        assert h["x"].low >= sg.box["x"].low - slack and h["x"].high <= sg.box["x"].high + slack


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 3), st.sampled_from(["x >= 0", "x <= 1 && x >= -1", "x < 2 || x > 3"]))
def test_intersect_invariant_idempotent_and_contracting(lo, w, inv):
    segs = segs_for({"x": "1"}, {"x": (lo, lo + w)}, 0.5, 2)
    once = intersect_invariant(segs, E(inv))
    assert intersect_invariant(once, E(inv)) == once
    for a, b in zip(once, segs):
        assert b.box["x"].contains(a.box["x"])
