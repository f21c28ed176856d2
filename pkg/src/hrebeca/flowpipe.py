"""Validated flowpipe enclosures for mode dynamics.

Three tiers, chosen per system:

* constant right-hand sides: exact affine enclosure ``x0 + c*t``;
* scalar linear ``x' = a*x + b`` per variable: closed-form exponential,
  evaluated at the corners of (x0, t, b/a) where it is monotone;
* anything else: interval Euler steps with a Picard a-priori enclosure.

All endpoints are outward rounded, so every true trajectory value lies inside
the segment box covering its time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .frontend.ast import BinOp, Const, UnaryOp, Var
from .interval import (
    Interval, as_interval, contract, eval_expr, exp_down, exp_up, hull_all,
    mul_down, mul_up,
)
from .semantics import FrozenMap, SemanticsError


class EnclosureFailure(SemanticsError):
    pass


class CoverageGap(SemanticsError):
    pass


@dataclass(frozen=True)
class FlowSystem:
    """Right-hand sides ``var' = expr``; variables without an equation stay constant."""

    rhs: tuple  # ((var, Expr), ...)

    @property
    def variables(self) -> tuple:
        return tuple(v for v, _ in self.rhs)


@dataclass(frozen=True)
class Segment:
    time: Interval  # closed span of elapsed time
    box: FrozenMap  # var -> Interval

    def __repr__(self):
        return f"Segment({self.time}, {dict(self.box)})"


def _frac_interval(q: Fraction) -> Interval:
    f = float(q)
    if Fraction(f) == q:
        return Interval.point(f)
    if Fraction(f) < q:
        return Interval(f, math.nextafter(f, math.inf))
    return Interval(math.nextafter(f, -math.inf), f)


def linear_form(e) -> Optional[tuple[dict, Fraction]]:
    """``e`` as (coefficients, constant) with exact rational coefficients, or None."""
    if isinstance(e, Const):
        if isinstance(e.value, bool):
            return None
        return {}, Fraction(e.value)
    if isinstance(e, Var):
        return {e.name: Fraction(1)}, Fraction(0)
    if isinstance(e, UnaryOp) and e.op == "-":
        f = linear_form(e.operand)
        if f is None:
            return None
        return {k: -v for k, v in f[0].items()}, -f[1]
    if isinstance(e, BinOp) and e.op in ("+", "-", "*"):
        a, b = linear_form(e.left), linear_form(e.right)
        if a is None or b is None:
            return None
        if e.op == "*":
            if a[0] and b[0]:
                return None
            if a[0]:
                a, b = b, a
            k = a[1]
            return {v: k * c for v, c in b[0].items() if k * c}, k * b[1]
        sign = 1 if e.op == "+" else -1
        coeffs = dict(a[0])
        for v, c in b[0].items():
            coeffs[v] = coeffs.get(v, 0) + sign * c
        return {v: c for v, c in coeffs.items() if c}, a[1] + sign * b[1]
    return None


def _grid(step: float, horizon: float) -> list[Interval]:
    n = max(1, math.ceil(horizon / step - 1e-9))
    out = []
    for k in range(n):
        lo = round(k * step, 12)
        hi = horizon if k == n - 1 else min(horizon, round((k + 1) * step, 12))
        if hi > lo or (hi == lo and not out):
            out.append(Interval(lo, hi))
    return out


def _scalar_closed_form(x0: Interval, a: Fraction, b: Fraction, t: Interval) -> Interval:
    if a == 0:
        return x0 + _frac_interval(b) * t
    af = float(a)
    if Fraction(af) != a:
        raise ValueError("coefficient not representable")
    # x(t) = (x0 + k) e^{a t} - k with k = b/a; monotone in x0, t and k separately
    kq = b / a
    k = _frac_interval(kq)
    vals = []
    for xv in (x0.low, x0.high):
        for tv in (t.low, t.high):
            e = Interval(exp_down(mul_down(af, tv)), exp_up(mul_up(af, tv)))
            for kv in (k.low, k.high):
                vals.append((Interval.point(xv) + kv) * e - kv)
    return hull_all(vals)


def _closed_forms(system: FlowSystem):
    """Per-variable (a, b) if every equation is scalar linear in its own variable."""
    out = {}
    for v, e in system.rhs:
        f = linear_form(e)
        if f is None or any(k != v for k in f[0]):
            return None
        a = f[0].get(v, Fraction(0))
        if a != 0 and Fraction(float(a)) != a:
            return None
        out[v] = (a, f[1])
    return out


def _eval_rhs(system: FlowSystem, box: Mapping) -> dict:
    return {v: as_interval(eval_expr(e, box)) for v, e in system.rhs}


def _inflate(x: Interval) -> Interval:
    w = x.width * 0.1 + 1e-12 + abs(x.low + x.high) * 1e-15
    return Interval(x.low - w, x.high + w)


def derivative(e, v: str):
    """Symbolic d e / d v for the +, -, * expression language."""
    zero = Const(0)
    if isinstance(e, Const):
        return zero
    if isinstance(e, Var):
        return Const(1) if e.name == v else zero
    if isinstance(e, UnaryOp) and e.op == "-":
        return UnaryOp("-", derivative(e.operand, v))
    if isinstance(e, BinOp) and e.op in ("+", "-"):
        return BinOp(e.op, derivative(e.left, v), derivative(e.right, v))
    if isinstance(e, BinOp) and e.op == "*":
        return BinOp("+", BinOp("*", derivative(e.left, v), e.right),
                     BinOp("*", e.left, derivative(e.right, v)))
    raise ValueError(f"cannot differentiate {e!r}")


def _a_priori(system: FlowSystem, box: dict, h: float) -> Optional[dict]:
    """A box containing every trajectory from ``box`` over [0, h] (Picard test)."""
    H = Interval(0.0, h)
    f0 = _eval_rhs(system, box)
    b = dict(box)
    for v in f0:
        b[v] = box[v] + H * f0[v]
    for _ in range(40):
        trial = dict(b)
        for v in f0:
            trial[v] = _inflate(b[v])
        ft = _eval_rhs(system, trial)
        new = dict(box)
        ok = True
        for v in f0:
            new[v] = box[v] + H * ft[v]
            if not trial[v].contains(new[v]):
                ok = False
        if ok:
            return new
        b = {v: (new[v].hull(trial[v]) if v in f0 else box[v]) for v in box}
        if any(math.isinf(x.low) or math.isinf(x.high) for x in b.values()):
            return None
    return None


class _Stepper:
    """Mean-value interval step: midpoint by 2nd-order Taylor, spread by the flow Jacobian."""

    def __init__(self, system: FlowSystem):
        self.system = system
        self.vars = system.variables
        self.jac = [[derivative(e, w) for w in self.vars] for _, e in system.rhs]

    def _jac(self, box):
        return [[as_interval(eval_expr(d, box)) for d in row] for row in self.jac]

    def step(self, box: dict, h: float):
        b = _a_priori(self.system, box, h)
        if b is None:
            return None
        vs, n = self.vars, len(self.vars)
        mid = dict(box)
        for v in vs:
            x = box[v]
            mid[v] = Interval.point(x.low + (x.high - x.low) / 2) if x.width < math.inf else x
        bm = _a_priori(self.system, mid, h)
        if bm is None:
            return None
        # x(h) = x^ + h f(x^) + h^2/2 (Df f)(xi)
        f_mid = _eval_rhs(self.system, mid)
        f_bm = _eval_rhs(self.system, bm)
        dfm = self._jac(bm)
        hh = Interval.point(h)
        half_h2 = Interval.point(h) * Interval.point(h) * Interval.point(0.5)
        end_mid = {}
        for i, v in enumerate(vs):
            acc = Interval.point(0.0)
            for j, w in enumerate(vs):
                acc = acc + dfm[i][j] * f_bm[w]
            end_mid[v] = mid[v] + hh * f_mid[v] + half_h2 * acc
        # variational bound Y over [0, h]: Y in I + [0,h] Df(B) Y
        df = self._jac(b)
        H = Interval(0.0, h)
        eye = [[Interval.point(1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
        y = [[eye[i][j] + H * df[i][j] for j in range(n)] for i in range(n)]
        for _ in range(40):
            trial = [[_inflate(y[i][j]) for j in range(n)] for i in range(n)]
            new = [[eye[i][j] + H * _dot(df[i], trial, j) for j in range(n)] for i in range(n)]
            if all(trial[i][j].contains(new[i][j]) for i in range(n) for j in range(n)):
                y = new
                break
            y = [[new[i][j].hull(trial[i][j]) for j in range(n)] for i in range(n)]
        else:
            return None
        jump = [[eye[i][j] + hh * _dot(df[i], y, j) for j in range(n)] for i in range(n)]
        end = dict(box)
        for i, v in enumerate(vs):
            acc = end_mid[v]
            for j, w in enumerate(vs):
                acc = acc + jump[i][j] * (box[w] - mid[w])
            euler = box[v] + hh * f_bm[v].hull(_eval_rhs(self.system, b)[v])
            end[v] = acc.intersect(euler) or acc
            end[v] = end[v].intersect(b[v]) or end[v]
        return b, end


def _dot(row, mat, j):
    acc = Interval.point(0.0)
    for k, r in enumerate(row):
        acc = acc + r * mat[k][j]
    return acc


def _taylor_segments(system: FlowSystem, init: dict, grid: list[Interval], substeps: int = 8) -> list[Segment]:
    stepper = _Stepper(system)
    out = []
    box = dict(init)
    for span in grid:
        if span.width == 0:
            out.append(Segment(span, FrozenMap(box)))
            continue
        seg_hull = None
        t = span.low
        h = span.width / substeps
        remaining = span.width
        tries = 0
        while remaining > 0:
            hh = min(h, remaining)
            res = stepper.step(box, hh)
            if res is None:
                h /= 2
                tries += 1
                if tries > 30:
                    raise EnclosureFailure(f"no a-priori enclosure near t={t}")
                continue
            enc, box = res
            seg_hull = enc if seg_hull is None else {v: seg_hull[v].hull(enc[v]) for v in enc}
            remaining -= hh
            t += hh
            if remaining < 1e-12 * h:
                remaining = 0
        out.append(Segment(span, FrozenMap(seg_hull)))
    return out


def compute_flowpipes(system: FlowSystem, init: Mapping, step: float, horizon: float) -> list[Segment]:
    """Segments over [0, horizon] of width ``step`` (the last may be shorter)."""
    if step <= 0:
        raise ValueError("step size must be positive")
    if horizon <= 0:
        return []
    init = {v: as_interval(x).closure() for v, x in init.items()}
    grid = _grid(step, horizon)
    forms = _closed_forms(system)
    if forms is None:
        return _taylor_segments(system, init, grid)
    out = []
    for span in grid:
        box = dict(init)
        for v, (a, b) in forms.items():
            box[v] = _scalar_closed_form(init[v], a, b, span)
        out.append(Segment(span, FrozenMap(box)))
    return out


def intersect_invariant(segments: list[Segment], inv) -> list[Segment]:
    """Trim each segment to the invariant and keep the longest satisfiable prefix."""
    out = []
    for seg in segments:
        trimmed = contract(inv, seg.box)
        if trimmed is None:
            break
        out.append(Segment(seg.time, FrozenMap(trimmed)))
    return out


@dataclass(frozen=True)
class GuardWindow:
    window: Interval  # global time
    box: FrozenMap  # hull of the guard-trimmed segment boxes
    may_leave: bool = True


def guard_windows(segments: list[Segment], guard, start: Interval) -> list[GuardWindow]:
    """Maximal runs of consecutive segments on which ``guard`` may hold."""
    out = []
    run = []

    def close():
        if run:
            t = hull_all(s.time for s, _ in run)
            box = {v: hull_all(b[v] for _, b in run) for v in run[0][1]}
            out.append(GuardWindow((start + t).closure(), FrozenMap(box)))
            run.clear()

    for seg in segments:
        trimmed = contract(guard, seg.box)
        if trimmed is None:
            close()
        else:
            run.append((seg, trimmed))
    close()
    return out


def hull_over(segments: list[Segment], elapsed: Interval) -> Optional[dict]:
    """Hull of the boxes of segments whose span meets ``elapsed``."""
    hit = [s for s in segments if s.time.overlaps(elapsed)]
    if not hit:
        return None
    return {v: hull_all(s.box[v] for s in hit) for v in hit[0].box}


class FlowpipeCache:
    """Memoises segment lists by (class, mode, initial box, horizon, step)."""

    def __init__(self):
        self._d = {}
        self.hits = 0
        self.misses = 0

    def get(self, key, compute):
        try:
            v = self._d[key]
            self.hits += 1
            return v
        except KeyError:
            self.misses += 1
            v = self._d[key] = compute()
            return v

    def __len__(self):
        return len(self._d)
