"""Interval arithmetic with directed rounding and three-valued comparison.

Endpoints are rounded outward only when a floating-point result is inexact
(detected with error-free transformations), so exactly representable results
stay exact. That keeps e.g. ``20 - 1`` equal to ``19`` and avoids spurious
guard hits at region boundaries.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Union

from .frontend.ast import BinOp, Const, UnaryOp, Var

INF = math.inf


# -- directed rounding ---------------------------------------------------------

def _down(x: float) -> float:
    return math.nextafter(x, -INF)


def _up(x: float) -> float:
    return math.nextafter(x, INF)


def _sum_err(a: float, b: float, s: float) -> float:
    # TwoSum: a + b == s + err exactly
    bp = s - a
    ap = s - bp
    return (a - ap) + (b - bp)


def add_down(a: float, b: float) -> float:
    s = a + b
    if not math.isfinite(s) or not (math.isfinite(a) and math.isfinite(b)):
        return s
    return _down(s) if _sum_err(a, b, s) < 0 else s


def add_up(a: float, b: float) -> float:
    s = a + b
    if not math.isfinite(s) or not (math.isfinite(a) and math.isfinite(b)):
        return s
    return _up(s) if _sum_err(a, b, s) > 0 else s


_SPLIT = 134217729.0  # 2**27 + 1


def _split(a: float):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def _prod_err_sign(a: float, b: float, p: float) -> int:
    """Sign of (a*b - p) where p is the rounded product."""
    # the split trick needs headroom on both sides of the exponent range
    if abs(a) < 2.0 ** 500 and abs(b) < 2.0 ** 500 and abs(p) > 2.0 ** -900:
        ah, al = _split(a)
        bh, bl = _split(b)
        err = al * bl - (((p - ah * bh) - al * bh) - ah * bl)
        return (err > 0) - (err < 0)
    d = Fraction(a) * Fraction(b) - Fraction(p)
    return (d > 0) - (d < 0)


def mul_down(a: float, b: float) -> float:
    p = a * b
    if not math.isfinite(p) or a == 0 or b == 0 or not (math.isfinite(a) and math.isfinite(b)):
        return 0.0 if (a == 0 or b == 0) else p
    return _down(p) if _prod_err_sign(a, b, p) < 0 else p


def mul_up(a: float, b: float) -> float:
    p = a * b
    if not math.isfinite(p) or a == 0 or b == 0 or not (math.isfinite(a) and math.isfinite(b)):
        return 0.0 if (a == 0 or b == 0) else p
    return _up(p) if _prod_err_sign(a, b, p) > 0 else p


def div_down(a: float, b: float) -> float:
    q = a / b
    if not math.isfinite(q) or a == 0:
        return q
    d = Fraction(a) / Fraction(b) - Fraction(q)
    return _down(q) if d < 0 else q


def div_up(a: float, b: float) -> float:
    q = a / b
    if not math.isfinite(q) or a == 0:
        return q
    d = Fraction(a) / Fraction(b) - Fraction(q)
    return _up(q) if d > 0 else q


def exp_down(x: float) -> float:
    if x == 0:
        return 1.0
    return max(0.0, _down(_down(math.exp(x))))


def exp_up(x: float) -> float:
    if x == 0:
        return 1.0
    return _up(_up(math.exp(x)))


# -- intervals -------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """A non-empty real interval; each end may be open or closed."""

    low: float
    high: float
    low_closed: bool = True
    high_closed: bool = True

    def __post_init__(self):
        if math.isnan(self.low) or math.isnan(self.high):
            raise ValueError("interval endpoint is NaN")
        if self.low > self.high:
            raise ValueError(f"empty interval: low {self.low} > high {self.high}")
        if self.low == self.high and not (self.low_closed and self.high_closed):
            raise ValueError(f"empty interval at {self.low}")
        object.__setattr__(self, "low", float(self.low))
        object.__setattr__(self, "high", float(self.high))

    @staticmethod
    def point(x: float) -> "Interval":
        return Interval(x, x)

    @staticmethod
    def make(low, high, low_closed=True, high_closed=True) -> Optional["Interval"]:
        """Like the constructor, but returns None for an empty interval."""
        if low > high or (low == high and not (low_closed and high_closed)):
            return None
        return Interval(low, high, low_closed, high_closed)

    # -- predicates --
    @property
    def is_point(self) -> bool:
        return self.low == self.high

    @property
    def width(self) -> float:
        return self.high - self.low

    @property
    def is_closed(self) -> bool:
        return self.low_closed and self.high_closed

    def contains_point(self, x: float) -> bool:
        lo_ok = self.low < x or (self.low == x and self.low_closed)
        hi_ok = x < self.high or (x == self.high and self.high_closed)
        return lo_ok and hi_ok

    def contains(self, other: "Interval") -> bool:
        lo_ok = self.low < other.low or (self.low == other.low and (self.low_closed or not other.low_closed))
        hi_ok = other.high < self.high or (self.high == other.high and (self.high_closed or not other.high_closed))
        return lo_ok and hi_ok

    def overlaps(self, other: "Interval") -> bool:
        return self.intersect(other) is not None

    # -- lattice operations --
    def closure(self) -> "Interval":
        return self if self.is_closed else Interval(self.low, self.high)

    def hull(self, other: "Interval") -> "Interval":
        if self.low < other.low:
            lo, lc = self.low, self.low_closed
        elif other.low < self.low:
            lo, lc = other.low, other.low_closed
        else:
            lo, lc = self.low, self.low_closed or other.low_closed
        if self.high > other.high:
            hi, hc = self.high, self.high_closed
        elif other.high > self.high:
            hi, hc = other.high, other.high_closed
        else:
            hi, hc = self.high, self.high_closed or other.high_closed
        return Interval(lo, hi, lc, hc)

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        if self.low > other.low:
            lo, lc = self.low, self.low_closed
        elif other.low > self.low:
            lo, lc = other.low, other.low_closed
        else:
            lo, lc = self.low, self.low_closed and other.low_closed
        if self.high < other.high:
            hi, hc = self.high, self.high_closed
        elif other.high < self.high:
            hi, hc = other.high, other.high_closed
        else:
            hi, hc = self.high, self.high_closed and other.high_closed
        return Interval.make(lo, hi, lc, hc)

    # -- arithmetic (outward rounded) --
    def __add__(self, other):
        o = as_interval(other)
        lo = add_down(self.low, o.low)
        hi = add_up(self.high, o.high)
        lc = (self.low_closed and o.low_closed) or lo != self.low + o.low or lo == -INF
        hc = (self.high_closed and o.high_closed) or hi != self.high + o.high or hi == INF
        return _mk(lo, hi, lc, hc)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.high, -self.low, self.high_closed, self.low_closed)

    def __sub__(self, other):
        return self + (-as_interval(other))

    def __rsub__(self, other):
        return as_interval(other) + (-self)

    def __mul__(self, other):
        o = as_interval(other)
        pairs = ((self.low, o.low), (self.low, o.high), (self.high, o.low), (self.high, o.high))
        lo = min(mul_down(a, b) for a, b in pairs)
        hi = max(mul_up(a, b) for a, b in pairs)
        return Interval(lo, hi)

    __rmul__ = __mul__

    def scale_exp(self, a: float, t: "Interval") -> "Interval":
        """Enclosure of x * exp(a*t) for x in self, t in t."""
        e = Interval(exp_down(min(mul_down(a, t.low), mul_down(a, t.high))),
                     exp_up(max(mul_up(a, t.low), mul_up(a, t.high))))
        return self * e

    def __repr__(self):
        lb = "[" if self.low_closed else "("
        rb = "]" if self.high_closed else ")"
        return f"{lb}{self.low!r}, {self.high!r}{rb}"


def _mk(lo, hi, lc, hc) -> Interval:
    if lo == hi:
        lc = hc = True
    return Interval(lo, hi, lc, hc)


def as_interval(v) -> Interval:
    if isinstance(v, Interval):
        return v
    if isinstance(v, bool):
        raise TypeError("boolean is not a numeric value")
    if isinstance(v, (int, float)):
        return Interval.point(float(v))
    raise TypeError(f"not a numeric value: {v!r}")


def hull_all(items) -> Interval:
    it = iter(items)
    acc = next(it)
    for x in it:
        acc = acc.hull(x)
    return acc


Value = Union[int, Interval]
Valuation = Mapping[str, Value]


# -- expression evaluation -----------------------------------------------------

class UnknownVariable(KeyError):
    pass


class ExpressionError(TypeError):
    pass


class TriBool(enum.Enum):
    ALL_TRUE = "AllTrue"
    ALL_FALSE = "AllFalse"
    MIXED = "Mixed"

    def negate(self) -> "TriBool":
        if self is TriBool.ALL_TRUE:
            return TriBool.ALL_FALSE
        if self is TriBool.ALL_FALSE:
            return TriBool.ALL_TRUE
        return self

    @property
    def possible(self) -> bool:
        return self is not TriBool.ALL_FALSE


def eval_expr(e, env: Valuation) -> Value:
    """Evaluate an arithmetic expression; integer-only expressions stay integers."""
    if isinstance(e, Const):
        if isinstance(e.value, bool):
            raise ExpressionError("boolean constant in arithmetic context")
        return e.value if isinstance(e.value, int) else Interval.point(e.value)
    if isinstance(e, Var):
        try:
            v = env[e.name]
        except KeyError:
            raise UnknownVariable(e.name) from None
        if isinstance(v, bool) or not isinstance(v, (int, Interval)):
            if isinstance(v, float):
                return Interval.point(v)
            raise ExpressionError(f"variable {e.name} holds a non-numeric value {v!r}")
        return v
    if isinstance(e, UnaryOp):
        if e.op != "-":
            raise ExpressionError(f"operator {e.op!r} in arithmetic context")
        v = eval_expr(e.operand, env)
        return -v
    if isinstance(e, BinOp):
        if e.op not in ("+", "-", "*"):
            raise ExpressionError(f"operator {e.op!r} in arithmetic context")
        a = eval_expr(e.left, env)
        b = eval_expr(e.right, env)
        if isinstance(a, int) and isinstance(b, int):
            return a + b if e.op == "+" else a - b if e.op == "-" else a * b
        a, b = as_interval(a), as_interval(b)
        return a + b if e.op == "+" else a - b if e.op == "-" else a * b
    raise ExpressionError(f"not an expression: {e!r}")


def _lt(a: Interval, b: Interval) -> TriBool:
    # every a < every b?
    if a.high < b.low or (a.high == b.low and not (a.high_closed and b.low_closed)):
        return TriBool.ALL_TRUE
    if a.low >= b.high:
        return TriBool.ALL_FALSE
    return TriBool.MIXED


def _le(a: Interval, b: Interval) -> TriBool:
    if a.high <= b.low:
        return TriBool.ALL_TRUE
    if a.low > b.high or (a.low == b.high and not (a.low_closed and b.high_closed)):
        return TriBool.ALL_FALSE
    return TriBool.MIXED


def _eq(a: Interval, b: Interval) -> TriBool:
    if a.is_point and b.is_point and a.low == b.low:
        return TriBool.ALL_TRUE
    if a.intersect(b) is None:
        return TriBool.ALL_FALSE
    return TriBool.MIXED


def compare(e, env: Valuation) -> TriBool:
    """Three-valued truth of a boolean expression over a box valuation."""
    if isinstance(e, Const):
        if not isinstance(e.value, bool):
            raise ExpressionError("numeric constant used as a condition")
        return TriBool.ALL_TRUE if e.value else TriBool.ALL_FALSE
    if isinstance(e, UnaryOp) and e.op == "!":
        return compare(e.operand, env).negate()
    if isinstance(e, BinOp):
        if e.op == "&&":
            a = compare(e.left, env)
            if a is TriBool.ALL_FALSE:
                return a
            b = compare(e.right, env)
            if b is TriBool.ALL_FALSE:
                return b
            return TriBool.ALL_TRUE if a is b is TriBool.ALL_TRUE else TriBool.MIXED
        if e.op == "||":
            a = compare(e.left, env)
            if a is TriBool.ALL_TRUE:
                return a
            b = compare(e.right, env)
            if b is TriBool.ALL_TRUE:
                return b
            return TriBool.ALL_FALSE if a is b is TriBool.ALL_FALSE else TriBool.MIXED
        if e.op in ("<", "<=", ">", ">=", "==", "!="):
            a = eval_expr(e.left, env)
            b = eval_expr(e.right, env)
            if isinstance(a, int) and isinstance(b, int):
                r = {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b,
                     "==": a == b, "!=": a != b}[e.op]
                return TriBool.ALL_TRUE if r else TriBool.ALL_FALSE
            a, b = as_interval(a), as_interval(b)
            if e.op == "<":
                return _lt(a, b)
            if e.op == "<=":
                return _le(a, b)
            if e.op == ">":
                return _lt(b, a)
            if e.op == ">=":
                return _le(b, a)
            if e.op == "==":
                return _eq(a, b)
            return _eq(a, b).negate()
    raise ExpressionError(f"not a boolean expression: {e!r}")


_FLIP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


def negate(e):
    """Push a logical negation down to the comparison atoms."""
    if isinstance(e, UnaryOp) and e.op == "!":
        return e.operand
    if isinstance(e, Const) and isinstance(e.value, bool):
        return Const(not e.value)
    if isinstance(e, BinOp):
        if e.op == "&&":
            return BinOp("||", negate(e.left), negate(e.right))
        if e.op == "||":
            return BinOp("&&", negate(e.left), negate(e.right))
        if e.op in _FLIP:
            return BinOp(_FLIP[e.op], e.left, e.right)
    return UnaryOp("!", e)


def _clip(v: Interval, op: str, r: Interval) -> Optional[Interval]:
    # closure semantics: the strict/non-strict distinction is dropped
    if op in ("<", "<="):
        return Interval.make(v.low, min(v.high, r.high), v.low_closed, True if r.high < v.high else v.high_closed)
    if op in (">", ">="):
        return Interval.make(max(v.low, r.low), v.high, True if r.low > v.low else v.low_closed, v.high_closed)
    if op == "==":
        return v.closure().intersect(r.closure())
    return v


_MIRROR = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "==": "==", "!=": "!="}


def contract(e, env: Valuation) -> Optional[dict]:
    """Shrink a box to (a closed over-approximation of) the part where ``e`` may hold.

    Returns None when ``e`` is false everywhere on the box. Only atoms of the
    form ``var op expr`` narrow a variable; other atoms are just tested.
    """
    env = dict(env)
    if isinstance(e, UnaryOp) and e.op == "!":
        inner = negate(e.operand)
        if not (isinstance(inner, UnaryOp) and inner.op == "!"):
            return contract(inner, env)
    if isinstance(e, BinOp) and e.op == "&&":
        left = contract(e.left, env)
        return None if left is None else contract(e.right, left)
    if isinstance(e, BinOp) and e.op == "||":
        parts = [p for p in (contract(e.left, env), contract(e.right, env)) if p is not None]
        if not parts:
            return None
        if len(parts) == 1:
            return parts[0]
        return {k: _join(parts[0][k], parts[1][k]) for k in env}
    verdict = compare(e, env)
    if verdict is TriBool.ALL_FALSE:
        return None
    if verdict is TriBool.ALL_TRUE or not isinstance(e, BinOp):
        return env
    for var_side, other, op in ((e.left, e.right, e.op), (e.right, e.left, _MIRROR.get(e.op))):
        if isinstance(var_side, Var) and isinstance(env.get(var_side.name), Interval):
            r = eval_expr(other, env)
            clipped = _clip(env[var_side.name], op, as_interval(r))
            if clipped is None:
                return None
            env[var_side.name] = clipped
    return env


def _join(a, b):
    if isinstance(a, Interval) or isinstance(b, Interval):
        return as_interval(a).hull(as_interval(b))
    return a if a == b else as_interval(a).hull(as_interval(b))
