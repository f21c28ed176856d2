"""Timed transition system semantics over interval global time.

A global state holds every reactive and physical rebec plus the global time
interval. Non-time-progress rules (taking a message, resuming, executing a
statement) never change the global time; :func:`progress_time` computes how a
time-progress step advances it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Optional

from .frontend.ast import (
    Assign, ClassDecl, Delay, If, Model, Send, SendSetMode, SetMode,
)
from .frontend.checks import load_model
from .interval import (
    Interval, TriBool, as_interval, compare, contract, eval_expr, negate,
)

log = logging.getLogger(__name__)

NONE_MODE = "none"
DEFAULT_NTP_BUDGET = 10_000


class SemanticsError(Exception):
    """Analysis-time failure (maps to exit code 3 on the command line)."""


class MailboxOverflow(SemanticsError):
    pass


class StateExplosion(SemanticsError):
    pass


class PreconditionViolated(SemanticsError, ValueError):
    pass


class RuntimeTypeError(SemanticsError):
    pass


class FrozenMap(Mapping):
    """Immutable, hashable mapping used for valuations and rebec tables."""

    __slots__ = ("_d", "_h")

    def __init__(self, items=()):
        self._d = dict(items)
        self._h = None

    def __getitem__(self, k):
        return self._d[k]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __hash__(self):
        if self._h is None:
            self._h = hash(frozenset(self._d.items()))
        return self._h

    def __eq__(self, other):
        if isinstance(other, FrozenMap):
            return self._d == other._d
        if isinstance(other, Mapping):
            return self._d == dict(other)
        return NotImplemented

    def set(self, key, value) -> "FrozenMap":
        d = dict(self._d)
        d[key] = value
        return FrozenMap(d)

    def update(self, items) -> "FrozenMap":
        d = dict(self._d)
        d.update(items)
        return FrozenMap(d)

    def only(self, keys) -> "FrozenMap":
        return FrozenMap((k, v) for k, v in self._d.items() if k in keys)

    def __repr__(self):
        return "{" + ", ".join(f"{k}: {v!r}" for k, v in self._d.items()) + "}"


# -- states ----------------------------------------------------------------------

@dataclass(frozen=True)
class Message:
    sender: str
    name: str
    params: tuple  # ((param, value), ...)
    arrival: Interval
    insertion: Interval
    after: tuple = (0.0, 0.0)

    def __post_init__(self):
        window = (self.insertion + Interval(self.after[0], self.after[1])).closure()
        if not window.contains(self.arrival):
            raise ValueError(f"arrival {self.arrival} outside send window {window}")


@dataclass(frozen=True)
class ReactiveState:
    sigma: FrozenMap
    mailbox: tuple = ()
    stmts: tuple = ()
    resume: Optional[Interval] = None

    @property
    def idle(self) -> bool:
        return not self.stmts and self.resume is None


@dataclass(frozen=True)
class PhysicalState:
    sigma: FrozenMap
    mailbox: tuple = ()
    stmts: tuple = ()
    mode: str = NONE_MODE
    # values of the real variables when the current flow started, and the
    # global-time window in which it started
    anchor: FrozenMap = field(default_factory=FrozenMap)
    anchor_time: Interval = Interval(0.0, 0.0)

    resume = None

    @property
    def idle(self) -> bool:
        return not self.stmts


@dataclass(frozen=True, eq=True)
class GlobalState:
    rs: FrozenMap  # rebec name -> ReactiveState
    ps: FrozenMap  # rebec name -> PhysicalState
    gt: Interval

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.rs, self.ps, self.gt))
            object.__setattr__(self, "_hash", h)
        return h

    def rebec(self, x: str):
        return self.rs[x] if x in self.rs else self.ps[x]

    def with_rebec(self, x: str, r) -> "GlobalState":
        if x in self.rs:
            return GlobalState(self.rs.set(x, r), self.ps, self.gt)
        return GlobalState(self.rs, self.ps.set(x, r), self.gt)

    def with_gt(self, gt: Interval) -> "GlobalState":
        return GlobalState(self.rs, self.ps, gt)

    def message_count(self) -> int:
        return sum(len(r.mailbox) for r in self.rs.values()) + sum(len(p.mailbox) for p in self.ps.values())


# -- compiled model ----------------------------------------------------------------

class Program:
    """A checked model with instance bindings resolved."""

    def __init__(self, model: Model):
        self.model = model
        self.classes = {c.name: c for c in model.classes}
        self.order = [i.name for i in model.instances]
        self.cls_of: dict[str, ClassDecl] = {}
        self.bindings: dict[str, dict] = {}
        self.ctor_args: dict[str, tuple] = {}
        for inst in model.instances:
            c = self.classes[inst.cls]
            self.cls_of[inst.name] = c
            self.bindings[inst.name] = {k.name: b for k, b in zip(c.known, inst.known)}
            self.ctor_args[inst.name] = inst.args
        self.reactive = [x for x in self.order if not self.cls_of[x].physical]
        self.physical = [x for x in self.order if self.cls_of[x].physical]

    @classmethod
    def from_text(cls, text: str) -> "Program":
        return cls(load_model(text))

    def resolve(self, x: str, target: str) -> str:
        return x if target == "self" else self.bindings[x][target]

    def var_type(self, x: str, name: str, params=()) -> Optional[str]:
        t = self.cls_of[x].var_type(name)
        if t is not None:
            return t
        for p in params:
            if p.name == name:
                return p.type
        return None

    def statevars(self, x: str) -> set:
        return {v.name for v in self.cls_of[x].statevars}

    def real_vars(self, x: str) -> list:
        return [v.name for v in self.cls_of[x].statevars if v.type == "real"]


def _zero(ty: str):
    return 0 if ty == "int" else Interval(0.0, 0.0)


def coerce(value, ty: Optional[str], where: str):
    if ty == "int":
        if not isinstance(value, int):
            raise RuntimeTypeError(f"non-integer value {value!r} for int {where}")
        return value
    return as_interval(value)


# -- rule helpers --------------------------------------------------------------------

def _eligible(window: Interval, gt: Interval) -> bool:
    # the event may already have happened at some point of the current time window
    if window.low < gt.low:
        return True
    return window.low == gt.low and (window.low_closed or gt.high > gt.low)


def _postponed(window: Interval, gt: Interval) -> Optional[Interval]:
    """The part of ``window`` lying after the current time window, if any."""
    if window.high < gt.high or (window.high == gt.high and not (window.high_closed and not gt.high_closed)):
        return None
    return Interval.make(gt.high, window.high, not gt.high_closed, window.high_closed)


def snap(t: float) -> float:
    """Round a time value to 12 decimals so that sums like 0.6 + 0.3 land on 0.9."""
    return round(t, 12)


def shift(gt: Interval, low: float, high: float) -> Interval:
    """``gt + [low, high]`` for time windows, rounded like the decimal bounds themselves."""
    return Interval(snap(gt.low + low), snap(gt.high + high), gt.low_closed, gt.high_closed)


def _finish(prog: Program, x: str, r):
    """Drop message parameters once a rebec has nothing left to run."""
    if r.stmts or (not isinstance(r, PhysicalState) and r.resume is not None):
        return r
    keep = prog.statevars(x)
    if all(k in keep for k in r.sigma):
        return r
    return replace(r, sigma=r.sigma.only(keep))


def _reanchor(prog: Program, x: str, p: PhysicalState, gt: Interval) -> PhysicalState:
    reals = prog.real_vars(x)
    return replace(p, anchor=p.sigma.only(reals), anchor_time=gt.closure())


def _params_of(prog: Program, x: str, r) -> tuple:
    """Parameter declarations of the server currently bound in ``r``'s valuation."""
    c = prog.cls_of[x]
    extra = [k for k in r.sigma if c.var_type(k) is None]
    out = []
    for m in c.msgsrvs:
        for p in m.params:
            if p.name in extra and all(q.name != p.name for q in out):
                out.append(p)
    return tuple(out)


# -- the three non-time-progress rules -----------------------------------------------------

def apply_take_message(prog: Program, s: GlobalState, x: str, index: int) -> list[GlobalState]:
    """Take the ``index``-th message of ``x``'s mailbox: consume and/or postpone."""
    r = s.rebec(x)
    if not r.idle:
        raise PreconditionViolated(f"{x} is not idle")
    try:
        msg = r.mailbox[index]
    except IndexError:
        raise PreconditionViolated(f"{x} has no message at position {index}") from None
    if not _eligible(msg.arrival, s.gt):
        raise PreconditionViolated(f"message {msg.name} to {x} has not arrived yet")
    rest = r.mailbox[:index] + r.mailbox[index + 1:]
    out = []
    if isinstance(r, PhysicalState) and msg.name == "SetMode":
        p = replace(r, mailbox=rest, mode=dict(msg.params)["mode"])
        out.append(s.with_rebec(x, _reanchor(prog, x, p, s.gt)))
    else:
        srv = prog.cls_of[x].msgsrv(msg.name)
        sigma = r.sigma.update(msg.params)
        nr = _finish(prog, x, replace(r, sigma=sigma, mailbox=rest, stmts=srv.body))
        out.append(s.with_rebec(x, nr))
    later = _postponed(msg.arrival, s.gt)
    if later is not None:
        moved = replace(msg, arrival=later)
        out.append(s.with_rebec(x, replace(r, mailbox=r.mailbox[:index] + (moved,) + r.mailbox[index + 1:])))
    return out


def apply_resume(prog: Program, s: GlobalState, x: str) -> list[GlobalState]:
    r = s.rs[x]
    if r.resume is None:
        raise PreconditionViolated(f"{x} is not suspended")
    if not _eligible(r.resume, s.gt):
        raise PreconditionViolated(f"{x} cannot resume before {r.resume}")
    out = [s.with_rebec(x, _finish(prog, x, replace(r, resume=None)))]
    later = _postponed(r.resume, s.gt)
    if later is not None:
        out.append(s.with_rebec(x, replace(r, resume=later)))
    return out


def _deliver(prog: Program, s: GlobalState, target: str, msg: Message) -> GlobalState:
    t = s.rebec(target)
    cap = prog.cls_of[target].capacity
    if len(t.mailbox) >= cap:
        raise MailboxOverflow(f"mailbox of {target} exceeds capacity {cap} ({msg.name} from {msg.sender})")
    return s.with_rebec(target, replace(t, mailbox=t.mailbox + (msg,)))


def exec_statement(prog: Program, s: GlobalState, x: str) -> list[GlobalState]:
    """Execute the first pending statement of rebec ``x``."""
    r = s.rebec(x)
    if not r.stmts:
        raise PreconditionViolated(f"{x} has no statement to execute")
    if r.resume is not None:
        raise PreconditionViolated(f"{x} is suspended")
    head, rest = r.stmts[0], r.stmts[1:]
    phys = isinstance(r, PhysicalState)
    params = _params_of(prog, x, r)

    if isinstance(head, Assign):
        ty = prog.var_type(x, head.target, params)
        val = coerce(eval_expr(head.expr, r.sigma), ty, f"variable {head.target}")
        nr = replace(r, sigma=r.sigma.set(head.target, val), stmts=rest)
        if phys and ty == "real":
            nr = _reanchor(prog, x, nr, s.gt)
        return [s.with_rebec(x, _finish(prog, x, nr))]

    if isinstance(head, If):
        verdict = compare(head.cond, r.sigma)
        out = []
        for cond, branch, ok in ((head.cond, head.then, verdict.possible),
                                 (negate(head.cond), head.orelse, verdict is not TriBool.ALL_TRUE)):
            if not ok:
                continue
            nr = replace(r, stmts=tuple(branch) + rest)
            if verdict is TriBool.MIXED:
                narrowed = contract(cond, r.sigma)
                if narrowed is not None and narrowed != dict(r.sigma):
                    nr = replace(nr, sigma=FrozenMap(narrowed))
                    if phys and any(narrowed[v] != r.sigma[v] for v in prog.real_vars(x)):
                        nr = _reanchor(prog, x, nr, s.gt)
            out.append(s.with_rebec(x, _finish(prog, x, nr)))
        return out

    if isinstance(head, Delay):
        if phys:
            raise RuntimeTypeError("delay in a physical rebec")
        resume = shift(s.gt, head.low, head.high)
        return [s.with_rebec(x, replace(r, stmts=rest, resume=resume))]

    if isinstance(head, SetMode):
        if not phys:
            raise RuntimeTypeError("setmode in a reactive rebec")
        nr = _reanchor(prog, x, replace(r, stmts=rest, mode=head.mode), s.gt)
        return [s.with_rebec(x, _finish(prog, x, nr))]

    if isinstance(head, (Send, SendSetMode)):
        target = prog.resolve(x, head.target)
        after = head.after or (0.0, 0.0)
        if isinstance(head, SendSetMode):
            name, vals = "SetMode", (("mode", head.mode),)
        else:
            srv = prog.cls_of[target].msgsrv(head.msg)
            vals = tuple(
                (p.name, coerce(eval_expr(a, r.sigma), p.type, f"parameter {p.name}"))
                for p, a in zip(srv.params, head.args))
            name = head.msg
        msg = Message(x, name, vals, shift(s.gt, after[0], after[1]), s.gt, tuple(after))
        s1 = s.with_rebec(x, _finish(prog, x, replace(r, stmts=rest)))
        return [_deliver(prog, s1, target, msg)]

    raise RuntimeTypeError(f"unknown statement {head!r}")


@dataclass(frozen=True)
class Step:
    rule: str  # 'take' | 'resume' | 'exec'
    rebec: str
    successors: tuple
    message: Optional[Message] = None


def ntp_steps(prog: Program, s: GlobalState) -> Iterator[Step]:
    """All enabled non-time-progress rule applications, in a fixed order."""
    for x in prog.order:
        r = s.rebec(x)
        if r.stmts and r.resume is None:
            yield Step("exec", x, tuple(exec_statement(prog, s, x)))
        elif r.resume is not None:
            if _eligible(r.resume, s.gt):
                yield Step("resume", x, tuple(apply_resume(prog, s, x)))
        elif r.idle:
            seen = set()
            for i, msg in enumerate(r.mailbox):
                if msg in seen or not _eligible(msg.arrival, s.gt):
                    continue
                seen.add(msg)
                yield Step("take", x, tuple(apply_take_message(prog, s, x, i)), msg)


def is_quiescent(prog: Program, s: GlobalState) -> bool:
    return next(ntp_steps(prog, s), None) is None


def execute_ntp(prog: Program, s: GlobalState, budget: int = DEFAULT_NTP_BUDGET) -> list[GlobalState]:
    """Close ``s`` under non-time-progress rules; return the quiescent states reached."""
    stack = [s]
    seen = {s}
    out = []
    applied = 0
    while stack:
        u = stack.pop()
        quiet = True
        for step in ntp_steps(prog, u):
            quiet = False
            for v in step.successors:
                applied += 1
                if applied > budget:
                    raise StateExplosion(f"more than {budget} non-time-progress steps from one state")
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if quiet:
            out.append(u)
    return out


# -- time progress ---------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class EventTime:
    value: float
    source: str = field(compare=False, default="event")


def events(s: GlobalState, extra=()) -> list[EventTime]:
    """Future bounds (strictly after GT.low) of arrivals and resumptions, plus ``extra``."""
    found = {}
    lo = s.gt.low

    def add(v, src):
        if v > lo and v not in found:
            found[v] = EventTime(v, src)

    for r in list(s.rs.values()) + list(s.ps.values()):
        for m in r.mailbox:
            add(m.arrival.low, "arrival-low")
            add(m.arrival.high, "arrival-high")
        if r.resume is not None:
            add(r.resume.low, "resume-low")
            add(r.resume.high, "resume-high")
    for e in extra:
        if isinstance(e, EventTime):
            add(e.value, e.source)
        else:
            add(float(e), "extra")
    return sorted(found.values())


def progress_time(t1: float, t2: float, t3: float, t4: Optional[float] = None) -> Interval:
    """Next global time from GT=[t1,t2) and the two earliest event times t3 <= t4."""
    if not (t1 <= t2) or t3 < t1 or (t4 is not None and t4 < t3):
        raise PreconditionViolated(f"progress_time({t1}, {t2}, {t3}, {t4})")
    if t3 < t2:
        return Interval(t3, snap(t2 + (t3 - t1)), True, False)
    if t3 > t2:
        return Interval(t2, t3, True, False)
    if t4 is None or t4 == t3:
        raise PreconditionViolated(f"progress_time needs a second event after {t3}")
    return Interval(t3, t4, True, False)


# -- initial state -------------------------------------------------------------------------

def make_initial_state(prog: Program) -> GlobalState:
    """Zero-initialised rebecs with constructors run in instantiation order."""
    rs, ps = {}, {}
    for x in prog.order:
        c = prog.cls_of[x]
        sigma = FrozenMap((v.name, _zero(v.type)) for v in c.statevars)
        if c.physical:
            ps[x] = PhysicalState(sigma, anchor=sigma.only(prog.real_vars(x)))
        else:
            rs[x] = ReactiveState(sigma)
    s = GlobalState(FrozenMap(rs), FrozenMap(ps), Interval(0.0, 0.0))
    for x in prog.order:
        ctor = prog.cls_of[x].constructor
        r = s.rebec(x)
        binds = tuple((p.name, coerce(eval_expr(a, {}), p.type, f"parameter {p.name}"))
                      for p, a in zip(ctor.params, prog.ctor_args[x]))
        s = s.with_rebec(x, _finish(prog, x, replace(r, sigma=r.sigma.update(binds), stmts=ctor.body)))
        while s.rebec(x).stmts and s.rebec(x).resume is None:
            nxt = exec_statement(prog, s, x)
            if len(nxt) != 1:
                raise SemanticsError(f"constructor of {x} branches on an undetermined condition")
            s = nxt[0]
    return s
