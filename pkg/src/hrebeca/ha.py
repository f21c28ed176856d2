"""Hybrid-automaton translation, flowpipe reachability and containment check.

Locations hold the discrete part of a model state: integer variables,
statement lists, suspension flags, physical modes, mailboxes and the list of
pending timed events (resumptions and delayed message transfers). Continuous
variables are the physical variables, reactive floats, message-parameter
slots, one timer per pending event, an urgency clock ``urg`` and a global
clock ``time``.

Locations are generated lazily: :meth:`HybridAutomaton.jumps` builds the
outgoing jumps of a location the first time it is asked for, so only the part
reached by :func:`reach_ha` is ever materialised.
"""
from __future__ import annotations

import json
import logging
import time
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field, replace
from typing import Optional

from .flowpipe import FlowSystem, compute_flowpipes, intersect_invariant
from .frontend.ast import (
    Assign, BinOp, Const, Delay, If, Send, SendSetMode, SetMode, Var, free_vars,
    rename,
)
from .frontend.printer import print_expr, print_stmts
from .interval import (
    Interval, TriBool, as_interval, compare, contract, eval_expr, negate,
)
from .semantics import (
    NONE_MODE, FrozenMap, MailboxOverflow, PhysicalState, Program,
    SemanticsError,
)

log = logging.getLogger(__name__)

TIME = "time"
URG = "urg"
DEFAULT_LOCATION_BUDGET = 100_000


class LocationBudgetExceeded(SemanticsError):
    pass


@dataclass(frozen=True)
class HAMessage:
    sender: str
    name: str
    ints: tuple  # ((param, int-or-mode-name), ...)
    slots: tuple  # ((param, slot variable), ...)

    def key(self):
        return (self.sender, self.name, self.ints)


@dataclass(frozen=True)
class HARebec:
    sigma: FrozenMap  # integer variables and bound integer parameters
    mailbox: tuple = ()
    stmts: tuple = ()
    suspended: bool = False
    mode: Optional[str] = None  # physical rebecs only


@dataclass(frozen=True)
class PendingEvent:
    low: float
    high: float
    kind: str  # 'resume' | 'transfer'
    target: str
    timer: str
    message: Optional[HAMessage] = None


@dataclass(frozen=True)
class Location:
    rebecs: FrozenMap
    events: tuple = ()


@dataclass(frozen=True)
class Jump:
    source: int
    target: int
    guard: object  # Expr or None
    resets: tuple  # ((var, Expr), ...), simultaneous
    urgent: bool
    label: str
    kind: str = ""  # 'leave' for guard-driven mode exits, 'event' for timed events


def _conj(parts):
    parts = [p for p in parts if p is not None]
    if not parts:
        return Const(True)
    out = parts[0]
    for p in parts[1:]:
        out = BinOp("&&", out, p)
    return out


class _Draft:
    """Mutable scratch copy of a location while one jump is being built."""

    def __init__(self, loc: Location):
        self.rebecs = dict(loc.rebecs)
        self.events = list(loc.events)
        self.resets: dict = {}

    def freeze(self) -> Location:
        return Location(FrozenMap(self.rebecs), tuple(self.events))


class HybridAutomaton:
    def __init__(self, prog: Program, max_locations: int = DEFAULT_LOCATION_BUDGET):
        self.prog = prog
        self.max_locations = max_locations
        self.locations: list[Location] = []
        self.index: dict = {}
        self._jumps: dict = {}
        self.variables = [TIME, URG]
        self._var_set = set(self.variables)
        self.float_params = {}
        for x in prog.order:
            c = prog.cls_of[x]
            for v in c.statevars:
                if v.type != "int":
                    self._add_var(f"{x}.{v.name}")
            fps = sorted({p.name for m in c.msgsrvs for p in m.params if p.type == "float"})
            self.float_params[x] = fps
            for p in fps:
                self._add_var(f"{x}.{p}")
        self.init_location, self.init_box = self._initial()

    # -- bookkeeping --
    def _add_var(self, v):
        if v not in self._var_set:
            self._var_set.add(v)
            self.variables.append(v)

    def _intern(self, loc: Location) -> int:
        lid = self.index.get(loc)
        if lid is None:
            if len(self.locations) >= self.max_locations:
                raise LocationBudgetExceeded(f"more than {self.max_locations} locations generated")
            lid = len(self.locations)
            self.locations.append(loc)
            self.index[loc] = lid
        return lid

    def _initial(self):
        rebecs = {}
        box = {v: Interval(0.0, 0.0) for v in self.variables}
        for x in self.prog.order:
            c = self.prog.cls_of[x]
            sigma = {v.name: 0 for v in c.statevars if v.type == "int"}
            ctor = c.constructor
            for p, a in zip(ctor.params, self.prog.ctor_args[x]):
                val = eval_expr(a, {})
                if p.type == "int":
                    sigma[p.name] = val
                else:
                    box[f"{x}.{p.name}"] = as_interval(val)
            rebecs[x] = HARebec(FrozenMap(sigma), stmts=ctor.body,
                                mode=NONE_MODE if c.physical else None)
        lid = self._intern(Location(FrozenMap(rebecs)))
        return lid, FrozenMap(box)

    # -- per-location structure --
    def urgent(self, lid: int) -> bool:
        loc = self.locations[lid]
        for r in loc.rebecs.values():
            if r.stmts and not r.suspended:
                return True
            if not r.stmts and not r.suspended and r.mailbox:
                return True
        return False

    def local(self, x: str, r: HARebec):
        """Rename rebec-local names: integers become constants, the rest HA variables."""
        def sub(name):
            if name in r.sigma:
                return Const(r.sigma[name])
            return Var(f"{x}.{name}")
        return lambda e: rename(e, sub)

    def flow(self, lid: int) -> FlowSystem:
        loc = self.locations[lid]
        if self.urgent(lid):
            return FlowSystem(((URG, Const(1)),) + tuple((v, Const(0)) for v in self.variables if v != URG))
        rates = {v: Const(0) for v in self.variables}
        rates[TIME] = Const(1)
        for ev in loc.events:
            rates[ev.timer] = Const(1)
        for x in self.prog.physical:
            r = loc.rebecs[x]
            if r.mode != NONE_MODE:
                mode = self.prog.cls_of[x].mode(r.mode)
                ren = self.local(x, r)
                for v, e in mode.flows:
                    rates[f"{x}.{v}"] = ren(e)
        return FlowSystem(tuple(rates.items()))

    def invariant(self, lid: int):
        loc = self.locations[lid]
        if self.urgent(lid):
            return BinOp("<=", Var(URG), Const(0.0))
        parts = []
        for x in self.prog.physical:
            r = loc.rebecs[x]
            if r.mode != NONE_MODE:
                parts.append(self.local(x, r)(self.prog.cls_of[x].mode(r.mode).invariant))
        for ev in loc.events:
            parts.append(BinOp("<=", Var(ev.timer), Const(float(ev.high))))
        return _conj(parts)

    def jumps(self, lid: int) -> list[Jump]:
        js = self._jumps.get(lid)
        if js is None:
            js = self._jumps[lid] = self._build_jumps(lid)
        return js

    # -- jump construction --
    def _build_jumps(self, lid: int) -> list[Jump]:
        loc = self.locations[lid]
        out = []
        if self.urgent(lid):
            for x in self.prog.order:
                r = loc.rebecs[x]
                if r.suspended:
                    continue
                if r.stmts:
                    for guard, draft, label in self._exec(loc, x):
                        out.append(self._jump(lid, draft, guard, True, label))
                elif r.mailbox:
                    seen = set()
                    for i, m in enumerate(r.mailbox):
                        if m in seen:
                            continue
                        seen.add(m)
                        draft = self._take(loc, x, i)
                        out.append(self._jump(lid, draft, None, True, f"{x} takes {m.name}"))
            return out
        for x in self.prog.physical:
            r = loc.rebecs[x]
            if not r.stmts and not r.mailbox and r.mode != NONE_MODE:
                mode = self.prog.cls_of[x].mode(r.mode)
                draft = _Draft(loc)
                draft.rebecs[x] = replace(r, stmts=mode.trigger, mode=NONE_MODE)
                guard = self.local(x, r)(mode.guard)
                out.append(self._jump(lid, draft, guard, False, f"{x} leaves {r.mode}", "leave"))
        for k, ev in enumerate(loc.events):
            draft = _Draft(loc)
            del draft.events[k]
            draft.resets[ev.timer] = Const(0.0)
            if ev.kind == "resume":
                t = draft.rebecs[ev.target]
                draft.rebecs[ev.target] = self._finish(ev.target, replace(t, suspended=False), draft)
                label = f"{ev.target} resumes"
            else:
                self._deliver(draft, ev.target, ev.message)
                label = f"{ev.message.name} reaches {ev.target}"
            guard = BinOp(">=", Var(ev.timer), Const(float(ev.low)))
            out.append(self._jump(lid, draft, guard, False, label, "event"))
        return out

    def _jump(self, lid, draft: _Draft, guard, urgent: bool, label: str, kind: str = "") -> Jump:
        target = self._intern(draft.freeze())
        resets = dict(draft.resets)
        if self.urgent(target):
            resets[URG] = Const(0.0)
        return Jump(lid, target, guard, tuple(resets.items()), urgent, label, kind)

    def _finish(self, x: str, r: HARebec, draft: _Draft) -> HARebec:
        """Drop bound parameters once ``x`` has nothing left to run."""
        if r.stmts or r.suspended:
            return r
        keep = self.prog.statevars(x)
        if any(k not in keep for k in r.sigma):
            r = replace(r, sigma=r.sigma.only(keep))
        for p in self.float_params[x]:
            if self.prog.cls_of[x].var_type(p) is None:
                draft.resets.setdefault(f"{x}.{p}", Const(0.0))
        return r

    def _fresh(self, prefix: str, used: set) -> str:
        k = 0
        while f"{prefix}{k}" in used:
            k += 1
        name = f"{prefix}{k}"
        self._add_var(name)
        return name

    def _slots_in_use(self, draft: _Draft) -> set:
        used = set()
        for r in draft.rebecs.values():
            for m in r.mailbox:
                used.update(s for _, s in m.slots)
        for ev in draft.events:
            if ev.message is not None:
                used.update(s for _, s in ev.message.slots)
        used.update(v for v in draft.resets if v.startswith("slot"))
        return used

    def _deliver(self, draft: _Draft, target: str, msg: HAMessage):
        t = draft.rebecs[target]
        cap = self.prog.cls_of[target].capacity
        if len(t.mailbox) >= cap:
            raise MailboxOverflow(f"mailbox of {target} exceeds capacity {cap} ({msg.name} from {msg.sender})")
        draft.rebecs[target] = replace(t, mailbox=t.mailbox + (msg,))

    def _take(self, loc: Location, x: str, i: int) -> _Draft:
        draft = _Draft(loc)
        r = loc.rebecs[x]
        m = r.mailbox[i]
        rest = r.mailbox[:i] + r.mailbox[i + 1:]
        if m.name == "SetMode" and r.mode is not None:
            draft.rebecs[x] = replace(r, mailbox=rest, mode=dict(m.ints)["mode"])
            return draft
        srv = self.prog.cls_of[x].msgsrv(m.name)
        sigma = r.sigma.update(m.ints)
        for p, slot in m.slots:
            draft.resets[f"{x}.{p}"] = Var(slot)
            draft.resets.setdefault(slot, Const(0.0))
        draft.rebecs[x] = self._finish(x, replace(r, sigma=sigma, mailbox=rest, stmts=srv.body), draft)
        return draft

    def _exec(self, loc: Location, x: str):
        """(guard, draft, label) for each way of executing ``x``'s next statement."""
        r = loc.rebecs[x]
        head, rest = r.stmts[0], r.stmts[1:]
        ren = self.local(x, r)
        prog = self.prog

        if isinstance(head, If):
            cond = ren(head.cond)
            if not free_vars(cond):
                verdict = compare(cond, {})
                branch = head.then if verdict is TriBool.ALL_TRUE else head.orelse
                draft = _Draft(loc)
                draft.rebecs[x] = self._finish(x, replace(r, stmts=tuple(branch) + rest), draft)
                return [(None, draft, f"{x} if")]
            out = []
            for g, branch in ((cond, head.then), (negate(cond), head.orelse)):
                draft = _Draft(loc)
                draft.rebecs[x] = self._finish(x, replace(r, stmts=tuple(branch) + rest), draft)
                out.append((g, draft, f"{x} if"))
            return out

        draft = _Draft(loc)
        nr = replace(r, stmts=rest)
        label = f"{x} {type(head).__name__.lower()}"
        if isinstance(head, Assign):
            if head.target in r.sigma or prog.cls_of[x].var_type(head.target) == "int":
                val = eval_expr(ren(head.expr), {})
                nr = replace(nr, sigma=nr.sigma.set(head.target, val))
            else:
                draft.resets[f"{x}.{head.target}"] = ren(head.expr)
        elif isinstance(head, Delay):
            timer = self._fresh("timer", {e.timer for e in draft.events})
            draft.events.append(PendingEvent(head.low, head.high, "resume", x, timer))
            draft.resets[timer] = Const(0.0)
            nr = replace(nr, suspended=True)
        elif isinstance(head, SetMode):
            nr = replace(nr, mode=head.mode)
        elif isinstance(head, (Send, SendSetMode)):
            target = prog.resolve(x, head.target)
            if isinstance(head, SendSetMode):
                msg = HAMessage(x, "SetMode", (("mode", head.mode),), ())
            else:
                srv = prog.cls_of[target].msgsrv(head.msg)
                ints, slots = [], []
                for p, a in zip(srv.params, head.args):
                    if p.type == "int":
                        ints.append((p.name, eval_expr(ren(a), {})))
                    else:
                        slot = self._fresh("slot", self._slots_in_use(draft))
                        draft.resets[slot] = ren(a)
                        slots.append((p.name, slot))
                msg = HAMessage(x, head.msg, tuple(ints), tuple(slots))
            draft.rebecs[x] = nr
            if head.after is None or head.after == (0.0, 0.0):
                self._deliver(draft, target, msg)
            else:
                timer = self._fresh("timer", {e.timer for e in draft.events})
                draft.events.append(PendingEvent(head.after[0], head.after[1], "transfer", target, timer, msg))
                draft.resets[timer] = Const(0.0)
            draft.rebecs[x] = self._finish(x, draft.rebecs[x], draft)
            return [(None, draft, label)]
        draft.rebecs[x] = self._finish(x, nr, draft)
        return [(None, draft, label)]

    # -- export --
    def to_json(self) -> str:
        locs = []
        for lid, loc in enumerate(self.locations):
            fl = self.flow(lid)
            locs.append({
                "id": lid,
                "urgent": self.urgent(lid),
                "rebecs": {x: {"sigma": dict(r.sigma), "stmts": print_stmts(r.stmts),
                               "suspended": r.suspended, "mode": r.mode,
                               "mailbox": [m.name for m in r.mailbox]}
                           for x, r in loc.rebecs.items()},
                "events": [{"kind": e.kind, "target": e.target, "timer": e.timer,
                            "window": [repr(e.low), repr(e.high)]} for e in loc.events],
                "flow": {v: print_expr(e) for v, e in fl.rhs},
                "invariant": print_expr(self.invariant(lid)),
            })
        jumps = [{"source": j.source, "target": j.target, "urgent": j.urgent, "label": j.label,
                  "guard": None if j.guard is None else print_expr(j.guard),
                  "resets": {v: print_expr(e) for v, e in j.resets}}
                 for lid in sorted(self._jumps) for j in self._jumps[lid]]
        return json.dumps({"variables": self.variables, "init": {
            "location": self.init_location,
            "box": {v: [repr(i.low), repr(i.high)] for v, i in self.init_box.items()}},
            "locations": locs, "jumps": jumps}, indent=1)


def translate(prog: Program, max_locations: int = DEFAULT_LOCATION_BUDGET) -> HybridAutomaton:
    return HybridAutomaton(prog, max_locations)


# -- reachability ------------------------------------------------------------------------

@dataclass
class HAReachResult:
    reached: dict  # location id -> list of boxes (each with a 'time' entry)
    exhausted: bool
    items: int
    stats: dict = field(default_factory=dict)
    switches: dict = field(default_factory=dict)  # location id -> mode-switch counts seen there

    def boxes(self):
        for lid, bs in self.reached.items():
            for b in bs:
                yield lid, b


def _box_within(small, big) -> bool:
    return all(big[v].contains(x) for v, x in small.items())


def _full(ha: HybridAutomaton, box) -> dict:
    out = dict(box)
    for v in ha.variables:
        if v not in out:
            out[v] = Interval(0.0, 0.0)
    return out


def reach_ha(ha: HybridAutomaton, horizon: float, jump_depth: int, step: float,
             max_items: int = 2_000_000) -> HAReachResult:
    """Breadth-first flowpipe exploration; only non-urgent jumps consume depth.

    Work items also count the guard-driven mode exits on their path, and boxes
    are only pruned against entries with the same count.
    """
    t0 = time.perf_counter()
    queue = deque([(ha.init_location, dict(ha.init_box), jump_depth, 0)])
    entries = defaultdict(list)
    entries[ha.init_location, 0].append(dict(ha.init_box))
    reached = defaultdict(list)
    switches = defaultdict(set)
    exhausted = True
    items = 0
    while queue:
        lid, box, j, sw = queue.popleft()
        items += 1
        if items > max_items:
            raise SemanticsError(f"hybrid reachability exceeded {max_items} work items")
        box = _full(ha, box)
        if ha.urgent(lid):
            pieces = [box]
        else:
            inv = ha.invariant(lid)
            rest = horizon - box[TIME].low
            if rest <= 0:
                b = contract(inv, box)
                pieces = [] if b is None else [b]
            else:
                segs = compute_flowpipes(ha.flow(lid), box, step, rest)
                pieces = [dict(s.box) for s in intersect_invariant(segs, inv)]
                if pieces and box[TIME].low == horizon:
                    pieces = pieces[:1]
        reached[lid].extend(pieces)
        if not pieces:
            continue
        switches[lid].add(sw)
        for jp in ha.jumps(lid):
            if not jp.urgent and j == 0:
                exhausted = False
                continue
            nj = j if jp.urgent else j - 1
            nsw = sw + 1 if jp.kind == "leave" else sw
            for piece in pieces:
                g = piece if jp.guard is None else contract(jp.guard, piece)
                if g is None:
                    continue
                nb = dict(g)
                for v, e in jp.resets:
                    nb[v] = as_interval(eval_expr(e, g))
                nb = _full(ha, nb)
                if not ha.urgent(jp.target):
                    nb = contract(ha.invariant(jp.target), nb)
                    if nb is None:
                        continue
                if nb[TIME].low > horizon:
                    continue
                seen = entries[jp.target, nsw]
                if any(_box_within(nb, e) for e in seen):
                    continue
                seen.append(nb)
                queue.append((jp.target, nb, nj, nsw))
    elapsed = time.perf_counter() - t0
    log.info("hybrid reachability: %d locations, %d items in %.2fs", len(ha.locations), items, elapsed)
    return HAReachResult(dict(reached), exhausted, items,
                         {"wall_time": elapsed, "locations": len(ha.locations)}, dict(switches))


# -- containment -------------------------------------------------------------------------

def _msg_key_tts(m):
    ints = tuple((k, v) for k, v in m.params if not isinstance(v, Interval))
    return (m.sender, m.name, ints)


def tts_signature(prog: Program, s) -> tuple:
    parts = []
    for x in prog.order:
        r = s.rebec(x)
        ints = tuple(sorted((k, v) for k, v in r.sigma.items() if not isinstance(v, Interval)))
        box = tuple(sorted(Counter(_msg_key_tts(m) for m in r.mailbox).items()))
        if isinstance(r, PhysicalState):
            parts.append((x, ints, r.stmts, False, r.mode, box))
        else:
            parts.append((x, ints, r.stmts, r.resume is not None, None, box))
    return tuple(parts)


def ha_signature(prog: Program, loc: Location) -> tuple:
    pending = defaultdict(list)
    for ev in loc.events:
        if ev.kind == "transfer":
            pending[ev.target].append(ev.message)
    parts = []
    for x in prog.order:
        r = loc.rebecs[x]
        ints = tuple(sorted(r.sigma.items()))
        box = tuple(sorted(Counter(m.key() for m in list(r.mailbox) + pending[x]).items()))
        parts.append((x, ints, r.stmts, r.suspended, r.mode, box))
    return tuple(parts)


@dataclass(frozen=True)
class Violation:
    state: int
    variable: str
    value: Interval


@dataclass
class ContainmentReport:
    checked: int
    violations: list
    single_box: int = 0
    union_cover: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {"checked": self.checked, "violations": len(self.violations),
                "single_box": self.single_box, "union_cover": self.union_cover,
                "details": [{"state": v.state, "variable": v.variable, "value": repr(v.value)}
                            for v in self.violations]}


def _covered(iv: Interval, pieces: list) -> bool:
    iv = iv.closure()
    merged = []
    for p in sorted((p.closure() for p in pieces), key=lambda p: p.low):
        if merged and p.low <= merged[-1].high:
            merged[-1] = merged[-1].hull(p)
        else:
            merged.append(p)
    return any(m.contains(iv) for m in merged)


def check_containment(prog: Program, tts, har: HAReachResult, ha: HybridAutomaton) -> ContainmentReport:
    """Check every physical interval of every TTS state against the matching HA boxes."""
    by_sig = defaultdict(list)
    for lid, b in har.boxes():
        by_sig[ha_signature(prog, ha.locations[lid])].append(b)
    report = ContainmentReport(0, [])
    for sid, s in enumerate(tts.states):
        report.checked += 1
        gt = s.gt.closure()
        cands = [b for b in by_sig.get(tts_signature(prog, s), ()) if b[TIME].closure().overlaps(gt)]
        for x in prog.physical:
            for v, iv in s.ps[x].sigma.items():
                if not isinstance(iv, Interval):
                    continue
                name = f"{x}.{v}"
                if any(b[name].contains(iv) for b in cands):
                    report.single_box += 1
                elif cands and _covered(iv, [b[name] for b in cands]):
                    report.union_cover += 1
                else:
                    report.violations.append(Violation(sid, name, iv))
    return report
