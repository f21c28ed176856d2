"""Bounded reachability over the timed transition system.

Each dequeued state is advanced to the next global-time window, its physical
rebecs are moved along their mode flowpipes, and every rebec whose guard may
hold contributes a branch that runs its trigger. The results are closed under
non-time-progress rules and stored with containment-based deduplication.
"""
from __future__ import annotations

import json
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

from .flowpipe import (
    CoverageGap, FlowpipeCache, FlowSystem, Segment, compute_flowpipes,
    intersect_invariant,
)
from .frontend.ast import free_vars
from .frontend.printer import print_stmts
from .interval import (
    Interval, TriBool, UnknownVariable, compare, contract, hull_all,
)
from .semantics import (
    DEFAULT_NTP_BUDGET, NONE_MODE, FrozenMap, GlobalState, PhysicalState,
    Program, SemanticsError, events, snap, execute_ntp, make_initial_state,
    progress_time,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnalysisConfig:
    horizon: float
    jump_depth: int = 10
    step: float = 0.5
    ntp_budget: int = DEFAULT_NTP_BUDGET
    max_states: Optional[int] = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("time horizon must be positive")
        if self.jump_depth < 0:
            raise ValueError("jump depth must be non-negative")
        if not self.step > 0:
            raise ValueError("step size must be positive")


@dataclass
class ReachResult:
    states: list
    edges: list  # (from_id, to_id, label)
    exhausted: bool
    config: AnalysisConfig
    stats: dict = field(default_factory=dict)

    @property
    def state_count(self) -> int:
        return len(self.states)


# -- deduplicating store ----------------------------------------------------------------

def _msg_shape(m) -> tuple:
    return (m.sender, m.name, tuple((k, None if isinstance(v, Interval) else v) for k, v in m.params), m.after)


def _sigma_shape(sigma) -> tuple:
    return tuple((k, None if isinstance(v, Interval) else v) for k, v in sigma.items())


def _discrete_key(s: GlobalState):
    """Everything except the interval-valued parts."""
    rs = tuple((x, _sigma_shape(r.sigma), r.stmts, r.resume is None, tuple(map(_msg_shape, r.mailbox)))
               for x, r in s.rs.items())
    ps = tuple((x, _sigma_shape(p.sigma), p.stmts, p.mode, tuple(map(_msg_shape, p.mailbox)))
               for x, p in s.ps.items())
    return rs, ps


def _intervals(s: GlobalState) -> list:
    """The interval-valued parts of ``s``, in an order fixed by its discrete key."""
    out = [s.gt]
    for table in (s.rs, s.ps):
        for r in table.values():
            out += [v for v in r.sigma.values() if isinstance(v, Interval)]
            for m in r.mailbox:
                out += [v for _, v in m.params if isinstance(v, Interval)]
                out.append(m.arrival)
            if r.resume is not None:
                out.append(r.resume)
            if isinstance(r, PhysicalState):
                out += list(r.anchor.values())
                out.append(r.anchor_time)
    return out


def contained_in(s: GlobalState, t: GlobalState) -> bool:
    """Same discrete part, and every interval of ``s`` inside the matching one of ``t``."""
    if _discrete_key(s) != _discrete_key(t):
        return False
    return all(big.contains(small) for small, big in zip(_intervals(s), _intervals(t)))


class StateStore:
    def __init__(self):
        self.states: list[GlobalState] = []
        self._by_key: dict = {}

    def insert(self, s: GlobalState) -> tuple[int, bool]:
        """Return (id, inserted); an already covered state maps to its cover."""
        bucket = self._by_key.setdefault(_discrete_key(s), [])
        for i in bucket:
            if contained_in(s, self.states[i]):
                return i, False
        self.states.append(s)
        bucket.append(len(self.states) - 1)
        return len(self.states) - 1, True


# -- physical update -----------------------------------------------------------------------

def _flow_init(prog: Program, x: str, p: PhysicalState) -> dict:
    init = dict(p.anchor)
    for k, v in p.sigma.items():
        if k not in init:
            init[k] = v
    return init


def _segments(prog: Program, x: str, p: PhysicalState, cfg: AnalysisConfig, cache: FlowpipeCache):
    cls = prog.cls_of[x]
    mode = cls.mode(p.mode)
    init = _flow_init(prog, x, p)
    horizon = cfg.horizon - p.anchor_time.low

    def compute():
        segs = compute_flowpipes(FlowSystem(mode.flows), init, cfg.step, horizon)
        return intersect_invariant(segs, mode.invariant)

    return mode, init, horizon, cache.get((cls.name, p.mode, FrozenMap(init), horizon, cfg.step), compute)


def select_segments(segs: list, elapsed: Interval) -> list:
    """Segments whose spans cover ``elapsed``; boundary-only contacts are skipped."""
    if elapsed.is_point:
        hit = [sg for sg in segs if sg.time.contains_point(elapsed.low)]
        if len(hit) < 2:
            return hit
        box = {}
        for v in hit[0].box:
            acc = hit[0].box[v]
            for sg in hit[1:]:
                acc = acc.intersect(sg.box[v]) or acc
            box[v] = acc
        return [Segment(elapsed, FrozenMap(box))]
    out = []
    for sg in segs:
        common = sg.time.intersect(elapsed)
        if common is not None and common.width > 0:
            out.append(sg)
    return out


def advance_physical(prog: Program, x: str, p: PhysicalState, gt: Interval,
                     cfg: AnalysisConfig, cache: FlowpipeCache):
    """(stay, trigger) versions of ``p`` over the window ``gt``; stay is None if infeasible."""
    if p.mode == NONE_MODE or not prog.real_vars(x):
        return p, None
    mode, init, horizon, segs = _segments(prog, x, p, cfg, cache)
    elapsed = (gt - p.anchor_time).intersect(Interval(0.0, math.inf))
    if elapsed is None:
        raise CoverageGap(f"{x}: window {gt} precedes flow start {p.anchor_time}")
    if elapsed.high > horizon * (1 + 1e-12) + 1e-12:
        raise CoverageGap(f"{x}: flowpipe horizon {horizon} does not reach {elapsed.high}")
    if elapsed.high == 0.0:
        box = contract(mode.invariant, init)
        sel = [] if box is None else [Segment(Interval(0.0, 0.0), FrozenMap(box))]
    else:
        sel = select_segments(segs, elapsed)
    if not sel:
        return None, None
    reals = prog.real_vars(x)
    sigma = p.sigma.update((v, hull_all(sg.box[v] for sg in sel)) for v in reals)
    stay = replace(p, sigma=sigma)
    hits = [b for b in (contract(mode.guard, sg.box) for sg in sel) if b is not None]
    trigger = None
    if hits:
        tsig = p.sigma.update((v, hull_all(b[v] for b in hits)) for v in reals)
        trigger = replace(p, sigma=tsig, stmts=mode.trigger, mode=NONE_MODE,
                          anchor=tsig.only(reals), anchor_time=gt.closure())
    return stay, trigger


def next_global_time(s: GlobalState, cfg: AnalysisConfig) -> Interval:
    et = events(s, extra=(snap(s.gt.high + cfg.step), cfg.horizon))
    t3 = et[0].value
    t4 = et[1].value if len(et) > 1 else None
    if t3 == s.gt.high and t4 is None:
        t4 = t3 + cfg.step
    gt = progress_time(s.gt.low, s.gt.high, t3, t4)
    if gt.high > cfg.horizon:
        return Interval(gt.low, cfg.horizon, gt.low_closed, True)
    return gt


# -- main loop ------------------------------------------------------------------------------

def analyze(prog: Program, cfg: AnalysisConfig) -> ReachResult:
    t0 = time.perf_counter()
    cache = FlowpipeCache()
    store = StateStore()
    edges = []
    queue = deque()
    exhausted = True
    for r in execute_ntp(prog, make_initial_state(prog), cfg.ntp_budget):
        sid, new = store.insert(r)
        if new:
            queue.append((sid, cfg.jump_depth))
    while queue:
        sid, j = queue.popleft()
        s = store.states[sid]
        if s.gt.low >= cfg.horizon:
            continue
        if j == 0:
            exhausted = False
            continue
        gt = next_global_time(s, cfg)
        stay_ps, triggers = {}, []
        feasible = True
        for x in prog.physical:
            stay, trig = advance_physical(prog, x, s.ps[x], gt, cfg, cache)
            if stay is None:
                feasible = False
                break
            stay_ps[x] = stay
            if trig is not None:
                triggers.append((x, trig))
        if not feasible:
            continue
        variants = [(GlobalState(s.rs, s.ps.update(stay_ps), gt), "TP")]
        for x, trig in triggers:
            variants += [(v.with_rebec(x, trig), "trigger") for v, _ in variants]
        for v, label in variants:
            for r in execute_ntp(prog, v, cfg.ntp_budget):
                rid, new = store.insert(r)
                edges.append((sid, rid, label))
                if new:
                    queue.append((rid, j - 1))
                    if cfg.max_states and len(store.states) > cfg.max_states:
                        raise SemanticsError(f"state budget {cfg.max_states} exceeded")
    elapsed = time.perf_counter() - t0
    log.info("%d states, %d edges in %.2fs", len(store.states), len(edges), elapsed)
    return ReachResult(store.states, edges, exhausted, cfg, {
        "wall_time": elapsed, "flowpipe_cache_hits": cache.hits, "flowpipe_cache_misses": cache.misses,
    })


# -- queries ------------------------------------------------------------------------------------

def flat_valuation(s: GlobalState) -> dict:
    env = {}
    for table in (s.rs, s.ps):
        for x, r in table.items():
            for k, v in r.sigma.items():
                env[f"{x}.{k}"] = v
    env["time"] = s.gt
    return env


def check_unsafe(prog: Program, result: ReachResult, predicate) -> Optional[int]:
    """Id of the first state where ``predicate`` may hold, or None."""
    declared = {f"{x}.{v.name}" for x in prog.order for v in prog.cls_of[x].statevars} | {"time"}
    unknown = sorted(free_vars(predicate) - declared)
    if unknown:
        raise UnknownVariable(", ".join(unknown))
    for i, s in enumerate(result.states):
        if compare(predicate, flat_valuation(s)) is not TriBool.ALL_FALSE:
            return i
    return None


# -- export ------------------------------------------------------------------------------------

def interval_json(iv: Interval) -> dict:
    return {"low": repr(iv.low), "high": repr(iv.high),
            "low_closed": iv.low_closed, "high_closed": iv.high_closed}


def interval_from_json(d: dict) -> Interval:
    return Interval(float(d["low"]), float(d["high"]), d["low_closed"], d["high_closed"])


def _value_json(v):
    return interval_json(v) if isinstance(v, Interval) else v


def _value_from_json(v):
    return interval_from_json(v) if isinstance(v, dict) else v


def _message_json(m) -> dict:
    return {"sender": m.sender, "name": m.name,
            "params": {k: _value_json(v) for k, v in m.params},
            "arrival": interval_json(m.arrival)}


def state_json(i: int, s: GlobalState) -> dict:
    rebecs = {}
    for x, r in s.rs.items():
        rebecs[x] = {"kind": "reactive", "sigma": {k: _value_json(v) for k, v in r.sigma.items()},
                     "stmts": print_stmts(r.stmts), "mailbox": [_message_json(m) for m in r.mailbox],
                     "resume": None if r.resume is None else interval_json(r.resume)}
    for x, p in s.ps.items():
        rebecs[x] = {"kind": "physical", "mode": p.mode,
                     "sigma": {k: _value_json(v) for k, v in p.sigma.items()},
                     "stmts": print_stmts(p.stmts), "mailbox": [_message_json(m) for m in p.mailbox]}
    return {"id": i, "gt": interval_json(s.gt), "rebecs": rebecs}


def to_json(result: ReachResult, report: Optional[dict] = None) -> str:
    cfg = result.config
    doc = {
        "config": {"horizon": repr(cfg.horizon), "jump_depth": cfg.jump_depth, "step": repr(cfg.step)},
        "exhausted": result.exhausted,
        "states": [state_json(i, s) for i, s in enumerate(result.states)],
        "edges": [{"from": a, "to": b, "label": lab} for a, b, lab in result.edges],
    }
    if report is not None:
        doc["report"] = report
    return json.dumps(doc, indent=1)


def load_json(text: str) -> dict:
    """Read an exported graph back; intervals come back as :class:`Interval`."""
    doc = json.loads(text)
    states = []
    for st in doc["states"]:
        rebecs = {}
        for x, r in st["rebecs"].items():
            rr = dict(r)
            rr["sigma"] = {k: _value_from_json(v) for k, v in r["sigma"].items()}
            rr["mailbox"] = [dict(m, arrival=interval_from_json(m["arrival"]),
                                  params={k: _value_from_json(v) for k, v in m["params"].items()})
                             for m in r["mailbox"]]
            if r.get("resume"):
                rr["resume"] = interval_from_json(r["resume"])
            rebecs[x] = rr
        states.append({"id": st["id"], "gt": interval_from_json(st["gt"]), "rebecs": rebecs})
    doc["states"] = states
    doc["edges"] = [(e["from"], e["to"], e["label"]) for e in doc["edges"]]
    return doc


def _fmt(v) -> str:
    return repr(v) if isinstance(v, Interval) else str(v)


def to_dot(result: ReachResult) -> str:
    lines = ["digraph reach {", "  node [shape=box, fontname=monospace];"]
    for i, s in enumerate(result.states):
        parts = [f"s{i}  GT={s.gt!r}"]
        for x, p in s.ps.items():
            vals = ", ".join(f"{k}={_fmt(v)}" for k, v in p.sigma.items())
            parts.append(f"{x}: {p.mode} {vals}")
        for x, r in s.rs.items():
            bits = [f"{k}={_fmt(v)}" for k, v in r.sigma.items()]
            bits += [f"{m.name}@{m.arrival!r}" for m in r.mailbox]
            if r.resume is not None:
                bits.append(f"resume@{r.resume!r}")
            if bits:
                parts.append(f"{x}: " + ", ".join(bits))
        label = "\\l".join(p.replace('"', '\\"') for p in parts) + "\\l"
        lines.append(f'  s{i} [label="{label}"];')
    for a, b, lab in result.edges:
        lines.append(f'  s{a} -> s{b} [label="{lab}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
