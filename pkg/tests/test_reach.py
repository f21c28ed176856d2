import json
from dataclasses import replace

import pytest

from hrebeca.frontend import parse_expression
from hrebeca.interval import Interval, UnknownVariable
from hrebeca.reach import (
    AnalysisConfig, StateStore, analyze, check_unsafe, load_json, next_global_time, to_dot, to_json,
)
from hrebeca.semantics import Program, make_initial_state


@pytest.fixture(scope="module")
def run3(heater):
    return analyze(heater, AnalysisConfig(3.0, 10, 0.5))


def test_config_validation():
    for bad in (dict(horizon=0), dict(horizon=1, step=0), dict(horizon=1, jump_depth=-1)):
        with pytest.raises(ValueError):
            AnalysisConfig(**bad)


def test_time_chain_before_first_guard(heater):
    r = analyze(heater, AnalysisConfig(0.9, 10, 0.5))
    assert [s.gt for s in r.states] == [Interval(0, 0), Interval(0, 0.5, True, False),
                                        Interval(0.5, 0.9, True, False), Interval(0.9, 0.9)]
    assert [lab for _, _, lab in r.edges] == ["TP", "TP", "TP"]


def test_first_steps_of_worked_example(run3):
    s = run3.states
    assert s[0].ps["hws"].sigma["temp"] == Interval(20, 20) and s[0].ps["hws"].mode == "off"
    assert s[1].gt == Interval(0, 0.5, True, False)
    assert s[2].gt == Interval(0.5, 1, True, False)
    modes = {x.ps["hws"].mode for x in s if x.gt == Interval(1, 1.5, True, False)}
    assert modes == {"off", "on"}


def test_notify_consume_postpone_split(run3):
    # some state holds a notify whose arrival straddles GT.high, and its successors split
    split = False
    for i, s in enumerate(run3.states):
        mail = s.rs["a"].mailbox
        if mail and mail[0].arrival.high > s.gt.high:
            succ = [run3.states[b] for a, b, _ in run3.edges if a == i]
            split = split or any(not t.rs["a"].mailbox for t in succ)
    assert split


def test_bounds(run3, heater):
    cfg = run3.config
    for s in run3.states:
        assert 0 <= s.gt.low and s.gt.high <= cfg.horizon
    for a, b, lab in run3.edges:
        assert lab in ("TP", "trigger") and 0 <= a < run3.state_count and 0 <= b < run3.state_count
    # every stored state is within J time-progress rounds of the seed
    depth = {0: 0}
    frontier = [0]
    while frontier:
        nxt = []
        for a, b, _ in run3.edges:
            if a in frontier and b not in depth:
                depth[b] = depth[a] + 1
                nxt.append(b)
        frontier = nxt
    assert len(depth) == run3.state_count and max(depth.values()) <= cfg.jump_depth


def test_jump_depth_zero_stops_immediately(heater):
    r = analyze(heater, AnalysisConfig(3.0, 0, 0.5))
    assert r.state_count == 1 and not r.exhausted


def test_determinism(heater):
    a = analyze(heater, AnalysisConfig(3.0, 10, 0.5))
    b = analyze(heater, AnalysisConfig(3.0, 10, 0.5))
    assert a.states == b.states and a.edges == b.edges
    assert to_dot(a) == to_dot(b)


def test_dedup_policy(heater):
    store = StateStore()
    s = make_initial_state(heater).with_gt(Interval(1, 2))
    assert store.insert(s) == (0, True)
    assert store.insert(s) == (0, False)
    p = s.ps["hws"]
    wide = replace(p, sigma=p.sigma.set("temp", Interval(18, 19)))
    narrow = replace(p, sigma=p.sigma.set("temp", Interval(18.2, 18.8)))
    store = StateStore()
    store.insert(s.with_rebec("hws", wide))
    assert store.insert(s.with_rebec("hws", narrow))[1] is False
    assert store.insert(s.with_rebec("hws", replace(narrow, mode="on")))[1] is True
    assert store.insert(s.with_rebec("hws", wide).with_gt(Interval(1, 1.5)))[1] is False


def test_next_global_time_pads_with_step(heater):
    s = make_initial_state(heater)
    assert next_global_time(s, AnalysisConfig(3.0)) == Interval(0, 0.5, True, False)
    assert next_global_time(s.with_gt(Interval(2.5, 2.9, True, False)), AnalysisConfig(3.0)) == Interval(2.9, 3.0, True, False)
    assert next_global_time(s.with_gt(Interval(2.9, 3.0, True, False)), AnalysisConfig(3.0)) == Interval(3.0, 3.0)


def test_unsafe_queries(heater, run3):
    assert check_unsafe(heater, run3, parse_expression("hws.temp < 17")) is None
    hit = check_unsafe(heater, run3, parse_expression("hws.temp < 18.5"))
    assert hit is not None
    t = run3.states[hit].ps["hws"].sigma["temp"]
    assert t.low < 18.5
    assert check_unsafe(heater, run3, parse_expression("false")) is None
    with pytest.raises(UnknownVariable):
        check_unsafe(heater, run3, parse_expression("hws.pressure > 1"))


def test_json_round_trip(run3):
    text = to_json(run3, {"verdict": "NoPredicate"})
    doc = load_json(text)
    assert len(doc["states"]) == run3.state_count
    assert doc["edges"] == [tuple(e) for e in run3.edges]
    for st, s in zip(doc["states"], run3.states):
        assert st["gt"] == s.gt
        assert st["rebecs"]["hws"]["sigma"]["temp"] == s.ps["hws"].sigma["temp"]
        for m, orig in zip(st["rebecs"]["a"]["mailbox"], s.rs["a"].mailbox):
            assert m["arrival"] == orig.arrival
    # endpoints travel as decimal strings
    raw = json.loads(text)
    assert isinstance(raw["states"][0]["gt"]["low"], str)


def test_dot_export(run3):
    dot = to_dot(run3)
    assert dot.startswith("digraph") and dot.count("->") == len(run3.edges)
    assert "s0 " in dot and "temp=[20.0, 20.0]" in dot


def test_single_state_dot():
    prog = Program.from_text("reactiveclass A(1) { msgsrv A() { } } main { A a():(); }")
    r = analyze(prog, AnalysisConfig(1.0, 0, 0.5))
    dot = to_dot(r)
    assert dot.count("label=") == 1 and "->" not in dot
