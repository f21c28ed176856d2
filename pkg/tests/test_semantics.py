import random
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrebeca.frontend.ast import Delay, Send
from hrebeca.interval import Interval
from hrebeca.semantics import (
    MailboxOverflow, Message, PreconditionViolated, Program, StateExplosion,
    apply_resume, apply_take_message, events, exec_statement, execute_ntp, is_quiescent,
    make_initial_state, progress_time,
)

from randmodels import check_model

NOTIFY_SEND = Send("a", "notify", (), (0.3, 0.5))


def at(s, gt):
    return s.with_gt(gt)


def iv(lo, hi, lc=True, hc=False):
    return Interval(lo, hi, lc, hc)


def same(a: Interval, b: Interval):
    return a.low == pytest.approx(b.low, abs=1e-9) and a.high == pytest.approx(b.high, abs=1e-9) \
        and (a.low_closed, a.high_closed) == (b.low_closed, b.high_closed)


def with_notify(heater, gt, arrival):
    s = at(make_initial_state(heater), gt)
    msg = Message("c", "notify", (), arrival, Interval(arrival.low - 0.3, arrival.high - 0.5, True, False),
                  (0.3, 0.5))
    return s.with_rebec("a", replace(s.rs["a"], mailbox=(msg,)))


# -- initial state -------------------------------------------------------------------------

def test_initial_state(heater):
    s = make_initial_state(heater)
    assert s.gt == Interval(0, 0)
    assert s.ps["hws"].sigma["temp"] == Interval(20, 20)
    assert s.ps["hws"].mode == "off"
    assert s.message_count() == 0
    assert execute_ntp(heater, s) == [s]


def test_constructor_self_send_lands_at_zero():
    prog = Program.from_text("""
reactiveclass A(2) { statevars { int n; } msgsrv A() { self.go(); } msgsrv go() { n = 1; } }
main { A a():(); }""")
    s = make_initial_state(prog)
    (m,) = s.rs["a"].mailbox
    assert m.name == "go" and m.arrival == Interval(0, 0)


# -- take / postpone ---------------------------------------------------------------------------

def test_take_consume_and_postpone(heater):
    s = with_notify(heater, iv(1.3, 2.3), iv(1.3, 2.5))
    consumed, postponed = apply_take_message(heater, s, "a", 0)
    assert consumed.rs["a"].mailbox == () and consumed.rs["a"].stmts
    assert same(postponed.rs["a"].mailbox[0].arrival, iv(2.3, 2.5))


def test_take_without_postpone():
    prog = Program.from_text("""
reactiveclass A(2) { statevars { int n; } msgsrv A() { } msgsrv go() { n = 1; } }
main { A a():(); }""")
    s = at(make_initial_state(prog), iv(2, 3))
    msg = Message("a", "go", (), Interval(0, 1), Interval(0, 1))
    s = s.with_rebec("a", replace(s.rs["a"], mailbox=(msg,)))
    assert len(apply_take_message(prog, s, "a", 0)) == 1


def test_take_preconditions(heater):
    s = make_initial_state(heater)
    with pytest.raises(PreconditionViolated):
        apply_take_message(heater, s, "a", 0)
    early = with_notify(heater, iv(1.0, 1.2), iv(1.3, 2.5))
    with pytest.raises(PreconditionViolated):
        apply_take_message(heater, early, "a", 0)


# -- resume ------------------------------------------------------------------------------------

def test_resume_split(heater):
    s = at(make_initial_state(heater), iv(1.5, 2.5))
    s = s.with_rebec("a", replace(s.rs["a"], resume=iv(1.5, 2.7)))
    resumed, postponed = apply_resume(heater, s, "a")
    assert resumed.rs["a"].resume is None
    assert same(postponed.rs["a"].resume, iv(2.5, 2.7))


def test_resume_only(heater):
    s = at(make_initial_state(heater), iv(1, 2))
    s = s.with_rebec("a", replace(s.rs["a"], resume=iv(1, 1.5)))
    assert len(apply_resume(heater, s, "a")) == 1


def test_resume_not_suspended(heater):
    with pytest.raises(PreconditionViolated):
        apply_resume(heater, make_initial_state(heater), "a")


# -- statements --------------------------------------------------------------------------------

def test_send_after_window(heater):
    s = at(make_initial_state(heater), iv(1, 2))
    s = s.with_rebec("c", replace(s.rs["c"], stmts=(NOTIFY_SEND,)))
    (t,) = exec_statement(heater, s, "c")
    (m,) = t.rs["a"].mailbox
    assert same(m.arrival, iv(1.3, 2.5))


def test_delay_sets_resume(heater):
    s = at(make_initial_state(heater), iv(1.3, 2.3))
    s = s.with_rebec("a", replace(s.rs["a"], stmts=(Delay(0.2, 0.4),)))
    (t,) = exec_statement(heater, s, "a")
    assert same(t.rs["a"].resume, iv(1.5, 2.7))


def test_conditional_mixed_branches(heater):
    ctl = heater.cls_of["c"].msgsrv("control")
    s = at(make_initial_state(heater), iv(1, 2))
    r = replace(s.rs["c"], sigma=s.rs["c"].sigma.set("t", Interval(18, 19, False, True)), stmts=ctl.body)
    succ = exec_statement(heater, s.with_rebec("c", r), "c")
    assert len(succ) == 2
    quiet = [q for v in succ for q in execute_ntp(heater, v)]
    assert sorted(q.message_count() for q in quiet) == [0, 1]
    (sent,) = [q for q in quiet if q.message_count()]
    assert same(sent.rs["a"].mailbox[0].arrival, iv(1.3, 2.5))


def test_conditional_determined(heater):
    ctl = heater.cls_of["c"].msgsrv("control")
    s = make_initial_state(heater)
    r = replace(s.rs["c"], sigma=s.rs["c"].sigma.set("t", Interval(17, 18)), stmts=ctl.body)
    (t,) = exec_statement(heater, s.with_rebec("c", r), "c")
    assert isinstance(t.rs["c"].stmts[0], Send)


def test_sequential_assignments():
    prog = Program.from_text("""
reactiveclass A(2) { statevars { int n; int m; } msgsrv A() { } msgsrv go() { n = 2; m = n * 3; } }
main { A a():(); }""")
    s = make_initial_state(prog)
    s = s.with_rebec("a", replace(s.rs["a"], stmts=prog.cls_of["a"].msgsrv("go").body))
    (q,) = execute_ntp(prog, s)
    assert dict(q.rs["a"].sigma) == {"n": 2, "m": 6}


def test_mailbox_overflow():
    prog = Program.from_text("""
reactiveclass A(1) { statevars { int n; } msgsrv A() { self.go() after(1, 1); self.go() after(1, 1); } msgsrv go() { } }
main { A a():(); }""")
    with pytest.raises(MailboxOverflow):
        make_initial_state(prog)


def test_ntp_budget_guards_zeno_loops():
    prog = Program.from_text("""
reactiveclass A(2) { statevars { int n; } msgsrv A() { self.go(); } msgsrv go() { n = n + 1; self.go(); } }
main { A a():(); }""")
    with pytest.raises(StateExplosion):
        execute_ntp(prog, make_initial_state(prog), budget=500)


def test_setmode_message_switches_mode(heater):
    s = make_initial_state(heater)
    msg = Message("c", "SetMode", (("mode", "on"),), Interval(0, 0), Interval(0, 0))
    s = s.with_rebec("hws", replace(s.ps["hws"], mailbox=(msg,)))
    (t,) = apply_take_message(heater, s, "hws", 0)
    assert t.ps["hws"].mode == "on" and not t.ps["hws"].stmts


# -- events and time progress --------------------------------------------------------------------

def test_events_examples(heater):
    s = with_notify(heater, iv(1, 1.3), iv(1.3, 2.5))
    assert [e.value for e in events(s)] == [1.3, 2.5]
    assert events(make_initial_state(heater)) == []
    s = make_initial_state(heater)
    mail = (Message("c", "notify", (), Interval(1, 2), Interval(1, 2)),
            Message("c", "notify", (), Interval(1, 3), Interval(1, 3)))
    s = s.with_rebec("a", replace(s.rs["a"], mailbox=mail))
    assert [e.value for e in events(s)] == [1, 2, 3]


def test_progress_time_examples():
    assert progress_time(0, 1, 1, 2) == iv(1, 2)
    r = progress_time(1, 2, 1.3, 2.5)
    assert same(r, iv(1.3, 2.3))
    assert progress_time(0, 1, 3, 5) == iv(1, 3)
    with pytest.raises(PreconditionViolated):
        progress_time(1, 2, 0.5, 3)


def reference_progress(t1, t2, t3, t4):
    """The three-case formula over exact rationals."""
    t1, t2, t3, t4 = map(Fraction, (t1, t2, t3, t4))
    if t3 < t2:
        return t3, t2 + (t3 - t1)
    if t3 > t2:
        return t2, t3
    return t3, t4


def random_progress_tuples(n=50, seed=7):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        t1 = rng.randint(0, 40) / 10
        t2 = t1 + rng.randint(0, 10) / 10
        t3 = rng.choice((t2, t1 + rng.randint(0, 20) / 10))
        t3 = round(max(t3, t1), 1)
        t4 = round(t3 + rng.randint(1, 10) / 10, 1)
        out.append((round(t1, 1), round(t2, 1), t3, t4))
    return out


@pytest.mark.parametrize("t", random_progress_tuples())
def test_progress_time_matches_formula(t):
    lo, hi = reference_progress(*t)
    got = progress_time(*t)
    # decimal inputs: compare against the rational result read back at 12 places
    assert (got.low, got.high) == (float(round(lo, 12)), float(round(hi, 12)))
    assert got.low_closed and not got.high_closed


# -- properties over random small models ------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_transition_properties(seed):
    bad, _ = check_model(seed)
    assert bad == []


def test_quiescent_states_really_are(heater):
    s = with_notify(heater, iv(1.3, 2.3), iv(1.3, 2.5))
    for q in execute_ntp(heater, s):
        assert is_quiescent(heater, q)
