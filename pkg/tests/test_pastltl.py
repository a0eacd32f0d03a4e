"""Past-time conditions: reference semantics, desugaring, monitors."""

import pytest

from fdikit.kernel import (
    Lit,
    TracePrefix,
    compile_expr,
    eq,
    eval_expr,
    reachable_graph,
    successors,
)
from fdikit.pastltl import (
    EventAtom,
    IndexOutOfRange,
    Monitor,
    Once,
    OnceWithin,
    PAnd,
    PNot,
    POr,
    StatePred,
    UnguardedEventAtom,
    YesterdayN,
    Yesterday,
    add_observation_bit,
    attach_monitor,
    compile_monitor,
    desugar,
    eval_at,
    formula_events,
    formula_vars,
    observed_formula,
    observed_predicate,
    value_predicate,
)

from util import iter_runs, project_prefix

BETA = StatePred(eq("x", "c"))


def fault_run(toy) -> TracePrefix:
    # a -f-> c -p-> c
    return TracePrefix(toy, (("a",), ("c",), ("c",)), ("f", "p"))


# ---------------------------------------------------------------------------
# reference semantics


def test_state_predicate_reads_current_position(toy):
    pre = fault_run(toy)
    assert [eval_at(BETA, pre, i) for i in range(3)] == [False, True, True]


def test_event_atom_reads_outgoing_event(toy):
    pre = fault_run(toy)
    f_atom, p_atom = EventAtom("f"), EventAtom("p")
    assert eval_at(f_atom, pre, 0) is True
    assert eval_at(p_atom, pre, 0) is False
    assert eval_at(p_atom, pre, 1) is True
    # the event leaving the final position is unknown on a finite prefix
    assert eval_at(p_atom, pre, 2) is False


def test_yesterday_is_false_at_the_start(toy):
    pre = fault_run(toy)
    assert eval_at(Yesterday(BETA), pre, 0) is False
    assert eval_at(Yesterday(BETA), pre, 1) is False
    assert eval_at(Yesterday(BETA), pre, 2) is True


def test_once_is_reflexive(toy):
    pre = fault_run(toy)
    assert [eval_at(Once(BETA), pre, i) for i in range(3)] == [False, True, True]
    not_a = Once(StatePred(eq("x", "a")))
    assert eval_at(not_a, pre, 2) is True


def test_bounded_operators(toy):
    pre = fault_run(toy)
    assert eval_at(YesterdayN(BETA, 0), pre, 1) is True  # n=0 reads now
    assert eval_at(YesterdayN(BETA, 1), pre, 2) is True
    assert eval_at(YesterdayN(BETA, 2), pre, 1) is False  # too little past
    assert eval_at(OnceWithin(BETA, 0), pre, 0) is False  # window of one: now
    assert eval_at(OnceWithin(StatePred(eq("x", "a")), 1, ), pre, 1) is True
    assert eval_at(OnceWithin(StatePred(eq("x", "a")), 1), pre, 2) is False


def test_boolean_connectives(toy):
    pre = fault_run(toy)
    f = PAnd((BETA, PNot(Yesterday(BETA))))
    assert eval_at(f, pre, 1) is True
    assert eval_at(f, pre, 2) is False
    g = POr((Yesterday(EventAtom("f")), Yesterday(EventAtom("u"))))
    assert eval_at(g, pre, 1) is True


def test_eval_at_out_of_range(toy):
    pre = fault_run(toy)
    with pytest.raises(IndexOutOfRange):
        eval_at(BETA, pre, 3)
    with pytest.raises(IndexOutOfRange):
        eval_at(BETA, pre, -1)


def test_observed_formula_marks_observation_points(toy):
    pre = fault_run(toy)
    obs_beta = observed_formula(BETA, toy)
    # position 1 is entered by the unobservable fault, position 2 by p
    assert [eval_at(obs_beta, pre, i) for i in range(3)] == [False, False, True]


# ---------------------------------------------------------------------------
# desugaring


def test_desugar_yesterday_chain():
    assert desugar(YesterdayN(BETA, 3)) == Yesterday(Yesterday(Yesterday(BETA)))
    assert desugar(YesterdayN(BETA, 0)) == BETA


def test_desugar_once_within():
    assert desugar(OnceWithin(BETA, 2)) == POr(
        (BETA, Yesterday(BETA), Yesterday(Yesterday(BETA)))
    )
    assert desugar(OnceWithin(BETA, 0)) == BETA


def test_desugar_agrees_with_reference(toy):
    formulas = [YesterdayN(BETA, 2), OnceWithin(BETA, 1), OnceWithin(Yesterday(BETA), 2)]
    for prefix in iter_runs(toy, 4):
        for f in formulas:
            g = desugar(f)
            for i in range(len(prefix)):
                assert eval_at(f, prefix, i) == eval_at(g, prefix, i)


def test_formula_symbol_collection():
    f = PAnd((BETA, Yesterday(EventAtom("o")), Once(StatePred(eq("x", "a")))))
    assert formula_vars(f) == {"x"}
    assert formula_events(f) == {"o"}


# ---------------------------------------------------------------------------
# monitor compilation


def test_compile_once_has_single_seeded_bit(toy):
    mon = compile_monitor(Once(BETA), toy)
    assert len(mon.bits) == 1
    bit = mon.bits[0]
    assert bit.kind == "O"
    assert bit.init == eq("x", "c")  # operand value at the first position
    # output reads the accumulator or the operand right now
    taubar = compile_expr(mon.taubar, {"x": 0, bit.name: 1})
    assert taubar(("c", False)) is True
    assert taubar(("a", True)) is True
    assert taubar(("a", False)) is False


def test_monitored_toy_reachable_states(toy):
    mon = compile_monitor(Once(BETA), toy)
    monitored = attach_monitor(toy, mon)
    assert monitored.state_space_size() == 6
    g = reachable_graph(monitored)
    assert len(g.states) == 4
    assert set(g.states) == {("a", False), ("b", False), ("c", False), ("c", True)}


def test_taubar_along_fault_run(toy):
    mon = compile_monitor(Once(BETA), toy)
    monitored = attach_monitor(toy, mon)
    taubar = compile_expr(mon.taubar, monitored.var_index)
    state = (("a", False))
    values = [taubar(state)]
    for ev in ("f", "p"):
        (state,) = successors(monitored, state, ev)
        values.append(taubar(state))
    assert values == [False, True, True]


def test_yesterday_bit_latches_source_value(toy):
    mon = compile_monitor(Yesterday(BETA), toy)
    assert [b.kind for b in mon.bits] == ["Y"]
    assert mon.bits[0].init == Lit(False)
    monitored = attach_monitor(toy, mon)
    taubar = compile_expr(mon.taubar, monitored.var_index)
    state = ("a", False)
    seen = [taubar(state)]
    for ev in ("f", "p", "p"):
        (state,) = successors(monitored, state, ev)
        seen.append(taubar(state))
    assert seen == [False, False, True, True]


def test_event_atom_needs_yesterday_guard(toy):
    with pytest.raises(UnguardedEventAtom):
        compile_monitor(EventAtom("o"), toy)
    with pytest.raises(UnguardedEventAtom):
        compile_monitor(Once(EventAtom("o")), toy)
    # under a yesterday the fired event resolves the atom
    mon = compile_monitor(Yesterday(EventAtom("o")), toy)
    assert mon.bits[0].updates["o"] == Lit(True)
    assert mon.bits[0].updates["u"] == Lit(False)


def test_compile_rejects_unknown_symbols(toy):
    with pytest.raises(Exception):
        compile_monitor(StatePred(eq("ghost", 1)), toy)
    with pytest.raises(Exception):
        compile_monitor(Yesterday(EventAtom("ghost")), toy)


def test_observation_bit_tracks_last_event(toy):
    monitored = add_observation_bit(toy)
    for prefix in iter_runs(monitored, 4):
        for i, state in enumerate(prefix.states):
            expect = i > 0 and prefix.events[i - 1] in toy.observable_events
            assert state[-1] == expect
    pred = compile_expr(observed_predicate(eq("x", "c")), monitored.var_index)
    assert pred(("c", True)) is True
    assert pred(("c", False)) is False


MONITOR_CASES = [
    Once(BETA),
    Yesterday(BETA),
    YesterdayN(BETA, 2),
    OnceWithin(BETA, 2),
    Yesterday(EventAtom("o")),
    Once(Yesterday(EventAtom("f"))),
    PAnd((BETA, PNot(Yesterday(BETA)))),
    POr((Once(StatePred(eq("x", "b"))), YesterdayN(BETA, 1))),
    Once(PAnd((BETA, Yesterday(EventAtom("f"))))),
]


def test_monitor_soundness_exhaustive(toy):
    """taubar at every position of every short run equals the reference value."""
    for f in MONITOR_CASES:
        mon = compile_monitor(f, toy)
        monitored = attach_monitor(toy, mon)
        taubar = compile_expr(mon.taubar, monitored.var_index)
        desugared = desugar(f)
        for prefix in iter_runs(monitored, 5):
            plain = project_prefix(prefix, toy)
            for i in range(len(prefix)):
                assert taubar(prefix.states[i]) == eval_at(desugared, plain, i), (
                    f,
                    plain.events,
                    i,
                )


def test_value_predicate_reads_subconditions(toy):
    tau = OnceWithin(BETA, 2)
    mon = compile_monitor(tau, toy)
    monitored = attach_monitor(toy, mon)
    inner = compile_expr(value_predicate(BETA, mon), monitored.var_index)
    outer = compile_expr(value_predicate(tau, mon), monitored.var_index)
    taubar = compile_expr(mon.taubar, monitored.var_index)
    for prefix in iter_runs(monitored, 4):
        plain = project_prefix(prefix, toy)
        for i in range(len(prefix)):
            assert inner(prefix.states[i]) == eval_at(BETA, plain, i)
            assert outer(prefix.states[i]) == taubar(prefix.states[i])


def test_attach_monitor_rejects_bit_clash(toy):
    mon = compile_monitor(Once(BETA), toy)
    bad = attach_monitor(toy, mon)
    with pytest.raises(Exception):
        attach_monitor(bad, mon)  # same bit names already present
