"""Transition-system kernel: expressions, reachability, products."""

import pytest

from fdikit.kernel import (
    BOOL,
    And,
    Arith,
    Call,
    CapExceeded,
    Cmp,
    Domain,
    EmptyInit,
    EventMismatch,
    Lit,
    Lts,
    Not,
    Or,
    Rule,
    TracePrefix,
    UndeclaredSymbol,
    UnknownEvent,
    VariableClash,
    VarRef,
    async_product,
    check_deadlock_free,
    compile_expr,
    conj,
    disj,
    enumerate_states,
    eq,
    eval_expr,
    free_vars,
    iff,
    init_states,
    is_run,
    negate,
    reachable_graph,
    state_of,
    successors,
    sync_product,
)

from conftest import make_toy


# ---------------------------------------------------------------------------
# expressions


def test_eval_comparisons_and_bool_ops():
    env = {"x": "a", "n": 4}
    assert eval_expr(eq("x", "a"), env) is True
    assert eval_expr(Cmp("!=", VarRef("x"), Lit("b")), env) is True
    assert eval_expr(Cmp("<", VarRef("n"), Lit(5)), env) is True
    assert eval_expr(Cmp(">=", VarRef("n"), Lit(4)), env) is True
    assert eval_expr(Not(eq("x", "a")), env) is False
    assert eval_expr(And((eq("x", "a"), Cmp("<=", VarRef("n"), Lit(4)))), env) is True
    assert eval_expr(Or((eq("x", "b"), eq("x", "a"))), env) is True


def test_eval_arith_and_minmax():
    env = {"n": 9}
    assert eval_expr(Arith("+", VarRef("n"), Lit(1)), env) == 10
    assert eval_expr(Arith("-", VarRef("n"), Lit(4)), env) == 5
    clamp = Call("min", (Arith("+", VarRef("n"), Lit(3)), Lit(10)))
    assert eval_expr(clamp, env) == 10
    assert eval_expr(Call("max", (Arith("-", VarRef("n"), Lit(12)), Lit(0))), env) == 0


def test_compile_expr_agrees_with_eval(toy):
    exprs = [
        eq("x", "a"),
        Not(eq("x", "b")),
        Or((eq("x", "b"), eq("x", "c"))),
        And((Lit(True), Not(eq("x", "c")))),
    ]
    idx = toy.var_index
    for e in exprs:
        f = compile_expr(e, idx)
        for s in enumerate_states(toy):
            assert f(s) == eval_expr(e, toy.assignment(s))


def test_smart_constructors_simplify():
    a = eq("x", "a")
    assert conj() == Lit(True)
    assert disj() == Lit(False)
    assert conj(a) is a
    assert conj(a, Lit(False)) == Lit(False)
    assert disj(a, Lit(True)) == Lit(True)
    assert negate(negate(a)) is a
    assert eval_expr(iff(Lit(True), Lit(False)), {}) is False


def test_free_vars():
    e = And((eq("x", "a"), Cmp("<", VarRef("n"), Arith("+", VarRef("m"), Lit(1)))))
    assert free_vars(e) == {"x", "n", "m"}


def test_eval_undeclared_variable_raises():
    with pytest.raises(UndeclaredSymbol):
        eval_expr(eq("ghost", 1), {})


# ---------------------------------------------------------------------------
# construction-time validation


def test_lts_rejects_undeclared_symbols():
    dom = Domain("x", ("a", "b"))
    with pytest.raises(UndeclaredSymbol):
        Lts("bad", (("x", dom),), (("e", True),), eq("y", "a"), ())
    with pytest.raises(UndeclaredSymbol):
        Lts(
            "bad",
            (("x", dom),),
            (("e", True),),
            eq("x", "a"),
            (("e", (Rule(eq("x", "a"), (("y", Lit("b")),)),)),),
        )
    with pytest.raises(UnknownEvent):
        Lts("bad", (("x", dom),), (("e", True),), eq("x", "a"), (("g", ()),))


def test_empty_domain_rejected():
    with pytest.raises(Exception):
        Domain("x", ())


# ---------------------------------------------------------------------------
# toy plant: frozen hand-derived facts


def test_toy_state_space(toy):
    assert toy.state_space_size() == 3
    assert list(enumerate_states(toy)) == [("a",), ("b",), ("c",)]


def test_toy_successor_table(toy):
    # (state, event) -> successor states, worked out by hand from the rules
    expected = {
        (("a",), "u"): [("b",)],
        (("a",), "f"): [("c",)],
        (("a",), "o"): [],
        (("a",), "p"): [],
        (("b",), "o"): [("b",)],
        (("b",), "u"): [],
        (("c",), "p"): [("c",)],
        (("c",), "f"): [],
    }
    for (state, ev), succ in expected.items():
        assert successors(toy, state, ev) == succ


def test_toy_reachable_graph(toy):
    g = reachable_graph(toy)
    assert [toy.assignment(s)["x"] for s in g.states] == ["a", "b", "c"]
    assert g.initial == (0,)
    assert g.succ == {
        (0, "u"): (1,),
        (0, "f"): (2,),
        (1, "o"): (1,),
        (2, "p"): (2,),
    }
    assert g.deadlocks == frozenset()


def test_successors_unknown_event(toy):
    with pytest.raises(UnknownEvent):
        successors(toy, ("a",), "nope")


def test_reachable_cap(toy):
    with pytest.raises(CapExceeded):
        reachable_graph(toy, cap=2)


def test_empty_init_raises(toy):
    broken = Lts(
        name="broken",
        vars=toy.vars,
        events=toy.events,
        init=conj(eq("x", "a"), eq("x", "b")),
        rules=toy.rules,
    )
    with pytest.raises(EmptyInit):
        reachable_graph(broken)


def test_init_states_decomposes_independent_vars():
    d1 = Domain("x", ("a", "b"))
    d2 = Domain("n", tuple(range(4)))
    lts = Lts(
        name="pair",
        vars=(("x", d1), ("n", d2)),
        events=(("e", True),),
        init=conj(eq("x", "a"), Cmp("<", VarRef("n"), Lit(2))),
        rules=(("e", (Rule(Lit(True), ()),)),),
    )
    assert init_states(lts) == [("a", 0), ("a", 1)]


def test_out_of_domain_update_disables_rule():
    dom = Domain("n", tuple(range(3)))
    lts = Lts(
        name="count",
        vars=(("n", dom),),
        events=(("inc", True),),
        init=eq("n", 0),
        rules=(("inc", (Rule(Lit(True), (("n", Arith("+", VarRef("n"), Lit(1))),)),)),),
    )
    assert successors(lts, (2,), "inc") == []
    ok, witness = check_deadlock_free(lts)
    assert not ok and witness == {"n": 2}


def test_multiple_rules_union_gives_nondeterminism():
    dom = Domain("x", ("a", "b", "c"))
    lts = Lts(
        name="split",
        vars=(("x", dom),),
        events=(("e", True),),
        init=eq("x", "a"),
        rules=(
            (
                "e",
                (
                    Rule(eq("x", "a"), (("x", Lit("b")),)),
                    Rule(eq("x", "a"), (("x", Lit("c")),)),
                ),
            ),
        ),
    )
    assert successors(lts, ("a",), "e") == [("b",), ("c",)]


# ---------------------------------------------------------------------------
# products


def _toggle_observer() -> Lts:
    """Same alphabet as toy; flips a bit on every event."""
    flip = (("y", Arith("-", Lit(1), VarRef("y"))),)
    rules = tuple((ev, (Rule(Lit(True), flip),)) for ev in ("u", "f", "o", "p"))
    return Lts(
        name="toggle",
        vars=(("y", Domain("y", (0, 1))),),
        events=(("u", False), ("f", False), ("o", True), ("p", True)),
        init=eq("y", 0),
        rules=rules,
    )


def test_sync_product_toy_with_toggle(toy):
    prod = sync_product(toy, _toggle_observer())
    assert prod.state_space_size() == 6
    g = reachable_graph(prod)
    reached = {(toy_s, y) for toy_s, y in g.states}
    # hand exploration: (a,0) -u/f-> (b,1)/(c,1); observable loops flip y
    assert reached == {("a", 0), ("b", 1), ("b", 0), ("c", 1), ("c", 0)}


def test_sync_product_requires_same_alphabet(toy):
    other = Lts(
        name="other",
        vars=(("z", Domain("z", (0, 1))),),
        events=(("g", True),),
        init=eq("z", 0),
        rules=(("g", (Rule(Lit(True), ()),)),),
    )
    with pytest.raises(EventMismatch):
        sync_product(toy, other)


def test_products_reject_variable_clash(toy):
    clone = make_toy()
    with pytest.raises(VariableClash):
        sync_product(toy, clone)
    with pytest.raises(VariableClash):
        async_product(toy, clone)


def test_async_product_local_events_frame_other_side(toy):
    ticker = Lts(
        name="ticker",
        vars=(("z", Domain("z", (0, 1))),),
        events=(("g", True),),
        init=eq("z", 0),
        rules=(("g", (Rule(Lit(True), (("z", Arith("-", Lit(1), VarRef("z"))),)),)),),
    )
    prod = async_product(toy, ticker)
    assert set(prod.event_names) == {"u", "f", "o", "p", "g"}
    # g leaves the toy component untouched, toy events leave z untouched
    assert successors(prod, ("a", 0), "g") == [("a", 1)]
    assert successors(prod, ("a", 0), "u") == [("b", 0)]


def test_async_product_shared_events_synchronise(toy):
    obs = _toggle_observer()
    sync_g = reachable_graph(sync_product(toy, obs))
    async_g = reachable_graph(async_product(toy, obs))
    # identical alphabets: the two compositions coincide
    assert set(sync_g.states) == set(async_g.states)
    assert sync_g.succ == async_g.succ


def test_async_product_conflicting_observability():
    a = Lts(
        "a",
        (("x", Domain("x", (0, 1))),),
        (("e", True),),
        eq("x", 0),
        (("e", (Rule(Lit(True), ()),)),),
    )
    b = Lts(
        "b",
        (("y", Domain("y", (0, 1))),),
        (("e", False),),
        eq("y", 0),
        (("e", (Rule(Lit(True), ()),)),),
    )
    with pytest.raises(EventMismatch):
        async_product(a, b)


# ---------------------------------------------------------------------------
# trace prefixes


def test_trace_prefix_shape(toy):
    with pytest.raises(Exception):
        TracePrefix(toy, (("a",),), ("u",))
    pre = TracePrefix(toy, (("a",), ("b",)), ("u",))
    assert len(pre) == 2
    assert pre.assignment(1) == {"x": "b"}


def test_is_run(toy):
    good = TracePrefix(toy, (("a",), ("b",), ("b",)), ("u", "o"))
    bad_step = TracePrefix(toy, (("a",), ("c",)), ("u",))
    bad_init = TracePrefix(toy, (("b",), ("b",)), ("o",))
    assert is_run(toy, good)
    assert not is_run(toy, bad_step)
    assert not is_run(toy, bad_init)


def test_state_of_roundtrip(toy):
    s = state_of(toy, {"x": "b"})
    assert toy.assignment(s) == {"x": "b"}


def test_bool_domain_is_shared():
    assert BOOL.values == (False, True)
    assert BOOL.index(True) == 1
