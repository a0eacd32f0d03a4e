"""Alarm specifications: pattern lowering and validation."""

import pytest

from fdikit.aslk import (
    BOUNDDEL,
    BOUNDED_RESPONSE,
    EPISTEMIC_BOUNDED_RESPONSE,
    EPISTEMIC_RESPONSE,
    EPISTEMIC_SAFETY,
    EXACTDEL,
    FINITEDEL,
    RESPONSE,
    SAFETY_PAST,
    AlarmSpec,
    expand_pattern,
    reachable_diameter,
    tau_of,
    validate_specs,
)
from fdikit.kernel import Cmp, Lit, VarRef, eq
from fdikit.pastltl import (
    EventAtom,
    Once,
    OnceWithin,
    PAnd,
    StatePred,
    Yesterday,
    YesterdayN,
)

BETA = StatePred(eq("x", "c"))


def spec(kind, diag, maximal, delay=2, alarm="a"):
    d = None if kind == FINITEDEL else delay
    return AlarmSpec(alarm=alarm, kind=kind, condition=BETA, delay=d, diag=diag, maximal=maximal)


# ---------------------------------------------------------------------------
# delayed conditions


def test_tau_of_each_pattern():
    assert tau_of(spec(EXACTDEL, "trace", False)) == YesterdayN(BETA, 2)
    assert tau_of(spec(BOUNDDEL, "trace", False)) == OnceWithin(BETA, 2)
    assert tau_of(spec(FINITEDEL, "trace", False)) == Once(BETA)


def test_spec_shape_validation():
    with pytest.raises(ValueError):
        AlarmSpec("a", EXACTDEL, BETA, None, "trace")
    with pytest.raises(ValueError):
        AlarmSpec("a", BOUNDDEL, BETA, -1, "trace")
    with pytest.raises(ValueError):
        AlarmSpec("a", FINITEDEL, BETA, 3, "trace")
    with pytest.raises(ValueError):
        AlarmSpec("a", "sometimes", BETA, 1, "trace")
    with pytest.raises(ValueError):
        AlarmSpec("a", FINITEDEL, BETA, None, "global")


# ---------------------------------------------------------------------------
# the twelve obligation cells, frozen


def plan_kinds(kind, diag, maximal):
    plan = expand_pattern(spec(kind, diag, maximal))
    return [(o.label, o.kind, o.delay) for o in plan.obligations]


EXPECTED_CELLS = {
    (EXACTDEL, "system", False): [
        ("correctness", SAFETY_PAST, None),
        ("completeness", SAFETY_PAST, 2),
    ],
    (EXACTDEL, "system", True): [
        ("correctness", SAFETY_PAST, None),
        ("completeness", SAFETY_PAST, 2),
        ("maximality", EPISTEMIC_SAFETY, None),
    ],
    (BOUNDDEL, "system", False): [
        ("correctness", SAFETY_PAST, None),
        ("completeness", BOUNDED_RESPONSE, 2),
    ],
    (BOUNDDEL, "system", True): [
        ("correctness", SAFETY_PAST, None),
        ("completeness", BOUNDED_RESPONSE, 2),
        ("maximality", EPISTEMIC_SAFETY, None),
    ],
    (FINITEDEL, "system", False): [
        ("correctness", SAFETY_PAST, None),
        ("completeness", RESPONSE, None),
    ],
    (FINITEDEL, "system", True): [
        ("correctness", SAFETY_PAST, None),
        ("completeness", RESPONSE, None),
        ("maximality", EPISTEMIC_SAFETY, None),
    ],
    (EXACTDEL, "trace", False): [
        ("correctness", SAFETY_PAST, None),
        ("completeness", EPISTEMIC_SAFETY, 2),
    ],
    (EXACTDEL, "trace", True): [
        ("correctness", SAFETY_PAST, None),
        ("maximality", EPISTEMIC_SAFETY, None),
    ],
    (BOUNDDEL, "trace", False): [
        ("correctness", SAFETY_PAST, None),
        ("completeness", EPISTEMIC_BOUNDED_RESPONSE, 2),
    ],
    (BOUNDDEL, "trace", True): [
        ("correctness", SAFETY_PAST, None),
        ("maximality", EPISTEMIC_SAFETY, None),
    ],
    (FINITEDEL, "trace", False): [
        ("correctness", SAFETY_PAST, None),
        ("completeness", EPISTEMIC_RESPONSE, None),
    ],
    (FINITEDEL, "trace", True): [
        ("correctness", SAFETY_PAST, None),
        ("maximality", EPISTEMIC_SAFETY, None),
    ],
}


def test_obligation_table_is_frozen():
    for (kind, diag, maximal), expected in EXPECTED_CELLS.items():
        assert plan_kinds(kind, diag, maximal) == expected, (kind, diag, maximal)


def test_every_cell_demands_correctness_first():
    for kind in (EXACTDEL, BOUNDDEL, FINITEDEL):
        for diag in ("system", "trace"):
            for maximal in (False, True):
                plan = expand_pattern(spec(kind, diag, maximal))
                assert plan.obligations[0].label == "correctness"
                assert plan.obligations[0].kind == SAFETY_PAST


def test_maximal_trace_cells_drop_separate_completeness():
    for kind in (EXACTDEL, BOUNDDEL, FINITEDEL):
        plan = expand_pattern(spec(kind, "trace", True))
        labels = [o.label for o in plan.obligations]
        assert labels == ["correctness", "maximality"]


# ---------------------------------------------------------------------------
# validation diagnostics


def test_validate_clean_specs(toy):
    specs = [
        spec(FINITEDEL, "trace", True, alarm="a_f"),
        spec(EXACTDEL, "trace", False, delay=1, alarm="a_exact"),
    ]
    assert validate_specs(specs, toy) == []


def test_validate_duplicate_and_clashing_names(toy):
    specs = [
        spec(FINITEDEL, "trace", False, alarm="a"),
        spec(FINITEDEL, "trace", False, alarm="a"),
        spec(FINITEDEL, "trace", False, alarm="x"),
        spec(FINITEDEL, "trace", False, alarm="q"),
    ]
    diags = validate_specs(specs, toy)
    messages = [(d.severity, d.alarm) for d in diags]
    assert ("error", "a") in messages  # duplicate
    assert ("error", "x") in messages  # plant variable clash
    assert ("error", "q") in messages  # reserved for the diagnoser state


def test_validate_alarm_variable_collision(toy):
    specs = [
        spec(FINITEDEL, "trace", False, alarm="b"),
        spec(FINITEDEL, "trace", False, alarm="b_neg"),
    ]
    diags = validate_specs(specs, toy)
    assert any("collides" in d.message for d in diags)


def test_validate_symbols(toy):
    bad_var = AlarmSpec("a1", FINITEDEL, StatePred(eq("ghost", 1)), None, "trace")
    bad_event = AlarmSpec(
        "a2", FINITEDEL, Yesterday(EventAtom("ghost")), None, "trace"
    )
    bad_value = AlarmSpec("a3", FINITEDEL, StatePred(eq("x", "z")), None, "trace")
    bad_order = AlarmSpec(
        "a4", FINITEDEL, StatePred(Cmp("<", VarRef("x"), Lit("b"))), None, "trace"
    )
    unguarded = AlarmSpec("a5", FINITEDEL, EventAtom("o"), None, "trace")
    diags = validate_specs([bad_var, bad_event, bad_value, bad_order, unguarded], toy)
    by_alarm = {d.alarm for d in diags if d.severity == "error"}
    assert by_alarm == {"a1", "a2", "a3", "a4", "a5"}


def test_unguarded_event_detection_through_windows(toy):
    # O <= n windows include the present, so a bare atom stays unguarded
    windowed = AlarmSpec("a6", FINITEDEL, OnceWithin(EventAtom("o"), 2), None, "trace")
    shifted = AlarmSpec(
        "a7", FINITEDEL, YesterdayN(EventAtom("o"), 1), None, "trace"
    )
    inside = AlarmSpec(
        "a8", FINITEDEL, Once(PAnd((BETA, Yesterday(EventAtom("o"))))), None, "trace"
    )
    diags = validate_specs([windowed, shifted, inside], toy)
    assert {d.alarm for d in diags if d.severity == "error"} == {"a6"}


def test_delay_warning_against_diameter(toy):
    assert reachable_diameter(toy) == 1
    long_delay = spec(EXACTDEL, "trace", False, delay=5, alarm="slow")
    diags = validate_specs([long_delay], toy)
    assert [d.severity for d in diags] == ["warning"]
    assert "diameter" in diags[0].message
