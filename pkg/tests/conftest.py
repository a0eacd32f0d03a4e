"""Shared model fixtures.

``toy`` is the running four-event example: one fault branch and one nominal
branch, distinguishable only through the observable self-loop each branch
enables.  Everything about it is small enough to check by hand, which makes
it the anchor for frozen expected values throughout the suite.

``masked`` is the same shape with a single shared observable, so the two
branches can never be told apart.  ``delay`` stretches the fault branch so
that alarms with different delay budgets fire at different points.  ``twin``
has two unobservable branches that either merge into one observable stream
(confusable) or keep separate observables (split variant, distinguishable).
"""

import random

import pytest

from fdikit.aslk import BOUNDDEL, EXACTDEL, FINITEDEL, AlarmSpec
from fdikit.kernel import Domain, Lit, Lts, Rule, eq
from fdikit.pastltl import StatePred


def make_toy() -> Lts:
    dom = Domain("x", ("a", "b", "c"))
    return Lts(
        name="toy",
        vars=(("x", dom),),
        events=(("u", False), ("f", False), ("o", True), ("p", True)),
        init=eq("x", "a"),
        rules=(
            ("u", (Rule(eq("x", "a"), (("x", Lit("b")),)),)),
            ("f", (Rule(eq("x", "a"), (("x", Lit("c")),)),)),
            ("o", (Rule(eq("x", "b"), (("x", Lit("b")),)),)),
            ("p", (Rule(eq("x", "c"), (("x", Lit("c")),)),)),
        ),
    )


def make_masked() -> Lts:
    """Like ``toy`` but both branches loop on the same observable event."""
    dom = Domain("x", ("a", "b", "c"))
    return Lts(
        name="masked",
        vars=(("x", dom),),
        events=(("u", False), ("f", False), ("o", True)),
        init=eq("x", "a"),
        rules=(
            ("u", (Rule(eq("x", "a"), (("x", Lit("b")),)),)),
            ("f", (Rule(eq("x", "a"), (("x", Lit("c")),)),)),
            ("o", (
                Rule(eq("x", "b"), (("x", Lit("b")),)),
                Rule(eq("x", "c"), (("x", Lit("c")),)),
            )),
        ),
    )


def make_delay() -> Lts:
    """A fault branch that keeps emitting after the fault location passes.

    The fault location f1 is left one observable step after entering it, so
    conditions about it become true, stay within a short window, and then
    age out; the nominal branch loops on its own observable.
    """
    dom = Domain("x", ("a", "f1", "f2", "g1"))
    return Lts(
        name="delay",
        vars=(("x", dom),),
        events=(("fault", False), ("skip", False), ("o", True), ("r", True)),
        init=eq("x", "a"),
        rules=(
            ("fault", (Rule(eq("x", "a"), (("x", Lit("f1")),)),)),
            ("skip", (Rule(eq("x", "a"), (("x", Lit("g1")),)),)),
            ("o", (
                Rule(eq("x", "f1"), (("x", Lit("f2")),)),
                Rule(eq("x", "f2"), (("x", Lit("f2")),)),
            )),
            ("r", (Rule(eq("x", "g1"), (("x", Lit("g1")),)),)),
        ),
    )


def make_twin(split: bool = False) -> Lts:
    """Two unobservable branches that merge into an observable loop.

    With ``split`` the right branch announces itself through its own
    observable event before merging, which makes the branches separable.
    """
    dom = Domain("x", ("a", "l", "r", "z"))
    events = [("u1", False), ("u2", False), ("o", True)]
    merge = [
        Rule(eq("x", "l"), (("x", Lit("z")),)),
        Rule(eq("x", "z"), (("x", Lit("z")),)),
    ]
    rules = [
        ("u1", (Rule(eq("x", "a"), (("x", Lit("l")),)),)),
        ("u2", (Rule(eq("x", "a"), (("x", Lit("r")),)),)),
    ]
    if split:
        events.append(("o2", True))
        rules.append(("o", tuple(merge)))
        rules.append(("o2", (Rule(eq("x", "r"), (("x", Lit("z")),)),)))
    else:
        merge.append(Rule(eq("x", "r"), (("x", Lit("z")),)))
        rules.append(("o", tuple(merge)))
    return Lts(
        name="twin_split" if split else "twin",
        vars=(("x", dom),),
        events=tuple(events),
        init=eq("x", "a"),
        rules=tuple(rules),
    )


def make_random_plant(
    rng: random.Random,
    *,
    max_states: int = 8,
    max_extra_events: int = 4,
    max_obs: int = 2,
    unobs_forward_only: bool = False,
    all_observable: bool = False,
) -> Lts:
    """A small random plant over a single variable ``x``.

    Every plant carries a ``step`` event: an observable self-loop enabled
    everywhere, so runs never deadlock and observations keep flowing no
    matter what the random edges do.  The remaining events each get a
    handful of random src -> dst moves.  ``max_obs`` bounds the total
    number of observable events (``step`` included).  With
    ``unobs_forward_only`` unobservable edges only move to strictly higher
    state indices, which rules out unobservable cycles.  With
    ``all_observable`` every event is observable and ``max_obs`` is
    ignored.
    """
    n = rng.randint(2, max_states)
    values = tuple(f"s{i}" for i in range(n))
    k = rng.randint(1, max_extra_events)
    names = [f"e{i}" for i in range(k)]
    if all_observable:
        observable = set(names)
    else:
        observable = set(rng.sample(names, rng.randint(0, min(max_obs - 1, k))))
    events = [("step", True)] + [(e, e in observable) for e in names]
    rules = [("step", (Rule(Lit(True), ()),))]
    for e in names:
        group = []
        for _ in range(rng.randint(1, n)):
            if unobs_forward_only and e not in observable:
                src = rng.randrange(n - 1)
                dst = rng.randrange(src + 1, n)
            else:
                src = rng.randrange(n)
                dst = rng.randrange(n)
            group.append(Rule(eq("x", values[src]), (("x", Lit(values[dst])),)))
        rules.append((e, tuple(group)))
    return Lts(
        name=f"rand{n}",
        vars=(("x", Domain("x", values)),),
        events=tuple(events),
        init=eq("x", values[0]),
        rules=tuple(rules),
    )


def make_random_specs(rng: random.Random, lts: Lts, *, n_specs=None, diag="trace"):
    """Random alarm specs over the plant's single variable ``x``."""
    values = lts.domain_of["x"].values
    count = n_specs if n_specs is not None else rng.randint(1, 3)
    specs = []
    for i in range(count):
        kind = rng.choice((EXACTDEL, BOUNDDEL, FINITEDEL))
        specs.append(
            AlarmSpec(
                alarm=f"a{i}",
                kind=kind,
                condition=StatePred(eq("x", rng.choice(values))),
                delay=None if kind == FINITEDEL else rng.randint(0, 2),
                diag=diag,
                maximal=rng.random() < 0.5,
            )
        )
    return specs


@pytest.fixture
def toy() -> Lts:
    return make_toy()


@pytest.fixture
def masked() -> Lts:
    return make_masked()


@pytest.fixture
def delay() -> Lts:
    return make_delay()
