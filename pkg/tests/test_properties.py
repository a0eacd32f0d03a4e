"""Randomised invariants of the synthesis and verification pipeline.

Every property here is a construction guarantee: whatever plant and trace
specs we draw, the synthesized diagnoser must come out deterministic, its
annotations must agree with the knowledge oracle, and every obligation its
own verifier can state must hold.  The plants come from
``conftest.make_random_plant``, which keeps them small enough that each
example stays in the millisecond range.
"""

import random

from hypothesis import given, settings, strategies as st

from fdikit.cli import format_model, parse_model
from fdikit.epistemic import Knowledge, is_obs_point, knows_bruteforce, obs_projection
from fdikit.kernel import TracePrefix
from fdikit.synth import emit_diagnoser, synthesize, u_closure
from fdikit.verify import check_determinism, verify_diagnoser

from conftest import make_random_plant, make_random_specs

seeds = st.integers(min_value=0, max_value=10**6)


def drawn(seed: int, **kw):
    rng = random.Random(seed)
    plant = make_random_plant(rng, **kw)
    specs = make_random_specs(rng, plant)
    return plant, specs


def walk_prefixes(graph, max_events: int, cap: int):
    """Deterministic BFS enumeration of runs, as (node path, event path)."""
    frontier = [((sid,), ()) for sid in graph.initial]
    out = list(frontier)
    for _ in range(max_events):
        nxt = []
        for nodes, events in frontier:
            for ev, tid in graph.out_edges(nodes[-1]):
                nxt.append((nodes + (tid,), events + (ev,)))
        out.extend(nxt)
        frontier = nxt
        if len(out) >= cap:
            break
    return out[:cap]


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_synthesized_diagnoser_is_deterministic(seed):
    plant, specs = drawn(seed)
    d_lts = emit_diagnoser(synthesize(plant, specs))
    assert check_determinism(d_lts).passed


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_every_trace_obligation_passes_by_construction(seed):
    plant, specs = drawn(seed)
    diag = synthesize(plant, specs)
    d_lts = emit_diagnoser(diag)
    results = verify_diagnoser(
        d_lts, plant, specs, mp=diag.mp, ba=diag.automaton
    )
    assert results and all(r.verdict == "pass" for r in results)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_annotations_are_never_contradictory(seed):
    plant, specs = drawn(seed)
    diag = synthesize(plant, specs)
    for belief, annotation in zip(diag.automaton.beliefs, diag.annotations):
        assert belief.members
        for pos, neg in annotation.values():
            assert not (pos and neg)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_beliefs_sit_inside_their_closures(seed):
    plant, specs = drawn(seed)
    diag = synthesize(plant, specs)
    ba = diag.automaton
    graph = diag.mp.graph
    unobs = tuple(sorted(diag.mp.lts.unobservable_events))
    for belief, closure in zip(ba.beliefs, ba.closures):
        assert belief.as_set <= closure
        assert u_closure(graph, closure, unobs) == closure
    for (bid, _), tgt in ba.edges.items():
        assert 0 <= bid < len(ba.beliefs)
        assert 0 <= tgt < len(ba.beliefs)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_emitted_diagnoser_text_reaches_a_fixpoint(seed):
    plant, specs = drawn(seed)
    d_lts = emit_diagnoser(synthesize(plant, specs))
    text = format_model(d_lts)
    assert format_model(parse_model(text, "emitted")) == text


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_random_plant_text_round_trips_structurally(seed):
    plant, _ = drawn(seed)
    again = parse_model(format_model(plant), "random")
    assert again.name == plant.name
    assert again.vars == plant.vars
    assert again.events == plant.events
    assert again.init == plant.init
    assert again.rules == plant.rules


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_belief_unanimity_matches_the_knowledge_oracle(seed):
    plant, _ = drawn(seed, max_states=4, max_extra_events=2)
    rng = random.Random(seed + 1)
    specs = make_random_specs(rng, plant, n_specs=1)
    diag = synthesize(plant, specs)
    mp, ba = diag.mp, diag.automaton
    alarm = specs[0].alarm
    for nodes, events in walk_prefixes(mp.graph, max_events=3, cap=60):
        prefix = TracePrefix(
            mp.lts, tuple(mp.graph.states[sid] for sid in nodes), events
        )
        for i in range(1, len(events) + 1):
            if not is_obs_point(mp.lts, prefix, i):
                continue
            path = ba.belief_path(obs_projection(mp.lts, prefix, upto=i))
            pos, neg = diag.annotations[path[-1]][alarm]
            expected = (
                Knowledge.KNOWS_TRUE
                if pos
                else Knowledge.KNOWS_FALSE if neg else Knowledge.UNKNOWN
            )
            assert knows_bruteforce(mp.lts, mp.taubar[alarm], prefix, i) is expected
