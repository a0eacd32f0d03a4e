"""Diagnoser synthesis by belief-set construction.

The plant is first extended with one monitor per alarm (bits tracking the
delayed condition) plus a bit recording whether the last event was
observable.  Over this monitored plant, the observer's knowledge after any
observation sequence is a belief: the set of monitored states compatible
with that sequence.  Beliefs are explored with a worklist; each belief's
unobservable closure feeds the images under observable events.

Annotations then read each belief directly (not its closure: a belief is the
knowledge exactly at an observation point): the positive alarm is set when
every member satisfies the delayed condition, the negative one when no
member does.  The emitted diagnoser is an ordinary deterministic LTS over
the observable alphabet, one enumerated state per belief.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Optional

from .aslk import AlarmSpec, SpecError, tau_of, validate_specs
from .kernel import (
    BOOL,
    DEFAULT_STATE_CAP,
    Domain,
    Expr,
    Lit,
    Lts,
    Rule,
    StateGraph,
    TracePrefix,
    compile_expr,
    conj,
    eq,
    init_states,
    reachable_graph,
    successors,
)
from .pastltl import (
    OBS_BIT,
    Monitor,
    add_observation_bit,
    attach_monitor,
    compile_monitor,
    value_predicate,
)

log = logging.getLogger(__name__)

DEFAULT_BELIEF_CAP = 2**16


class SynthError(Exception):
    pass


class BeliefCapExceeded(SynthError):
    pass


class NoMatchingEdge(SynthError):
    pass


# ---------------------------------------------------------------------------
# monitored plant


@dataclass(frozen=True, eq=False)
class MonitoredPlant:
    plant: Lts
    lts: Lts  # plant + per-alarm monitor bits + observation bit
    specs: tuple
    monitors: Mapping  # alarm -> Monitor
    taubar: Mapping  # alarm -> Expr, delayed condition value at the current state
    betabar: Mapping  # alarm -> Expr, raw condition value at the current state
    graph: StateGraph

    @property
    def alarms(self) -> tuple:
        return tuple(s.alarm for s in self.specs)

    @property
    def obs_bit(self) -> str:
        return OBS_BIT

    def spec_of(self, alarm: str) -> AlarmSpec:
        for s in self.specs:
            if s.alarm == alarm:
                return s
        raise KeyError(alarm)


def build_monitored_plant(
    plant: Lts, specs, cap: int = DEFAULT_STATE_CAP
) -> MonitoredPlant:
    """Attach one delayed-condition monitor per alarm and explore the result."""
    specs = tuple(specs)
    errors = [d for d in validate_specs(specs, plant) if d.severity == "error"]
    if errors:
        raise SpecError(errors)
    monitored = plant
    monitors, taubar, betabar = {}, {}, {}
    for spec in specs:
        monitor = compile_monitor(tau_of(spec), plant, prefix=f"__m_{spec.alarm}_")
        monitored = attach_monitor(monitored, monitor)
        monitors[spec.alarm] = monitor
        taubar[spec.alarm] = monitor.taubar
        betabar[spec.alarm] = value_predicate(spec.condition, monitor)
    monitored = add_observation_bit(monitored)
    graph = reachable_graph(monitored, cap=cap)
    log.info(
        "monitored plant %s: %d reachable states", plant.name, len(graph.states)
    )
    return MonitoredPlant(
        plant=plant,
        lts=monitored,
        specs=specs,
        monitors=monitors,
        taubar=taubar,
        betabar=betabar,
        graph=graph,
    )


# ---------------------------------------------------------------------------
# beliefs


@dataclass(frozen=True)
class BeliefState:
    """Canonically sorted set of monitored-plant state ids."""

    members: tuple

    @property
    def as_set(self) -> frozenset:
        return frozenset(self.members)

    def __len__(self) -> int:
        return len(self.members)


def u_closure(graph: StateGraph, members: frozenset, unobs_events) -> frozenset:
    """Least superset closed under unobservable transitions."""
    closed = set(members)
    frontier = deque(members)
    while frontier:
        sid = frontier.popleft()
        for ev in unobs_events:
            for tid in graph.successors_of(sid, ev):
                if tid not in closed:
                    closed.add(tid)
                    frontier.append(tid)
    return frozenset(closed)


def belief_successor(
    graph: StateGraph, members: frozenset, event: str, unobs_events, closed=False
) -> frozenset:
    """Image of the closure under one observable event."""
    src = members if closed else u_closure(graph, members, unobs_events)
    out = set()
    for sid in src:
        out.update(graph.successors_of(sid, event))
    return frozenset(out)


@dataclass(frozen=True, eq=False)
class BeliefAutomaton:
    mp: MonitoredPlant
    beliefs: tuple  # BeliefState, index = belief id, id 0 initial
    closures: tuple  # cached closure per belief, as frozensets
    edges: Mapping  # (belief id, event) -> belief id

    @property
    def initial(self) -> int:
        return 0

    def successor(self, bid: int, event: str) -> Optional[int]:
        return self.edges.get((bid, event))

    def belief_path(self, obs_events) -> list:
        """Belief ids visited along an observation sequence, starting at 0."""
        path = [0]
        for ev in obs_events:
            nxt = self.edges.get((path[-1], ev))
            if nxt is None:
                raise NoMatchingEdge(f"no belief transition for {ev!r} from b{path[-1]}")
            path.append(nxt)
        return path


def build_belief_automaton(
    mp: MonitoredPlant, cap: int = DEFAULT_BELIEF_CAP
) -> BeliefAutomaton:
    graph = mp.graph
    lts = mp.lts
    unobs = tuple(sorted(lts.unobservable_events))
    obs_events = tuple(e for e in lts.event_names if e in lts.observable_events)
    all_observable = not unobs

    b0 = frozenset(graph.initial)
    index = {b0: 0}
    beliefs = [b0]
    closures: dict = {}
    edges = {}
    stack = [b0]
    while stack:
        members = stack.pop()
        bid = index[members]
        closure = u_closure(graph, members, unobs)
        if all_observable and closure != members:
            raise AssertionError("closure must be the identity without unobservable events")
        closures[bid] = closure
        for ev in obs_events:
            image = belief_successor(graph, closure, ev, unobs, closed=True)
            if not image:
                continue
            if image not in index:
                index[image] = len(beliefs)
                beliefs.append(image)
                if len(beliefs) > cap:
                    raise BeliefCapExceeded(f"more than {cap} beliefs")
                stack.append(image)
            edges[(bid, ev)] = index[image]
    ordered = tuple(BeliefState(tuple(sorted(b))) for b in beliefs)
    closure_tuple = tuple(closures[i] for i in range(len(beliefs)))
    log.info("belief automaton: %d beliefs, %d edges", len(ordered), len(edges))
    return BeliefAutomaton(mp=mp, beliefs=ordered, closures=closure_tuple, edges=edges)


# ---------------------------------------------------------------------------
# annotation


def annotation_of(mp: MonitoredPlant, members) -> dict:
    """Per-alarm (positive, negative) unanimity over a set of state ids."""
    out = {}
    states = mp.graph.states
    for alarm in mp.alarms:
        pred = compile_expr(mp.taubar[alarm], mp.lts.var_index)
        values = [bool(pred(states[sid])) for sid in members]
        pos, neg = all(values), not any(values)
        # a nonempty belief can never be unanimous both ways
        assert not (pos and neg) or not values
        out[alarm] = (pos, neg)
    return out


@dataclass(frozen=True, eq=False)
class Diagnoser:
    automaton: BeliefAutomaton
    annotations: tuple  # per belief id: dict alarm -> (positive, negative)

    @property
    def mp(self) -> MonitoredPlant:
        return self.automaton.mp

    @property
    def specs(self) -> tuple:
        return self.mp.specs


def annotate(automaton: BeliefAutomaton) -> Diagnoser:
    mp = automaton.mp
    annotations = tuple(
        annotation_of(mp, belief.members) for belief in automaton.beliefs
    )
    return Diagnoser(automaton=automaton, annotations=annotations)


def synthesize(
    plant: Lts,
    specs,
    state_cap: int = DEFAULT_STATE_CAP,
    belief_cap: int = DEFAULT_BELIEF_CAP,
) -> Diagnoser:
    """Monitored plant, belief exploration and annotation in one call."""
    mp = build_monitored_plant(plant, specs, cap=state_cap)
    return annotate(build_belief_automaton(mp, cap=belief_cap))


# ---------------------------------------------------------------------------
# emission


def _belief_symbol(bid: int) -> str:
    return f"b{bid}"


def emit_diagnoser(diag: Diagnoser, name: Optional[str] = None) -> Lts:
    """Materialise the diagnoser as a deterministic LTS.

    One enumerated state variable ``q`` over belief ids; per alarm a positive
    and a negative boolean, rewritten on every (observable) transition to the
    annotation of the entered belief.
    """
    ba = diag.automaton
    mp = diag.mp
    plant = mp.plant
    n = len(ba.beliefs)
    qdom = Domain("q", tuple(_belief_symbol(i) for i in range(n)))
    alarm_vars = []
    for spec in mp.specs:
        alarm_vars.append((spec.alarm, BOOL))
        alarm_vars.append((spec.negative_alarm, BOOL))
    events = tuple((e, True) for e, obs in plant.events if obs)

    def annotation_updates(bid: int):
        ups = []
        for spec in mp.specs:
            pos, neg = diag.annotations[bid][spec.alarm]
            ups.append((spec.alarm, Lit(pos)))
            ups.append((spec.negative_alarm, Lit(neg)))
        return tuple(ups)

    by_event: dict = {e: [] for e, _ in events}
    for (bid, ev), tgt in sorted(ba.edges.items()):
        rule = Rule(
            guard=eq("q", _belief_symbol(bid)),
            updates=(("q", Lit(_belief_symbol(tgt))),) + annotation_updates(tgt),
        )
        by_event[ev].append(rule)

    init = [eq("q", _belief_symbol(0))]
    for spec in mp.specs:
        pos, neg = diag.annotations[0][spec.alarm]
        init.append(eq(spec.alarm, pos))
        init.append(eq(spec.negative_alarm, neg))

    return Lts(
        name=name or f"{plant.name}_diagnoser",
        vars=(("q", qdom),) + tuple(alarm_vars),
        events=events,
        init=conj(*init),
        rules=tuple((e, tuple(rules)) for e, rules in by_event.items()),
    )


def belief_lts(ba: BeliefAutomaton, var: str = "__belief") -> Lts:
    """The bare belief automaton as an LTS, for product-based checks."""
    n = len(ba.beliefs)
    dom = Domain(var, tuple(_belief_symbol(i) for i in range(n)))
    plant = ba.mp.plant
    events = tuple((e, True) for e, obs in plant.events if obs)
    by_event: dict = {e: [] for e, _ in events}
    for (bid, ev), tgt in sorted(ba.edges.items()):
        by_event[ev].append(
            Rule(eq(var, _belief_symbol(bid)), ((var, Lit(_belief_symbol(tgt))),))
        )
    return Lts(
        name=f"{plant.name}_beliefs",
        vars=((var, dom),),
        events=events,
        init=eq(var, _belief_symbol(0)),
        rules=tuple((e, tuple(rules)) for e, rules in by_event.items()),
    )


def to_dot(diag: Diagnoser) -> str:
    """Graphviz rendering: belief states, alarm flags, observable edges."""
    ba = diag.automaton
    lines = ["digraph diagnoser {", "  rankdir=LR;", "  node [shape=box];"]
    for bid, belief in enumerate(ba.beliefs):
        flags = []
        for spec in diag.mp.specs:
            pos, neg = diag.annotations[bid][spec.alarm]
            if pos:
                flags.append(spec.alarm)
            if neg:
                flags.append(f"!{spec.alarm}")
        label = _belief_symbol(bid)
        if flags:
            label += "\\n" + " ".join(flags)
        shape = ' peripheries=2' if bid == 0 else ""
        lines.append(f'  {_belief_symbol(bid)} [label="{label}"{shape}];')
    for (bid, ev), tgt in sorted(ba.edges.items()):
        lines.append(f'  {_belief_symbol(bid)} -> {_belief_symbol(tgt)} [label="{ev}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# matching and concretisation


def match_trace(d_lts: Lts, prefix: TracePrefix) -> TracePrefix:
    """Follow a plant run's observable events through an emitted diagnoser."""
    inits = init_states(d_lts)
    if len(inits) != 1:
        raise NoMatchingEdge(f"diagnoser has {len(inits)} initial states, need 1")
    d_events = set(d_lts.event_names)
    state = inits[0]
    states, events = [state], []
    for ev in prefix.events:
        if ev not in d_events:
            continue
        succ = successors(d_lts, state, ev)
        if not succ:
            raise NoMatchingEdge(f"diagnoser blocks observable event {ev!r}")
        if len(succ) > 1:
            raise NoMatchingEdge(f"diagnoser is nondeterministic on {ev!r}")
        state = succ[0]
        states.append(state)
        events.append(ev)
    return TracePrefix(d_lts, tuple(states), tuple(events))


def concretize_belief_path(
    ba: BeliefAutomaton, obs_events, target: int
) -> TracePrefix:
    """A monitored-plant run with the given observations ending at ``target``.

    ``target`` must be a member of the belief reached by ``obs_events``.
    Works backwards: each observable step is preceded by the unobservable
    run that carries some member of the previous belief to the edge's source.
    """
    mp = ba.mp
    graph = mp.graph
    unobs = tuple(sorted(mp.lts.unobservable_events))
    path = ba.belief_path(obs_events)
    if target not in ba.beliefs[path[-1]].members:
        raise SynthError(f"state {target} not in the reached belief")

    states = [target]
    events: list = []
    current = target
    for k in reversed(range(len(obs_events))):
        ev = obs_events[k]
        prev_members = ba.beliefs[path[k]].members
        # search the closure for a state whose ev-successor is `current`,
        # remembering how each closure state was reached from the belief
        parent: dict = {sid: None for sid in prev_members}
        queue = deque(prev_members)
        source = None
        while queue:
            sid = queue.popleft()
            if current in graph.successors_of(sid, ev):
                source = sid
                break
            for u in unobs:
                for tid in graph.successors_of(sid, u):
                    if tid not in parent:
                        parent[tid] = (sid, u)
                        queue.append(tid)
        if source is None:
            raise SynthError("belief edge has no concrete witness")
        chain_states, chain_events = [source], []
        node = source
        while parent[node] is not None:
            prev, u = parent[node]
            chain_states.append(prev)
            chain_events.append(u)
            node = prev
        chain_states.reverse()
        chain_events.reverse()
        states = chain_states + states
        events = chain_events + [ev] + events
        current = chain_states[0]
    # close the head with an unobservable run from an initial state
    parent = {sid: None for sid in graph.initial}
    queue = deque(graph.initial)
    while current not in parent:
        if not queue:
            raise SynthError("no unobservable path from the initial belief")
        sid = queue.popleft()
        for u in unobs:
            for tid in graph.successors_of(sid, u):
                if tid not in parent:
                    parent[tid] = (sid, u)
                    queue.append(tid)
    head_states, head_events = [current], []
    node = current
    while parent[node] is not None:
        prev, u = parent[node]
        head_states.append(prev)
        head_events.append(u)
        node = prev
    head_states.reverse()
    head_events.reverse()
    states = head_states[:-1] + states
    events = head_events + events
    return TracePrefix(
        mp.lts,
        tuple(mp.graph.states[sid] for sid in states),
        tuple(events),
    )
