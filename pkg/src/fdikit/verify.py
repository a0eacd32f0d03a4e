"""Independent verification of diagnosers and diagnosability analysis.

All checks run on explicit product graphs:

* correctness and the system-level completeness forms on the product of the
  diagnoser with the monitored plant;
* the epistemic forms (maximality, trace-level completeness) additionally
  compose the belief automaton, whose states decide what an observer can
  know at each observation point;
* diagnosability runs on the monitored plant composed with beliefs only.

Verdicts quantify over infinite runs: a state with no infinite extension
(only possible under a deadlocked plant, which the kernel reports) cannot
witness a violation.  Counterexamples are shortest paths, extended with a
stem-plus-cycle suffix for the eventuality obligations, and are replayable
runs of the product they were found on.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

from .aslk import (
    BOUNDED_RESPONSE,
    EPISTEMIC_BOUNDED_RESPONSE,
    EPISTEMIC_RESPONSE,
    EPISTEMIC_SAFETY,
    RESPONSE,
    SAFETY_PAST,
    AlarmSpec,
    Obligation,
    expand_pattern,
)
from .kernel import (
    DEFAULT_STATE_CAP,
    CapExceeded,
    EventMismatch,
    Expr,
    Lts,
    StateGraph,
    TracePrefix,
    _canonical_key,
    async_product,
    compile_expr,
    eq,
    init_states,
    reachable_graph,
)
from .pastltl import OBS_BIT
from .synth import (
    BeliefAutomaton,
    DEFAULT_BELIEF_CAP,
    MonitoredPlant,
    annotate,
    belief_lts,
    build_belief_automaton,
    build_monitored_plant,
    concretize_belief_path,
)

log = logging.getLogger(__name__)

BELIEF_VAR = "__belief"


class VerifyError(Exception):
    pass


class UnobservableCycle(VerifyError):
    """The twin construction needs observations to keep flowing."""


# ---------------------------------------------------------------------------
# graph utilities


def _live_set(graph: StateGraph) -> frozenset:
    """States with at least one infinite outgoing path."""
    n = len(graph.states)
    edges = []
    out_count = [0] * n
    preds: list = [[] for _ in range(n)]
    for (sid, _ev), targets in graph.succ.items():
        for tgt in targets:
            out_count[sid] += 1
            preds[tgt].append(sid)
    dead = deque(i for i in range(n) if out_count[i] == 0)
    alive = [True] * n
    while dead:
        sid = dead.popleft()
        alive[sid] = False
        for p in preds[sid]:
            out_count[p] -= 1
            if out_count[p] == 0 and alive[p]:
                dead.append(p)
    return frozenset(i for i in range(n) if alive[i])


def _compose_product_graph(
    product: Lts,
    mp_graph: StateGraph,
    ba: BeliefAutomaton,
    d_graph: Optional[StateGraph],
    cap: int,
) -> StateGraph:
    """Reachable graph of the product, walked componentwise.

    Produces exactly ``reachable_graph(product)``: observable events move
    the monitored plant, the diagnoser (if present) and the belief tracker
    jointly, unobservable events move the monitored plant alone.  Walking
    the component graphs sidesteps the crossed rule lists of the product
    construction, whose length is quadratic in the diagnoser size.
    """
    observable = mp_graph.lts.observable_events
    symbols = tuple(f"b{i}" for i in range(len(ba.beliefs)))

    def assemble(node) -> tuple:
        if d_graph is None:
            mid, bid = node
            return mp_graph.states[mid] + (symbols[bid],)
        did, mid, bid = node
        return d_graph.states[did] + mp_graph.states[mid] + (symbols[bid],)

    if d_graph is None:
        inits = [(mid, 0) for mid in mp_graph.initial]
    else:
        inits = [
            (did, mid, 0) for did in d_graph.initial for mid in mp_graph.initial
        ]
    seen = set(inits)
    frontier = deque(inits)
    raw_edges = []
    while frontier:
        node = frontier.popleft()
        bid = node[-1]
        mid = node[-2]
        for ev in product.event_names:
            mp_targets = mp_graph.successors_of(mid, ev)
            if not mp_targets:
                continue
            if ev in observable:
                b2 = ba.edges.get((bid, ev))
                if b2 is None:
                    continue
                if d_graph is None:
                    targets = [(m2, b2) for m2 in mp_targets]
                else:
                    d_targets = d_graph.successors_of(node[0], ev)
                    targets = [
                        (d2, m2, b2) for d2 in d_targets for m2 in mp_targets
                    ]
            else:
                targets = [node[:-2] + (m2, bid) for m2 in mp_targets]
            for tgt in targets:
                raw_edges.append((node, ev, tgt))
                if tgt not in seen:
                    seen.add(tgt)
                    if len(seen) > cap:
                        raise CapExceeded(
                            f"reachable set of {product.name!r} exceeds cap {cap}"
                        )
                    frontier.append(tgt)
    key = _canonical_key(product)
    states = {node: assemble(node) for node in seen}
    ordered = sorted(seen, key=lambda n: key(states[n]))
    index = {node: i for i, node in enumerate(ordered)}
    succ: dict = {}
    for src, ev, dst in raw_edges:
        succ.setdefault((index[src], ev), set()).add(index[dst])
    succ_sorted = {k: tuple(sorted(v)) for k, v in succ.items()}
    outgoing = {sid for (sid, _ev) in succ_sorted}
    deadlocks = frozenset(set(range(len(ordered))) - outgoing)
    state_tuples = tuple(states[node] for node in ordered)
    return StateGraph(
        lts=product,
        states=state_tuples,
        index={s: i for i, s in enumerate(state_tuples)},
        initial=tuple(sorted(index[n] for n in inits)),
        succ=succ_sorted,
        deadlocks=deadlocks,
    )


def _bfs_tree(graph: StateGraph, sources, allowed: Optional[frozenset] = None):
    """Deterministic shortest-path forest: node -> (predecessor, event)."""
    parent: dict = {}
    frontier = deque()
    for sid in sorted(sources):
        if allowed is None or sid in allowed:
            parent[sid] = None
            frontier.append(sid)
    while frontier:
        sid = frontier.popleft()
        for ev, tgt in graph.out_edges(sid):
            if allowed is not None and tgt not in allowed:
                continue
            if tgt not in parent:
                parent[tgt] = (sid, ev)
                frontier.append(tgt)
    return parent


def _unwind(parent: Mapping, node: int):
    states, events = [node], []
    while parent[node] is not None:
        node, ev = parent[node]
        states.append(node)
        events.append(ev)
    states.reverse()
    events.reverse()
    return states, events


def _prefix_of(graph: StateGraph, node_path, events) -> TracePrefix:
    return TracePrefix(
        graph.lts,
        tuple(graph.states[i] for i in node_path),
        tuple(events),
    )


def _cycle_nodes(graph: StateGraph, allowed: frozenset) -> frozenset:
    """Nodes lying on some cycle inside the allowed subgraph (iterative Tarjan)."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    result: set = set()
    counter = [0]
    for root in sorted(allowed):
        if root in index:
            continue
        work = [(root, iter(sorted(t for _e, t in graph.out_edges(root) if t in allowed)))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for tgt in it:
                if tgt not in index:
                    index[tgt] = low[tgt] = counter[0]
                    counter[0] += 1
                    stack.append(tgt)
                    on_stack.add(tgt)
                    work.append(
                        (tgt, iter(sorted(t for _e, t in graph.out_edges(tgt) if t in allowed)))
                    )
                    advanced = True
                    break
                if tgt in on_stack:
                    low[node] = min(low[node], index[tgt])
            if advanced:
                continue
            work.pop()
            if work:
                parent_node = work[-1][0]
                low[parent_node] = min(low[parent_node], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    top = stack.pop()
                    on_stack.discard(top)
                    comp.append(top)
                    if top == node:
                        break
                if len(comp) > 1:
                    result.update(comp)
                else:
                    sid = comp[0]
                    if sid in {t for _e, t in graph.out_edges(sid)}:
                        result.add(sid)
    return frozenset(result)


def _reaches(graph: StateGraph, targets: frozenset, allowed: frozenset) -> frozenset:
    """Nodes inside ``allowed`` that can reach ``targets`` staying inside it."""
    preds: dict = {}
    for (sid, _ev), tgts in graph.succ.items():
        if sid not in allowed:
            continue
        for tgt in tgts:
            if tgt in allowed:
                preds.setdefault(tgt, []).append(sid)
    seen = set(targets & allowed)
    frontier = deque(seen)
    while frontier:
        sid = frontier.popleft()
        for p in preds.get(sid, ()):  # noqa: B023
            if p not in seen:
                seen.add(p)
                frontier.append(p)
    return frozenset(seen)


def _cycle_from(graph: StateGraph, node: int, allowed: frozenset):
    """Shortest cycle through ``node`` inside ``allowed``; (node path, events)."""
    starts = []
    for ev, tgt in graph.out_edges(node):
        if tgt in allowed:
            starts.append((tgt, ev))
    for tgt, ev in sorted(starts):
        if tgt == node:
            return [node, node], [ev]
        parent = _bfs_tree(graph, [tgt], allowed)
        if node in parent:
            nodes, events = _unwind(parent, node)
            return [node] + nodes, [ev] + events
    raise VerifyError("no cycle through the requested node")


# ---------------------------------------------------------------------------
# determinism


@dataclass(frozen=True)
class ConditionResult:
    number: int
    description: str
    ok: bool
    witness: Optional[str] = None


@dataclass(frozen=True)
class DeterminismReport:
    conditions: tuple
    notes: tuple = ()

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.conditions)


def check_determinism(d_lts: Lts, cap: int = DEFAULT_STATE_CAP) -> DeterminismReport:
    """Initial-state existence and uniqueness, non-blocking, per-event uniqueness.

    Events absent from some state are allowed (a diagnoser only follows the
    observations the plant can produce); they are surfaced as notes.
    """
    conditions = []
    notes = []
    try:
        inits = init_states(d_lts, cap)
    except Exception as exc:  # noqa: BLE001
        inits = []
        notes.append(f"initial condition could not be enumerated: {exc}")
    conditions.append(
        ConditionResult(1, "initial condition satisfiable", bool(inits),
                        None if inits else "no satisfying assignment")
    )
    conditions.append(
        ConditionResult(
            2,
            "unique initial state",
            len(inits) == 1,
            None
            if len(inits) == 1
            else f"{len(inits)} initial states",
        )
    )
    if not inits:
        conditions.append(ConditionResult(3, "every reachable state can move", False,
                                          "no initial state"))
        conditions.append(ConditionResult(4, "at most one successor per event", True))
        return DeterminismReport(tuple(conditions), tuple(notes))
    graph = reachable_graph(d_lts, cap)
    blocked = sorted(graph.deadlocks)
    conditions.append(
        ConditionResult(
            3,
            "every reachable state can move",
            not blocked,
            None if not blocked else f"state {graph.assignment(blocked[0])} is stuck",
        )
    )
    offender = None
    for (sid, ev), targets in sorted(graph.succ.items()):
        if len(targets) > 1:
            offender = f"state {graph.assignment(sid)} forks on {ev!r}"
            break
    conditions.append(
        ConditionResult(4, "at most one successor per event", offender is None, offender)
    )
    partial = {}
    for sid in range(len(graph.states)):
        for ev in d_lts.event_names:
            if not graph.successors_of(sid, ev):
                partial[ev] = partial.get(ev, 0) + 1
    for ev, count in sorted(partial.items()):
        notes.append(f"event {ev!r} not enabled in {count} reachable state(s)")
    return DeterminismReport(tuple(conditions), tuple(notes))


# ---------------------------------------------------------------------------
# verification context


@dataclass(frozen=True, eq=False)
class _Ctx:
    mp: MonitoredPlant
    ba: BeliefAutomaton
    unanimity: Mapping  # alarm -> frozenset of belief ids where tau is unanimous
    d_lts: Lts
    product: Lts
    graph: StateGraph
    live: frozenset

    def pred(self, expr: Expr) -> Callable[[int], bool]:
        return self.graph.predicate(expr)

    def obs_points(self) -> Callable[[int], bool]:
        return self.pred(eq(OBS_BIT, True))

    def alarm_on(self, alarm: str) -> Callable[[int], bool]:
        return self.pred(eq(alarm, True))

    def observed_alarm(self, alarm: str) -> Callable[[int], bool]:
        obs = self.obs_points()
        a = self.alarm_on(alarm)
        return lambda sid: obs(sid) and a(sid)

    def knowledge(self, alarm: str) -> Callable[[int], bool]:
        """Observation point whose belief is unanimous on the delayed condition."""
        obs = self.obs_points()
        unan = self.unanimity[alarm]
        idx = self.product.var_index[BELIEF_VAR]
        states = self.graph.states
        return lambda sid: obs(sid) and int(states[sid][idx][1:]) in unan


def _make_ctx(
    d_lts: Lts,
    plant: Lts,
    specs,
    state_cap: int = DEFAULT_STATE_CAP,
    belief_cap: int = DEFAULT_BELIEF_CAP,
    mp: Optional[MonitoredPlant] = None,
    ba: Optional[BeliefAutomaton] = None,
) -> _Ctx:
    if mp is None:
        mp = build_monitored_plant(plant, specs, cap=state_cap)
    if ba is None:
        ba = build_belief_automaton(mp, cap=belief_cap)
    if set(d_lts.event_names) != set(plant.observable_events):
        raise EventMismatch(
            "diagnoser alphabet must equal the plant's observable alphabet"
        )
    reference = annotate(ba)
    unanimity = {
        alarm: frozenset(
            bid
            for bid in range(len(ba.beliefs))
            if reference.annotations[bid][alarm][0]
        )
        for alarm in mp.alarms
    }
    product = async_product(async_product(d_lts, mp.lts), belief_lts(ba, BELIEF_VAR))
    d_graph = reachable_graph(d_lts, cap=state_cap)
    graph = _compose_product_graph(product, mp.graph, ba, d_graph, state_cap)
    live = _live_set(graph)
    log.info(
        "verification product: %d states (%d live)", len(graph.states), len(live)
    )
    return _Ctx(
        mp=mp,
        ba=ba,
        unanimity=unanimity,
        d_lts=d_lts,
        product=product,
        graph=graph,
        live=live,
    )


# ---------------------------------------------------------------------------
# check results


@dataclass(frozen=True)
class CheckResult:
    alarm: str
    obligation: str  # correctness | completeness | maximality | alarm-implies-knowledge
    kind: str
    verdict: str  # pass | fail | skip
    detail: str = ""
    counterexample: Optional[TracePrefix] = None
    cycle_events: Optional[tuple] = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def _fail(ctx: _Ctx, alarm, obligation, kind, node_path, events, detail="", cycle=None):
    return CheckResult(
        alarm=alarm,
        obligation=obligation,
        kind=kind,
        verdict="fail",
        detail=detail,
        counterexample=_prefix_of(ctx.graph, node_path, events),
        cycle_events=cycle,
    )


def _first_bad_node(ctx: _Ctx, bad: Callable[[int], bool]) -> Optional[tuple]:
    """Shortest path to a live node violating a state obligation."""
    parent = _bfs_tree(ctx.graph, ctx.graph.initial)
    best = None
    for sid in sorted(parent):
        if sid in ctx.live and bad(sid):
            nodes, events = _unwind(parent, sid)
            if best is None or len(events) < len(best[1]):
                best = (nodes, events)
    return best


# ---------------------------------------------------------------------------
# the obligation checkers


def _check_safety(ctx: _Ctx, spec: AlarmSpec, obligation: Obligation) -> CheckResult:
    """G(<A> -> taubar) or, with a delay, G(Y^d betabar -> <A>)."""
    alarm = spec.alarm
    if obligation.label == "correctness":
        taubar = ctx.pred(ctx.mp.taubar[alarm])
        observed = ctx.observed_alarm(alarm)
        bad = lambda sid: observed(sid) and not taubar(sid)
        found = _first_bad_node(ctx, bad)
        if found is None:
            return CheckResult(alarm, "correctness", SAFETY_PAST, "pass")
        nodes, events = found
        return _fail(
            ctx, alarm, "correctness", SAFETY_PAST, nodes, events,
            detail="alarm raised although the delayed condition is false",
        )
    # completeness for the exact-delay pattern: a shift register carries the
    # condition d steps forward; the alarm must be up exactly then
    d = obligation.delay or 0
    beta = ctx.pred(ctx.mp.betabar[alarm])
    observed = ctx.observed_alarm(alarm)
    start_nodes = sorted(ctx.graph.initial)
    seen = set()
    frontier = deque()
    for sid in start_nodes:
        reg = (beta(sid),)
        cfg = (sid, reg)
        seen.add(cfg)
        frontier.append((cfg, None))
    parent: dict = {cfg: None for cfg, _ in frontier}
    while frontier:
        (sid, reg), _ = frontier.popleft()
        due = len(reg) > d and reg[0]
        if due and sid in ctx.live and not observed(sid):
            nodes, events = _unwind_cfg(parent, (sid, reg))
            return _fail(
                ctx, alarm, "completeness", SAFETY_PAST, nodes, events,
                detail=f"condition held {d} step(s) ago but the alarm is down",
            )
        for ev, tgt in ctx.graph.out_edges(sid):
            new_reg = (reg[1:] if len(reg) > d else reg) + (beta(tgt),)
            cfg = (tgt, new_reg)
            if cfg not in seen:
                seen.add(cfg)
                parent[cfg] = ((sid, reg), ev)
                frontier.append((cfg, None))
    return CheckResult(alarm, "completeness", SAFETY_PAST, "pass")


def _unwind_cfg(parent: Mapping, cfg):
    states, events = [cfg[0]], []
    while parent[cfg] is not None:
        cfg, ev = parent[cfg]
        states.append(cfg[0])
        events.append(ev)
    states.reverse()
    events.reverse()
    return states, events


def _check_bounded_response(
    ctx: _Ctx, spec: AlarmSpec, obligation: Obligation, knowledge_gate: bool
) -> CheckResult:
    """G(beta -> F^{<=d} <A>), optionally only where knowing becomes possible.

    Tracks the age of the oldest unserved occurrence; an observed alarm
    serves every pending occurrence.  With the knowledge gate the violation
    additionally requires a knowledgeable observation point in the window.
    """
    alarm = spec.alarm
    d = obligation.delay or 0
    beta = ctx.pred(ctx.mp.betabar[alarm])
    served = ctx.observed_alarm(alarm)
    know = ctx.knowledge(alarm) if knowledge_gate else None
    kind = EPISTEMIC_BOUNDED_RESPONSE if knowledge_gate else BOUNDED_RESPONSE

    if not knowledge_gate:
        # (node, age of the oldest unserved condition point); the search stays
        # inside the live set, and an observed alarm serves every pending point
        def step(age, sid):
            if beta(sid) and age is None:
                age = 0
            if age is not None and served(sid):
                age = None
            return age

        parent: dict = {}
        frontier = deque()
        for sid in sorted(ctx.graph.initial):
            if sid not in ctx.live:
                continue
            cfg = (sid, step(None, sid))
            parent[cfg] = None
            frontier.append(cfg)
        while frontier:
            cfg = frontier.popleft()
            sid, age = cfg
            if age == d:
                nodes, events = _unwind_cfg(parent, cfg)
                return _fail(
                    ctx, alarm, obligation.label, kind, nodes, events,
                    detail=f"no alarm within {d} step(s) of the condition",
                )
            for ev, tgt in ctx.graph.out_edges(sid):
                if tgt not in ctx.live:
                    continue
                new_age = step(age + 1 if age is not None else None, tgt)
                nxt = (tgt, new_age)
                if nxt not in parent:
                    parent[nxt] = (cfg, ev)
                    frontier.append(nxt)
        return CheckResult(alarm, obligation.label, kind, "pass")

    # knowledge-gated: a window of d+1 positions from a beta point violates
    # when it contains a knowledgeable observation point but never the alarm
    starts = []
    parent_full = _bfs_tree(ctx.graph, ctx.graph.initial)
    for sid in sorted(parent_full):
        if sid in ctx.live and beta(sid) and not served(sid):
            starts.append(sid)
    seen = set()
    frontier = deque()
    parent: dict = {}
    for sid in starts:
        cfg = (sid, 0, know(sid))
        if cfg not in seen:
            seen.add(cfg)
            parent[cfg] = None
            frontier.append(cfg)
    while frontier:
        cfg = frontier.popleft()
        sid, depth, seen_k = cfg
        if depth == d:
            if seen_k:
                window_nodes, window_events = _unwind_cfg_window(parent, cfg)
                stem_nodes, stem_events = _unwind(parent_full, window_nodes[0])
                nodes = stem_nodes + window_nodes[1:]
                events = stem_events + window_events
                return _fail(
                    ctx, alarm, obligation.label, kind, nodes, events,
                    detail=(
                        f"the condition was knowable within {d} step(s) "
                        "but the alarm stayed down"
                    ),
                )
            continue
        for ev, tgt in ctx.graph.out_edges(sid):
            if tgt not in ctx.live or served(tgt):
                continue
            nxt = (tgt, depth + 1, seen_k or know(tgt))
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = (cfg, ev)
                frontier.append(nxt)
    return CheckResult(alarm, obligation.label, kind, "pass")


def _unwind_cfg_window(parent: Mapping, cfg):
    states, events = [cfg[0]], []
    while parent[cfg] is not None:
        cfg, ev = parent[cfg]
        states.append(cfg[0])
        events.append(ev)
    states.reverse()
    events.reverse()
    return states, events


def _check_response(
    ctx: _Ctx, spec: AlarmSpec, obligation: Obligation, knowledge_gate: bool
) -> CheckResult:
    """G(beta -> F <A>), optionally gated on the condition becoming knowable.

    A violation is an alarm-free suffix: a path from a beta point into an
    alarm-free cycle, passing a knowledgeable observation point when gated.
    """
    alarm = spec.alarm
    beta = ctx.pred(ctx.mp.betabar[alarm])
    served = ctx.observed_alarm(alarm)
    know = ctx.knowledge(alarm) if knowledge_gate else None
    kind = EPISTEMIC_RESPONSE if knowledge_gate else RESPONSE

    unserved = frozenset(
        sid for sid in range(len(ctx.graph.states)) if not served(sid)
    )
    cycles = _cycle_nodes(ctx.graph, unserved)
    can_stay_silent = _reaches(ctx.graph, cycles, unserved)
    parent_full = _bfs_tree(ctx.graph, ctx.graph.initial)

    candidates = [
        sid
        for sid in sorted(parent_full)
        if beta(sid) and sid in unserved and sid in can_stay_silent
    ]
    for sid in candidates:
        inner = _bfs_tree(ctx.graph, [sid], unserved)
        if knowledge_gate:
            # route through a knowledgeable point that can stay silent
            target = next(
                (w for w in sorted(inner) if know(w) and w in can_stay_silent),
                None,
            )
            if target is None:
                continue
        else:
            target = sid
        stem_nodes, stem_events = _unwind(parent_full, sid)
        to_k_nodes, to_k_events = _unwind(inner, target)
        tail_parent = _bfs_tree(ctx.graph, [target], unserved)
        reach_cycle = sorted(w for w in tail_parent if w in cycles)
        if not reach_cycle:
            continue
        loop_entry = reach_cycle[0]
        mid_nodes, mid_events = _unwind(tail_parent, loop_entry)
        cyc_nodes, cyc_events = _cycle_from(ctx.graph, loop_entry, unserved)
        nodes = stem_nodes + to_k_nodes[1:] + mid_nodes[1:] + cyc_nodes[1:]
        events = stem_events + to_k_events + mid_events + cyc_events
        detail = (
            "the condition became knowable but the alarm never fires"
            if knowledge_gate
            else "an alarm-free cycle follows the condition"
        )
        return _fail(
            ctx, alarm, obligation.label, kind, nodes, events,
            detail=detail, cycle=tuple(cyc_events),
        )
    return CheckResult(alarm, obligation.label, kind, "pass")


def _check_epistemic_safety(
    ctx: _Ctx, spec: AlarmSpec, obligation: Obligation
) -> CheckResult:
    """G(<K tau> -> A): fire whenever the observations pin the condition down."""
    alarm = spec.alarm
    know = ctx.knowledge(alarm)
    a_up = ctx.alarm_on(alarm)
    bad = lambda sid: know(sid) and not a_up(sid)
    found = _first_bad_node(ctx, bad)
    if found is None:
        return CheckResult(alarm, obligation.label, EPISTEMIC_SAFETY, "pass")
    nodes, events = found
    return _fail(
        ctx, alarm, obligation.label, EPISTEMIC_SAFETY, nodes, events,
        detail="the observer knows the delayed condition but the alarm is down",
    )


_DISPATCH = {
    SAFETY_PAST: lambda ctx, spec, ob: _check_safety(ctx, spec, ob),
    BOUNDED_RESPONSE: lambda ctx, spec, ob: _check_bounded_response(ctx, spec, ob, False),
    EPISTEMIC_BOUNDED_RESPONSE: lambda ctx, spec, ob: _check_bounded_response(
        ctx, spec, ob, True
    ),
    RESPONSE: lambda ctx, spec, ob: _check_response(ctx, spec, ob, False),
    EPISTEMIC_RESPONSE: lambda ctx, spec, ob: _check_response(ctx, spec, ob, True),
    EPISTEMIC_SAFETY: lambda ctx, spec, ob: _check_epistemic_safety(ctx, spec, ob),
}


def _run_obligation(ctx: _Ctx, spec: AlarmSpec, obligation: Obligation) -> CheckResult:
    return _DISPATCH[obligation.kind](ctx, spec, obligation)


# ---------------------------------------------------------------------------
# public checks


def _ctx_for(d_lts, plant, spec_or_specs, **kw) -> _Ctx:
    specs = (
        tuple(spec_or_specs)
        if isinstance(spec_or_specs, (list, tuple))
        else (spec_or_specs,)
    )
    return _make_ctx(d_lts, plant, specs, **kw)


def check_correctness(
    d_lts: Lts, plant: Lts, spec: AlarmSpec, ctx: Optional[_Ctx] = None, **kw
) -> CheckResult:
    ctx = ctx or _ctx_for(d_lts, plant, spec, **kw)
    return _check_safety(ctx, spec, Obligation("correctness", SAFETY_PAST))


def check_completeness(
    d_lts: Lts, plant: Lts, spec: AlarmSpec, ctx: Optional[_Ctx] = None, **kw
) -> CheckResult:
    """Completeness for the spec's cell; maximal trace cells use the plain form."""
    ctx = ctx or _ctx_for(d_lts, plant, spec, **kw)
    base = spec if not (spec.diag == "trace" and spec.maximal) else AlarmSpec(
        spec.alarm, spec.kind, spec.condition, spec.delay, spec.diag, False
    )
    plan = expand_pattern(base)
    obligation = next(o for o in plan.obligations if o.label == "completeness")
    return _run_obligation(ctx, spec, obligation)


def check_maximality(
    d_lts: Lts, plant: Lts, spec: AlarmSpec, ctx: Optional[_Ctx] = None, **kw
) -> CheckResult:
    ctx = ctx or _ctx_for(d_lts, plant, spec, **kw)
    return _check_epistemic_safety(ctx, spec, Obligation("maximality", EPISTEMIC_SAFETY))


def check_alarm_implies_knowledge(
    d_lts: Lts, plant: Lts, spec: AlarmSpec, ctx: Optional[_Ctx] = None, **kw
) -> CheckResult:
    """G(<A> -> <K tau>): meaningful only for correct diagnosers."""
    ctx = ctx or _ctx_for(d_lts, plant, spec, **kw)
    correct = check_correctness(d_lts, plant, spec, ctx=ctx)
    if not correct.passed:
        return CheckResult(
            spec.alarm,
            "alarm-implies-knowledge",
            EPISTEMIC_SAFETY,
            "skip",
            detail="diagnoser is not correct for this alarm; implication not meaningful",
        )
    observed = ctx.observed_alarm(spec.alarm)
    know = ctx.knowledge(spec.alarm)
    bad = lambda sid: observed(sid) and not know(sid)
    found = _first_bad_node(ctx, bad)
    if found is None:
        return CheckResult(
            spec.alarm, "alarm-implies-knowledge", EPISTEMIC_SAFETY, "pass"
        )
    nodes, events = found
    return _fail(
        ctx, spec.alarm, "alarm-implies-knowledge", EPISTEMIC_SAFETY, nodes, events,
        detail="alarm raised at a point where the observations do not pin the condition",
    )


def verify_diagnoser(
    d_lts: Lts,
    plant: Lts,
    specs,
    state_cap: int = DEFAULT_STATE_CAP,
    belief_cap: int = DEFAULT_BELIEF_CAP,
    mp: Optional[MonitoredPlant] = None,
    ba: Optional[BeliefAutomaton] = None,
) -> list:
    """Run every obligation of every alarm; one shared product."""
    specs = tuple(specs)
    ctx = _make_ctx(
        d_lts, plant, specs, state_cap=state_cap, belief_cap=belief_cap, mp=mp, ba=ba
    )
    results = []
    for spec in specs:
        plan = expand_pattern(spec)
        for obligation in plan.obligations:
            results.append(_run_obligation(ctx, spec, obligation))
    return results


# ---------------------------------------------------------------------------
# diagnosability


@dataclass(frozen=True)
class PointVerdict:
    witness: TracePrefix  # shortest composed run reaching the condition point
    diagnosable: bool


@dataclass(frozen=True)
class CriticalPair:
    left: TracePrefix  # monitored-plant run satisfying the condition
    right: TracePrefix  # observation-equivalent run that never allows knowing it
    note: str


@dataclass(frozen=True)
class DiagnosabilityReport:
    spec: AlarmSpec
    system_diagnosable: bool
    points: tuple  # PointVerdict per reachable condition point
    critical_pair: Optional[CriticalPair]
    reason: str = ""


def check_diagnosability(
    plant: Lts,
    spec: AlarmSpec,
    state_cap: int = DEFAULT_STATE_CAP,
    belief_cap: int = DEFAULT_BELIEF_CAP,
    mp: Optional[MonitoredPlant] = None,
    ba: Optional[BeliefAutomaton] = None,
) -> DiagnosabilityReport:
    """Can every occurrence of the condition be announced in time?

    Explores the monitored plant composed with its belief automaton.  A
    condition point fails when some continuation reaches the deadline (or,
    for the unbounded pattern, an entire suffix) without passing an
    observation point whose belief is unanimous on the delayed condition.
    """
    if mp is None:
        mp = build_monitored_plant(plant, (spec,), cap=state_cap)
    if ba is None:
        ba = build_belief_automaton(mp, cap=belief_cap)
    reference = annotate(ba)
    unan = frozenset(
        bid
        for bid in range(len(ba.beliefs))
        if reference.annotations[bid][spec.alarm][0]
    )
    product = async_product(mp.lts, belief_lts(ba, BELIEF_VAR))
    graph = _compose_product_graph(product, mp.graph, ba, None, state_cap)
    live = _live_set(graph)
    beta = graph.predicate(mp.betabar[spec.alarm])
    obs = graph.predicate(eq(OBS_BIT, True))
    b_idx = product.var_index[BELIEF_VAR]
    good = lambda sid: obs(sid) and int(graph.states[sid][b_idx][1:]) in unan

    parent_full = _bfs_tree(graph, graph.initial)
    beta_nodes = [sid for sid in sorted(parent_full) if sid in live and beta(sid)]

    def bad_run_from(u: int):
        """A continuation of u witnessing non-diagnosability, or None."""
        d = spec.delay or 0
        if spec.kind == "exactdel":
            # some live path of exactly d steps ending outside knowledge
            start = (u, 0)
            parent = {start: None}
            frontier = deque([start])
            while frontier:
                cfg = frontier.popleft()
                sid, depth = cfg
                if depth == d:
                    if sid in live and not good(sid):
                        return _unwind_cfg(parent, cfg) + (None,)
                    continue
                for ev, tgt in graph.out_edges(sid):
                    nxt = (tgt, depth + 1)
                    if nxt not in parent:
                        parent[nxt] = (cfg, ev)
                        frontier.append(nxt)
            return None
        if spec.kind == "bounddel":
            # a full window of d+1 positions avoiding knowledge
            if good(u):
                return None
            start = (u, 0)
            parent = {start: None}
            frontier = deque([start])
            while frontier:
                cfg = frontier.popleft()
                sid, depth = cfg
                if depth == d:
                    if sid in live:
                        return _unwind_cfg(parent, cfg) + (None,)
                    continue
                for ev, tgt in graph.out_edges(sid):
                    if good(tgt):
                        continue
                    nxt = (tgt, depth + 1)
                    if nxt not in parent:
                        parent[nxt] = (cfg, ev)
                        frontier.append(nxt)
            return None
        # finitedel: an entire knowledge-free suffix
        if good(u):
            return None
        blind = frozenset(sid for sid in range(len(graph.states)) if not good(sid))
        cycles = _cycle_nodes(graph, blind)
        stay_blind = _reaches(graph, cycles, blind)
        if u not in stay_blind:
            return None
        inner = _bfs_tree(graph, [u], blind)
        entry = min(w for w in inner if w in cycles)
        nodes, events = _unwind(inner, entry)
        cyc_nodes, cyc_events = _cycle_from(graph, entry, blind)
        return nodes + cyc_nodes[1:], events + cyc_events, tuple(cyc_events)

    points = []
    first_violation = None
    for u in beta_nodes:
        bad = bad_run_from(u)
        stem_nodes, stem_events = _unwind(parent_full, u)
        witness = _prefix_of(graph, stem_nodes, stem_events)
        points.append(PointVerdict(witness=witness, diagnosable=bad is None))
        if bad is not None and first_violation is None:
            first_violation = (u, stem_nodes, stem_events, bad)

    if first_violation is None:
        return DiagnosabilityReport(spec, True, tuple(points), None)

    u, stem_nodes, stem_events, (run_nodes, run_events, cycle) = first_violation
    full_nodes = stem_nodes + run_nodes[1:]
    full_events = stem_events + list(run_events)
    observable = mp.lts.observable_events
    stem_len = len(stem_events)
    # observation points at or after the condition occurrence; at any of them
    # the left run already satisfies the delayed condition, so a belief member
    # where it fails yields a genuinely confusable partner
    candidates = [
        i
        for i in range(1, len(full_nodes))
        if i >= stem_len and full_events[i - 1] in observable
    ]
    if spec.kind == "exactdel":
        deadline = stem_len + (spec.delay or 0)
        candidates = [i for i in candidates if i == deadline]
    pair = None
    reason = "the condition can stay hidden past its deadline"
    if not candidates:
        reason = "no usable observation point follows the condition occurrence"
    else:
        cut = candidates[-1]
        bid = int(graph.states[full_nodes[cut]][b_idx][1:])
        belief = ba.beliefs[bid]
        tb = compile_expr(mp.taubar[spec.alarm], mp.lts.var_index)
        doubter = next(
            (m for m in sorted(belief.members) if not tb(mp.graph.states[m])), None
        )
        if doubter is None:
            reason = "no confusable observation point along the violating run"
        else:
            obs_events = tuple(e for e in full_events[:cut] if e in observable)
            right = concretize_belief_path(ba, obs_events, doubter)
            left_cut = TracePrefix(
                mp.lts,
                tuple(
                    graph.states[i][: len(mp.lts.vars)]
                    for i in full_nodes[: cut + 1]
                ),
                tuple(full_events[:cut]),
            )
            pair = CriticalPair(
                left=left_cut,
                right=right,
                note=(
                    "equal observations; the left run satisfies the delayed "
                    "condition at the cut, the right run does not"
                ),
            )
    return DiagnosabilityReport(
        spec, False, tuple(points), pair, reason=reason
    )


# ---------------------------------------------------------------------------
# twin-plant analysis


@dataclass(frozen=True)
class TwinReport:
    diagnosable: bool
    left: Optional[TracePrefix] = None
    right: Optional[TracePrefix] = None
    cycle_note: str = ""


def twin_plant_diagnosable(
    plant: Lts, prop: Expr, cap: int = DEFAULT_STATE_CAP
) -> TwinReport:
    """Classical unbounded-delay diagnosability of a state property.

    Runs the plant against itself: observable events move both copies,
    unobservable ones move one side.  The property is latched.  The system is
    not diagnosable exactly when a latched-left pair can keep the right side
    clean forever; the unobservable-cycle precondition guarantees that
    forever means infinitely many shared observations.
    """
    graph = reachable_graph(plant, cap)
    unobs = sorted(plant.unobservable_events)
    obs = sorted(plant.observable_events)
    # a cycle purely of unobservable moves would let one copy starve the other
    u_graph_cycles = _unobservable_cycle(graph, unobs)
    if u_graph_cycles:
        raise UnobservableCycle(
            f"unobservable cycle through state {graph.assignment(u_graph_cycles[0])}"
        )

    p = graph.predicate(prop)
    inits = sorted(graph.initial)
    start = []
    for i1 in inits:
        for i2 in inits:
            start.append((i1, i2, p(i1), p(i2)))
    index = {}
    nodes = []
    edges: dict = {}
    parent: dict = {}
    frontier = deque()
    for node in sorted(start):
        if node not in index:
            index[node] = len(nodes)
            nodes.append(node)
            parent[node] = None
            frontier.append(node)
    while frontier:
        node = frontier.popleft()
        s1, s2, o1, o2 = node
        moves = []
        for ev in obs:
            for t1 in graph.successors_of(s1, ev):
                for t2 in graph.successors_of(s2, ev):
                    moves.append((("sync", ev), (t1, t2, o1 or p(t1), o2 or p(t2))))
        for ev in unobs:
            for t1 in graph.successors_of(s1, ev):
                moves.append((("left", ev), (t1, s2, o1 or p(t1), o2)))
            for t2 in graph.successors_of(s2, ev):
                moves.append((("right", ev), (s1, t2, o1, o2 or p(t2))))
        edges[node] = moves
        for _mv, nxt in moves:
            if nxt not in index:
                index[nxt] = len(nodes)
                nodes.append(nxt)
                parent[nxt] = (node, _mv)
                frontier.append(nxt)
                if len(nodes) > cap:
                    raise VerifyError(f"twin construction exceeds cap {cap}")

    clean_right = [n for n in nodes if not n[3]]
    confused = [n for n in nodes if n[2] and not n[3]]
    if not confused:
        return TwinReport(diagnosable=True)
    # can a confused pair stay clean-right forever?
    clean_set = set(clean_right)
    succ_clean = {
        n: [nxt for _mv, nxt in edges[n] if nxt in clean_set] for n in clean_right
    }
    alive = _peel(succ_clean)
    surviving = [n for n in confused if n in alive]
    if not surviving:
        return TwinReport(diagnosable=True)
    target = min(surviving, key=lambda n: index[n])
    stem = []
    node = target
    while parent[node] is not None:
        prev, mv = parent[node]
        stem.append((prev, mv, node))
        node = prev
    stem.reverse()
    # extend with one alive continuation step cycle: walk until a repeat
    tail = []
    seen_tail = {target}
    cur = target
    while True:
        nxt = min(
            (x for x in succ_clean.get(cur, []) if x in alive), key=lambda n: index[n]
        )
        mv = next(m for m, x in edges[cur] if x == nxt)
        tail.append((cur, mv, nxt))
        cur = nxt
        if cur in seen_tail:
            break
        seen_tail.add(cur)
    left_states, left_events = [], []
    right_states, right_events = [], []
    path = stem + tail
    first = path[0][0] if path else target
    left_states.append(graph.states[first[0]])
    right_states.append(graph.states[first[1]])
    for prev, (side, ev), nxt in path:
        if side in ("sync", "left"):
            left_states.append(graph.states[nxt[0]])
            left_events.append(ev)
        if side in ("sync", "right"):
            right_states.append(graph.states[nxt[1]])
            right_events.append(ev)
    return TwinReport(
        diagnosable=False,
        left=TracePrefix(plant, tuple(left_states), tuple(left_events)),
        right=TracePrefix(plant, tuple(right_states), tuple(right_events)),
        cycle_note="the confusion repeats from the tail onwards",
    )


def _peel(succ: Mapping) -> frozenset:
    """Nodes of the given subgraph with an infinite path inside it."""
    count = {n: len(ts) for n, ts in succ.items()}
    preds: dict = {}
    for n, ts in succ.items():
        for t in ts:
            preds.setdefault(t, []).append(n)
    dead = deque(n for n, c in count.items() if c == 0)
    alive = dict.fromkeys(succ, True)
    while dead:
        n = dead.popleft()
        alive[n] = False
        for pnode in preds.get(n, ()):  # noqa: B023
            count[pnode] -= 1
            if count[pnode] == 0 and alive[pnode]:
                dead.append(pnode)
    return frozenset(n for n, a in alive.items() if a)


def _unobservable_cycle(graph: StateGraph, unobs) -> list:
    """States on a cycle of unobservable edges, if any."""
    n = len(graph.states)
    color = [0] * n
    stack: list = []
    for root in range(n):
        if color[root]:
            continue
        stack.append((root, iter(
            t for u in unobs for t in graph.successors_of(root, u)
        )))
        color[root] = 1
        while stack:
            node, it = stack[-1]
            found = None
            for tgt in it:
                if color[tgt] == 1:
                    return [tgt]
                if color[tgt] == 0:
                    found = tgt
                    break
            if found is None:
                color[node] = 2
                stack.pop()
            else:
                color[found] = 1
                stack.append((found, iter(
                    t for u in unobs for t in graph.successors_of(found, u)
                )))
    return []


# ---------------------------------------------------------------------------
# specification validation against a diagnoser


@dataclass(frozen=True)
class ValidationResult:
    check: str
    passed: bool
    detail: str = ""
    witness_on: Optional[TracePrefix] = None
    witness_off: Optional[TracePrefix] = None


def _pick_shortest(parent: Mapping, candidates) -> Optional[int]:
    """The candidate with the shortest tree path, ties by node id."""
    best = None
    for sid in sorted(candidates):
        depth = len(_unwind(parent, sid)[1])
        if best is None or depth < best[0]:
            best = (depth, sid)
    return None if best is None else best[1]


def _restricted(ctx: _Ctx, assume: Optional[Expr]):
    """Reachable live nodes surviving an invariant assumption, with a tree."""
    if assume is None:
        allowed = frozenset(range(len(ctx.graph.states)))
    else:
        keep = ctx.pred(assume)
        allowed = frozenset(
            sid for sid in range(len(ctx.graph.states)) if keep(sid)
        )
    parent = _bfs_tree(ctx.graph, [s for s in ctx.graph.initial if s in allowed], allowed)
    sub_succ = {
        sid: [t for _e, t in ctx.graph.out_edges(sid) if t in allowed and t in parent]
        for sid in parent
    }
    alive = _peel(sub_succ)
    return parent, alive


def check_possibility(
    d_lts: Lts,
    plant: Lts,
    specs,
    alarm: str,
    assume: Optional[Expr] = None,
    ctx: Optional[_Ctx] = None,
    **kw,
) -> ValidationResult:
    """The alarm can fire and can stay silent at reachable observation points."""
    ctx = ctx or _ctx_for(d_lts, plant, specs, **kw)
    parent, alive = _restricted(ctx, assume)
    obs = ctx.obs_points()
    a_up = ctx.alarm_on(alarm)
    on = _pick_shortest(
        parent, [s for s in parent if s in alive and obs(s) and a_up(s)]
    )
    off = _pick_shortest(
        parent, [s for s in parent if s in alive and obs(s) and not a_up(s)]
    )
    witness_on = witness_off = None
    if on is not None:
        witness_on = _prefix_of(ctx.graph, *_unwind(parent, on))
    if off is not None:
        witness_off = _prefix_of(ctx.graph, *_unwind(parent, off))
    passed = on is not None and off is not None
    detail = ""
    if on is None:
        detail = "the alarm never fires under the assumption"
    elif off is None:
        detail = "the alarm is always on at observation points under the assumption"
    return ValidationResult(
        check=f"possibility({alarm})",
        passed=passed,
        detail=detail,
        witness_on=witness_on,
        witness_off=witness_off,
    )


def check_subsumption(
    d_lts: Lts,
    plant: Lts,
    specs,
    stronger: str,
    weaker: str,
    assume: Optional[Expr] = None,
    ctx: Optional[_Ctx] = None,
    **kw,
) -> ValidationResult:
    """Wherever the first alarm fires, the second fires too."""
    ctx = ctx or _ctx_for(d_lts, plant, specs, **kw)
    parent, alive = _restricted(ctx, assume)
    obs = ctx.obs_points()
    a1, a2 = ctx.alarm_on(stronger), ctx.alarm_on(weaker)
    bad = _pick_shortest(
        parent, [s for s in parent if s in alive and obs(s) and a1(s) and not a2(s)]
    )
    if bad is None:
        return ValidationResult(check=f"subsumes({stronger},{weaker})", passed=True)
    return ValidationResult(
        check=f"subsumes({stronger},{weaker})",
        passed=False,
        detail=f"{stronger} fires without {weaker}",
        witness_on=_prefix_of(ctx.graph, *_unwind(parent, bad)),
    )


def check_mutual_exclusion(
    d_lts: Lts,
    plant: Lts,
    specs,
    first: str,
    second: str,
    assume: Optional[Expr] = None,
    ctx: Optional[_Ctx] = None,
    **kw,
) -> ValidationResult:
    """The two alarms never fire at the same observation point."""
    ctx = ctx or _ctx_for(d_lts, plant, specs, **kw)
    parent, alive = _restricted(ctx, assume)
    obs = ctx.obs_points()
    a1, a2 = ctx.alarm_on(first), ctx.alarm_on(second)
    bad = _pick_shortest(
        parent, [s for s in parent if s in alive and obs(s) and a1(s) and a2(s)]
    )
    if bad is None:
        return ValidationResult(check=f"mutex({first},{second})", passed=True)
    return ValidationResult(
        check=f"mutex({first},{second})",
        passed=False,
        detail=f"{first} and {second} fire together",
        witness_on=_prefix_of(ctx.graph, *_unwind(parent, bad)),
    )


def make_context(
    d_lts: Lts,
    plant: Lts,
    specs,
    state_cap: int = DEFAULT_STATE_CAP,
    belief_cap: int = DEFAULT_BELIEF_CAP,
    mp: Optional[MonitoredPlant] = None,
    ba: Optional[BeliefAutomaton] = None,
) -> _Ctx:
    """Prebuild the product context shared by the individual checks."""
    return _make_ctx(
        d_lts, plant, tuple(specs), state_cap=state_cap, belief_cap=belief_cap,
        mp=mp, ba=ba,
    )
