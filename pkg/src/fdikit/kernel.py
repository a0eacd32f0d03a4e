"""Finite-domain guarded transition systems.

A plant is a labelled transition system over finite-domain state variables.
Transitions are grouped by event; each event carries a set of guarded update
rules with implicit framing (variables not assigned by a rule keep their
value).  Events are flagged observable or unobservable; observability drives
everything downstream (projection, beliefs, diagnoser alphabets).

States are value tuples aligned with ``Lts.vars``.  Reachability assigns
deterministic canonical ids: states are sorted by their domain value indices
taken in variable-name order, so ids are stable across exploration orders.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Optional, Union

Value = Union[str, int, bool]
State = tuple  # values aligned with Lts.vars

DEFAULT_STATE_CAP = 2**20


class KernelError(Exception):
    """Base class for model-level errors."""


class CapExceeded(KernelError):
    pass


class UnknownEvent(KernelError):
    pass


class EmptyInit(KernelError):
    pass


class EventMismatch(KernelError):
    pass


class VariableClash(KernelError):
    pass


class UndeclaredSymbol(KernelError):
    pass


# ---------------------------------------------------------------------------
# domains and expressions


@dataclass(frozen=True)
class Domain:
    """Named, ordered tuple of values."""

    name: str
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise KernelError(f"domain {self.name!r} is empty")
        if len(set(self.values)) != len(self.values):
            raise KernelError(f"domain {self.name!r} has duplicate values")

    def __contains__(self, value) -> bool:
        return value in self.values

    def index(self, value) -> int:
        return self.values.index(value)


BOOL = Domain("bool", (False, True))


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class Cmp:
    # op in {"=", "!=", "<", "<=", ">", ">="}; ordering ops need int operands
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Arith:
    # op in {"+", "-"}
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Call:
    # fn in {"min", "max"}
    fn: str
    args: tuple


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    operands: tuple


@dataclass(frozen=True)
class Or:
    operands: tuple


Expr = Union[Lit, VarRef, Cmp, Arith, Call, Not, And, Or]

TRUE = Lit(True)
FALSE = Lit(False)


def conj(*operands: Expr) -> Expr:
    ops = [e for e in operands if e != TRUE]
    if any(e == FALSE for e in ops):
        return FALSE
    if not ops:
        return TRUE
    if len(ops) == 1:
        return ops[0]
    return And(tuple(ops))


def disj(*operands: Expr) -> Expr:
    ops = [e for e in operands if e != FALSE]
    if any(e == TRUE for e in ops):
        return TRUE
    if not ops:
        return FALSE
    if len(ops) == 1:
        return ops[0]
    return Or(tuple(ops))


def negate(e: Expr) -> Expr:
    if e == TRUE:
        return FALSE
    if e == FALSE:
        return TRUE
    if isinstance(e, Not):
        return e.operand
    return Not(e)


def eq(var: str, value: Value) -> Expr:
    return Cmp("=", VarRef(var), Lit(value))


def iff(a: Expr, b: Expr) -> Expr:
    return disj(conj(a, b), conj(negate(a), negate(b)))


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, Lit):
        return frozenset()
    if isinstance(e, VarRef):
        return frozenset((e.name,))
    if isinstance(e, (Cmp, Arith)):
        return free_vars(e.lhs) | free_vars(e.rhs)
    if isinstance(e, Call):
        return frozenset().union(*(free_vars(a) for a in e.args))
    if isinstance(e, Not):
        return free_vars(e.operand)
    if isinstance(e, (And, Or)):
        if not e.operands:
            return frozenset()
        return frozenset().union(*(free_vars(a) for a in e.operands))
    raise TypeError(f"not an expression: {e!r}")


def eval_expr(e: Expr, env: Mapping[str, Value]) -> Value:
    """Evaluate over a variable environment; booleans for predicates."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, VarRef):
        try:
            return env[e.name]
        except KeyError:
            raise UndeclaredSymbol(f"unknown variable {e.name!r}") from None
    if isinstance(e, Cmp):
        lhs, rhs = eval_expr(e.lhs, env), eval_expr(e.rhs, env)
        if e.op == "=":
            return lhs == rhs
        if e.op == "!=":
            return lhs != rhs
        if e.op == "<":
            return lhs < rhs
        if e.op == "<=":
            return lhs <= rhs
        if e.op == ">":
            return lhs > rhs
        return lhs >= rhs
    if isinstance(e, Arith):
        lhs, rhs = eval_expr(e.lhs, env), eval_expr(e.rhs, env)
        return lhs + rhs if e.op == "+" else lhs - rhs
    if isinstance(e, Call):
        vals = [eval_expr(a, env) for a in e.args]
        return min(vals) if e.fn == "min" else max(vals)
    if isinstance(e, Not):
        return not eval_expr(e.operand, env)
    if isinstance(e, And):
        return all(eval_expr(a, env) for a in e.operands)
    if isinstance(e, Or):
        return any(eval_expr(a, env) for a in e.operands)
    raise TypeError(f"not an expression: {e!r}")


def compile_expr(e: Expr, var_index: Mapping[str, int]) -> Callable[[State], Value]:
    """Compile to a closure over state tuples; the hot path of exploration."""
    if isinstance(e, Lit):
        v = e.value
        return lambda s: v
    if isinstance(e, VarRef):
        try:
            i = var_index[e.name]
        except KeyError:
            raise UndeclaredSymbol(f"unknown variable {e.name!r}") from None
        return lambda s: s[i]
    if isinstance(e, Cmp):
        lf, rf = compile_expr(e.lhs, var_index), compile_expr(e.rhs, var_index)
        op = e.op
        if op == "=":
            return lambda s: lf(s) == rf(s)
        if op == "!=":
            return lambda s: lf(s) != rf(s)
        if op == "<":
            return lambda s: lf(s) < rf(s)
        if op == "<=":
            return lambda s: lf(s) <= rf(s)
        if op == ">":
            return lambda s: lf(s) > rf(s)
        return lambda s: lf(s) >= rf(s)
    if isinstance(e, Arith):
        lf, rf = compile_expr(e.lhs, var_index), compile_expr(e.rhs, var_index)
        if e.op == "+":
            return lambda s: lf(s) + rf(s)
        return lambda s: lf(s) - rf(s)
    if isinstance(e, Call):
        fns = [compile_expr(a, var_index) for a in e.args]
        agg = min if e.fn == "min" else max
        return lambda s: agg(f(s) for f in fns)
    if isinstance(e, Not):
        f = compile_expr(e.operand, var_index)
        return lambda s: not f(s)
    if isinstance(e, And):
        fns = [compile_expr(a, var_index) for a in e.operands]
        return lambda s: all(f(s) for f in fns)
    if isinstance(e, Or):
        fns = [compile_expr(a, var_index) for a in e.operands]
        return lambda s: any(f(s) for f in fns)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# transition systems


@dataclass(frozen=True)
class Rule:
    """One guarded update; unassigned variables are framed."""

    guard: Expr
    updates: tuple  # tuple of (var name, Expr); empty means pure self-loop


@dataclass(frozen=True, eq=False)
class Lts:
    name: str
    vars: tuple  # tuple of (var name, Domain), declaration order
    events: tuple  # tuple of (event name, observable flag)
    init: Expr
    rules: tuple  # tuple of (event name, tuple of Rule)

    def __post_init__(self):
        names = [n for n, _ in self.vars]
        if len(set(names)) != len(names):
            raise VariableClash(f"duplicate variable in {self.name!r}")
        ev_names = [n for n, _ in self.events]
        if len(set(ev_names)) != len(ev_names):
            raise KernelError(f"duplicate event in {self.name!r}")
        declared = set(names)
        rule_events = [ev for ev, _ in self.rules]
        if len(set(rule_events)) != len(rule_events):
            raise KernelError(f"duplicate rule group in {self.name!r}")
        for ev in rule_events:
            if ev not in set(ev_names):
                raise UnknownEvent(f"rules for undeclared event {ev!r}")
        if not free_vars(self.init) <= declared:
            raise UndeclaredSymbol(
                f"init of {self.name!r} references undeclared variables"
            )
        for ev, rules in self.rules:
            for rule in rules:
                used = free_vars(rule.guard)
                for var, rhs in rule.updates:
                    if var not in declared:
                        raise UndeclaredSymbol(
                            f"update target {var!r} undeclared in {self.name!r}"
                        )
                    used |= free_vars(rhs)
                if not used <= declared:
                    raise UndeclaredSymbol(
                        f"rule for {ev!r} references undeclared variables"
                    )

    @property
    def var_names(self) -> tuple:
        return tuple(n for n, _ in self.vars)

    @property
    def var_index(self) -> dict:
        return {n: i for i, (n, _) in enumerate(self.vars)}

    @property
    def domain_of(self) -> dict:
        return {n: d for n, d in self.vars}

    @property
    def event_names(self) -> tuple:
        return tuple(n for n, _ in self.events)

    @property
    def observable_events(self) -> frozenset:
        return frozenset(n for n, obs in self.events if obs)

    @property
    def unobservable_events(self) -> frozenset:
        return frozenset(n for n, obs in self.events if not obs)

    def is_observable(self, event: str) -> bool:
        if event not in set(self.event_names):
            raise UnknownEvent(f"unknown event {event!r}")
        return event in self.observable_events

    def rules_of(self, event: str) -> tuple:
        for ev, rules in self.rules:
            if ev == event:
                return rules
        if event not in set(self.event_names):
            raise UnknownEvent(f"unknown event {event!r}")
        return ()

    def state_space_size(self) -> int:
        return math.prod(len(d.values) for _, d in self.vars)

    def assignment(self, state: State) -> dict:
        return dict(zip(self.var_names, state))


def state_of(lts: Lts, assignment: Mapping[str, Value]) -> State:
    """Build a state tuple from a variable mapping (all variables required)."""
    return tuple(assignment[n] for n in lts.var_names)


def enumerate_states(lts: Lts, cap: int = DEFAULT_STATE_CAP) -> Iterator[State]:
    """All assignments, in domain-index order; the product size must fit the cap."""
    size = lts.state_space_size()
    if size > cap:
        raise CapExceeded(f"state space of {lts.name!r} has {size} states, cap {cap}")
    domains = [d.values for _, d in lts.vars]
    return iter(itertools.product(*domains))


def _init_conjuncts(e: Expr) -> list:
    if isinstance(e, And):
        out = []
        for op in e.operands:
            out.extend(_init_conjuncts(op))
        return out
    return [e]


def init_states(lts: Lts, cap: int = DEFAULT_STATE_CAP) -> list:
    """Satisfying assignments of the initial condition.

    The init formula is split at top-level conjunctions and variables are
    grouped by co-occurrence, so products of independently initialised
    components stay cheap.  Each group and the overall count respect the cap.
    """
    conjuncts = _init_conjuncts(lts.init)
    parent = {n: n for n in lts.var_names}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        parent[find(a)] = find(b)

    for c in conjuncts:
        fv = sorted(free_vars(c))
        for other in fv[1:]:
            union(fv[0], other)

    groups: dict = {}
    for n in lts.var_names:
        groups.setdefault(find(n), []).append(n)

    group_states = []
    domain_of = lts.domain_of
    for members in groups.values():
        size = math.prod(len(domain_of[n].values) for n in members)
        if size > cap:
            raise CapExceeded(f"init component {members} has {size} assignments")
        local = [c for c in conjuncts if free_vars(c) and free_vars(c) <= set(members)]
        rows = []
        for combo in itertools.product(*(domain_of[n].values for n in members)):
            env = dict(zip(members, combo))
            if all(eval_expr(c, env) for c in local):
                rows.append(env)
        group_states.append(rows)
    # constant conjuncts (no free variables) can still falsify everything
    consts = [c for c in conjuncts if not free_vars(c)]
    if not all(eval_expr(c, {}) for c in consts):
        return []

    states = []
    for combo in itertools.product(*group_states):
        env = {}
        for part in combo:
            env.update(part)
        states.append(state_of(lts, env))
        if len(states) > cap:
            raise CapExceeded(f"more than {cap} initial states")
    states.sort(key=_canonical_key(lts))
    return states


def _canonical_key(lts: Lts) -> Callable[[State], tuple]:
    order = sorted(range(len(lts.vars)), key=lambda i: lts.vars[i][0])
    domains = [d for _, d in lts.vars]
    return lambda s: tuple(domains[i].index(s[i]) for i in order)


class _CompiledRule:
    __slots__ = ("guard", "targets", "rhs")

    def __init__(self, lts: Lts, rule: Rule):
        idx = lts.var_index
        self.guard = compile_expr(rule.guard, idx)
        self.targets = [idx[v] for v, _ in rule.updates]
        self.rhs = [compile_expr(e, idx) for _, e in rule.updates]


def _compiled_rules(lts: Lts) -> dict:
    return {ev: [_CompiledRule(lts, r) for r in rules] for ev, rules in lts.rules}


def _apply(lts: Lts, compiled: _CompiledRule, state: State) -> Optional[State]:
    new = list(state)
    for slot, f in zip(compiled.targets, compiled.rhs):
        v = f(state)
        # a value outside the domain means the update relation is empty here
        if v not in lts.vars[slot][1]:
            return None
        new[slot] = v
    return tuple(new)


def successors(lts: Lts, state: State, event: str) -> list:
    """Distinct successor states of ``state`` under ``event``, sorted canonically."""
    out = set()
    for rule in lts.rules_of(event):
        cr = _CompiledRule(lts, rule)
        if cr.guard(state):
            nxt = _apply(lts, cr, state)
            if nxt is not None:
                out.add(nxt)
    return sorted(out, key=_canonical_key(lts))


@dataclass(frozen=True, eq=False)
class StateGraph:
    """Explicit reachable fragment with canonical state ids."""

    lts: Lts
    states: tuple  # state tuples, index = id
    index: Mapping[State, int]
    initial: tuple  # sorted ids
    succ: Mapping  # (id, event) -> tuple of ids, only non-empty entries
    deadlocks: frozenset

    def successors_of(self, sid: int, event: str) -> tuple:
        return self.succ.get((sid, event), ())

    def out_edges(self, sid: int) -> Iterator:
        for ev in self.lts.event_names:
            for tgt in self.succ.get((sid, ev), ()):
                yield ev, tgt

    def predicate(self, expr: Expr) -> Callable[[int], bool]:
        f = compile_expr(expr, self.lts.var_index)
        states = self.states
        return lambda sid: bool(f(states[sid]))

    def assignment(self, sid: int) -> dict:
        return self.lts.assignment(self.states[sid])


def reachable_graph(lts: Lts, cap: int = DEFAULT_STATE_CAP) -> StateGraph:
    inits = init_states(lts, cap)
    if not inits:
        raise EmptyInit(f"initial condition of {lts.name!r} is unsatisfiable")
    compiled = _compiled_rules(lts)
    seen = set(inits)
    frontier = deque(inits)
    raw_edges = []
    while frontier:
        state = frontier.popleft()
        for ev, rules in compiled.items():
            for cr in rules:
                if not cr.guard(state):
                    continue
                nxt = _apply(lts, cr, state)
                if nxt is None:
                    continue
                raw_edges.append((state, ev, nxt))
                if nxt not in seen:
                    seen.add(nxt)
                    if len(seen) > cap:
                        raise CapExceeded(
                            f"reachable set of {lts.name!r} exceeds cap {cap}"
                        )
                    frontier.append(nxt)
    ordered = sorted(seen, key=_canonical_key(lts))
    index = {s: i for i, s in enumerate(ordered)}
    succ: dict = {}
    for src, ev, dst in raw_edges:
        succ.setdefault((index[src], ev), set()).add(index[dst])
    succ_sorted = {k: tuple(sorted(v)) for k, v in succ.items()}
    outgoing = {sid for (sid, _ev) in succ_sorted}
    deadlocks = frozenset(set(range(len(ordered))) - outgoing)
    return StateGraph(
        lts=lts,
        states=tuple(ordered),
        index=index,
        initial=tuple(sorted(index[s] for s in inits)),
        succ=succ_sorted,
        deadlocks=deadlocks,
    )


def check_deadlock_free(lts: Lts, cap: int = DEFAULT_STATE_CAP):
    """Return (True, None) or (False, first deadlocked state by canonical id)."""
    graph = reachable_graph(lts, cap)
    if not graph.deadlocks:
        return True, None
    witness = min(graph.deadlocks)
    return False, graph.assignment(witness)


# ---------------------------------------------------------------------------
# products


def _check_var_disjoint(a: Lts, b: Lts):
    clash = set(a.var_names) & set(b.var_names)
    if clash:
        raise VariableClash(f"components share variables {sorted(clash)}")


def _conjoin_rules(a_rules: Iterable[Rule], b_rules: Iterable[Rule]) -> tuple:
    out = []
    for ra in a_rules:
        for rb in b_rules:
            out.append(Rule(conj(ra.guard, rb.guard), ra.updates + rb.updates))
    return tuple(out)


def sync_product(a: Lts, b: Lts) -> Lts:
    """Composition over an identical alphabet; every event fires jointly."""
    _check_var_disjoint(a, b)
    if dict(a.events) != dict(b.events):
        raise EventMismatch(
            f"{a.name!r} and {b.name!r} must declare identical events"
        )
    rules = tuple(
        (ev, _conjoin_rules(a.rules_of(ev), b.rules_of(ev))) for ev, _ in a.events
    )
    return Lts(
        name=f"{a.name}*{b.name}",
        vars=a.vars + b.vars,
        events=a.events,
        init=conj(a.init, b.init),
        rules=rules,
    )


def async_product(a: Lts, b: Lts) -> Lts:
    """Composition over the event union.

    Shared events synchronise; events local to one component frame the other
    component's variables.  With identical alphabets this coincides with
    ``sync_product``.
    """
    _check_var_disjoint(a, b)
    a_events, b_events = dict(a.events), dict(b.events)
    for ev in set(a_events) & set(b_events):
        if a_events[ev] != b_events[ev]:
            raise EventMismatch(f"event {ev!r} has conflicting observability")
    events = list(a.events) + [(n, o) for n, o in b.events if n not in a_events]
    rules = []
    for ev, _ in events:
        in_a, in_b = ev in a_events, ev in b_events
        if in_a and in_b:
            rules.append((ev, _conjoin_rules(a.rules_of(ev), b.rules_of(ev))))
        elif in_a:
            rules.append((ev, a.rules_of(ev)))
        else:
            rules.append((ev, b.rules_of(ev)))
    return Lts(
        name=f"{a.name}||{b.name}",
        vars=a.vars + b.vars,
        events=tuple(events),
        init=conj(a.init, b.init),
        rules=tuple(rules),
    )


# ---------------------------------------------------------------------------
# trace prefixes


@dataclass(frozen=True, eq=False)
class TracePrefix:
    """Finite run: n+1 states interleaved with n events."""

    lts: Lts
    states: tuple
    events: tuple

    def __post_init__(self):
        if len(self.states) != len(self.events) + 1:
            raise KernelError("prefix needs exactly one more state than events")

    def __len__(self) -> int:
        return len(self.states)

    def assignment(self, i: int) -> dict:
        return self.lts.assignment(self.states[i])

    def extended(self, event: str, state: State) -> "TracePrefix":
        return TracePrefix(self.lts, self.states + (state,), self.events + (event,))


def is_run(lts: Lts, prefix: TracePrefix) -> bool:
    """Check initial state membership and every step against the rules."""
    if prefix.states[0] not in set(init_states(lts)):
        return False
    for i, ev in enumerate(prefix.events):
        if prefix.states[i + 1] not in successors(lts, prefix.states[i], ev):
            return False
    return True
