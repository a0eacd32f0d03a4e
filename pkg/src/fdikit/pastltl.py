"""Past-time temporal conditions and their state-machine monitors.

Conditions are evaluated over trace prefixes: positions carry a state and the
event *leaving* that position.  ``eval_at`` is the reference semantics; it is
deliberately naive (direct recursion over the prefix) so that compiled
monitors can be validated against it.

``compile_monitor`` turns a condition into a deterministic update law over
boolean bits, one per temporal subterm.  Bit updates read only the source
state, the source bits and the fired event.  The compiled output predicate
``taubar`` then reads, at every reached state, exactly the value the
condition has at the current position of the run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .kernel import (
    BOOL,
    Expr,
    Lit,
    Lts,
    Rule,
    TracePrefix,
    VarRef,
    conj,
    disj,
    eq,
    eval_expr,
    free_vars,
    iff,
    negate,
)

MONITOR_PREFIX = "__m_"
OBS_BIT = "__m_obs"


class PastLtlError(Exception):
    pass


class IndexOutOfRange(PastLtlError):
    pass


class UnguardedEventAtom(PastLtlError):
    """Event atoms are only meaningful under at least one yesterday operator."""


# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class StatePred:
    expr: Expr


@dataclass(frozen=True)
class EventAtom:
    event: str


@dataclass(frozen=True)
class PNot:
    operand: "PastFormula"


@dataclass(frozen=True)
class PAnd:
    operands: tuple


@dataclass(frozen=True)
class POr:
    operands: tuple


@dataclass(frozen=True)
class Yesterday:
    operand: "PastFormula"


@dataclass(frozen=True)
class Once:
    operand: "PastFormula"


@dataclass(frozen=True)
class YesterdayN:
    """Value of the operand exactly n positions ago; false earlier."""

    operand: "PastFormula"
    n: int


@dataclass(frozen=True)
class OnceWithin:
    """Operand held at some position in the last n steps, inclusive."""

    operand: "PastFormula"
    n: int


PastFormula = Union[
    StatePred, EventAtom, PNot, PAnd, POr, Yesterday, Once, YesterdayN, OnceWithin
]


def p_and(*operands: PastFormula) -> PastFormula:
    return operands[0] if len(operands) == 1 else PAnd(tuple(operands))


def p_or(*operands: PastFormula) -> PastFormula:
    return operands[0] if len(operands) == 1 else POr(tuple(operands))


def desugar(f: PastFormula) -> PastFormula:
    """Rewrite bounded operators into yesterday chains and disjunctions."""
    if isinstance(f, (StatePred, EventAtom)):
        return f
    if isinstance(f, PNot):
        return PNot(desugar(f.operand))
    if isinstance(f, PAnd):
        return PAnd(tuple(desugar(g) for g in f.operands))
    if isinstance(f, POr):
        return POr(tuple(desugar(g) for g in f.operands))
    if isinstance(f, Yesterday):
        return Yesterday(desugar(f.operand))
    if isinstance(f, Once):
        return Once(desugar(f.operand))
    if isinstance(f, YesterdayN):
        g = desugar(f.operand)
        for _ in range(f.n):
            g = Yesterday(g)
        return g
    if isinstance(f, OnceWithin):
        g = desugar(f.operand)
        terms, term = [g], g
        for _ in range(f.n):
            term = Yesterday(term)
            terms.append(term)
        return POr(tuple(terms)) if len(terms) > 1 else terms[0]
    raise TypeError(f"not a past formula: {f!r}")


def formula_vars(f: PastFormula) -> frozenset:
    if isinstance(f, StatePred):
        return free_vars(f.expr)
    if isinstance(f, EventAtom):
        return frozenset()
    if isinstance(f, PNot):
        return formula_vars(f.operand)
    if isinstance(f, (PAnd, POr)):
        out: frozenset = frozenset()
        for g in f.operands:
            out |= formula_vars(g)
        return out
    return formula_vars(f.operand)


def formula_events(f: PastFormula) -> frozenset:
    if isinstance(f, EventAtom):
        return frozenset((f.event,))
    if isinstance(f, StatePred):
        return frozenset()
    if isinstance(f, PNot):
        return formula_events(f.operand)
    if isinstance(f, (PAnd, POr)):
        out: frozenset = frozenset()
        for g in f.operands:
            out |= formula_events(g)
        return out
    return formula_events(f.operand)


def eval_at(f: PastFormula, prefix: TracePrefix, i: int) -> bool:
    """Reference semantics at position ``i`` of a finite run.

    An event atom matches the event leaving position ``i``; at the final
    position of a prefix the outgoing event is unknown and the atom reads
    false, which is never visible through the yesterday-guarded grammar.
    """
    if not 0 <= i < len(prefix.states):
        raise IndexOutOfRange(f"position {i} outside prefix of length {len(prefix)}")
    if isinstance(f, StatePred):
        return bool(eval_expr(f.expr, prefix.assignment(i)))
    if isinstance(f, EventAtom):
        return i < len(prefix.events) and prefix.events[i] == f.event
    if isinstance(f, PNot):
        return not eval_at(f.operand, prefix, i)
    if isinstance(f, PAnd):
        return all(eval_at(g, prefix, i) for g in f.operands)
    if isinstance(f, POr):
        return any(eval_at(g, prefix, i) for g in f.operands)
    if isinstance(f, Yesterday):
        return i > 0 and eval_at(f.operand, prefix, i - 1)
    if isinstance(f, Once):
        return any(eval_at(f.operand, prefix, j) for j in range(i + 1))
    if isinstance(f, YesterdayN):
        return i >= f.n and eval_at(f.operand, prefix, i - f.n)
    if isinstance(f, OnceWithin):
        return any(eval_at(f.operand, prefix, j) for j in range(max(0, i - f.n), i + 1))
    raise TypeError(f"not a past formula: {f!r}")


# ---------------------------------------------------------------------------
# monitors


@dataclass(frozen=True)
class BitDef:
    name: str
    kind: str  # "Y" or "O"
    init: Expr  # value of the bit at position 0, over plant variables
    updates: Mapping  # event name -> source-state expression


@dataclass(frozen=True, eq=False)
class Monitor:
    formula: PastFormula  # desugared
    bits: tuple
    obs_bit: str
    taubar: Expr  # current value of the formula, over plant vars and bits

    @property
    def bit_names(self) -> tuple:
        return tuple(b.name for b in self.bits)

    def init_constraint(self) -> Expr:
        return conj(*(iff(eq(b.name, True), b.init) for b in self.bits))


def compile_monitor(f: PastFormula, lts: Lts, prefix: str = MONITOR_PREFIX) -> Monitor:
    """Build the bit machine for ``f`` over the alphabet of ``lts``.

    One boolean bit per temporal subterm.  A yesterday bit latches its
    operand's value at the source position; a once bit accumulates it, with
    the bit seeded from the operand's value at position 0 so the reflexive
    reading holds from the start.
    """
    f = desugar(f)
    undeclared = formula_vars(f) - set(lts.var_names)
    if undeclared:
        raise PastLtlError(f"condition references undeclared {sorted(undeclared)}")
    unknown_events = formula_events(f) - set(lts.event_names)
    if unknown_events:
        raise PastLtlError(f"condition references unknown events {sorted(unknown_events)}")

    nodes: list = []

    def collect(g: PastFormula):
        if isinstance(g, (StatePred, EventAtom)):
            return
        if isinstance(g, PNot):
            collect(g.operand)
        elif isinstance(g, (PAnd, POr)):
            for h in g.operands:
                collect(h)
        elif isinstance(g, (Yesterday, Once)):
            collect(g.operand)
            if g not in nodes:
                nodes.append(g)
        else:
            raise TypeError(f"monitor compilation expects desugared input: {g!r}")

    collect(f)
    bit_name = {g: f"{prefix}{k}" for k, g in enumerate(nodes)}

    def value(g: PastFormula, event: Optional[str]) -> Expr:
        # current value of g as a state expression; event atoms resolve only
        # when the outgoing event is known (source side of an update)
        if isinstance(g, StatePred):
            return g.expr
        if isinstance(g, EventAtom):
            if event is None:
                raise UnguardedEventAtom(
                    f"event atom {g.event!r} needs a yesterday guard"
                )
            return Lit(g.event == event)
        if isinstance(g, PNot):
            return negate(value(g.operand, event))
        if isinstance(g, PAnd):
            return conj(*(value(h, event) for h in g.operands))
        if isinstance(g, POr):
            return disj(*(value(h, event) for h in g.operands))
        if isinstance(g, Yesterday):
            return eq(bit_name[g], True)
        if isinstance(g, Once):
            return disj(eq(bit_name[g], True), value(g.operand, event))
        raise TypeError(f"unexpected node {g!r}")

    def value_at_start(g: PastFormula) -> Expr:
        # value of g at position 0: nothing lies in the past
        if isinstance(g, StatePred):
            return g.expr
        if isinstance(g, EventAtom):
            raise UnguardedEventAtom(f"event atom {g.event!r} needs a yesterday guard")
        if isinstance(g, PNot):
            return negate(value_at_start(g.operand))
        if isinstance(g, PAnd):
            return conj(*(value_at_start(h) for h in g.operands))
        if isinstance(g, POr):
            return disj(*(value_at_start(h) for h in g.operands))
        if isinstance(g, Yesterday):
            return Lit(False)
        if isinstance(g, Once):
            return value_at_start(g.operand)
        raise TypeError(f"unexpected node {g!r}")

    bits = []
    for g in nodes:
        name = bit_name[g]
        if isinstance(g, Yesterday):
            kind, init = "Y", Lit(False)
            updates = {ev: value(g.operand, ev) for ev in lts.event_names}
        else:
            kind, init = "O", value_at_start(g.operand)
            updates = {
                ev: disj(eq(name, True), value(g.operand, ev))
                for ev in lts.event_names
            }
        bits.append(BitDef(name=name, kind=kind, init=init, updates=updates))

    taubar = value(f, None)
    return Monitor(formula=f, bits=tuple(bits), obs_bit=OBS_BIT, taubar=taubar)


def value_predicate(f: PastFormula, monitor: Monitor) -> Expr:
    """Current value of a subcondition of the monitored formula, over bits.

    Works for any formula whose temporal subterms all appear in the monitor
    (in particular the condition the monitor was compiled from and the raw
    condition inside a delayed one).
    """
    f = desugar(f)
    # rebuild the node -> bit mapping by replaying the collection order
    nodes: list = []

    def collect(g):
        if isinstance(g, (StatePred, EventAtom)):
            return
        if isinstance(g, PNot):
            collect(g.operand)
        elif isinstance(g, (PAnd, POr)):
            for h in g.operands:
                collect(h)
        else:
            collect(g.operand)
            if g not in nodes:
                nodes.append(g)

    collect(monitor.formula)
    name_of = {g: b.name for g, b in zip(nodes, monitor.bits)}

    def value(g):
        if isinstance(g, StatePred):
            return g.expr
        if isinstance(g, EventAtom):
            raise UnguardedEventAtom(f"event atom {g.event!r} needs a yesterday guard")
        if isinstance(g, PNot):
            return negate(value(g.operand))
        if isinstance(g, PAnd):
            return conj(*(value(h) for h in g.operands))
        if isinstance(g, POr):
            return disj(*(value(h) for h in g.operands))
        if g not in name_of:
            raise PastLtlError(f"subterm {g!r} is not tracked by this monitor")
        if isinstance(g, Yesterday):
            return eq(name_of[g], True)
        return disj(eq(name_of[g], True), value(g.operand))

    return value(f)


def attach_monitor(lts: Lts, monitor: Monitor) -> Lts:
    """Product of a plant with a monitor: same events, bits ride along."""
    clash = set(monitor.bit_names) & set(lts.var_names)
    if clash:
        raise PastLtlError(f"monitor bits {sorted(clash)} clash with plant variables")
    extra = tuple((b.name, BOOL) for b in monitor.bits)
    rules = []
    for ev, ev_rules in lts.rules:
        bit_updates = tuple((b.name, b.updates[ev]) for b in monitor.bits)
        rules.append(
            (ev, tuple(Rule(r.guard, r.updates + bit_updates) for r in ev_rules))
        )
    return Lts(
        name=lts.name,
        vars=lts.vars + extra,
        events=lts.events,
        init=conj(lts.init, monitor.init_constraint()),
        rules=tuple(rules),
    )


def add_observation_bit(lts: Lts, bit: str = OBS_BIT) -> Lts:
    """Append a bit recording whether the last fired event was observable."""
    if bit in set(lts.var_names):
        raise PastLtlError(f"observation bit {bit!r} clashes with a plant variable")
    rules = []
    for ev, ev_rules in lts.rules:
        flag = (bit, Lit(ev in lts.observable_events))
        rules.append((ev, tuple(Rule(r.guard, r.updates + (flag,)) for r in ev_rules)))
    return Lts(
        name=lts.name,
        vars=lts.vars + ((bit, BOOL),),
        events=lts.events,
        init=conj(lts.init, eq(bit, False)),
        rules=tuple(rules),
    )


def observed_predicate(p: Expr, obs_bit: str = OBS_BIT) -> Expr:
    """Restrict a state predicate to observation points."""
    return conj(p, eq(obs_bit, True))


def observed_formula(f: PastFormula, lts: Lts) -> PastFormula:
    """Reference form of an observation-point assertion.

    True at position i when f holds and the event entering i was observable;
    false at position 0.
    """
    entries = tuple(Yesterday(EventAtom(e)) for e in sorted(lts.observable_events))
    if not entries:
        return PAnd((f, StatePred(Lit(False))))
    return PAnd((f, POr(entries)))
