"""Alarm specifications over partially observable plants.

An alarm names a past-time condition plus a delay discipline:

* ``exactdel(beta, d)``: raise exactly d steps after beta, and only then.
* ``bounddel(beta, d)``: raise within d steps of beta, and only if beta
  occurred at most d steps ago.
* ``finitedel(beta)``: raise eventually after beta, and only if beta ever
  occurred.

``diag`` picks whose obligations the alarm carries: ``system`` demands the
plant be diagnosable (every occurrence of beta is eventually announced on
every run), ``trace`` only demands announcement where the observations admit
knowing it.  ``maximal`` additionally requires the alarm to fire at every
observation point where the observer can know the delayed condition.

``expand_pattern`` lowers each alarm to the list of graph checks the verifier
discharges; the lowering folds trace-level completeness into the epistemic
forms so every obligation is checkable on a finite product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .kernel import Cmp, Expr, Lit, Lts, VarRef, reachable_graph
from .pastltl import (
    EventAtom,
    Once,
    OnceWithin,
    PAnd,
    PNot,
    POr,
    PastFormula,
    StatePred,
    Yesterday,
    YesterdayN,
    formula_events,
    formula_vars,
)

EXACTDEL = "exactdel"
BOUNDDEL = "bounddel"
FINITEDEL = "finitedel"

# obligation kinds, in increasing checker sophistication
SAFETY_PAST = "SafetyPast"
BOUNDED_RESPONSE = "BoundedResponse"
RESPONSE = "Response"
EPISTEMIC_SAFETY = "EpistemicSafety"
EPISTEMIC_BOUNDED_RESPONSE = "EpistemicBoundedResponse"
EPISTEMIC_RESPONSE = "EpistemicResponse"


@dataclass(frozen=True)
class AlarmSpec:
    alarm: str
    kind: str  # exactdel | bounddel | finitedel
    condition: PastFormula
    delay: Optional[int]  # required for the delayed kinds, absent for finitedel
    diag: str  # "system" | "trace"
    maximal: bool = False

    def __post_init__(self):
        if self.kind not in (EXACTDEL, BOUNDDEL, FINITEDEL):
            raise ValueError(f"unknown pattern {self.kind!r}")
        if self.kind == FINITEDEL:
            if self.delay is not None:
                raise ValueError("finitedel takes no delay")
        else:
            if self.delay is None or self.delay < 0:
                raise ValueError(f"{self.kind} needs a delay >= 0")
        if self.diag not in ("system", "trace"):
            raise ValueError(f"diag must be system or trace, got {self.diag!r}")

    @property
    def negative_alarm(self) -> str:
        return f"{self.alarm}_neg"


def tau_of(spec: AlarmSpec) -> PastFormula:
    """The delayed condition the alarm announces at the point it is raised."""
    if spec.kind == EXACTDEL:
        return YesterdayN(spec.condition, spec.delay)
    if spec.kind == BOUNDDEL:
        return OnceWithin(spec.condition, spec.delay)
    return Once(spec.condition)


@dataclass(frozen=True)
class Obligation:
    label: str  # correctness | completeness | maximality
    kind: str
    delay: Optional[int] = None

    def describe(self, spec: AlarmSpec) -> str:
        return f"{spec.alarm}.{self.label} [{self.kind}]"


@dataclass(frozen=True)
class CheckPlan:
    spec: AlarmSpec
    obligations: tuple


def expand_pattern(spec: AlarmSpec) -> CheckPlan:
    """Lower an alarm to its graph obligations.

    Correctness (the alarm never lies) is a past-safety check for every cell.
    System-level completeness keeps the run-based form; trace-level
    completeness is conditioned on knowability and for the maximal cells it
    is implied by maximality, which is kept instead.
    """
    obligations = [Obligation("correctness", SAFETY_PAST)]
    maximality = Obligation("maximality", EPISTEMIC_SAFETY)
    if spec.diag == "system":
        if spec.kind == EXACTDEL:
            obligations.append(Obligation("completeness", SAFETY_PAST, spec.delay))
        elif spec.kind == BOUNDDEL:
            obligations.append(
                Obligation("completeness", BOUNDED_RESPONSE, spec.delay)
            )
        else:
            obligations.append(Obligation("completeness", RESPONSE))
        if spec.maximal:
            obligations.append(maximality)
    else:
        if spec.maximal:
            obligations.append(maximality)
        elif spec.kind == EXACTDEL:
            # announcing exactly-d-ago is complete iff it fires whenever knowable
            obligations.append(
                Obligation("completeness", EPISTEMIC_SAFETY, spec.delay)
            )
        elif spec.kind == BOUNDDEL:
            obligations.append(
                Obligation("completeness", EPISTEMIC_BOUNDED_RESPONSE, spec.delay)
            )
        else:
            obligations.append(Obligation("completeness", EPISTEMIC_RESPONSE))
    return CheckPlan(spec=spec, obligations=tuple(obligations))


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    alarm: Optional[str]
    message: str


class SpecError(Exception):
    """Raised when synthesis is attempted over invalid specifications."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))


def _condition_atoms(f: PastFormula):
    if isinstance(f, StatePred):
        yield f.expr
    elif isinstance(f, (PAnd, POr)):
        for g in f.operands:
            yield from _condition_atoms(g)
    elif isinstance(f, PNot):
        yield from _condition_atoms(f.operand)
    elif isinstance(f, (Yesterday, Once, YesterdayN, OnceWithin)):
        yield from _condition_atoms(f.operand)


def _unguarded_event(f: PastFormula, guarded: bool = False) -> bool:
    if isinstance(f, EventAtom):
        return not guarded
    if isinstance(f, StatePred):
        return False
    if isinstance(f, PNot):
        return _unguarded_event(f.operand, guarded)
    if isinstance(f, (PAnd, POr)):
        return any(_unguarded_event(g, guarded) for g in f.operands)
    if isinstance(f, (Yesterday,)):
        return _unguarded_event(f.operand, True)
    if isinstance(f, YesterdayN):
        return _unguarded_event(f.operand, guarded or f.n > 0)
    if isinstance(f, (Once, OnceWithin)):
        # the window includes the present, so the operand must already be guarded
        return _unguarded_event(f.operand, guarded)
    raise TypeError(f"not a past formula: {f!r}")


def reachable_diameter(lts: Lts) -> int:
    """Longest shortest path from an initial state, in steps."""
    graph = reachable_graph(lts)
    dist = {i: 0 for i in graph.initial}
    frontier = list(graph.initial)
    while frontier:
        nxt = []
        for sid in frontier:
            for _ev, tgt in graph.out_edges(sid):
                if tgt not in dist:
                    dist[tgt] = dist[sid] + 1
                    nxt.append(tgt)
        frontier = nxt
    return max(dist.values(), default=0)


def validate_specs(specs, lts: Lts) -> list:
    """Structural and symbol checks; diagnostics are returned, not raised."""
    out = []
    seen = set()
    emitted_vars: dict = {}
    plant_vars = set(lts.var_names)
    plant_events = set(lts.event_names)
    domain_of = lts.domain_of
    diameter = None
    for spec in specs:
        name = spec.alarm
        if name in seen:
            out.append(Diagnostic("error", name, "duplicate alarm name"))
        seen.add(name)
        if not name.isidentifier() or name.startswith("__") or name == "q":
            out.append(
                Diagnostic("error", name, "alarm name unusable as a diagnoser variable")
            )
        for var in (name, spec.negative_alarm):
            if var in plant_vars:
                out.append(
                    Diagnostic("error", name, f"alarm variable {var!r} clashes with the plant")
                )
            if var in emitted_vars:
                out.append(
                    Diagnostic(
                        "error",
                        name,
                        f"alarm variable {var!r} collides with alarm {emitted_vars[var]!r}",
                    )
                )
            emitted_vars[var] = name
        undeclared = formula_vars(spec.condition) - plant_vars
        if undeclared:
            out.append(
                Diagnostic("error", name, f"condition uses undeclared variables {sorted(undeclared)}")
            )
        unknown_events = formula_events(spec.condition) - plant_events
        if unknown_events:
            out.append(
                Diagnostic("error", name, f"condition uses unknown events {sorted(unknown_events)}")
            )
        if _unguarded_event(spec.condition):
            out.append(
                Diagnostic("error", name, "event atoms must sit under a yesterday operator")
            )
        if not undeclared:
            for atom in _condition_atoms(spec.condition):
                if isinstance(atom, Cmp) and isinstance(atom.lhs, VarRef):
                    dom = domain_of.get(atom.lhs.name)
                    if dom is None:
                        continue
                    if isinstance(atom.rhs, Lit) and atom.rhs.value not in dom:
                        out.append(
                            Diagnostic(
                                "error",
                                name,
                                f"value {atom.rhs.value!r} outside domain of {atom.lhs.name!r}",
                            )
                        )
                    if atom.op in ("<", "<=", ">", ">=") and not all(
                        isinstance(v, int) and not isinstance(v, bool)
                        for v in dom.values
                    ):
                        out.append(
                            Diagnostic(
                                "error",
                                name,
                                f"ordering comparison on non-numeric variable {atom.lhs.name!r}",
                            )
                        )
        if spec.delay is not None:
            if diameter is None:
                diameter = reachable_diameter(lts)
            if spec.delay > diameter:
                out.append(
                    Diagnostic(
                        "warning",
                        name,
                        f"delay {spec.delay} exceeds the reachable diameter {diameter}",
                    )
                )
    return out
