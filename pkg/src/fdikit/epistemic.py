"""Observation equivalence and a brute-force knowledge oracle.

An observer sees only the observable events of a run.  Two evaluation points
are observation-equivalent when their projected event sequences agree and
both points are entered the same way (by an observable event or not).  The
observer knows a fact at a point when the fact holds at every equivalent
point of every run.

``knows_bruteforce`` decides knowledge of a monitored state predicate by
enumerating runs directly, with unobservable runs bounded in length.  It is
intentionally unrelated to the belief-set construction used for synthesis so
the two can cross-check each other.
"""

from __future__ import annotations

from enum import Enum
from typing import Optional

from .kernel import Expr, Lts, TracePrefix, compile_expr, is_run, reachable_graph
from .pastltl import IndexOutOfRange

DEFAULT_ORACLE_CAP = 512


class EpistemicError(Exception):
    pass


class OracleCapExceeded(EpistemicError):
    pass


class Knowledge(Enum):
    KNOWS_TRUE = "KnowsTrue"
    KNOWS_FALSE = "KnowsFalse"
    UNKNOWN = "Unknown"


def obs_projection(lts: Lts, prefix: TracePrefix, upto: Optional[int] = None) -> tuple:
    """Observable events among the first ``upto`` steps (all by default)."""
    events = prefix.events if upto is None else prefix.events[:upto]
    observable = lts.observable_events
    return tuple(e for e in events if e in observable)


def is_obs_point(lts: Lts, prefix: TracePrefix, i: int) -> bool:
    """A position is an observation point when an observable event enters it."""
    if not 0 <= i < len(prefix.states):
        raise IndexOutOfRange(f"position {i} outside prefix of length {len(prefix)}")
    return i > 0 and prefix.events[i - 1] in lts.observable_events


def obs_equivalent(
    lts: Lts, p1: TracePrefix, i: int, p2: TracePrefix, j: int
) -> bool:
    """Same projected history and the same kind of entry into the position."""
    if is_obs_point(lts, p1, i) != is_obs_point(lts, p2, j):
        return False
    return obs_projection(lts, p1, i) == obs_projection(lts, p2, j)


def _pad(configs, graph, unobs_events, bound):
    """Close a config set under unobservable steps, tracking run lengths."""
    seen = set(configs)
    stack = list(configs)
    while stack:
        sid, run = stack.pop()
        if run >= bound:
            continue
        for ev in unobs_events:
            for tid in graph.successors_of(sid, ev):
                cfg = (tid, run + 1)
                if cfg not in seen:
                    seen.add(cfg)
                    stack.append(cfg)
    return seen


def knows_bruteforce(
    monitored: Lts,
    taubar: Expr,
    prefix: TracePrefix,
    i: int,
    cap: int = DEFAULT_ORACLE_CAP,
    pad_bound: Optional[int] = None,
) -> Knowledge:
    """Decide knowledge of ``taubar`` at position ``i`` by run enumeration.

    The enumeration walks observation-equivalent runs level by level over the
    projected history.  Unobservable runs longer than ``pad_bound`` (default:
    the reachable state count) revisit a state and add no new evaluation
    points, so they are cut off.
    """
    if not 0 <= i < len(prefix.states):
        raise IndexOutOfRange(f"position {i} outside prefix of length {len(prefix)}")
    graph = reachable_graph(monitored, cap=cap)
    if pad_bound is None:
        pad_bound = len(graph.states)
    if not is_run(monitored, prefix):
        raise EpistemicError("prefix is not a run of the monitored plant")

    unobs = sorted(monitored.unobservable_events)
    target_obs = obs_projection(monitored, prefix, i)
    parity = is_obs_point(monitored, prefix, i)

    configs = {(sid, 0) for sid in graph.initial}
    for ev in target_obs:
        padded = _pad(configs, graph, unobs, pad_bound)
        configs = {
            (tid, 0)
            for sid, _run in padded
            for tid in graph.successors_of(sid, ev)
        }
    if parity:
        endpoints = {sid for sid, _run in configs}
    else:
        padded = _pad(configs, graph, unobs, pad_bound)
        endpoints = {sid for sid, run in padded if run >= 1}
        if not target_obs:
            # the empty run itself is an equivalent point
            endpoints |= {sid for sid, _run in configs}
    if not endpoints:
        raise EpistemicError("no observation-equivalent points found")

    pred = compile_expr(taubar, monitored.var_index)
    values = {bool(pred(graph.states[sid])) for sid in endpoints}
    if values == {True}:
        return Knowledge.KNOWS_TRUE
    if values == {False}:
        return Knowledge.KNOWS_FALSE
    return Knowledge.UNKNOWN
