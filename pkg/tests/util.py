"""Small helpers shared by the test modules."""

from fdikit.kernel import Lts, TracePrefix, init_states, successors


def iter_runs(lts: Lts, max_events: int):
    """Yield every run of the plant with at most ``max_events`` steps."""
    stack = [TracePrefix(lts, (s,), ()) for s in init_states(lts)]
    while stack:
        prefix = stack.pop()
        yield prefix
        if len(prefix.events) == max_events:
            continue
        state = prefix.states[-1]
        for ev in lts.event_names:
            for nxt in successors(lts, state, ev):
                stack.append(prefix.extended(ev, nxt))


def project_prefix(prefix: TracePrefix, plant: Lts) -> TracePrefix:
    """Drop trailing monitor variables; plant variables come first by construction."""
    width = len(plant.vars)
    return TracePrefix(
        plant,
        tuple(s[:width] for s in prefix.states),
        prefix.events,
    )
