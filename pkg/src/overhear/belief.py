"""Single-agent belief engine over a plan hierarchy.

Per plan node the engine keeps two masses: ``active`` (the agent is executing
the node, or a descendant for internal nodes) and ``blocked`` (the node has
terminated but no successor has begun, typically because the announcing
message has not been seen yet).  Ticks without an observed message apply a
linear forward propagation driven by leaf termination rates; ticks with a
message collapse the state onto the nodes consistent with it.

States are value objects; the update functions return fresh states and never
mutate their input, so recognizer arrays can be stepped from worker threads
as long as each agent's state is owned by one worker at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .ingest import INIT, TERM, ObservedMessage
from .model import TERMINATE, TeamOrientedProgram

# Evidence posteriors below the floor are truncated to zero to stop dead
# hypotheses from drifting along indefinitely.
PROB_FLOOR = 1e-12


class MonitoringError(ValueError):
    """An observation could not be reconciled with the program."""


class VisitCounter:
    """Counts node visits inside propagation loops (scalability probes)."""

    __slots__ = ("visits",)

    def __init__(self):
        self.visits = 0

    def visit(self, n: int = 1):
        self.visits += n


@dataclass
class BeliefState:
    """Belief over one agent's plan state at a given tick.

    ``scratch`` holds the normalized evidence masses of the latest message
    update (empty after a plain forward tick); it is kept for inspection and
    tests, not consumed by later updates.
    """

    time: int
    active: dict[str, float]
    blocked: dict[str, float]
    scratch: dict[str, float] = field(default_factory=dict)

    def copy(self) -> "BeliefState":
        return BeliefState(self.time, dict(self.active), dict(self.blocked),
                           dict(self.scratch))

    def mass(self, node_id: str) -> float:
        return self.active[node_id] + self.blocked[node_id]


def _zeros(p: TeamOrientedProgram) -> dict[str, float]:
    return {x: 0.0 for x in p.node_ids}


def _clamp(state: BeliefState):
    for table in (state.active, state.blocked):
        for k, v in table.items():
            if v < 0.0:
                table[k] = 0.0
            elif v > 1.0:
                table[k] = 1.0


def hazard(rate: float) -> float:
    """Per-tick termination probability of a leaf with the given rate."""
    return 1.0 - math.exp(-rate)


def init_beliefs(p: TeamOrientedProgram) -> BeliefState:
    """All mass on the root and, through first children, on the initial leaves."""
    b = BeliefState(0, _zeros(p), _zeros(p), {})
    b.active[p.root] = 1.0
    propagate_down(p.root, 1.0, b, p)
    return b


def propagate_down(x: str, rho: float, b: BeliefState, p: TeamOrientedProgram):
    """Credit ``rho`` to x's first children, splitting evenly, recursively.

    Mutates ``b.active`` in place; callers pass the state under construction.
    """
    first = p.first_children(x)
    if not first:
        return
    share = rho / len(first)
    for c in first:
        b.active[c] += share
        propagate_down(c, share, b, p)


def _prune_redundant_ancestors(p: TeamOrientedProgram, nodes) -> list[str]:
    """Keep only the deepest node of any decomposition chain in ``nodes``.

    A message naming both an ancestor and its descendant carries no extra
    information in the ancestor: its activity is implied, so it must not
    compete in normalization.
    """
    nodes = set(nodes)
    return sorted(x for x in nodes if not any(a in nodes for a in p.ancestors(x)))


def _evidence_scratch(m: ObservedMessage, b: BeliefState,
                      p: TeamOrientedProgram) -> dict[str, float]:
    """Unnormalized-to-normalized evidence masses for one message."""
    consistent = p.nodes_named(m.plan)
    if not consistent:
        raise MonitoringError(
            f"message at tick {m.tick} names plan '{m.plan}' which matches no node")
    raw: dict[str, float] = {}
    if m.kind == INIT:
        # Mass enters each consistent node from predecessors stuck awaiting
        # the announcement of their outgoing transition.
        candidates = set(consistent)
        for x in consistent:
            for t in p.in_transitions(x):
                raw[x] = raw.get(x, 0.0) + b.blocked[t.src] * t.mu * t.pi
    else:
        # Termination releases the named nodes' pending mass into successors.
        candidates = set()
        for x in consistent:
            for t in p.out_transitions(x):
                if t.dst == TERMINATE:
                    continue
                candidates.add(t.dst)
                raw[t.dst] = raw.get(t.dst, 0.0) + b.blocked[x] * t.mu * t.pi
    positive = [x for x in raw if raw[x] > 0.0]
    if positive:
        keep = _prune_redundant_ancestors(p, positive)
        total = sum(raw[x] for x in keep)
        scratch = {x: raw[x] / total for x in keep}
    else:
        # Surprise message: no pending mass anywhere.  Fall back to an even
        # split over the consistent targets; for TERM that means the named
        # nodes' successors when any exist.
        base = _prune_redundant_ancestors(p, candidates or set(consistent))
        scratch = {x: 1.0 / len(base) for x in base}
    return {x: v for x, v in scratch.items() if v >= PROB_FLOOR}


def _commit_evidence(scratch: dict[str, float], time: int,
                     p: TeamOrientedProgram) -> BeliefState:
    nxt = BeliefState(time, _zeros(p), _zeros(p), dict(scratch))
    for x in sorted(scratch):
        mass = scratch[x]
        nxt.active[x] += mass
        propagate_down(x, mass, nxt, p)
        for anc in p.ancestors(x):
            nxt.active[anc] += mass
    _clamp(nxt)
    return nxt


def incorporate_evidence(m: ObservedMessage, b: BeliefState,
                         p: TeamOrientedProgram) -> BeliefState:
    """Collapse belief onto the plan states consistent with one message."""
    scratch = _evidence_scratch(m, b, p)
    return _commit_evidence(scratch, b.time + 1, p)


def propagate_forward(b: BeliefState, p: TeamOrientedProgram,
                      counter: VisitCounter | None = None) -> BeliefState:
    """Advance one tick with no observation.

    Leaves shed mass at their termination hazard; the shed mass follows
    outgoing transitions that need no message, parks as ``blocked`` in the
    proportion that does, and climbs to the parent along TERMINATE edges.
    The map is linear and conserves leaf-active plus blocked mass as long as
    no TERMINATE edge leaves the root's own children.
    """
    nxt = BeliefState(b.time + 1, dict(b.active), dict(b.blocked), {})
    out: dict[str, float] = {x: 0.0 for x in p.node_ids}
    for x in p.postorder:
        if counter is not None:
            counter.visit()
        node = p.node(x)
        if p.is_leaf(x):
            out[x] = b.active[x] * hazard(node.rate)
        outgoing = p.out_transitions(x)
        eta = sum((1.0 - t.mu) * t.pi for t in outgoing)
        if eta > 0.0 and out[x] > 0.0:
            for t in outgoing:
                rho = out[x] * (1.0 - t.mu) * t.pi
                if rho == 0.0:
                    continue
                if t.dst == TERMINATE:
                    if node.parent is not None:
                        out[node.parent] += rho
                    else:
                        nxt.blocked[x] += rho  # program complete
                else:
                    nxt.active[t.dst] += rho
                    propagate_down(t.dst, rho, nxt, p)
        nxt.blocked[x] += out[x] * (1.0 - eta)
        nxt.active[x] -= out[x]
    _clamp(nxt)
    return nxt


def most_likely_state(b: BeliefState, p: TeamOrientedProgram) -> tuple[str, ...]:
    """Root-to-leaf path of the leaf holding the most active+blocked mass.

    Ties break toward the lowest node id.  Raises on an all-zero state.
    """
    best, best_mass = None, 0.0
    for leaf in p.leaves:  # sorted by id
        mass = b.active[leaf] + b.blocked[leaf]
        if mass > best_mass:
            best, best_mass = leaf, mass
    if best is None:
        raise MonitoringError("belief state carries no mass on any leaf")
    return p.path_to(best)


def apply_messages(b: BeliefState, msgs, p: TeamOrientedProgram) -> BeliefState:
    """Fold several same-tick messages into one time step, TERM before INIT."""
    ordered = sorted(msgs, key=lambda m: (0 if m.kind == TERM else 1, m.plan, m.sender))
    state = b
    bumped = b.time + 1
    for m in ordered:
        scratch = _evidence_scratch(m, state, p)
        state = _commit_evidence(scratch, bumped, p)
    return state


def array_overseer_tick(beliefs: dict[str, BeliefState],
                        programs: dict[str, TeamOrientedProgram],
                        msgs, counter: VisitCounter | None = None,
                        recipients=None):
    """Step every agent's recognizer one tick.

    Agents that a message is routed to incorporate it; everyone else runs
    forward propagation.  By default a message updates only its sender's
    recognizer; pass ``recipients`` (message -> iterable of agent names) to
    widen that, e.g. to the sending team under a coherence assumption.
    ``beliefs`` maps agent name to state and is updated in place;
    ``programs`` maps agent name to that agent's plan view.
    """
    inbox: dict[str, list[ObservedMessage]] = {}
    for m in msgs:
        targets = [m.sender] if recipients is None else list(recipients(m))
        for agent in targets:
            if agent not in beliefs:
                raise MonitoringError(
                    f"message at tick {m.tick} routed to unknown agent '{agent}'")
            inbox.setdefault(agent, []).append(m)
    for agent in beliefs:
        if agent in inbox:
            beliefs[agent] = apply_messages(beliefs[agent], inbox[agent],
                                                  programs[agent])
        else:
            beliefs[agent] = propagate_forward(beliefs[agent], programs[agent], counter)
