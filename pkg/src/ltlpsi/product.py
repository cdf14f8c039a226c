"""Per-robot products of the task automaton with the robot's motion graph.

The product answers, for one robot: while the team drives the task
automaton along an edge, where can this robot move, and which bindings
could it be holding without its own behavior contradicting the edge
guard?  Binding admissibility is judged conservatively per robot — an
existential claim is treated as binding on every holder — so candidate
plans drawn from the product are re-validated against exact semantics
downstream.

A guard is read against the labels of the state a robot occupies when
the team crosses the edge; the robot's simultaneous move is free to go
anywhere its motion graph (or waiting in place) allows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .buchi import BuchiAutomaton, Edge, GuardTuple, Lasso, dwell_bindings
from .robot import DeltaModel, RobotModel, State

EdgeKey = tuple[int, GuardTuple, int]


def capability_fn(guard: GuardTuple, rho: str) -> tuple[frozenset, frozenset, frozenset, frozenset]:
    """The four proposition sets a guard asks of binding ``rho``:
    (every holder shows, some holder shows, every holder hides, some
    holder hides)."""
    return tuple(
        frozenset(pi for pi, r in slot if r == rho) for slot in guard.slots()
    )


def binding_admissible(guard: GuardTuple, rho: str, labels: frozenset[str]) -> bool:
    """Could a robot exhibiting ``labels`` hold ``rho`` across this guard?

    Existential claims are folded into their universal counterparts: the
    robot under scrutiny might be the claim's only holder, so it must be
    able to carry the claim alone.
    """
    pos_all, pos_some, neg_all, neg_some = capability_fn(guard, rho)
    return (pos_all | pos_some) <= labels and not ((neg_all | neg_some) & labels)


def ok_bindings(guard: GuardTuple, labels: frozenset[str], alphabet: frozenset[str]) -> frozenset[str]:
    """All bindings a robot at ``labels`` may hold across ``guard``;
    bindings the guard never mentions are unconstrained."""
    mentioned = guard.bindings()
    out = set(alphabet - mentioned)
    for rho in mentioned & alphabet:
        if binding_admissible(guard, rho, labels):
            out.add(rho)
    return frozenset(out)


def distinct_ok(r: frozenset[str], c_distinct) -> bool:
    return all(len(r & c) <= 1 for c in c_distinct)


def binding_options(
    guard: GuardTuple,
    labels: frozenset[str],
    alphabet: frozenset[str],
    c_distinct=frozenset(),
) -> frozenset[frozenset[str]]:
    """Materialized binding-set choices for one robot on one edge.

    Recomputes admissibility from the definition instead of going through
    :func:`ok_bindings`, so the two routes can be property-tested against
    each other.
    """
    out = set()
    pool = sorted(alphabet)
    for n in range(1, len(pool) + 1):
        for combo in combinations(pool, n):
            r = frozenset(combo)
            if not distinct_ok(r, c_distinct):
                continue
            if all(
                rho not in guard.bindings() or binding_admissible(guard, rho, labels)
                for rho in r
            ):
                out.add(r)
    return frozenset(out)


@dataclass(frozen=True)
class ProgressSlice:
    """Where one robot stands relative to its planned run: how many plan
    edges it has crossed in total, and its physical state."""

    robot: str
    beta: Lasso
    index: int
    state: State

    def remaining(self) -> tuple[tuple[Edge, ...], tuple[Edge, ...]]:
        """(one-shot edges still ahead, the cycle crossed forever).

        Inside the cycle the current lap's tail is one-shot; every lap
        after that repeats the whole cycle.
        """
        prefix = self.beta.prefix
        cycle = self.beta.cycle
        if self.index < len(prefix):
            return prefix[self.index :], cycle
        offset = (self.index - len(prefix)) % len(cycle)
        return cycle[offset:] if offset else (), cycle


@dataclass
class ProductAutomaton:
    robot: str
    buchi: BuchiAutomaton
    model: RobotModel
    alphabet: frozenset[str]
    q0: tuple[int, State]
    edges: dict[EdgeKey, dict[tuple[State, State], frozenset[str]]]
    rmoves: dict[State, tuple[State, ...]]
    _wait_cache: dict = field(default_factory=dict, compare=False, repr=False)
    _survivor_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def edge_key(self, e: Edge) -> EdgeKey:
        return (e.src, e.guard, e.dst)

    def ok_at(self, key: EdgeKey, s: State) -> frozenset[str] | None:
        moves = self.edges.get(key)
        if moves is None:
            return None
        return moves.get((s, s))

    def self_loops(self, z: int) -> tuple[EdgeKey, ...]:
        return tuple(k for k in self.edges if k[0] == z and k[2] == z)


def _reverse_moves(model: RobotModel) -> dict[State, tuple[State, ...]]:
    rev: dict[State, list[State]] = {s: [] for s in model.states}
    for s in model.states:
        for target, _w in model.moves_from(s):
            rev[target].append(s)
    return {s: tuple(preds) for s, preds in rev.items()}


def build_product(
    buchi: BuchiAutomaton, model: RobotModel, alphabet: frozenset[str]
) -> ProductAutomaton:
    edges: dict[EdgeKey, dict[tuple[State, State], frozenset[str]]] = {}
    for e in buchi.edges:
        moves: dict[tuple[State, State], frozenset[str]] = {}
        for s in model.states:
            ok = ok_bindings(e.guard, model.labels[s], alphabet)
            moves[(s, s)] = ok
            for target, _w in model.moves_from(s):
                moves[(s, target)] = ok
        edges[(e.src, e.guard, e.dst)] = moves
    return ProductAutomaton(
        robot=model.name,
        buchi=buchi,
        model=model,
        alphabet=alphabet,
        q0=(buchi.initial, model.initial),
        edges=edges,
        rmoves=_reverse_moves(model),
    )


def _restricted_keys(g: ProductAutomaton, slice_: ProgressSlice) -> set[EdgeKey]:
    """The plan-relevant window of task edges: everything still to be
    crossed, plus the stutter loops at the states where the robot waits."""
    tail, cycle = slice_.remaining()
    keys = {g.edge_key(e) for e in tail} | {g.edge_key(e) for e in cycle}
    dwell_states = {e.src for e in tail} | {e.src for e in cycle}
    for z in dwell_states:
        keys.update(g.self_loops(z))
    return keys


def updated(g: ProductAutomaton, slice_: ProgressSlice, delta: DeltaModel) -> ProductAutomaton:
    """Fold a capability change into the product incrementally, touching
    only the plan-relevant edge window.

    Lost motion edges prune their product moves; gained motion edges and
    fresh states insert moves with freshly computed admissibility.  The
    result matches a rebuild on the touched window — an equivalence that
    is property-tested rather than trusted.
    """
    model = delta.new_model
    fresh_states = model.states - g.model.states
    new_edges = dict(g.edges)
    for key in _restricted_keys(g, slice_):
        if key not in new_edges:
            continue
        moves = dict(new_edges[key])
        for pair in delta.removed:
            moves.pop(pair, None)
        guard = key[1]
        for s in fresh_states:
            moves[(s, s)] = ok_bindings(guard, model.labels[s], g.alphabet)
        for s, target in delta.added:
            ok = moves.get((s, s))
            if ok is None:
                ok = ok_bindings(guard, model.labels[s], g.alphabet)
                moves[(s, s)] = ok
            moves[(s, target)] = ok
        new_edges[key] = moves
    return ProductAutomaton(
        robot=g.robot,
        buchi=g.buchi,
        model=model,
        alphabet=g.alphabet,
        q0=g.q0,
        edges=new_edges,
        rmoves=_reverse_moves(model),
    )


# ---------------------------------------------------------------------------
# feasibility of binding sets along a planned run

def waitable_states(g: ProductAutomaton, z: int, r: frozenset[str]) -> frozenset[State]:
    """States where the robot may let an instant pass while the task
    automaton stutters at ``z``: some stutter loop tolerates its claims."""
    cached = g._wait_cache.get((z, r))
    if cached is not None:
        return cached
    loops = g.self_loops(z)
    out = set()
    for s in g.model.states:
        for key in loops:
            ok = g.edges[key].get((s, s))
            if ok is not None and r <= ok:
                out.add(s)
                break
    result = frozenset(out)
    g._wait_cache[(z, r)] = result
    return result


def _dwell_closure(
    g: ProductAutomaton, z: int, r: frozenset[str], start: frozenset[State]
) -> frozenset[State]:
    """States reachable from ``start`` while the team stutters at ``z``.

    Each instant spent moving or waiting needs a tolerant stutter loop at
    the robot's current position; a position hostile to every loop can
    still be the *last* stop before a crossing, so it joins the closure
    without expanding further.
    """
    waitable = waitable_states(g, z, r)
    seen = set(start)
    frontier = [s for s in start if s in waitable]
    while frontier:
        s = frontier.pop()
        for target, _w in g.model.moves_from(s):
            if target in seen:
                continue
            seen.add(target)
            if target in waitable:
                frontier.append(target)
    return frozenset(seen)


def _pre_dwell(
    g: ProductAutomaton, z: int, r: frozenset[str], target: frozenset[State]
) -> frozenset[State]:
    """States whose dwell closure at ``z`` meets ``target``."""
    waitable = waitable_states(g, z, r)
    out = set(target)
    frontier = list(target)
    while frontier:
        u = frontier.pop()
        for s in g.rmoves.get(u, ()):
            if s in waitable and s not in out:
                out.add(s)
                frontier.append(s)
    # waiting in place is also a dwell step, so waitable targets admit
    # themselves; they are already in ``out``
    return frozenset(out)


def _cross(
    g: ProductAutomaton, key: EdgeKey, r: frozenset[str], positions: frozenset[State]
) -> frozenset[State]:
    """Positions after crossing one task edge from any admissible spot."""
    moves = g.edges.get(key)
    if moves is None:
        return frozenset()
    out = set()
    for s in positions:
        ok = moves.get((s, s))
        if ok is None or not r <= ok:
            continue
        out.add(s)
        for target, _w in g.model.moves_from(s):
            if (s, target) in moves:
                out.add(target)
    return frozenset(out)


def _pre_cross(
    g: ProductAutomaton, key: EdgeKey, r: frozenset[str], target: frozenset[State]
) -> frozenset[State]:
    """States from which crossing the edge can land in ``target``."""
    moves = g.edges.get(key)
    if moves is None:
        return frozenset()
    out = set()
    for s in g.model.states:
        ok = moves.get((s, s))
        if ok is None or not r <= ok:
            continue
        if s in target or any(
            target_state in target
            for target_state, _w in g.model.moves_from(s)
            if (s, target_state) in moves
        ):
            out.add(s)
    return frozenset(out)


def _lap_survivors(g: ProductAutomaton, cycle, r: frozenset[str]) -> frozenset[State]:
    """States (standing at the cycle's entry, about to dwell) from which
    the cycle can be crossed forever: the greatest fixpoint of "one more
    lap lands back among survivors"."""
    cache_key = (tuple(g.edge_key(e) for e in cycle), r)
    cached = g._survivor_cache.get(cache_key)
    if cached is not None:
        return cached
    survivors = frozenset(g.model.states)
    while True:
        pre = survivors
        for e in reversed(cycle):
            pre = _pre_cross(g, g.edge_key(e), r, pre)
            pre = _pre_dwell(g, e.src, r, pre)
        shrunk = survivors & pre
        if shrunk == survivors:
            g._survivor_cache[cache_key] = survivors
            return survivors
        survivors = shrunk


def run_feasible(g: ProductAutomaton, slice_: ProgressSlice, r: frozenset[str]) -> bool:
    """Can the robot, holding exactly ``r``, follow the rest of the plan
    forever from where it stands?"""
    tail, cycle = slice_.remaining()
    current: frozenset[State] = frozenset((slice_.state,))
    for e in tail:
        current = _dwell_closure(g, e.src, r, current)
        current = _cross(g, g.edge_key(e), r, current)
        if not current:
            return False
    return bool(current & _lap_survivors(g, cycle, r))


def feasible_bindings(
    g: ProductAutomaton,
    slice_: ProgressSlice,
    c_distinct=frozenset(),
    retained: frozenset[str] = frozenset(),
) -> frozenset[frozenset[str]]:
    """All binding sets this robot could serve for the rest of the plan.

    A set qualifies when it is nonempty, respects distinctness, every
    binding in it is still demanded by an upcoming guard (or explicitly
    retained — the robot whose capabilities changed keeps its current
    obligations on the table), and the restricted run remains crossable.
    Demand includes bindings every stutter loop at an upcoming dwell
    state insists on, not just the crossing guards themselves.
    """
    tail, cycle = slice_.remaining()
    occurring = frozenset(
        rho for e in (*tail, *cycle) for rho in e.guard.bindings()
    ) | dwell_bindings(g.buchi, (*tail, *cycle))
    pool = sorted((occurring | retained) & g.alphabet)
    out = set()
    for n in range(1, len(pool) + 1):
        for combo in combinations(pool, n):
            r = frozenset(combo)
            if not distinct_ok(r, c_distinct):
                continue
            if run_feasible(g, slice_, r):
                out.add(r)
    return frozenset(out)


def failed_bindings(
    g: ProductAutomaton,
    slice_: ProgressSlice,
    current: frozenset[str],
    c_distinct=frozenset(),
) -> frozenset[str]:
    """The robot's current bindings it can no longer serve at all."""
    family = feasible_bindings(g, slice_, c_distinct, retained=current)
    serveable = frozenset(rho for r in family for rho in r)
    return current - serveable
