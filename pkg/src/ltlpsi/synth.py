"""Turning a task-automaton run into executable team behavior.

A plan commits the team to one lasso through the task automaton.  Each
robot gets a behavior: per crossed edge, a cheapest route through its
motion graph that tolerates every instant of waiting, ends on a state
whose labels let the robot carry its bindings across the edge, and —
over the cycle part — returns exactly to its lap-entry state so the run
can repeat forever.  Routes are then padded to a common length per edge
so the whole team crosses each edge at the same instant, and the
resulting word is checked against both the automaton run and the exact
task semantics before a plan is ever returned.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from math import inf
from typing import Iterator, Mapping

from .alloc import AllocationProblem, Assignment, allocate
from .buchi import BuchiAutomaton, Edge, GuardTuple, Lasso, dwell_bindings, lassos
from .checker import LassoWord, satisfies
from .product import (
    ProductAutomaton,
    ProgressSlice,
    build_product,
    feasible_bindings,
    waitable_states,
)
from .robot import RobotModel, State
from .tasklang import FormulaAst

Node = tuple[int, State]


@dataclass(frozen=True)
class Segment:
    """One robot's motion while the team works toward crossing one plan
    edge: the dwell route walked while everyone gets into position (its
    last stop is where the guard reads this robot), then the move taken
    at the crossing instant itself."""

    edge: Edge
    route: tuple[State, ...]
    cross: State

    def to_json(self) -> dict:
        return {"route": [list(s) for s in self.route], "cross": list(self.cross)}


@dataclass(frozen=True)
class Behavior:
    robot: str
    r: frozenset[str]
    start: State
    segments: tuple[Segment, ...]
    loop_start: int
    cost: int

    def entries(self) -> Iterator[State]:
        """The state this robot occupies as each segment begins."""
        pos = self.start
        for seg in self.segments:
            yield pos
            pos = seg.cross

    def to_json(self) -> dict:
        return {
            "r": sorted(self.r),
            "start": list(self.start),
            "loop_start": self.loop_start,
            "cost": self.cost,
            "segments": [seg.to_json() for seg in self.segments],
        }


def _edge_from_json(data: dict) -> Edge:
    return Edge(src=data["src"], dst=data["dst"], guard=GuardTuple.from_json(data))


@dataclass(frozen=True)
class TeamPlan:
    """A full team commitment: the automaton run, who holds which
    bindings, and one aligned behavior per robot."""

    beta: Lasso
    assignment: Mapping[str, frozenset[str]]
    behaviors: Mapping[str, Behavior]
    scenario_hash: str = ""
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "schema": "plan/1",
            "seed": self.seed,
            "scenario": self.scenario_hash,
            "beta": {
                "prefix": [e.to_json() for e in self.beta.prefix],
                "cycle": [e.to_json() for e in self.beta.cycle],
            },
            "assignment": {j: sorted(r) for j, r in sorted(self.assignment.items())},
            "behaviors": {j: b.to_json() for j, b in sorted(self.behaviors.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "TeamPlan":
        if data.get("schema") != "plan/1":
            raise ValueError(f"not a plan document: schema {data.get('schema')!r}")
        beta = Lasso(
            prefix=tuple(_edge_from_json(d) for d in data["beta"]["prefix"]),
            cycle=tuple(_edge_from_json(d) for d in data["beta"]["cycle"]),
        )
        edges = beta.edges()
        behaviors = {}
        for j, bd in data["behaviors"].items():
            segments = tuple(
                Segment(
                    edge=edges[k],
                    route=tuple(tuple(s) for s in sd["route"]),
                    cross=tuple(sd["cross"]),
                )
                for k, sd in enumerate(bd["segments"])
            )
            behaviors[j] = Behavior(
                robot=j,
                r=frozenset(bd["r"]),
                start=tuple(bd["start"]),
                segments=segments,
                loop_start=bd["loop_start"],
                cost=bd["cost"],
            )
        return cls(
            beta=beta,
            assignment={j: frozenset(r) for j, r in data["assignment"].items()},
            behaviors=behaviors,
            scenario_hash=data.get("scenario", ""),
            seed=data.get("seed", 0),
        )


# ---------------------------------------------------------------------------
# cheapest-route extraction

def _search(
    g: ProductAutomaton,
    r: frozenset[str],
    segs: tuple[Edge, ...],
    sources: Mapping[State, int],
) -> tuple[dict[Node, int], dict[Node, tuple[Node, bool]]]:
    """Cheapest layered walks over ``segs``: layer ``k`` dwells before
    ``segs[k]``, and crossing it steps to layer ``k + 1``.

    Dwell moves require the current state to tolerate some stutter loop;
    crossing requires the guard to admit ``r`` at the current state, and
    may be combined with any single motion move (or none).  Waiting in
    place during a dwell is free and changes nothing, so it never enters
    the search.  Neighbor order and tie-breaks are fixed so the settled
    predecessor tree is reproducible run to run.

    Cost ties resolve toward the *latest* legal moment for each move: a
    dwell-step parent beats an equally cheap crossing parent.  Routes
    recovered from the tree therefore keep a robot walking inside its
    own segment instead of riding a crossing into the next one, which
    matters once behaviors are padded — every padded wait then sits at a
    state the dwell guard certified, never at a state the robot was only
    entitled to arrive at.
    """
    dist: dict[Node, int] = {}
    parent: dict[Node, tuple[Node, bool]] = {}
    done: set[Node] = set()
    heap: list[tuple[int, Node]] = []
    for s in sorted(sources):
        node = (0, s)
        dist[node] = sources[s]
        heapq.heappush(heap, (sources[s], node))

    def relax(node: Node, cost: int, prev: Node, crossed: bool) -> None:
        if cost < dist.get(node, inf):
            dist[node] = cost
            parent[node] = (prev, crossed)
            heapq.heappush(heap, (cost, node))
        elif (
            cost == dist.get(node, inf)
            and node not in done
            and not crossed
            and node in parent
            and parent[node][1]
        ):
            parent[node] = (prev, False)

    while heap:
        cost, node = heapq.heappop(heap)
        if cost > dist[node] or node in done:
            continue
        done.add(node)
        k, s = node
        if k == len(segs):
            continue
        edge = segs[k]
        if s in waitable_states(g, edge.src, r):
            for target, w in sorted(g.model.moves_from(s)):
                relax((k, target), cost + w, node, False)
        ok = g.ok_at(g.edge_key(edge), s)
        if ok is not None and r <= ok:
            relax((k + 1, s), cost, node, True)
            moves = g.edges[g.edge_key(edge)]
            for target, w in sorted(g.model.moves_from(s)):
                if (s, target) in moves:
                    relax((k + 1, target), cost + w, node, True)
    return dist, parent


def _segments_of(
    segs: tuple[Edge, ...],
    parent: Mapping[Node, tuple[Node, bool]],
    goal: Node,
) -> tuple[Segment, ...]:
    steps: list[tuple[Node, bool]] = []
    node = goal
    while node in parent:
        prev, crossed = parent[node]
        steps.append((node, crossed))
        node = prev
    steps.reverse()
    out: list[Segment] = []
    route: list[State] = []
    for (k, s), crossed in steps:
        if crossed:
            out.append(Segment(edge=segs[k - 1], route=tuple(route), cross=s))
            route = []
        else:
            route.append(s)
    if len(out) != len(segs) or route:
        raise AssertionError("recovered path does not cover the plan edges")
    return tuple(out)


def extract_behavior(
    g: ProductAutomaton,
    tail: tuple[Edge, ...],
    cycle: tuple[Edge, ...],
    r: frozenset[str],
    start: State,
) -> Behavior | None:
    """One robot's cheapest behavior along ``tail`` then ``cycle`` forever.

    The cycle part must return to the exact state it entered with, so one
    lap is the repeating unit; runs that are only periodic over several
    laps are not found.  Returns None when no such behavior exists.
    """
    tail, cycle = tuple(tail), tuple(cycle)
    if not cycle:
        raise ValueError("a behavior needs a nonempty cycle to repeat")
    dist_p, par_p = _search(g, r, tail, {start: 0})
    m, n = len(tail), len(cycle)
    anchors = sorted(s for (k, s) in dist_p if k == m)
    best: tuple[int, State, Mapping[Node, tuple[Node, bool]]] | None = None
    for s in anchors:
        if best is not None and dist_p[(m, s)] >= best[0]:
            continue
        dist_l, par_l = _search(g, r, cycle, {s: 0})
        lap = dist_l.get((n, s))
        if lap is None:
            continue
        total = dist_p[(m, s)] + lap
        if best is None or total < best[0]:
            best = (total, s, par_l)
    if best is None:
        return None
    total, anchor, par_l = best
    return Behavior(
        robot=g.robot,
        r=r,
        start=start,
        segments=_segments_of(tail, par_p, (m, anchor)) + _segments_of(cycle, par_l, (n, anchor)),
        loop_start=m,
        cost=total,
    )


def local_resynthesize(
    g: ProductAutomaton, slice_: ProgressSlice, r: frozenset[str]
) -> Behavior | None:
    """Replan one robot from where it stands, leaving the team's run and
    everyone else's behavior untouched."""
    tail, cycle = slice_.remaining()
    return extract_behavior(g, tail, cycle, r, slice_.state)


# ---------------------------------------------------------------------------
# aligning behaviors into a team word

def align_routes(behaviors: Mapping[str, Behavior]) -> dict[str, Behavior]:
    """Pad dwell routes so every robot spends the same number of instants
    on each plan edge; the team then crosses each edge simultaneously.

    Padding repeats the last position a robot was entitled to wait at, so
    a stop that is only legal as a final pre-crossing arrival is still
    entered exactly once, at the last possible moment.  A robot that has
    no route at all waits where it stands; whether that spot tolerates
    the wait is settled by the validation pass, not here.
    """
    robots = sorted(behaviors)
    shapes = {(len(behaviors[j].segments), behaviors[j].loop_start) for j in robots}
    if len(shapes) != 1:
        raise ValueError("behaviors disagree on the plan's shape")
    count = shapes.pop()[0]
    fires = [
        max(len(behaviors[j].segments[k].route) for j in robots) for k in range(count)
    ]
    out = {}
    for j in robots:
        beh = behaviors[j]
        segs = []
        for k, (seg, entry) in enumerate(zip(beh.segments, beh.entries())):
            pad = fires[k] - len(seg.route)
            route = seg.route
            if pad:
                if route:
                    wait_at = route[-2] if len(route) > 1 else entry
                    route = route[:-1] + (wait_at,) * pad + route[-1:]
                else:
                    route = (entry,) * pad
            segs.append(replace(seg, route=route))
        out[j] = replace(beh, segments=tuple(segs))
    return out


def team_word(
    behaviors: Mapping[str, Behavior], models: Mapping[str, RobotModel]
) -> LassoWord:
    """The label word the team produces when everyone follows their
    (route-aligned) behavior in lockstep.

    Instant ``t`` reads every robot's position before its ``t``-th move;
    the word's loop point is the first instant of the cycle part, which
    each behavior's lap closure makes a true repetition.
    """
    robots = sorted(behaviors)
    first = behaviors[robots[0]]
    for j in robots[1:]:
        beh = behaviors[j]
        if (
            len(beh.segments) != len(first.segments)
            or beh.loop_start != first.loop_start
            or any(
                len(a.route) != len(b.route)
                for a, b in zip(beh.segments, first.segments)
            )
        ):
            raise ValueError("behaviors are not route-aligned")
    loop = sum(len(first.segments[k].route) + 1 for k in range(first.loop_start))
    labels = {}
    for j in robots:
        beh = behaviors[j]
        trace: list[State] = []
        pos = beh.start
        for seg in beh.segments:
            trace.append(pos)
            trace.extend(seg.route)
            pos = seg.cross
        if pos != trace[loop]:
            raise ValueError(f"robot {j}: cycle part does not return to its entry state")
        labels[j] = tuple(models[j].labels[s] for s in trace)
    return LassoWord(labels=labels, loop=loop)


def drives_automaton(
    b: BuchiAutomaton,
    behaviors: Mapping[str, Behavior],
    models: Mapping[str, RobotModel],
    assignment: Assignment,
) -> bool:
    """Does lockstep execution actually carry the automaton along the
    planned run?  Every dwell instant must satisfy some stutter loop at
    the pending edge's source, and every crossing instant the edge guard
    itself — under exact team semantics, not the per-robot folding the
    routes were extracted with."""
    robots = sorted(behaviors)
    traces = {}
    for j in robots:
        beh = behaviors[j]
        trace: list[State] = []
        pos = beh.start
        for seg in beh.segments:
            trace.append(pos)
            trace.extend(seg.route)
            pos = seg.cross
        traces[j] = trace

    def team_at(t: int) -> dict[str, frozenset[str]]:
        return {j: models[j].labels[traces[j][t]] for j in robots}

    first = behaviors[robots[0]]
    t = 0
    for seg in first.segments:
        loops = [e.guard for e in b.edges if e.src == seg.edge.src and e.dst == seg.edge.src]
        for _ in seg.route:
            if not any(gu.satisfied_by(team_at(t), assignment) for gu in loops):
                return False
            t += 1
        if not seg.edge.guard.satisfied_by(team_at(t), assignment):
            return False
        t += 1
    return True


# ---------------------------------------------------------------------------
# full synthesis

def synthesize(
    models: Mapping[str, RobotModel],
    b: BuchiAutomaton,
    task: FormulaAst,
    *,
    bound: int = 12,
    seed: int = 0,
    scenario_hash: str = "",
) -> TeamPlan | None:
    """Search automaton runs in canonical order for one the team can
    serve, and commit to the first that survives validation.

    Per candidate run: each robot's feasible binding sets are computed
    against the run, bindings are allocated, behaviors extracted and
    aligned, and the resulting word is replayed against the automaton run
    and the exact task semantics.  A robot whose allocated set admits no
    one-lap-periodic behavior has that set struck from its family and
    allocation retried before the run is abandoned.  Bindings under a
    minimum-count constraint always join the allocation even when the run
    never mentions them; with no occurrence there is nothing feasible to
    hold, so such a run fails allocation and the search moves on.
    """
    if not models:
        raise ValueError("a team needs at least one robot")
    robots = sorted(models)
    alphabet = task.bindings
    products = {j: build_product(b, models[j], alphabet) for j in robots}
    cmin_bindings = frozenset(rho for rho, _ in task.c_min)
    for beta in lassos(b, bound):
        occurring = frozenset().union(*(e.guard.bindings() for e in beta.edges()))
        occurring |= dwell_bindings(b, beta.edges())
        balloc = (occurring & alphabet) | cmin_bindings
        families = {
            j: feasible_bindings(
                products[j],
                ProgressSlice(j, beta, 0, models[j].initial),
                task.c_distinct,
            )
            for j in robots
        }
        while True:
            assignment = allocate(
                AllocationProblem(
                    robots=tuple(robots),
                    bindings=balloc,
                    candidates=families,
                    c_min=task.c_min,
                    c_distinct=task.c_distinct,
                ),
                seed=seed,
            )
            if assignment is None:
                break
            behaviors: dict[str, Behavior] = {}
            struck: tuple[str, frozenset[str]] | None = None
            for j in robots:
                beh = extract_behavior(
                    products[j], beta.prefix, beta.cycle, assignment[j], models[j].initial
                )
                if beh is None:
                    struck = (j, assignment[j])
                    break
                behaviors[j] = beh
            if struck is not None:
                j, rj = struck
                if rj in families[j]:
                    families = {**families, j: families[j] - {rj}}
                    continue
                break
            behaviors = align_routes(behaviors)
            if drives_automaton(b, behaviors, models, assignment) and satisfies(
                team_word(behaviors, models), assignment, task
            ):
                return TeamPlan(
                    beta=beta,
                    assignment=dict(assignment),
                    behaviors=behaviors,
                    scenario_hash=scenario_hash,
                    seed=seed,
                )
            break
    return None
