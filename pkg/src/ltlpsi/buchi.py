"""Automaton route: translating literal-level formulas to Büchi automata.

Letters of the automaton alphabet are :class:`GuardTuple` values — four
slots of (action, binding) pairs, read as a conjunction of quantified
claims about the robots holding each binding.  The translation is a
tableau construction with on-the-fly node merging, a counter-based
reduction from generalized to plain Büchi acceptance, and a final
bisimulation-quotient pass that folds duplicate states.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping

from .checker import LassoWord
from .tasklang import (
    LAnd,
    LFalse,
    LLit,
    LNode,
    LOr,
    LRelease,
    LTrue,
    LUntil,
    UnsupportedTaskError,
)

Pair = tuple[str, str]  # (action, binding)

_SLOTS = ("true_all", "true_some", "false_all", "false_some")


@dataclass(frozen=True)
class GuardTuple:
    """One alphabet letter: a conjunction of quantified action claims.

    For a pair (action, binding): ``true_all`` demands every holder of
    the binding exhibit the action, ``true_some`` at least one holder,
    ``false_all`` every holder lack it, ``false_some`` at least one
    holder lack it.  Every claim implies the binding is held by someone;
    the empty guard is satisfied by anything.
    """

    true_all: frozenset[Pair] = frozenset()
    true_some: frozenset[Pair] = frozenset()
    false_all: frozenset[Pair] = frozenset()
    false_some: frozenset[Pair] = frozenset()

    def __post_init__(self):
        slots = [getattr(self, name) for name in _SLOTS]
        if sum(map(len, slots)) != len(frozenset().union(*slots)):
            raise ValueError("guard slots must be pairwise disjoint")

    def slots(self) -> tuple[frozenset[Pair], ...]:
        return tuple(getattr(self, name) for name in _SLOTS)

    @property
    def size(self) -> int:
        return sum(len(s) for s in self.slots())

    def key(self):
        """Total order: smaller guards first, then slot sizes, then pairs."""
        slots = self.slots()
        return (self.size, tuple(len(s) for s in slots), tuple(tuple(sorted(s)) for s in slots))

    def bindings(self) -> frozenset[str]:
        return frozenset(rho for s in self.slots() for (_, rho) in s)

    def subsumes(self, other: "GuardTuple") -> bool:
        """True when every word satisfying ``other`` satisfies ``self``."""
        return all(mine <= theirs for mine, theirs in zip(self.slots(), other.slots()))

    def satisfied_by(
        self, labels: Mapping[str, frozenset[str]], assignment: Mapping[str, frozenset[str]]
    ) -> bool:
        def holders(rho: str) -> list[str]:
            return [j for j in labels if rho in assignment.get(j, frozenset())]

        for pi, rho in self.true_all:
            hs = holders(rho)
            if not hs or not all(pi in labels[j] for j in hs):
                return False
        for pi, rho in self.true_some:
            if not any(pi in labels[j] for j in holders(rho)):
                return False
        for pi, rho in self.false_all:
            hs = holders(rho)
            if not hs or not all(pi not in labels[j] for j in hs):
                return False
        for pi, rho in self.false_some:
            if not any(pi not in labels[j] for j in holders(rho)):
                return False
        return True

    def to_json(self) -> dict:
        return {name: sorted(getattr(self, name)) for name in _SLOTS}

    @classmethod
    def from_json(cls, data: dict) -> "GuardTuple":
        return cls(**{name: frozenset(map(tuple, data.get(name, ()))) for name in _SLOTS})


def guard_from_literals(lits) -> GuardTuple | None:
    """Normalize a literal conjunction into one letter.

    Returns None when the conjunction is unsatisfiable (a universal claim
    clashing with an opposing claim on the same pair).  A purely
    existential clash — some holder with the action and some without —
    is satisfiable but has no letter form, so it is rejected outright.
    """
    flavors: dict[Pair, set[str]] = {}
    for lit in lits:
        pair = (lit.action, lit.binding)
        tag = ("E" if lit.exists else "A") + ("T" if lit.positive else "F")
        flavors.setdefault(pair, set()).add(tag)
    slots: dict[str, set[Pair]] = {name: set() for name in _SLOTS}
    for pair, tags in flavors.items():
        if "AT" in tags and ("AF" in tags or "EF" in tags):
            return None
        if "AF" in tags and ("AT" in tags or "ET" in tags):
            return None
        if "ET" in tags and "EF" in tags:  # only existential claims remain
            raise UnsupportedTaskError(
                f"the task needs one robot on binding {pair[1]} showing {pair[0]!r} and "
                "another hiding it at the same instant; letters cannot express that"
            )
        if "AT" in tags:
            slots["true_all"].add(pair)
        elif "AF" in tags:
            slots["false_all"].add(pair)
        elif "ET" in tags:
            slots["true_some"].add(pair)
        else:
            slots["false_some"].add(pair)
    return GuardTuple(**{name: frozenset(s) for name, s in slots.items()})


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    guard: GuardTuple

    def key(self):
        return (self.src, self.dst, self.guard.key())

    def to_json(self) -> dict:
        return {"src": self.src, "dst": self.dst, **self.guard.to_json()}


@dataclass(frozen=True)
class BuchiAutomaton:
    states: frozenset[int]
    initial: int
    accepting: frozenset[int]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if self.initial not in self.states:
            raise ValueError("initial state missing from the state set")
        if not self.accepting <= self.states:
            raise ValueError("accepting states missing from the state set")
        for e in self.edges:
            if e.src not in self.states or e.dst not in self.states:
                raise ValueError(f"edge {e.src}->{e.dst} leaves the state set")
        object.__setattr__(self, "edges", tuple(sorted(set(self.edges), key=Edge.key)))

    @cached_property
    def out_edges(self) -> dict[int, tuple[Edge, ...]]:
        out: dict[int, list[Edge]] = {s: [] for s in self.states}
        for e in self.edges:
            out[e.src].append(e)
        return {s: tuple(es) for s, es in out.items()}

    def has_accepting_lasso(self) -> bool:
        for scc in _sccs(self.states, {s: [e.dst for e in self.out_edges[s]] for s in self.states}):
            if not _reachable_from(self, self.initial, scc):
                continue
            cyclic = len(scc) > 1 or any(
                e.dst == e.src for s in scc for e in self.out_edges[s]
            )
            if cyclic and scc & self.accepting:
                return True
        return False

    def to_json(self) -> dict:
        return {
            "schema": "automaton/1",
            "states": sorted(self.states),
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "edges": [e.to_json() for e in self.edges],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BuchiAutomaton":
        if data.get("schema") != "automaton/1":
            raise ValueError(f"not an automaton document: schema={data.get('schema')!r}")
        edges = tuple(
            Edge(e["src"], e["dst"], GuardTuple.from_json(e)) for e in data["edges"]
        )
        return cls(
            states=frozenset(data["states"]),
            initial=data["initial"],
            accepting=frozenset(data["accepting"]),
            edges=edges,
        )


def _reachable_from(b: BuchiAutomaton, start: int, goal: frozenset[int]) -> bool:
    seen = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        if s in goal:
            return True
        for e in b.out_edges[s]:
            if e.dst not in seen:
                seen.add(e.dst)
                stack.append(e.dst)
    return False


def _sccs(nodes, succ) -> list[frozenset]:
    """Tarjan's algorithm, iterative."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list[frozenset] = []
    counter = itertools.count()

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for child in it:
                if child not in index:
                    index[child] = low[child] = next(counter)
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(succ[child])))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    s = stack.pop()
                    on_stack.discard(s)
                    comp.add(s)
                    if s == node:
                        break
                out.append(frozenset(comp))
    return out


# ---------------------------------------------------------------------------
# tableau translation

def _formula_key(f: LNode):
    if isinstance(f, LTrue):
        return ("0true",)
    if isinstance(f, LFalse):
        return ("1false",)
    if isinstance(f, LLit):
        return ("2lit", f.lit.action, f.lit.binding, f.lit.exists, f.lit.positive)
    tag = {LAnd: "3and", LOr: "4or", LUntil: "5until", LRelease: "6release"}[type(f)]
    return (tag, _formula_key(f.left), _formula_key(f.right))


def _untils(f: LNode, acc: set) -> set:
    if isinstance(f, (LAnd, LOr, LUntil, LRelease)):
        if isinstance(f, LUntil):
            acc.add(f)
        _untils(f.left, acc)
        _untils(f.right, acc)
    return acc


class _TabNode:
    __slots__ = ("name", "incoming", "new", "old", "next")

    def __init__(self, name, incoming, new, old, nxt):
        self.name = name
        self.incoming = incoming
        self.new = new
        self.old = old
        self.next = nxt


_INIT = -1


def _tableau(ir: LNode):
    """Expand the formula into tableau nodes keyed by (old, next)."""
    done: dict[tuple, _TabNode] = {}
    names = itertools.count()
    pending: list[_TabNode] = [_TabNode(None, {_INIT}, {ir}, set(), set())]

    def expand(node: _TabNode) -> None:
        while node.new:
            f = min(node.new, key=_formula_key)
            node.new.discard(f)
            if isinstance(f, LTrue):
                continue
            if isinstance(f, LFalse):
                return
            if isinstance(f, LLit):
                if LLit(f.lit.negate()) in node.old:
                    return
                node.old.add(f)
                continue
            if f in node.old:
                continue
            if isinstance(f, LAnd):
                node.old.add(f)
                node.new |= {f.left, f.right} - node.old
                continue
            if isinstance(f, LOr):
                left = _TabNode(
                    None, set(node.incoming), node.new | {f.left}, node.old | {f}, set(node.next)
                )
                right = _TabNode(
                    None, set(node.incoming), node.new | {f.right}, node.old | {f}, set(node.next)
                )
                expand(left)
                expand(right)
                return
            if isinstance(f, LUntil):
                wait = _TabNode(
                    None,
                    set(node.incoming),
                    node.new | ({f.left} - node.old),
                    node.old | {f},
                    node.next | {f},
                )
                fire = _TabNode(
                    None, set(node.incoming), node.new | ({f.right} - node.old), node.old | {f}, set(node.next)
                )
                expand(wait)
                expand(fire)
                return
            if isinstance(f, LRelease):
                wait = _TabNode(
                    None,
                    set(node.incoming),
                    node.new | ({f.right} - node.old),
                    node.old | {f},
                    node.next | {f},
                )
                fire = _TabNode(
                    None,
                    set(node.incoming),
                    node.new | ({f.left, f.right} - node.old),
                    node.old | {f},
                    set(node.next),
                )
                expand(wait)
                expand(fire)
                return
            raise AssertionError(f)
        key = (
            frozenset(node.old),
            frozenset(node.next),
        )
        existing = done.get(key)
        if existing is not None:
            existing.incoming |= node.incoming
            return
        node.name = next(names)
        done[key] = node
        pending.append(_TabNode(None, {node.name}, set(node.next), set(), set()))

    while pending:
        expand(pending.pop(0))
    return sorted(done.values(), key=lambda n: n.name)


def translate(ir: LNode) -> BuchiAutomaton:
    """Build a Büchi automaton accepting exactly the words of ``ir``
    (letter-level semantics)."""
    nodes = _tableau(ir)
    untils = sorted(_untils(ir, set()), key=_formula_key)
    k = len(untils)

    # guard of a tableau node: the conjunction of its literal obligations
    guards: dict[int, GuardTuple | None] = {}
    for node in nodes:
        lits = sorted(
            (f.lit for f in node.old if isinstance(f, LLit)),
            key=lambda l: (l.action, l.binding, l.exists, l.positive),
        )
        guards[node.name] = guard_from_literals(lits)

    in_f: dict[int, list[bool]] = {}
    for node in nodes:
        # an until is no obligation here when it is absent, its promise
        # already holds, or its promise is truth itself (truth never
        # enters ``old`` — expansion drops it on the spot)
        in_f[node.name] = [
            u not in node.old or isinstance(u.right, LTrue) or u.right in node.old
            for u in untils
        ]

    # counter product: (node, level); level bumps when the source sits in
    # the level's acceptance set, acceptance = completing a full round
    state_ids: dict[tuple[int, int], int] = {}

    def sid(name: int, level: int) -> int:
        if (name, level) not in state_ids:
            state_ids[(name, level)] = len(state_ids)
        return state_ids[(name, level)]

    init = sid(_INIT, 0)
    edges: list[Edge] = []
    seen: set[tuple[int, int]] = {(_INIT, 0)}
    frontier = [(_INIT, 0)]
    by_incoming: dict[int, list[_TabNode]] = {}
    for node in nodes:
        for src in node.incoming:
            by_incoming.setdefault(src, []).append(node)
    while frontier:
        name, level = frontier.pop(0)
        if k:
            bump = name != _INIT and in_f[name][level]
            nxt_level = (level + 1) % k if bump else level
        else:
            nxt_level = 0
        for node in by_incoming.get(name, ()):
            guard = guards[node.name]
            if guard is None:
                continue
            edges.append(Edge(sid(name, level), sid(node.name, nxt_level), guard))
            if (node.name, nxt_level) not in seen:
                seen.add((node.name, nxt_level))
                frontier.append((node.name, nxt_level))

    states = frozenset(state_ids.values())
    if k:
        accepting = frozenset(
            s for (name, level), s in state_ids.items() if name != _INIT and level == 0 and in_f[name][0]
        )
    else:
        accepting = states
    raw = BuchiAutomaton(states, init, accepting, tuple(edges))
    return _fold(raw)


def _minimal_guards(guards) -> list[GuardTuple]:
    """Drop guards subsumed by a strictly smaller guard on the same edge
    pair (fewer claims accept more words)."""
    kept: list[GuardTuple] = []
    for g in sorted(set(guards), key=GuardTuple.key):
        if not any(k.subsumes(g) for k in kept):
            kept.append(g)
    return kept


def _fold_once(b: BuchiAutomaton) -> BuchiAutomaton:
    part = {s: 0 if s in b.accepting else 1 for s in b.states}
    while True:
        sigs = {
            s: (
                part[s],
                tuple(sorted({(e.guard.key(), part[e.dst]) for e in b.out_edges[s]})),
            )
            for s in b.states
        }
        renum = {sig: i for i, sig in enumerate(sorted(set(sigs.values())))}
        refined = {s: renum[sigs[s]] for s in b.states}
        if refined == part:
            break
        part = refined

    pair_guards: dict[tuple[int, int], list[GuardTuple]] = {}
    for e in b.edges:
        pair_guards.setdefault((part[e.src], part[e.dst]), []).append(e.guard)
    minimal = {pair: _minimal_guards(gs) for pair, gs in pair_guards.items()}

    # canonical numbering: breadth-first from the initial class, edges in
    # (guard key, refinement class) order; unreached classes are dead
    outs: dict[int, list[tuple]] = {}
    for (src, dst), gs in minimal.items():
        for g in gs:
            outs.setdefault(src, []).append((g.key(), dst, g))
    number: dict[int, int] = {part[b.initial]: 0}
    order = [part[b.initial]]
    qi = 0
    while qi < len(order):
        cls = order[qi]
        qi += 1
        for _, dst, _g in sorted(outs.get(cls, ()), key=lambda t: t[:2]):
            if dst not in number:
                number[dst] = len(number)
                order.append(dst)
    edges = tuple(
        Edge(number[src], number[dst], g)
        for (src, dst), gs in minimal.items()
        if src in number
        for g in gs
    )
    accepting = frozenset(number[part[s]] for s in b.accepting if part[s] in number)
    return BuchiAutomaton(frozenset(number.values()), 0, accepting, edges)


def _fold(b: BuchiAutomaton) -> BuchiAutomaton:
    """Quotient by bisimulation and prune subsumed guards, to a fixpoint."""
    while True:
        folded = _fold_once(b)
        if len(folded.states) == len(b.states) and len(folded.edges) == len(b.edges):
            return folded
        b = folded


# ---------------------------------------------------------------------------
# lassos

@dataclass(frozen=True)
class Lasso:
    prefix: tuple[Edge, ...]
    cycle: tuple[Edge, ...]

    @property
    def junction(self) -> int:
        return self.cycle[0].src

    def edges(self) -> tuple[Edge, ...]:
        return self.prefix + self.cycle

    def key(self):
        return (
            len(self.prefix) + len(self.cycle),
            len(self.prefix),
            tuple(e.key() for e in self.edges()),
        )


def dwell_bindings(b: BuchiAutomaton, edges: Iterable[Edge]) -> frozenset[str]:
    """Bindings the team cannot leave unassigned while it waits.

    While working toward an edge the team dwells at that edge's source,
    and every dwell instant must satisfy one of the source's stutter
    loops.  A binding mentioned by *every* such loop therefore needs a
    holder the moment anyone waits there, even if no crossing guard ever
    names it — an until-shaped hold condition is the typical case.
    """
    loops: dict[int, list[frozenset[str]]] = {}
    for e in b.edges:
        if e.src == e.dst:
            loops.setdefault(e.src, []).append(e.guard.bindings())
    out: set[str] = set()
    for e in edges:
        named = loops.get(e.src)
        if named:
            out |= frozenset.intersection(*named)
    return frozenset(out)


def lassos(b: BuchiAutomaton, max_len: int) -> Iterator[Lasso]:
    """Candidate runs in canonical order: shortest total length first,
    then shortest prefix, then lexicographic by edge keys.  Prefixes are
    simple paths from the initial state, cycles are simple and contain at
    least one accepting state, and they overlap only at the junction."""

    def prefixes(length: int) -> Iterator[tuple[tuple[Edge, ...], frozenset[int]]]:
        def walk(state: int, path: tuple[Edge, ...], visited: frozenset[int]):
            if len(path) == length:
                yield path, visited
                return
            for e in b.out_edges[state]:
                if e.dst in visited:
                    continue
                yield from walk(e.dst, path + (e,), visited | {e.dst})

        yield from walk(b.initial, (), frozenset((b.initial,)))

    def cycles(junction: int, length: int, blocked: frozenset[int]) -> Iterator[tuple[Edge, ...]]:
        def walk(state: int, path: tuple[Edge, ...], visited: frozenset[int], hit: bool):
            if len(path) == length:
                if state == junction and hit:
                    yield path
                return
            for e in b.out_edges[state]:
                if e.dst == junction:
                    if len(path) + 1 == length:
                        yield from walk(e.dst, path + (e,), visited, hit or e.dst in b.accepting)
                    continue
                if e.dst in visited or e.dst in blocked:
                    continue
                yield from walk(
                    e.dst, path + (e,), visited | {e.dst}, hit or e.dst in b.accepting
                )

        yield from walk(junction, (), frozenset((junction,)), junction in b.accepting)

    for total in range(1, max_len + 1):
        for plen in range(0, total):
            for prefix, visited in prefixes(plen):
                junction = prefix[-1].dst if prefix else b.initial
                for cycle in cycles(junction, total - plen, visited - {junction}):
                    yield Lasso(prefix, cycle)


def accepts_lasso_word(
    b: BuchiAutomaton, word: LassoWord, assignment: Mapping[str, frozenset[str]]
) -> bool:
    """Word membership, by cycle detection on the word-automaton product."""
    n = word.length
    robots = word.robots()

    def labels_at(t: int) -> dict[str, frozenset[str]]:
        return {j: word.labels[j][t] for j in robots}

    sat: dict[tuple[int, GuardTuple], bool] = {}

    def guard_ok(t: int, guard: GuardTuple) -> bool:
        key = (t, guard)
        if key not in sat:
            sat[key] = guard.satisfied_by(labels_at(t), assignment)
        return sat[key]

    start = (0, b.initial)
    nodes = {start}
    frontier = [start]
    succ: dict[tuple[int, int], list[tuple[int, int]]] = {}
    while frontier:
        t, z = frontier.pop()
        nbrs = []
        for e in b.out_edges[z]:
            if guard_ok(t, e.guard):
                node = (word.succ(t), e.dst)
                nbrs.append(node)
                if node not in nodes:
                    nodes.add(node)
                    frontier.append(node)
        succ[(t, z)] = nbrs
    for scc in _sccs(nodes, succ):
        cyclic = len(scc) > 1 or any(node in succ[node] for node in scc)
        if cyclic and any(z in b.accepting for (_, z) in scc):
            return True
    return False
