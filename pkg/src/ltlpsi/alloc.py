"""Binding (re)allocation.

Greedy round-based assignment of bindings to robots: robots holding a
binding nobody else can take go first, then the least flexible robot
that still covers something unassigned, then the rest; each robot keeps
its original set when that set is still among the admissible choices,
otherwise it takes a largest admissible set with a seeded random
tie-break.  The greedy is deliberately not optimal — a failed allocation
escalates to full team resynthesis — so an exhaustive reference
allocator is provided as a test oracle and failure certifier.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping

Binding = str
BindingSet = frozenset
Assignment = dict[str, frozenset]


def _distinct_ok(r: frozenset, c_distinct) -> bool:
    return all(len(r & c) <= 1 for c in c_distinct)


def _key(r: frozenset) -> tuple:
    return tuple(sorted(r))


@dataclass(frozen=True)
class AllocationProblem:
    """One (re)allocation instance.

    ``candidates[j]`` is the family of binding sets robot ``j`` could
    serve; ``originals[j]`` its current set (empty when allocating from
    scratch).  Original sets need not be feasible any more.
    """

    robots: tuple[str, ...]
    bindings: frozenset[Binding]
    candidates: Mapping[str, frozenset[BindingSet]]
    originals: Mapping[str, frozenset[Binding]] = field(default_factory=dict)
    c_min: frozenset[tuple[Binding, int]] = frozenset()
    c_distinct: frozenset[frozenset[Binding]] = frozenset()
    # bindings whose guard obligations all lie behind the team's current
    # progress: dropping one of these costs a robot nothing, so it does
    # not count as a change and the robot may keep carrying it
    vacuous: frozenset[Binding] = frozenset()

    def __post_init__(self):
        if len(set(self.robots)) != len(self.robots):
            raise ValueError("duplicate robot names")
        for j in self.robots:
            for r in self.candidates.get(j, frozenset()):
                if not r:
                    raise ValueError(f"robot {j}: empty candidate binding set")
                if not _distinct_ok(r, self.c_distinct):
                    raise ValueError(f"robot {j}: candidate {sorted(r)} violates distinctness")
        for rho, k in self.c_min:
            if k < 1:
                raise ValueError(f"c_min count for {rho!r} must be positive")

    def family(self, j: str) -> frozenset[BindingSet]:
        return self.candidates.get(j, frozenset())

    def original(self, j: str) -> frozenset[Binding]:
        return frozenset(self.originals.get(j, frozenset()))


def is_changed(j: str, new: frozenset, p: AllocationProblem) -> bool:
    """Does assigning ``new`` to robot ``j`` force it to resynthesize?

    Keeping the original set, or shedding only bindings that carry no
    further obligations, leaves the robot's current behavior valid.
    """
    old = p.original(j)
    if new == old:
        return False
    return not (new < old and (old - new) <= p.vacuous)


def changed_count(assignment: Mapping[str, frozenset], p: AllocationProblem) -> int:
    return sum(1 for j in p.robots if is_changed(j, assignment[j], p))


def effective_assignment(
    assignment: Mapping[str, frozenset], p: AllocationProblem
) -> Assignment:
    """Apply retention: a robot whose fresh set only sheds discharged
    bindings keeps its original set (and its behavior) instead."""
    return {
        j: p.original(j) if not is_changed(j, r, p) else r
        for j, r in assignment.items()
    }


def check_assignment(assignment: Mapping[str, frozenset], p: AllocationProblem) -> bool:
    """Validate an assignment directly against the three invariants:
    every binding covered, minimum holder counts met, distinctness kept.
    Intentionally independent of how the assignment was produced."""
    holders = {rho: sum(1 for r in assignment.values() if rho in r) for rho in p.bindings}
    if any(n < 1 for n in holders.values()):
        return False
    if any(holders.get(rho, 0) < k for rho, k in p.c_min):
        return False
    return all(_distinct_ok(r, p.c_distinct) for r in assignment.values())


def _unique_holder(
    remaining: list[str], p: AllocationProblem, rng: random.Random
) -> tuple[str | None, frozenset]:
    """The robot owed a binding only it can still take, with those
    bindings; seeded choice when several robots qualify."""
    seen_by: dict[Binding, set[str]] = {}
    for j in remaining:
        for r in p.family(j):
            for rho in r:
                seen_by.setdefault(rho, set()).add(j)
    uniques: dict[str, set[Binding]] = {}
    for rho, js in seen_by.items():
        if len(js) == 1:
            uniques.setdefault(next(iter(js)), set()).add(rho)
    if not uniques:
        return None, frozenset()
    j = rng.choice(sorted(uniques))
    return j, frozenset(uniques[j])


def _pick_largest(family, rng: random.Random) -> frozenset:
    best = max(len(r) for r in family)
    tied = sorted((r for r in family if len(r) == best), key=_key)
    return rng.choice(tied)


def allocate(p: AllocationProblem, seed: int = 0) -> Assignment | None:
    """Round-based greedy allocation; ``None`` means no allocation was
    found and the caller should escalate.

    Robots with no candidates at all are assigned the empty set up
    front — they idle and take no further part in the rounds.
    """
    rng = random.Random(seed)
    out: Assignment = {}
    remaining = []
    for j in sorted(p.robots):
        if p.family(j):
            remaining.append(j)
        else:
            out[j] = frozenset()
    unassigned = set(p.bindings)
    c_min = dict(p.c_min)

    while remaining:
        j, r_star = _unique_holder(remaining, p, rng)
        if j is not None:
            narrowed = frozenset(r for r in p.family(j) if r_star <= r)
            # no single candidate carries all of the robot's unique
            # bindings: let the round proceed on the full family and the
            # final coverage check call the failure
            pool = narrowed or p.family(j)
            original = p.original(j)
            r_new = original if original and original in pool else _pick_largest(pool, rng)
        else:
            coverers = [
                i for i in remaining if any(r & unassigned for r in p.family(i))
            ]
            if coverers:
                least = min(len(p.family(i)) for i in coverers)
                tied = sorted(i for i in coverers if len(p.family(i)) == least)
                j = rng.choice(tied)
                pool = frozenset(r for r in p.family(j) if r & unassigned)
                original = p.original(j)
                r_new = original if original and original in pool else _pick_largest(pool, rng)
            else:
                j = rng.choice(sorted(remaining))
                pool = p.family(j)
                original = p.original(j)
                r_new = original if original and original in pool else _pick_largest(pool, rng)

        out[j] = r_new
        remaining.remove(j)
        for rho in r_new:
            if rho in c_min:
                c_min[rho] -= 1
                if c_min[rho] <= 0:
                    del c_min[rho]
            if rho in unassigned and rho not in c_min:
                unassigned.discard(rho)

    if unassigned:
        return None
    return out


def allocate_optimal(p: AllocationProblem) -> Assignment | None:
    """Exhaustive reference allocator: fewest robots changed from their
    originals, ties broken lexicographically; robots may also idle.
    Refuses instances beyond desk scale."""
    if len(p.robots) > 6:
        raise ValueError("exhaustive allocation is limited to 6 robots")
    if len(p.bindings) > 4:
        raise ValueError("exhaustive allocation is limited to 4 bindings")

    robots = sorted(p.robots)
    options = {
        j: sorted(p.family(j) | {frozenset()}, key=_key) for j in robots
    }
    coverable = {
        j: frozenset(rho for r in p.family(j) for rho in r) for j in robots
    }

    best: tuple[int, tuple, Assignment] | None = None

    def walk(i: int, partial: Assignment, changed: int):
        nonlocal best
        if best is not None and changed > best[0]:
            return
        if i == len(robots):
            if check_assignment(partial, p):
                sig = tuple(_key(partial[j]) for j in robots)
                cand = (changed, sig, dict(partial))
                if best is None or cand[:2] < best[:2]:
                    best = cand
            return
        # prune: bindings nobody downstream can cover must already hold
        still_open = {
            rho
            for rho in p.bindings
            if not any(rho in coverable[j] for j in robots[i:])
        }
        holders = {
            rho: sum(1 for r in partial.values() if rho in r) for rho in still_open
        }
        minimum = dict(p.c_min)
        for rho in still_open:
            if holders[rho] < max(1, minimum.get(rho, 1)):
                return
        j = robots[i]
        ordered = sorted(options[j], key=lambda r: (is_changed(j, r, p), _key(r)))
        for r in ordered:
            partial[j] = r
            walk(i + 1, partial, changed + is_changed(j, r, p))
            del partial[j]

    walk(0, {}, 0)
    return None if best is None else best[2]
