"""Greedy binding allocation and its exhaustive oracle."""

from __future__ import annotations

from itertools import combinations

import pytest
from hypothesis import given, note, settings
from hypothesis import strategies as st

from ltlpsi.alloc import (
    AllocationProblem,
    allocate,
    allocate_optimal,
    changed_count,
    check_assignment,
    effective_assignment,
    is_changed,
)

fs = frozenset


def fam(*sets):
    return frozenset(frozenset(s) for s in sets)


# ---------------------------------------------------------------------------
# the two pinned instances

REALLOC = AllocationProblem(
    robots=("green", "blue", "orange", "pink"),
    bindings=fs({"1", "2", "3"}),
    candidates={
        "green": fam({"1"}, {"2"}),
        "blue": fam({"1"}),
        "orange": fam({"1"}),
        "pink": fam({"1"}, {"3"}, {"1", "3"}),
    },
    originals={
        "green": fs({"1"}),
        "blue": fs({"1", "3"}),
        "orange": fs({"1"}),
        "pink": fs({"2", "3"}),
    },
    c_min=fs({("1", 2)}),
    vacuous=fs({"3"}),  # the storage visit is already behind the team
)


def test_reallocation_instance_is_seed_independent():
    expected = {
        "green": fs({"2"}),
        "blue": fs({"1"}),
        "orange": fs({"1"}),
        "pink": fs({"1", "3"}),
    }
    for seed in range(24):
        assert allocate(REALLOC, seed=seed) == expected
    optimal = allocate_optimal(REALLOC)
    assert optimal == expected
    assert changed_count(optimal, REALLOC) == 2


def test_retention_keeps_narrowed_robots_unchanged():
    raw = {
        "green": fs({"2"}),
        "blue": fs({"1"}),
        "orange": fs({"1"}),
        "pink": fs({"1", "3"}),
    }
    assert not is_changed("blue", fs({"1"}), REALLOC)  # sheds only binding 3
    assert is_changed("pink", fs({"3"}), REALLOC)  # sheds binding 2, still live
    assert is_changed("green", fs({"2"}), REALLOC)
    assert effective_assignment(raw, REALLOC) == {
        "green": fs({"2"}),
        "blue": fs({"1", "3"}),
        "orange": fs({"1"}),
        "pink": fs({"1", "3"}),
    }


INITIAL = AllocationProblem(
    robots=("green", "blue", "orange", "pink"),
    bindings=fs({"1", "2", "3"}),
    candidates={
        "green": fam({"1"}, {"2"}),
        "blue": fam({"1"}, {"3"}, {"1", "3"}),
        "orange": fam({"1"}),
        "pink": fam({"1"}, {"2"}, {"3"}, {"2", "3"}, {"1", "3"}),
    },
    c_min=fs({("1", 2)}),
)


def test_initial_allocation_has_two_outcomes_and_hits_the_pinned_one():
    pinned = {
        "green": fs({"1"}),
        "blue": fs({"1", "3"}),
        "orange": fs({"1"}),
        "pink": fs({"2", "3"}),
    }
    seen = set()
    hit = False
    for seed in range(32):
        result = allocate(INITIAL, seed=seed)
        assert result is not None
        assert check_assignment(result, INITIAL)
        seen.add(tuple(sorted((j, tuple(sorted(r))) for j, r in result.items())))
        if result == pinned:
            hit = True
    assert hit, "the documented outcome never surfaced across 32 seeds"
    assert len(seen) == 2  # the only other outcome swaps green to {2}


# ---------------------------------------------------------------------------
# small pinned behaviors

def test_single_robot_single_binding():
    p = AllocationProblem(robots=("a",), bindings=fs({"1"}), candidates={"a": fam({"1"})})
    assert allocate(p) == {"a": fs({"1"})}


def test_uncoverable_binding_fails():
    p = AllocationProblem(
        robots=("a", "b"),
        bindings=fs({"1", "2"}),
        candidates={"a": fam({"1"}), "b": fam({"1"})},
    )
    assert allocate(p) is None
    assert allocate_optimal(p) is None


def test_min_count_spreads_across_robots():
    p = AllocationProblem(
        robots=("a", "b", "c"),
        bindings=fs({"1"}),
        candidates={j: fam({"1"}) for j in ("a", "b", "c")},
        c_min=fs({("1", 2)}),
    )
    for seed in range(6):
        result = allocate(p, seed=seed)
        assert result is not None
        assert sum(1 for r in result.values() if "1" in r) >= 2


def test_valid_originals_are_kept():
    p = AllocationProblem(
        robots=("a", "b"),
        bindings=fs({"1", "2"}),
        candidates={"a": fam({"1"}, {"2"}), "b": fam({"1"}, {"2"})},
        originals={"a": fs({"1"}), "b": fs({"2"})},
    )
    for seed in range(8):
        assert allocate(p, seed=seed) == {"a": fs({"1"}), "b": fs({"2"})}
    assert allocate_optimal(p) == {"a": fs({"1"}), "b": fs({"2"})}


def test_empty_family_idles_the_robot():
    p = AllocationProblem(
        robots=("a", "b"),
        bindings=fs({"1"}),
        candidates={"a": fam({"1"}), "b": frozenset()},
    )
    assert allocate(p) == {"a": fs({"1"}), "b": fs()}


def test_problem_validation():
    with pytest.raises(ValueError, match="empty candidate"):
        AllocationProblem(robots=("a",), bindings=fs({"1"}), candidates={"a": fam(set())})
    with pytest.raises(ValueError, match="distinctness"):
        AllocationProblem(
            robots=("a",),
            bindings=fs({"1", "2"}),
            candidates={"a": fam({"1", "2"})},
            c_distinct=fs({fs({"1", "2"})}),
        )
    with pytest.raises(ValueError, match="positive"):
        AllocationProblem(
            robots=("a",), bindings=fs({"1"}), candidates={"a": fam({"1"})},
            c_min=fs({("1", 0)}),
        )


def test_optimal_refuses_large_instances():
    many = tuple(f"r{i}" for i in range(7))
    with pytest.raises(ValueError, match="6 robots"):
        allocate_optimal(
            AllocationProblem(robots=many, bindings=fs({"1"}), candidates={})
        )
    with pytest.raises(ValueError, match="4 bindings"):
        allocate_optimal(
            AllocationProblem(
                robots=("a",), bindings=fs({"1", "2", "3", "4", "5"}), candidates={}
            )
        )


# ---------------------------------------------------------------------------
# properties

BINDINGS = ("1", "2", "3")


@st.composite
def problems(draw):
    n = draw(st.integers(1, 4))
    robots = tuple(f"bot{i}" for i in range(n))
    bindings = frozenset(
        draw(st.sets(st.sampled_from(BINDINGS), min_size=1, max_size=3))
    )
    if len(bindings) >= 2 and draw(st.booleans()):
        pair = draw(
            st.frozensets(st.sampled_from(sorted(bindings)), min_size=2, max_size=2)
        )
        c_distinct = fs({pair})
    else:
        c_distinct = frozenset()
    pool = [
        frozenset(c)
        for k in range(1, len(bindings) + 1)
        for c in combinations(sorted(bindings), k)
    ]
    pool = [r for r in pool if all(len(r & c) <= 1 for c in c_distinct)]
    candidates = {}
    originals = {}
    for j in robots:
        candidates[j] = frozenset(draw(st.sets(st.sampled_from(pool), max_size=4)))
        style = draw(st.sampled_from(("empty", "member", "stale")))
        if style == "member" and candidates[j]:
            originals[j] = draw(st.sampled_from(sorted(candidates[j], key=sorted)))
        elif style == "stale":
            originals[j] = draw(st.sampled_from(pool))
        else:
            originals[j] = frozenset()
    c_min = frozenset()
    if draw(st.booleans()):
        rho = draw(st.sampled_from(sorted(bindings)))
        c_min = fs({(rho, draw(st.integers(1, min(2, n))))})
    return AllocationProblem(
        robots=robots,
        bindings=bindings,
        candidates=candidates,
        originals=originals,
        c_min=c_min,
        c_distinct=c_distinct,
    )


@given(problems(), st.integers(0, 2**16))
@settings(max_examples=300, deadline=None)
def test_allocate_is_sound_and_deterministic(p, seed):
    first = allocate(p, seed=seed)
    again = allocate(p, seed=seed)
    assert first == again
    if first is not None:
        assert check_assignment(first, p)
        assert set(first) == set(p.robots)


@given(problems(), st.integers(0, 2**16))
@settings(max_examples=300, deadline=None)
def test_greedy_success_implies_oracle_success_and_oracle_is_minimal(p, seed):
    greedy = allocate(p, seed=seed)
    optimal = allocate_optimal(p)
    if greedy is not None:
        assert optimal is not None
        assert check_assignment(optimal, p)
        assert changed_count(optimal, p) <= changed_count(greedy, p)
    elif optimal is not None:
        # the greedy is knowingly incomplete; surface the instance rather
        # than fail (full resynthesis is the safety net downstream)
        note(f"greedy missed a solvable instance: {p}")


def test_all_originals_feasible_means_zero_changes():
    # build instances where every original is valid in its selection
    # context and jointly covering: the greedy must keep all of them
    p = AllocationProblem(
        robots=("a", "b", "c"),
        bindings=fs({"1", "2", "3"}),
        candidates={
            "a": fam({"1"}, {"1", "2"}),
            "b": fam({"2"}, {"2", "3"}),
            "c": fam({"3"}, {"1", "3"}),
        },
        originals={"a": fs({"1", "2"}), "b": fs({"2", "3"}), "c": fs({"1", "3"})},
    )
    for seed in range(12):
        assert allocate(p, seed=seed) == dict(p.originals)
