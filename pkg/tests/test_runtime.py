"""Mid-run repair: one test per rung of the escalation ladder, each with
its expected outcome worked out by hand, plus invariants re-derived
independently of the runtime's own bookkeeping (move legality against
the robot's true motion graph, constraint counts straight from the
assignment, products against from-scratch rebuilds).
"""

import json

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ltlpsi.product import build_product
from ltlpsi.robot import Modification, apply_modification
from ltlpsi.runtime import (
    CONTINUE,
    FULL,
    LOCAL,
    REALLOCATE,
    TASK_FAILED,
    TeamRuntime,
)
from ltlpsi.synth import synthesize
from ltlpsi.tasklang import parse_task

from test_product import AUTOMATA, TASK_TEXTS, automaton
from test_synth import validate_behavior, walker, weighted_models


def make_runtime(models, text, *, seed=0, bound=4):
    task = parse_task(text)
    b = automaton(text)
    plan = synthesize(models, b, task, bound=bound, seed=seed)
    assert plan is not None, "fixture must be plannable"
    return TeamRuntime(models, b, task, plan, seed=seed, bound=bound), task, b


# ---------------------------------------------------------------------------
# independent re-derivations

def folded_view(rt, j):
    """The robot's true current model: committed base plus stored edits."""
    model = rt.models[j]
    for mod in rt.pending[j]:
        model = apply_modification(model, mod)
    return model


def remaining_walk(rt, j):
    """Every position the robot will occupy from here on (one full lap
    of the cycle stands in for all of them)."""
    segs = list(rt._queue[j])
    walk = [rt.positions[j], *rt._cursor[j], segs[0].cross]
    for seg in segs[1:]:
        walk.extend((*seg.route, seg.cross))
    for seg in rt._lap[j]:
        walk.extend((*seg.route, seg.cross))
    return walk


def assert_executable(rt):
    """Every move still ahead of any robot exists in that robot's true
    motion graph (waiting in place is always allowed)."""
    for j in rt.models:
        gamma = folded_view(rt, j).gamma
        walk = remaining_walk(rt, j)
        for a, z in zip(walk, walk[1:]):
            if a != z:
                assert (a, z) in gamma, f"{j}: planned move {a} -> {z} is gone"


def crossing_satisfied(rt, snap, edge):
    labels = {j: rt.models[j].labels[s] for j, s in snap.items()}
    return edge.guard.satisfied_by(labels, rt.assignment)


def run_to_crossing(rt, limit=12):
    for _ in range(limit):
        snap, crossed = rt.tick()
        if crossed is not None:
            return snap, crossed
    raise AssertionError("no crossing within the tick limit")


# ---------------------------------------------------------------------------
# fixtures

DIAMOND_LABELS = {"A": set(), "B": set(), "D": set(), "C": {"act_a"}}
DIAMOND_ROADS = [("A", "B", 1), ("B", "C", 1), ("B", "A", 1), ("A", "D", 3), ("D", "C", 3)]


def diamond_bot(name="p"):
    return walker(name, DIAMOND_LABELS, DIAMOND_ROADS, "A")


# ---------------------------------------------------------------------------
# step 1: free changes

def test_additions_never_interrupt():
    rt, *_ = make_runtime({"p": diamond_bot()}, "F(act_a)@{1}")
    before = rt.behaviors["p"]
    d = rt.handle(Modification(robot="p", t=0, added=(("motion", "C", "A", 5),)))
    assert d.outcome == CONTINUE and d.step == 1
    assert d.rationale.startswith("step 1")
    assert rt.behaviors["p"] is before
    assert rt.pending["p"] and rt.assignment["p"] == frozenset({"1"})
    assert d.elapsed_ms < 50
    json.dumps(d.to_json(), sort_keys=True)


def test_removals_behind_the_team_cost_nothing():
    rt, *_ = make_runtime({"p": diamond_bot()}, "F(act_a)@{1}")
    rt.tick()  # p steps A -> B; the A->B road is now history
    d = rt.handle(Modification(robot="p", t=1, removed=(("motion", "A", "B"),)))
    assert d.outcome == CONTINUE and d.step == 1
    assert rt.pending["p"]
    assert_executable(rt)


def test_modifications_for_strangers_are_rejected():
    rt, *_ = make_runtime({"p": diamond_bot()}, "F(act_a)@{1}")
    with pytest.raises(ValueError):
        rt.handle(Modification(robot="zz", t=0, added=(("motion", "A", "B", 1),)))


# ---------------------------------------------------------------------------
# step 2: local repair

def test_broken_route_heals_locally():
    rt, task, b = make_runtime({"p": diamond_bot()}, "F(act_a)@{1}")
    rt.tick()  # p at B, about to take B -> C
    d = rt.handle(Modification(robot="p", t=1, removed=(("motion", "B", "C"),)))
    assert d.outcome == LOCAL and d.step == 2 and d.robot == "p"
    assert d.rationale.startswith("step 2")
    assert d.r_fail == frozenset() and d.r_new == frozenset({"1"})
    assert rt.assignment["p"] == frozenset({"1"})
    # the fresh route backs out through A and takes the long way round
    walk = remaining_walk(rt, "p")
    assert all((a, z) != (("B",), ("C",)) for a, z in zip(walk, walk[1:]))
    assert_executable(rt)
    validate_behavior(
        rt.behaviors["p"], b, rt.models["p"], *rt.slice_for("p").remaining()
    )
    snap, crossed = run_to_crossing(rt)
    assert crossing_satisfied(rt, snap, crossed)
    assert snap["p"] == ("C",)


def test_local_reroute_leaves_teammates_untouched():
    p = diamond_bot("p")
    q = walker("q", {"Q1": set(), "QB": {"act_b"}}, [("Q1", "QB", 1)], "Q1")
    rt, task, b = make_runtime({"p": p, "q": q}, "F((act_a)@{1} & (act_b)@{2})")
    assert rt.assignment == {"p": frozenset({"1"}), "q": frozenset({"2"})}
    q_beh = rt.behaviors["q"]
    rt.tick()
    d = rt.handle(Modification(robot="p", t=1, removed=(("motion", "B", "C"),)))
    assert d.outcome == LOCAL and d.robot == "p"
    assert rt.behaviors["q"] is q_beh

    # q finishes early, waits in place, and everyone crosses together
    snaps, crossed = [], None
    for _ in range(12):
        snap, crossed = rt.tick()
        snaps.append(snap)
        if crossed is not None:
            break
    assert crossed is not None and rt.index == 1
    assert snaps[-1] == {"p": ("C",), "q": ("QB",)}
    assert [s["q"] for s in snaps[-3:]] == [("QB",)] * 3
    assert crossing_satisfied(rt, snaps[-1], crossed)


def test_covered_bindings_are_shed_locally():
    road = {"A": set(), "G": {"act_a"}}
    p = walker("p", road, [("A", "G", 1)], "A")
    q = walker("q", road, [("A", "G", 1)], "A")
    rt, *_ = make_runtime({"p": p, "q": q}, "F(act_a)@{1}")
    assert rt.assignment == {"p": frozenset({"1"}), "q": frozenset({"1"})}
    q_beh = rt.behaviors["q"]
    d = rt.handle(Modification(robot="p", t=0, removed=(("motion", "A", "G"),)))
    assert d.outcome == LOCAL and d.step == 2
    assert d.r_fail == frozenset({"1"}) and d.r_new == frozenset()
    assert rt.assignment == {"p": frozenset(), "q": frozenset({"1"})}
    assert rt.behaviors["q"] is q_beh
    # p idles in place from here on
    walk = remaining_walk(rt, "p")
    assert all(a == z for a, z in zip(walk, walk[1:]))
    snap, crossed = run_to_crossing(rt)
    assert crossing_satisfied(rt, snap, crossed)


def test_minimum_counts_block_local_shedding():
    # both robots hold the binding because the task demands two holders;
    # when one loses it, shedding would leave the team short-handed, and
    # with no replacement anywhere the task is dead
    road = {"A": set(), "G": {"act_a"}}
    p = walker("p", road, [("A", "G", 1)], "A")
    q = walker("q", road, [("A", "G", 1)], "A")
    rt, *_ = make_runtime({"p": p, "q": q}, "cmin: 1:2\nF(act_a)@{1}")
    assert rt.assignment == {"p": frozenset({"1"}), "q": frozenset({"1"})}
    d = rt.handle(Modification(robot="p", t=0, removed=(("motion", "A", "G"),)))
    assert d.outcome == TASK_FAILED and d.step == 4
    assert "short-handed" in d.rationale


# ---------------------------------------------------------------------------
# step 3: redistribution

def test_uncovered_losses_redistribute_bindings():
    p = walker("p", {"PA": set(), "GA": {"act_a"}}, [("PA", "GA", 1)], "PA")
    q = walker(
        "q",
        {"QB": set(), "GB": {"act_b"}, "GAB": {"act_a", "act_b"}},
        [("QB", "GB", 1)],  # the two-action room is unreachable for now
        "QB",
    )
    w = walker("w", {"WC": set(), "GC": {"act_c"}}, [("WC", "GC", 1)], "WC")
    text = "F((act_a)@{1} & (act_b)@{2} & (act_c)@{3})"
    rt, task, b = make_runtime({"p": p, "q": q, "w": w}, text)
    assert rt.assignment == {
        "p": frozenset({"1"}),
        "q": frozenset({"2"}),
        "w": frozenset({"3"}),
    }
    w_beh = rt.behaviors["w"]

    gain = Modification(robot="q", t=0, added=(("motion", "QB", "GAB", 2),))
    assert rt.handle(gain).outcome == CONTINUE

    d = rt.handle(Modification(robot="p", t=0, removed=(("motion", "PA", "GA"),)))
    assert d.outcome == REALLOCATE and d.step == 3
    assert d.rationale.startswith("step 3")
    assert d.r_fail == frozenset({"1"})
    assert rt.assignment == {
        "p": frozenset(),
        "q": frozenset({"1", "2"}),
        "w": frozenset({"3"}),
    }
    assert set(d.changed) == {"p", "q"}
    assert d.families == {
        "p": frozenset(),
        "q": frozenset(
            {frozenset({"1"}), frozenset({"2"}), frozenset({"1", "2"})}
        ),
        "w": frozenset({frozenset({"3"})}),
    }

    # the stored gain was folded in first: the runtime's picture now
    # equals a from-scratch rebuild of the fully modified robot
    q_now = apply_modification(q, gain)
    assert rt.models["q"] == q_now
    assert rt.products["q"] == build_product(b, q_now, task.bindings)
    assert not any(rt.pending.values())

    # the untouched robot keeps its behavior object
    assert rt.behaviors["w"] is w_beh
    # the reassigned robot's fresh route is real, move by move
    validate_behavior(
        rt.behaviors["q"], b, rt.models["q"], *rt.slice_for("q").remaining()
    )
    assert_executable(rt)
    snap, crossed = run_to_crossing(rt)
    assert crossing_satisfied(rt, snap, crossed)
    assert snap == {"p": ("PA",), "q": ("GAB",), "w": ("GC",)}


# ---------------------------------------------------------------------------
# step 4: full re-planning

def test_full_replanning_switches_approach():
    labels = {"A": set(), "GA": {"act_a"}, "GC": {"act_c"}}
    bot = walker("bot", labels, [("A", "GA", 1)], "A")  # GC unreachable
    rt, *_ = make_runtime({"bot": bot}, "F(act_a)@{1} | F(act_c)@{1}")
    old_beta = rt.plan.beta
    assert (
        rt.handle(Modification(robot="bot", t=0, added=(("motion", "A", "GC", 4),))).outcome
        == CONTINUE
    )
    d = rt.handle(Modification(robot="bot", t=0, removed=(("motion", "A", "GA"),)))
    assert d.outcome == FULL and d.step == 4
    assert d.rationale.startswith("step 4")
    assert d.plan is rt.plan and rt.plan.beta != old_beta
    assert rt.index == 0 and not rt.halted
    crossings = 0
    for _ in range(10):
        snap, crossed = rt.tick()
        if crossed is not None:
            crossings += 1
            assert crossing_satisfied(rt, snap, crossed)
    assert crossings and rt.positions["bot"] == ("GC",)


def test_full_replanning_resumes_from_current_positions():
    labels = {"A": set(), "M": set(), "GA": {"act_a"}, "GC": {"act_c"}}
    bot = walker("bot", labels, [("A", "M", 1), ("M", "GA", 1)], "A")
    rt, *_ = make_runtime({"bot": bot}, "F(act_a)@{1} | F(act_c)@{1}")
    assert (
        rt.handle(Modification(robot="bot", t=0, added=(("motion", "M", "GC", 2),))).outcome
        == CONTINUE
    )
    for tick in range(10):  # walk the bot as far as M, however the plan times it
        rt.tick()
        if rt.positions["bot"] == ("M",):
            break
    assert rt.positions["bot"] == ("M",)
    d = rt.handle(Modification(robot="bot", t=tick + 1, removed=(("motion", "M", "GA"),)))
    assert d.outcome == FULL and d.step == 4
    # re-planning starts from where the robot stands, not from home
    assert rt.behaviors["bot"].start == ("M",)
    assert rt.models["bot"].initial == ("M",)
    crossings = 0
    for _ in range(10):
        snap, crossed = rt.tick()
        if crossed is not None:
            crossings += 1
            assert crossing_satisfied(rt, snap, crossed)
    assert crossings and rt.positions["bot"] == ("GC",)


def test_a_stranded_team_fails_the_task():
    bot = walker("bot", {"A": set(), "GA": {"act_a"}}, [("A", "GA", 1)], "A")
    rt, *_ = make_runtime({"bot": bot}, "F(act_a)@{1}")
    d = rt.handle(Modification(robot="bot", t=0, removed=(("motion", "A", "GA"),)))
    assert d.outcome == TASK_FAILED and d.step == 4
    assert d.rationale.startswith("step 4")
    assert rt.halted
    with pytest.raises(RuntimeError):
        rt.tick()
    with pytest.raises(RuntimeError):
        rt.handle(Modification(robot="bot", t=1, added=(("motion", "A", "GA", 1),)))


# ---------------------------------------------------------------------------
# lockstep execution

def test_the_cycle_repeats_forever():
    bot = walker(
        "bot",
        {"A": set(), "GA": {"act_a"}},
        [("A", "GA", 1), ("GA", "A", 1)],
        "A",
    )
    rt, *_ = make_runtime({"bot": bot}, "G(F((act_a)@{1}))")
    crossings = 0
    for _ in range(10):
        snap, crossed = rt.tick()
        if crossed is not None:
            crossings += 1
            assert crossing_satisfied(rt, snap, crossed)
    assert crossings >= 3
    assert rt.index == crossings and rt.now == 10
    assert_executable(rt)


# ---------------------------------------------------------------------------
# property: any single change leaves the team in a lawful state

@st.composite
def repair_worlds(draw):
    n = draw(st.integers(1, 2))
    models = {name: draw(weighted_models(name=name)) for name in ("p", "q")[:n]}
    text = draw(st.sampled_from(TASK_TEXTS))
    return models, text, draw(st.integers(0, 2)), draw(st.integers(0, 3))


def draw_modification(data, rt, models, target):
    """One edit for ``target``, biased toward removing a move its plan
    still relies on (the interesting case), with plain losses and gains
    mixed in."""
    cap = models[target].capabilities[0]
    walk = remaining_walk(rt, target)
    on_walk = sorted({(a[0], z[0]) for a, z in zip(walk, walk[1:]) if a != z})
    present = sorted((x, y) for x, y, _ in cap.transitions)
    rooms = sorted(cap.states)
    absent = sorted(
        (x, y)
        for x in rooms
        for y in rooms
        if x != y and (x, y) not in set(present)
    )
    options = ["break", "break"] * bool(on_walk)
    options += ["lose"] * bool(present) + ["gain"] * bool(absent)
    flavor = data.draw(st.sampled_from(options), label="flavor")
    if flavor == "gain":
        x, y = data.draw(st.sampled_from(absent), label="edge")
        w = data.draw(st.integers(0, 3), label="weight")
        return Modification(robot=target, t=rt.now, added=(("motion", x, y, w),))
    pool = on_walk if flavor == "break" else present
    x, y = data.draw(st.sampled_from(pool), label="edge")
    return Modification(robot=target, t=rt.now, removed=(("motion", x, y),))


@given(repair_worlds(), st.data())
@settings(max_examples=100, deadline=None)
def test_every_decision_leaves_the_team_executable(world, data):
    models, text, ticks, seed = world
    task = parse_task(text)
    b = AUTOMATA[text]
    plan = synthesize(models, b, task, bound=4, seed=seed)
    assume(plan is not None)
    rt = TeamRuntime(models, b, task, plan, seed=seed, bound=4)
    twin = TeamRuntime(models, b, task, plan, seed=seed, bound=4)
    for _ in range(ticks):
        rt.tick()
        twin.tick()
    before = dict(rt.behaviors)
    target = data.draw(st.sampled_from(sorted(models)), label="robot")
    mod = draw_modification(data, rt, models, target)

    d = rt.handle(mod)
    e = twin.handle(mod)

    assert d.outcome in {CONTINUE, LOCAL, REALLOCATE, FULL, TASK_FAILED}
    assert 1 <= d.step <= 4
    assert d.rationale.startswith(f"step {d.step}")
    json.dumps(d.to_json(), sort_keys=True)

    # deciding is deterministic
    left, right = d.to_json(), e.to_json()
    left.pop("elapsed_ms"), right.pop("elapsed_ms")
    assert left == right
    assert rt.positions == twin.positions and rt.assignment == twin.assignment

    if d.outcome == CONTINUE:
        assert all(rt.behaviors[j] is before[j] for j in before)
        assert rt.pending[mod.robot]
    if d.outcome == TASK_FAILED:
        assert rt.halted
        return

    assert_executable(rt)
    for r in rt.assignment.values():
        for group in task.c_distinct:
            assert len(r & group) <= 1
    for rho, k in task.c_min:
        assert sum(1 for r in rt.assignment.values() if rho in r) >= k
    # and the team still marches
    for _ in range(6):
        rt.tick()
