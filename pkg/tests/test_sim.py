"""Recorded execution and its independent judge.

The oracles here come from outside the simulator: the plan-time team
word (built by a different code path, before anything executed), the
formula checker, and guard satisfaction — a transcript is only trusted
when all of them agree with it.  Fault injections then forge recordings
byte by byte and demand the validator name the instant and robot.
"""

import json
from dataclasses import replace

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ltlpsi.buchi import GuardTuple, translate
from ltlpsi.checker import satisfies
from ltlpsi.robot import Modification
from ltlpsi.runtime import CONTINUE, LOCAL, TASK_FAILED
from ltlpsi.sim import Step, Transcript, guard_violations, run, validate
from ltlpsi.synth import synthesize, team_word
from ltlpsi.tasklang import parse_task, rewrite

from test_product import TASK_TEXTS, automaton
from test_runtime import diamond_bot
from test_synth import walker, weighted_models


def build(models, text, *, seed=0, bound=4):
    task = parse_task(text)
    b = automaton(text)
    plan = synthesize(models, b, task, bound=bound, seed=seed)
    assert plan is not None, "fixture must be plannable"
    return models, b, task, plan


def unfold(word, n):
    """The word's first ``n`` letters, following the loop — the honest
    way to compare words that may mark different (valid) loop points."""
    out, t = [], 0
    for _ in range(n):
        out.append({j: word.at(j, t) for j in word.robots()})
        t = word.succ(t)
    return out


def positions_of(tr, j):
    return [dict((name, s) for name, s, _ in step.robots)[j] for step in tr.steps]


# ---------------------------------------------------------------------------
# quiet runs against the plan-time oracle

def test_a_quiet_run_replays_the_plan_exactly():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    expected = team_word(plan.behaviors, models)  # oracle: built before execution
    tr = run(models, b, task, plan, seed=0)
    assert tr.terminal == "ok" and not tr.decisions
    assert tr.word() == expected
    assert satisfies(tr.word(), tr.assignment, task).ok
    # plan-time route alignment means nobody ever waits dynamically
    assert all(step.waiting == () for step in tr.steps)
    report = validate(tr, task)
    assert report.ok and report.violations == () and report.word.ok


def test_transcripts_are_byte_deterministic():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    first = run(models, b, task, plan, seed=0)
    second = run(models, b, task, plan, seed=0)
    assert first.to_ndjson() == second.to_ndjson()
    assert first.to_csv() == second.to_csv()

    broken = [Modification("p", 1, (), (), frozenset({("motion", "B", "C")}))]
    third = run(models, b, task, plan, broken, seed=0)
    fourth = run(models, b, task, plan, broken, seed=0)
    assert third.to_ndjson() == fourth.to_ndjson()
    strip = lambda text: [
        {k: v for k, v in json.loads(line).items() if k != "elapsed_ms"}
        for line in text.splitlines()
    ]
    assert strip(third.decisions_ndjson()) == strip(fourth.decisions_ndjson())


def test_ndjson_round_trips():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    tr = run(models, b, task, plan, seed=0)
    text = tr.to_ndjson()
    lines = text.splitlines()
    header, terminal = json.loads(lines[0]), json.loads(lines[-1])
    assert header["schema"] == "transcript/1" and header["robots"] == ["p"]
    assert terminal["terminal"] == "ok"
    assert terminal["assignment"] == {"p": ["1"]}
    assert terminal["loop_start"] == tr.loop_start and terminal["loop_len"] == tr.loop_len
    assert len(lines) == len(tr.steps) + 2
    # decisions travel separately, never inside the transcript
    assert all("outcome" not in json.loads(line) for line in lines)

    back = Transcript.from_ndjson(text)
    assert back.steps == tr.steps
    assert back.terminal == tr.terminal
    assert dict(back.assignment) == dict(tr.assignment)
    assert (back.loop_start, back.loop_len) == (tr.loop_start, tr.loop_len)
    assert back.word() == tr.word()


def test_csv_splits_rooms_from_actions():
    bot = walker(
        "p",
        {"base": ("base_c",), "goal": ("goal_c", "act_a")},
        [("base", "goal", 1), ("goal", "base", 1)],
        "base",
    )
    models, b, task, plan = build({"p": bot}, "F(act_a)@{1}")
    tr = run(models, b, task, plan, seed=0)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "step,robot,room,actions"
    assert len(lines) == 1 + len(tr.steps)  # one robot, one row per instant
    assert lines[1] == "0,p,base_c,"
    goal_rows = [line for line in lines[1:] if ",goal_c," in line]
    assert goal_rows and all(line.endswith(",act_a") for line in goal_rows)


# ---------------------------------------------------------------------------
# schedules and repairs

def test_mods_land_before_their_instant():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    quiet = run(models, b, task, plan, seed=0)
    gain = [Modification("p", 2, (), (("motion", "C", "A", 5),), frozenset())]
    tr = run(models, b, task, plan, gain, seed=0)
    assert [d.outcome for d in tr.decisions] == [CONTINUE]
    assert tr.decisions[0].at == 2
    # a stored addition changes nothing observable: the recording is
    # byte-identical, only the decision log differs
    assert tr.to_ndjson() == quiet.to_ndjson()
    assert quiet.decisions_ndjson() == "" and tr.decisions_ndjson() != ""


def test_mid_run_repairs_keep_the_recording_valid():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    broken = [Modification("p", 1, (), (), frozenset({("motion", "B", "C")}))]
    tr = run(models, b, task, plan, broken, seed=0)
    assert tr.terminal == "ok"
    assert [d.outcome for d in tr.decisions] == [LOCAL]
    # the reroute goes the long way past D — a word the plan never produced
    assert ("D",) in positions_of(tr, "p")
    report = validate(tr, task)
    assert report.ok and report.word.ok
    assert satisfies(tr.word(), tr.assignment, task).ok


def test_a_failed_task_ends_the_recording():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    stranded = [
        Modification(
            "p", 1, (), (), frozenset({("motion", "B", "C"), ("motion", "B", "A")})
        )
    ]
    tr = run(models, b, task, plan, stranded, seed=0)
    assert tr.terminal == TASK_FAILED
    assert tr.loop_start is None and tr.word() is None
    assert len(tr.steps) == 1  # the failure lands before instant 1 is recorded
    assert tr.decisions[-1].outcome == TASK_FAILED
    assert json.loads(tr.to_ndjson().splitlines()[-1])["terminal"] == TASK_FAILED
    report = validate(tr, task)
    assert not report.ok
    assert [v.kind for v in report.violations] == ["terminal"]


def test_schedules_are_checked_up_front():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    late = Modification("p", 3, (), (), frozenset({("motion", "B", "C")}))
    early = Modification("p", 1, (), (), frozenset({("motion", "A", "D")}))
    with pytest.raises(ValueError):
        run(models, b, task, plan, [late, early], seed=0)
    with pytest.raises(ValueError):
        run(models, b, task, plan, [replace(early, t=-1)], seed=0)
    with pytest.raises(ValueError):
        run(models, b, task, plan, seed=0, horizon=0)
    with pytest.raises(ValueError):
        run(models, b, task, plan, seed=0, reps=0)


def test_a_horizon_cuts_the_recording_short():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    tr = run(models, b, task, plan, seed=0, horizon=5)
    assert len(tr.steps) == 5 and tr.terminal == "ok"
    assert tr.loop_start is None and tr.word() is None
    report = validate(tr, task)
    assert not report.ok
    assert any(v.kind == "word" and "no steady loop" in v.reason for v in report.violations)


def test_the_loop_is_recorded_several_times_over():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    tr = run(models, b, task, plan, seed=0, reps=4)
    assert len(tr.steps) == tr.loop_start + 4 * tr.loop_len
    cycle = lambda k: [
        replace(s, t=0) for s in tr.steps[tr.loop_start + k * tr.loop_len :][: tr.loop_len]
    ]
    assert cycle(0) == cycle(1) == cycle(2) == cycle(3)


# ---------------------------------------------------------------------------
# barriers and who they bind

def test_uninvolved_robots_keep_walking():
    holder = walker("p", {"PA": ("act_a",)}, [], "PA")
    courier = walker(
        "q",
        {"Q0": (), "Q1": (), "Q2": (), "GB": ("act_b",)},
        [("Q0", "Q1", 1), ("Q1", "Q2", 1), ("Q2", "GB", 1)],
        "Q0",
    )
    models, b, task, plan = build(
        {"p": holder, "q": courier}, "(act_a)@{1} U (act_b)@{2}"
    )
    tr = run(models, b, task, plan, seed=0)
    assert validate(tr, task).ok

    crossing = next(s for s in tr.steps if s.crossed is not None)
    dwells = [s for s in tr.steps if s.t < crossing.t]
    assert dwells, "the courier needs travel time, so the team must dwell first"
    # every dwell instant leans on a hold guard that never names q ...
    hold_guards = [
        e.guard for e in b.edges if e.src == e.dst == crossing.crossed.src
    ]
    assert hold_guards
    assert all(g.bindings() & tr.assignment["q"] == frozenset() for g in hold_guards)
    # ... so q walks straight through those instants instead of waiting
    visited = [dict((n, s) for n, s, _ in step.robots)["q"] for step in dwells]
    assert len(set(visited)) == len(visited) > 1
    # while the crossing itself never names p
    assert crossing.crossed.guard.bindings() & tr.assignment["p"] == frozenset()


def test_forged_labels_are_pinpointed():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    tr = run(models, b, task, plan, seed=0)
    i = next(i for i, s in enumerate(tr.steps) if s.crossed is not None)
    silenced = replace(
        tr.steps[i], robots=tuple((j, s, ()) for j, s, _ in tr.steps[i].robots)
    )
    forged = replace(tr, steps=tr.steps[:i] + (silenced,) + tr.steps[i + 1 :])
    report = validate(forged, task)
    assert not report.ok
    hit = [v for v in report.violations if v.kind == "barrier"]
    assert hit and hit[0].t == tr.steps[i].t and hit[0].robot == "p"
    assert "act_a" in hit[0].reason


def test_a_robot_missing_from_a_barrier_is_named():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    tr = run(models, b, task, plan, seed=0)
    i = next(i for i, s in enumerate(tr.steps) if s.crossed is not None)
    elsewhere = replace(tr.steps[i], robots=(("p", ("A",), ()),))
    forged = replace(tr, steps=tr.steps[:i] + (elsewhere,) + tr.steps[i + 1 :])
    report = validate(forged, task)
    assert not report.ok
    assert any(v.kind == "barrier" and v.robot == "p" for v in report.violations)


def test_a_skipped_barrier_breaks_the_chain():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    tr = run(models, b, task, plan, seed=0)
    i = next(i for i, s in enumerate(tr.steps) if s.crossed is not None)
    skipped = replace(tr.steps[i], crossed=None)
    forged = replace(tr, steps=tr.steps[:i] + (skipped,) + tr.steps[i + 1 :])
    report = validate(forged, task)
    assert not report.ok
    assert any(v.kind == "chain" for v in report.violations)


def test_a_crossing_the_automaton_never_had_is_rejected():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    tr = run(models, b, task, plan, seed=0)
    i = next(i for i, s in enumerate(tr.steps) if s.crossed is not None)
    real = tr.steps[i].crossed
    fake = replace(
        real, guard=GuardTuple(true_all=frozenset({("act_a", "1"), ("act_b", "1")}))
    )
    forged = replace(
        tr, steps=tr.steps[:i] + (replace(tr.steps[i], crossed=fake),) + tr.steps[i + 1 :]
    )
    report = validate(forged, task)
    assert not report.ok
    assert any(
        v.kind == "chain" and "no edge of the task automaton" in v.reason
        for v in report.violations
    )


def test_a_loop_that_never_accepts_is_rejected():
    models, b, task, plan = build({"p": diamond_bot()}, "G(F((act_a)@{1}))")
    tr = run(models, b, task, plan, seed=0)
    # erase every crossing: the team "just walks" and the automaton
    # never leaves its initial state, so nothing is ever accepted
    steps = tuple(replace(s, crossed=None) for s in tr.steps)
    forged = replace(tr, steps=steps)
    report = validate(forged, task)
    assert not report.ok
    assert any(v.kind == "acceptance" for v in report.violations)


# ---------------------------------------------------------------------------
# properties

@given(
    guard=st.builds(
        GuardTuple,
        true_all=st.frozensets(
            st.tuples(st.sampled_from("abc"), st.sampled_from("12")), max_size=2
        ),
        true_some=st.just(frozenset()),
        false_all=st.just(frozenset()),
        false_some=st.frozensets(
            st.tuples(st.sampled_from("de"), st.sampled_from("12")), max_size=2
        ),
    ),
    labels=st.dictionaries(
        st.sampled_from(("p", "q")),
        st.frozensets(st.sampled_from("abcde"), max_size=3),
        min_size=1,
        max_size=2,
    ),
    holdings=st.dictionaries(
        st.sampled_from(("p", "q")),
        st.frozensets(st.sampled_from("12"), max_size=2),
        max_size=2,
    ),
)
@settings(max_examples=300, deadline=None)
def test_guard_diagnosis_agrees_with_satisfaction(guard, labels, holdings):
    assignment = {j: holdings.get(j, frozenset()) for j in labels}
    found = guard_violations(guard, labels, assignment)
    assert (found == []) == guard.satisfied_by(labels, assignment)
    assert all(robot is None or robot in labels for robot, _ in found)


@st.composite
def plannable_worlds(draw):
    text = draw(st.sampled_from(TASK_TEXTS))
    models = {"bot": draw(weighted_models())}
    task = parse_task(text)
    b = automaton(text)
    plan = synthesize(models, b, task, bound=4, seed=0)
    assume(plan is not None)
    return models, b, task, plan


@given(world=plannable_worlds())
@settings(max_examples=60, deadline=None)
def test_quiet_runs_always_validate(world):
    models, b, task, plan = world
    tr = run(models, b, task, plan, seed=0)
    assert tr.terminal == "ok"
    report = validate(tr, task)
    assert report.ok, report.violations
    expected = team_word(plan.behaviors, models)
    got = tr.word()
    horizon = max(got.length, expected.length) + 2 * max(
        got.length - got.loop, expected.length - expected.loop
    )
    assert unfold(got, horizon) == unfold(expected, horizon)
    assert Transcript.from_ndjson(tr.to_ndjson()).steps == tr.steps
