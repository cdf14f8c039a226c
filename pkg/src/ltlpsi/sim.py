"""Team execution as a recorded experiment: run a plan against a
schedule of mid-run capability changes, capture everything observable,
and judge the recording independently of the machinery that produced it.

``run`` drives a :class:`~ltlpsi.runtime.TeamRuntime` step by step,
delivering each scheduled modification just before the instant it is
stamped with, and writes a :class:`Transcript`: one record per instant
(positions, labels, who is held at a barrier, which plan edge fired),
the terminal verdict, and — once the schedule is exhausted and the team
settles into a steady loop — where that loop starts and how long it is.
Repair decisions are kept alongside but serialize to a separate log, so
a transcript of *what the robots did* stays free of *why*.

``validate`` replays a transcript against nothing but the task text:
it rebuilds the automaton, walks the recorded crossings, checks every
barrier guard and every dwell instant, and finally asks the formula
checker whether the looped word satisfies the task under the terminal
binding assignment.  A forged or broken recording comes back with
violations naming the instant and robot at fault.
"""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .buchi import BuchiAutomaton, Edge, GuardTuple, translate
from .checker import CheckResult, LassoWord, satisfies
from .robot import Modification, RobotModel, State
from .runtime import TASK_FAILED, Decision, TeamRuntime
from .synth import TeamPlan
from .tasklang import FormulaAst, rewrite

#: Hard ceiling on steady-state search.  Lockstep execution of a fixed
#: plan visits finitely many configurations, so a loop always exists;
#: this only guards against a defect turning the search endless.
MAX_AUTO_STEPS = 10_000

SCHEMA = "transcript/1"


@dataclass(frozen=True)
class Step:
    """One recorded instant: everyone's pre-move position and labels,
    who stood waiting at the pending barrier, and the plan edge crossed
    at this instant (``None`` on a dwell instant)."""

    t: int
    crossed: Edge | None
    robots: tuple[tuple[str, State, tuple[str, ...]], ...]
    waiting: tuple[str, ...]

    def team_labels(self) -> dict[str, frozenset[str]]:
        return {j: frozenset(labels) for j, _, labels in self.robots}

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "crossed": self.crossed.to_json() if self.crossed else None,
            "robots": {
                j: {"state": list(state), "labels": list(labels)}
                for j, state, labels in self.robots
            },
            "waiting": list(self.waiting),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Step":
        crossed = None
        if data["crossed"] is not None:
            raw = data["crossed"]
            crossed = Edge(raw["src"], raw["dst"], GuardTuple.from_json(raw))
        return cls(
            t=data["t"],
            crossed=crossed,
            robots=tuple(
                (j, tuple(rec["state"]), tuple(rec["labels"]))
                for j, rec in sorted(data["robots"].items())
            ),
            waiting=tuple(data["waiting"]),
        )


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Transcript:
    """A full recording of one run.

    ``terminal`` is ``"ok"`` for a run that played out, or the failure
    outcome when a repair attempt exhausted the ladder mid-run.  The
    loop fields are set only when the run was left to settle on its own
    (no step horizon) — the recorded steps then cover the loop several
    times over, and ``word`` folds them into the lasso the team repeats
    forever.
    """

    robots: tuple[str, ...]
    seed: int
    steps: tuple[Step, ...]
    decisions: tuple[Decision, ...]
    terminal: str
    assignment: Mapping[str, frozenset[str]]
    loop_start: int | None = None
    loop_len: int | None = None

    def word(self) -> LassoWord | None:
        """The infinite team word this run settles into, or ``None``
        when the run failed or was cut off before a loop emerged."""
        if self.terminal != "ok" or self.loop_start is None or self.loop_len is None:
            return None
        n = self.loop_start + self.loop_len
        labels = {
            j: tuple(step.team_labels()[j] for step in self.steps[:n]) for j in self.robots
        }
        return LassoWord(labels=labels, loop=self.loop_start)

    def to_ndjson(self) -> str:
        """One JSON document per line: header, one line per instant,
        terminal verdict.  Deterministic byte for byte; repair decisions
        are deliberately excluded (see :meth:`decisions_ndjson`)."""
        lines = [
            _dump(
                {
                    "schema": SCHEMA,
                    "robots": list(self.robots),
                    "seed": self.seed,
                }
            )
        ]
        lines.extend(_dump(step.to_json()) for step in self.steps)
        lines.append(
            _dump(
                {
                    "terminal": self.terminal,
                    "assignment": {j: sorted(r) for j, r in sorted(self.assignment.items())},
                    "loop_start": self.loop_start,
                    "loop_len": self.loop_len,
                }
            )
        )
        return "\n".join(lines) + "\n"

    def decisions_ndjson(self) -> str:
        """The repair log: one JSON document per decision, including
        timings — which is exactly why it is not part of the transcript
        proper (timings vary run to run; behavior must not)."""
        return "".join(_dump(d.to_json()) + "\n" for d in self.decisions)

    def to_csv(self) -> str:
        """A flat (step, robot, room, actions) projection for eyeballing
        in a spreadsheet: room labels (the ``_c`` convention) in one
        column, everything else the robot exhibits in the other."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "robot", "room", "actions"])
        for step in self.steps:
            for j, _, labels in step.robots:
                rooms = "+".join(sorted(l for l in labels if l.endswith("_c")))
                acts = "+".join(sorted(l for l in labels if not l.endswith("_c")))
                writer.writerow([step.t, j, rooms, acts])
        return buf.getvalue()

    @classmethod
    def from_ndjson(cls, text: str) -> "Transcript":
        """Rebuild a transcript from its NDJSON form.  The decision log
        lives in a separate file, so ``decisions`` comes back empty."""
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        if len(lines) < 2:
            raise ValueError("a transcript needs at least a header and a terminal line")
        header, *body, terminal = lines
        if header.get("schema") != SCHEMA:
            raise ValueError(f"not a {SCHEMA} document: schema is {header.get('schema')!r}")
        if "terminal" not in terminal:
            raise ValueError("the final line must carry the terminal verdict")
        return cls(
            robots=tuple(header["robots"]),
            scenario_hash=header["scenario"],
            seed=header["seed"],
            steps=tuple(Step.from_json(d) for d in body),
            decisions=(),
            terminal=terminal["terminal"],
            assignment={j: frozenset(r) for j, r in terminal["assignment"].items()},
            loop_start=terminal["loop_start"],
            loop_len=terminal["loop_len"],
        )


def run(
    models: Mapping[str, RobotModel],
    b: BuchiAutomaton,
    task: FormulaAst,
    plan: TeamPlan,
    schedule: Sequence[Modification] = (),
    *,
    horizon: int | None = None,
    reps: int = 3,
    seed: int = 0,
    bound: int = 12,
) -> Transcript:
    """Execute ``plan``, delivering each scheduled modification just
    before the instant it is stamped with, and record everything.

    With ``horizon`` the run records exactly that many instants (or
    fewer if the task fails first) and no loop is identified.  Without
    it, the run continues past the schedule until the team's
    configuration recurs, then records the loop ``reps`` times over so
    the repetition itself is in evidence.
    """
    if horizon is not None and horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    if reps < 1:
        raise ValueError(f"reps must be at least 1, got {reps}")
    pending = deque(schedule)
    stamps = [mod.t for mod in pending]
    if any(t < 0 for t in stamps):
        raise ValueError("modifications cannot be scheduled before the run starts")
    if stamps != sorted(stamps):
        raise ValueError("modifications must be scheduled in time order")

    rt = TeamRuntime(models, b, task, plan, seed=seed, bound=bound)
    steps: list[Step] = []
    seen: dict[tuple, int] = {}
    loop_start: int | None = None
    loop_len: int | None = None
    target: int | None = None
    dwell_streak = 0
    dwell_limit = 1 + rt.longest_walk()
    failed = False

    while True:
        if horizon is not None and rt.now >= horizon:
            break
        while pending and pending[0].t == rt.now:
            decision = rt.handle(pending.popleft())
            seen.clear()
            dwell_streak = 0
            if decision.outcome == TASK_FAILED:
                failed = True
                break
            dwell_limit = 1 + rt.longest_walk()
        if failed:
            break
        if horizon is None:
            if rt.now > MAX_AUTO_STEPS:
                raise RuntimeError(
                    f"no steady loop within {MAX_AUTO_STEPS} instants; either the "
                    "schedule reaches further than that or execution is not settling"
                )
            if not pending:
                key = rt.config_key()
                if loop_start is None:
                    if key in seen:
                        loop_start = seen[key]
                        loop_len = rt.now - loop_start
                        target = loop_start + reps * loop_len
                    else:
                        seen[key] = rt.now
                if target is not None and rt.now >= target:
                    break
        waiting = rt.waiting_robots()
        t = rt.now
        snapshot, crossed = rt.tick()
        steps.append(
            Step(
                t=t,
                crossed=crossed,
                robots=tuple(
                    (j, snapshot[j], tuple(sorted(rt.models[j].labels[snapshot[j]])))
                    for j in sorted(snapshot)
                ),
                waiting=waiting,
            )
        )
        if crossed is not None:
            dwell_streak = 0
            dwell_limit = 1 + rt.longest_walk()
        else:
            dwell_streak += 1
            # Barrier liveness: a dwell stretch can never outlast the
            # longest route still being walked, so every barrier fires.
            assert dwell_streak <= dwell_limit, (
                f"barrier starved at instant {t}: {dwell_streak} dwell instants "
                f"against a longest route of {dwell_limit - 1}"
            )

    if loop_start is not None and loop_len is not None:
        for t in range(loop_start + loop_len, len(steps)):
            earlier = replace(steps[t - loop_len], t=steps[t].t)
            assert steps[t] == earlier, (
                f"instant {t} does not repeat instant {t - loop_len}; "
                "the detected loop is not a true repetition"
            )

    return Transcript(
        robots=tuple(sorted(models)),
        scenario_hash=plan.scenario_hash,
        seed=seed,
        steps=tuple(steps),
        decisions=tuple(rt.decisions),
        terminal=TASK_FAILED if failed else "ok",
        assignment={j: frozenset(r) for j, r in rt.assignment.items()},
        loop_start=loop_start,
        loop_len=loop_len,
    )


# -- judging a recording ------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """One way a transcript fails to be a correct run: the instant it
    happened (``None`` for verdicts about the run as a whole), the robot
    at fault when one can be named, and what went wrong."""

    t: int | None
    robot: str | None
    kind: str
    reason: str

    def to_json(self) -> dict:
        return {"t": self.t, "robot": self.robot, "kind": self.kind, "reason": self.reason}


@dataclass(frozen=True)
class Report:
    ok: bool
    violations: tuple[Violation, ...]
    word: CheckResult | None

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [v.to_json() for v in self.violations],
            "word": None if self.word is None else {"ok": self.word.ok, "reason": self.word.reason},
        }


def guard_violations(
    guard: GuardTuple,
    labels: Mapping[str, frozenset[str]],
    assignment: Mapping[str, frozenset[str]],
) -> list[tuple[str | None, str]]:
    """Every way the team's labels fall short of the guard, with the
    offending robot named where one exists.  Empty exactly when
    :meth:`GuardTuple.satisfied_by` holds."""

    def holders(rho: str) -> list[str]:
        return sorted(j for j in labels if rho in assignment.get(j, frozenset()))

    out: list[tuple[str | None, str]] = []
    for pi, rho in sorted(guard.true_all):
        hs = holders(rho)
        if not hs:
            out.append((None, f"nobody holds binding {rho}, so {pi!r} cannot be shown for it"))
        for j in hs:
            if pi not in labels[j]:
                out.append((j, f"{j} holds binding {rho} but does not show {pi!r}"))
    for pi, rho in sorted(guard.true_some):
        if not any(pi in labels[j] for j in holders(rho)):
            out.append((None, f"no holder of binding {rho} shows {pi!r}"))
    for pi, rho in sorted(guard.false_all):
        hs = holders(rho)
        if not hs:
            out.append((None, f"nobody holds binding {rho}, so {pi!r} cannot be refrained from"))
        for j in hs:
            if pi in labels[j]:
                out.append((j, f"{j} holds binding {rho} but shows {pi!r}, which the guard forbids"))
    for pi, rho in sorted(guard.false_some):
        if not any(pi not in labels[j] for j in holders(rho)):
            out.append((None, f"every holder of binding {rho} shows {pi!r}; at least one must not"))
    return out


def validate(tr: Transcript, task: FormulaAst, *, strict_always: bool = False) -> Report:
    """Judge a transcript against the task alone.

    The task text is retranslated from scratch, the recorded crossings
    are walked edge by edge, every barrier guard and dwell instant is
    checked under the terminal binding assignment, the loop must return
    the automaton to the same state through an accepting one, and the
    looped word must satisfy the formula.  Any shortfall is reported as
    a violation naming the instant — and the robot, when one is at
    fault.
    """
    b = translate(rewrite(task))
    assignment = dict(tr.assignment)
    edges = frozenset(b.edges)
    loops: dict[int, list[GuardTuple]] = {z: [] for z in b.states}
    for e in b.edges:
        if e.src == e.dst:
            loops[e.src].append(e.guard)

    out: list[Violation] = []
    z = b.initial
    trail: list[int] = []
    for step in tr.steps:
        trail.append(z)
        team = step.team_labels()
        if step.crossed is None:
            if not any(g.satisfied_by(team, assignment) for g in loops.get(z, [])):
                out.extend(_dwell_violations(step, z, loops.get(z, []), team, assignment))
        else:
            e = step.crossed
            if e.src != z:
                out.append(
                    Violation(
                        step.t,
                        None,
                        "chain",
                        f"the recorded crossing leaves automaton state {e.src}, "
                        f"but the run stands at state {z}",
                    )
                )
            elif e not in edges:
                out.append(
                    Violation(
                        step.t,
                        None,
                        "chain",
                        f"no edge of the task automaton matches the recorded "
                        f"crossing {e.src} to {e.dst}",
                    )
                )
            else:
                for robot, reason in guard_violations(e.guard, team, assignment):
                    out.append(Violation(step.t, robot, "barrier", reason))
            z = e.dst

    word = tr.word()
    result: CheckResult | None = None
    if tr.terminal != "ok":
        out.append(Violation(None, None, "terminal", f"the run ended in {tr.terminal}"))
    elif word is None:
        out.append(
            Violation(
                None, None, "word", "no steady loop was recorded, so there is no lasso word to check"
            )
        )
    else:
        n = tr.loop_start + tr.loop_len
        trail.append(z)  # state after the final recorded instant
        if len(trail) > n and trail[n] != trail[tr.loop_start]:
            out.append(
                Violation(
                    None,
                    None,
                    "chain",
                    f"the recorded loop starts at automaton state {trail[tr.loop_start]} "
                    f"but comes back around at state {trail[n]}",
                )
            )
        elif not any(trail[t] in b.accepting for t in range(tr.loop_start, n)):
            out.append(
                Violation(
                    None,
                    None,
                    "acceptance",
                    "the recorded loop never passes through an accepting automaton state",
                )
            )
        result = satisfies(word, assignment, task, strict_always)
        if not result.ok:
            out.append(Violation(None, None, "word", result.reason))
    return Report(ok=not out, violations=tuple(out), word=result)


def _dwell_violations(
    step: Step,
    z: int,
    guards: Iterable[GuardTuple],
    team: Mapping[str, frozenset[str]],
    assignment: Mapping[str, frozenset[str]],
) -> list[Violation]:
    """Why a dwell instant satisfied no stutter loop: the diagnosis of
    the loop that came closest, or the bare fact there was none."""
    best: list[tuple[str | None, str]] | None = None
    for g in guards:
        found = guard_violations(g, team, assignment)
        if best is None or len(found) < len(best):
            best = found
    if best is None:
        return [
            Violation(
                step.t,
                None,
                "stutter",
                f"automaton state {z} tolerates no dwelling, yet the team dwelt here",
            )
        ]
    return [Violation(step.t, robot, "stutter", reason) for robot, reason in best]
