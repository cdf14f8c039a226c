"""Mid-run adaptation: deciding how much of a team plan survives a
capability change, and executing the plan in lockstep.

A :class:`TeamRuntime` owns the live picture of a running team: current
robot models and products, the active plan, every robot's remaining
route, and the modifications reported but not yet folded in.  ``tick``
advances the team one instant.  ``handle`` reacts to one modification by
climbing an escalation ladder, taking the cheapest repair that works:

1. the change cannot affect the remaining run — keep going, store it;
2. the changed robot's own route broke — it reroutes alone, shedding
   any bindings it lost that the rest of the team already covers;
3. shedding is not enough — bindings are redistributed across the team
   and only the robots whose sets actually change re-plan their routes;
4. no redistribution works — the whole team re-plans from where it
   stands, and if even that is unsatisfiable the task has failed.

Every repair keeps the team on some accepting run of the same task
automaton; a failed task is reported as an outcome, not an exception,
because it is a legitimate answer about the physical situation.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, replace
from typing import Mapping

from .alloc import AllocationProblem, allocate, effective_assignment, is_changed
from .buchi import BuchiAutomaton, Edge, dwell_bindings
from .product import (
    ProductAutomaton,
    ProgressSlice,
    build_product,
    failed_bindings,
    feasible_bindings,
    updated,
)
from .robot import Modification, RobotModel, State, apply_modification, delta_model, reseat
from .synth import Behavior, Segment, TeamPlan, local_resynthesize, synthesize
from .tasklang import FormulaAst

CONTINUE = "CONTINUE"
LOCAL = "LOCAL"
REALLOCATE = "REALLOCATE"
FULL = "FULL"
TASK_FAILED = "TASK_FAILED"


@dataclass(frozen=True)
class Decision:
    """What the team decided to do about one modification.

    ``step`` is the rung of the escalation ladder that fired (1-4; a
    failed task is step 4's negative answer).  ``families`` records the
    per-robot candidate binding sets a redistribution chose from, and
    ``changed`` which robots had to re-plan.  ``elapsed_ms`` is wall
    clock spent deciding, kept out of the transcript so runs stay
    byte-reproducible.
    """

    outcome: str
    step: int
    robot: str
    at: int
    rationale: str
    elapsed_ms: float = 0.0
    r_fail: frozenset = frozenset()
    r_new: frozenset | None = None
    assignment: dict | None = None
    families: dict | None = None
    changed: tuple[str, ...] = ()
    plan: TeamPlan | None = None

    def to_json(self) -> dict:
        out = {
            "outcome": self.outcome,
            "step": self.step,
            "robot": self.robot,
            "at": self.at,
            "rationale": self.rationale,
            "elapsed_ms": round(self.elapsed_ms, 3),
            "r_fail": sorted(self.r_fail),
        }
        if self.r_new is not None:
            out["r_new"] = sorted(self.r_new)
        if self.assignment is not None:
            out["assignment"] = {j: sorted(r) for j, r in sorted(self.assignment.items())}
        if self.families is not None:
            out["families"] = {
                j: sorted(sorted(r) for r in fam) for j, fam in sorted(self.families.items())
            }
        if self.changed:
            out["changed"] = sorted(self.changed)
        return out


class TeamRuntime:
    """Lockstep executor plus repair ladder for one team and one task."""

    def __init__(
        self,
        models: Mapping[str, RobotModel],
        b: BuchiAutomaton,
        task: FormulaAst,
        plan: TeamPlan,
        *,
        seed: int = 0,
        bound: int = 12,
    ):
        if set(models) != set(plan.behaviors):
            raise ValueError("plan and model rosters disagree")
        self.b = b
        self.task = task
        self.alphabet = task.bindings
        self.seed = seed
        self.bound = bound
        self.models: dict[str, RobotModel] = dict(models)
        self.products: dict[str, ProductAutomaton] = {
            j: build_product(b, m, self.alphabet) for j, m in self.models.items()
        }
        self.plan = plan
        self.assignment: dict[str, frozenset] = {
            j: frozenset(r) for j, r in plan.assignment.items()
        }
        self.behaviors: dict[str, Behavior] = {}
        self.pending: dict[str, list[Modification]] = {j: [] for j in self.models}
        self.decisions: list[Decision] = []
        self.now = 0
        self.index = 0
        self.halted = False
        self.positions: dict[str, State] = {}
        self._queue: dict[str, deque[Segment]] = {}
        self._lap: dict[str, tuple[Segment, ...]] = {}
        self._cursor: dict[str, list[State]] = {}
        # robots whose product was folded incrementally (window only)
        # and therefore needs a full rebuild before it can stand in for
        # a from-scratch one
        self._window_dirty: set[str] = set()
        for j, beh in plan.behaviors.items():
            self._install(j, beh)

    # -- execution ----------------------------------------------------

    def slice_for(self, j: str) -> ProgressSlice:
        return ProgressSlice(j, self.plan.beta, self.index, self.positions[j])

    def pending_edge(self) -> Edge:
        """The plan edge the team is currently working toward."""
        edges = {self._queue[j][0].edge for j in self._queue}
        if len(edges) != 1:
            raise RuntimeError("behaviors disagree on the next plan edge")
        return next(iter(edges))

    def ready(self) -> bool:
        """True when every robot stands on its compliance state, so the
        next instant crosses the pending edge."""
        return all(not c for c in self._cursor.values())

    def waiting_robots(self) -> tuple[str, ...]:
        """Robots already standing at the pending barrier while teammates
        are still walking (empty when the edge is about to fire)."""
        if self.ready():
            return ()
        return tuple(j for j in sorted(self._cursor) if not self._cursor[j])

    def longest_walk(self) -> int:
        """Dwell instants left before the slowest robot reaches the
        pending barrier — an upper bound on how long anyone waits."""
        return max(len(c) for c in self._cursor.values())

    def config_key(self) -> tuple:
        """A finite fingerprint of everything that shapes future execution.

        Two instants with equal keys evolve identically from here on
        (absent further modifications), which is what makes steady-state
        loop detection sound.
        """

        def seg_key(seg: Segment) -> tuple:
            return (seg.edge.key(), seg.route, seg.cross)

        return tuple(
            (
                j,
                self.positions[j],
                tuple(self._cursor[j]),
                tuple(seg_key(s) for s in self._queue[j]),
            )
            for j in sorted(self.models)
        )

    def tick(self) -> tuple[dict[str, State], Edge | None]:
        """Advance one instant.

        Returns the pre-move position snapshot (whose labels form this
        instant's letter) and the plan edge crossed at this instant, or
        ``None`` for a dwell instant.  Robots that have walked their
        route for the pending edge wait in place until everyone else
        catches up; then all cross simultaneously.
        """
        if self.halted:
            raise RuntimeError("the run has failed; nothing left to execute")
        snapshot = dict(self.positions)
        crossed: Edge | None = None
        if self.ready():
            crossed = self.pending_edge()
            for j in self.models:
                self.positions[j] = self._queue[j][0].cross
                self._queue[j].popleft()
                if not self._queue[j]:
                    self._queue[j].extend(self._lap[j])
                self._cursor[j] = list(self._queue[j][0].route)
            self.index += 1
        else:
            for j in self.models:
                if self._cursor[j]:
                    self.positions[j] = self._cursor[j].pop(0)
        self.now += 1
        return snapshot, crossed

    def _install(self, j: str, beh: Behavior) -> None:
        self.behaviors[j] = beh
        self.positions[j] = beh.start
        self._queue[j] = deque(beh.segments)
        self._lap[j] = beh.segments[beh.loop_start :]
        self._cursor[j] = list(beh.segments[0].route)

    # -- the repair ladder --------------------------------------------

    def handle(self, mod: Modification) -> Decision:
        """Climb the ladder for one reported capability change."""
        t0 = time.perf_counter()
        if self.halted:
            raise RuntimeError("the run has already failed")
        m = mod.robot
        if m not in self.models:
            raise ValueError(f"modification for unknown robot {mod.robot!r}")

        # Step 1: if the change removes nothing the remaining run uses,
        # it costs nothing now.  Store it; it will be folded in the next
        # time bindings are redistributed.
        view = self.models[m]
        for stored in self.pending[m]:
            view = apply_modification(view, stored)
        delta = delta_model(view, mod)
        if not delta.removed or not self._breaks(m, delta.removed):
            self.pending[m].append(mod)
            why = (
                "the change only adds motion options"
                if not delta.removed
                else "the removed moves are not on any remaining route"
            )
            return self._done(
                Decision(
                    outcome=CONTINUE,
                    step=1,
                    robot=m,
                    at=self.now,
                    rationale=f"step 1: {why}; stored for the next redistribution",
                    assignment=dict(self.assignment),
                ),
                t0,
            )

        # Step 2: the behavior broke.  Fold the change into this robot's
        # product and try to repair locally: keep the bindings it can
        # still serve, shed the ones it cannot — but only if the rest of
        # the team already covers them.
        self._fold(m, extra=mod)
        slice_m = self.slice_for(m)
        r_m = self.assignment[m]
        r_fail = failed_bindings(self.products[m], slice_m, r_m, self.task.c_distinct)
        blocker = self._shed_blocker(m, r_fail)
        if blocker is None:
            r_new = r_m - r_fail
            beh = local_resynthesize(self.products[m], slice_m, r_new)
            if beh is not None:
                self.assignment[m] = r_new
                self._install(m, beh)
                if r_fail:
                    why = (
                        f"step 2: {m} can no longer serve {sorted(r_fail)}, which the "
                        f"rest of the team already covers; rerouted locally for "
                        f"{sorted(r_new) if r_new else 'no bindings'}"
                    )
                else:
                    why = f"step 2: {m}'s route broke but its bindings survive; rerouted locally"
                return self._done(
                    Decision(
                        outcome=LOCAL,
                        step=2,
                        robot=m,
                        at=self.now,
                        rationale=why,
                        r_fail=r_fail,
                        r_new=r_new,
                        assignment=dict(self.assignment),
                    ),
                    t0,
                )
            trigger = "no local reroute exists from where it stands"
        else:
            trigger = blocker
        return self._reallocate(m, r_fail, trigger, t0)

    def _reallocate(self, m: str, r_fail: frozenset, trigger: str, t0: float) -> Decision:
        # Step 3: fold everything stored, recompute what each robot
        # could still serve from where it stands, and redistribute with
        # a preference for current sets so unchanged robots keep their
        # routes (and their behavior objects).
        self._fold_all()
        robots = tuple(sorted(self.models))
        slices = {j: self.slice_for(j) for j in robots}
        families = {
            j: feasible_bindings(
                self.products[j],
                slices[j],
                self.task.c_distinct,
                retained=self.assignment[m] if j == m else frozenset(),
            )
            for j in robots
        }
        tail, cycle = slices[robots[0]].remaining()
        whole = (
            frozenset(rho for e in self.plan.beta.edges() for rho in e.guard.bindings())
            | dwell_bindings(self.b, self.plan.beta.edges())
        ) & self.alphabet
        ahead = (
            frozenset(rho for e in (*tail, *cycle) for rho in e.guard.bindings())
            | dwell_bindings(self.b, (*tail, *cycle))
        ) & self.alphabet
        b_alloc = whole | frozenset(rho for rho, _ in self.task.c_min)
        originals = {j: self.assignment[j] for j in robots}
        working = dict(families)
        while True:
            problem = AllocationProblem(
                robots=robots,
                bindings=b_alloc,
                candidates=working,
                originals=originals,
                c_min=self.task.c_min,
                c_distinct=self.task.c_distinct,
                vacuous=b_alloc - ahead,
            )
            result = allocate(problem, seed=self.seed)
            if result is None:
                return self._full(
                    m, r_fail, f"{trigger}, and no redistribution covers the task", t0
                )
            final = effective_assignment(result, problem)
            # The modified robot's old route is broken no matter what it
            # was handed, so it always re-plans; teammates only when
            # their binding sets genuinely change.
            rebuild = sorted({j for j in robots if is_changed(j, result[j], problem)} | {m})
            fresh: dict[str, Behavior] = {}
            stuck: str | None = None
            for j in rebuild:
                beh = local_resynthesize(self.products[j], slices[j], final[j])
                if beh is None:
                    stuck = j
                    break
                fresh[j] = beh
            if stuck is None:
                break
            if result[stuck] in working[stuck]:
                # That binding set cannot be walked from where the robot
                # stands; strike it and let the allocator try again.
                working = {**working, stuck: working[stuck] - {result[stuck]}}
                continue
            return self._full(
                m, r_fail, f"{trigger}, and {stuck} cannot realize its reassigned bindings", t0
            )
        for j, beh in fresh.items():
            self.assignment[j] = final[j]
            self._install(j, beh)
        return self._done(
            Decision(
                outcome=REALLOCATE,
                step=3,
                robot=m,
                at=self.now,
                rationale=(
                    f"step 3: {trigger}; bindings redistributed across the team, "
                    f"{len(rebuild)} robot(s) re-planned"
                ),
                r_fail=r_fail,
                assignment=dict(self.assignment),
                families=dict(families),
                changed=tuple(rebuild),
            ),
            t0,
        )

    def _full(self, m: str, r_fail: frozenset, trigger: str, t0: float) -> Decision:
        # Step 4: plan the whole team again from its current states,
        # restarting the task automaton from scratch.
        self._fold_all()
        models = {j: reseat(mm, self.positions[j]) for j, mm in self.models.items()}
        plan = synthesize(
            models,
            self.b,
            self.task,
            bound=self.bound,
            seed=self.seed,
            scenario_hash=self.plan.scenario_hash,
        )
        if plan is None:
            self.halted = True
            return self._done(
                Decision(
                    outcome=TASK_FAILED,
                    step=4,
                    robot=m,
                    at=self.now,
                    rationale=(
                        f"step 4: {trigger}; full re-planning found no satisfying "
                        "run — the task has failed"
                    ),
                    r_fail=r_fail,
                ),
                t0,
            )
        self.models = models
        self.products = {
            j: build_product(self.b, mm, self.alphabet) for j, mm in models.items()
        }
        self.plan = plan
        self.assignment = {j: frozenset(r) for j, r in plan.assignment.items()}
        self.index = 0
        for j, beh in plan.behaviors.items():
            self._install(j, beh)
        return self._done(
            Decision(
                outcome=FULL,
                step=4,
                robot=m,
                at=self.now,
                rationale=f"step 4: {trigger}; the whole team re-planned from its current states",
                r_fail=r_fail,
                assignment=dict(self.assignment),
                changed=tuple(sorted(self.models)),
                plan=plan,
            ),
            t0,
        )

    # -- plumbing ------------------------------------------------------

    def _breaks(self, j: str, removed: frozenset) -> bool:
        """Does the unexecuted part of j's behavior use a removed move?

        The walk ahead is the rest of the current route, every queued
        segment, and one full lap of the cycle (all laps repeat the same
        moves).  Waiting in place is not a move, so repeated positions
        are skipped rather than looked up.
        """
        segments = list(self._queue[j])
        walk: list[State] = [self.positions[j], *self._cursor[j], segments[0].cross]
        for seg in segments[1:]:
            walk.extend((*seg.route, seg.cross))
        for seg in self._lap[j]:
            walk.extend((*seg.route, seg.cross))
        return any(a != b and (a, b) in removed for a, b in zip(walk, walk[1:]))

    def _shed_blocker(self, m: str, r_fail: frozenset) -> str | None:
        """Why robot m may not simply drop its failed bindings — or
        ``None`` when the rest of the team already covers them and every
        minimum holder count survives the drop."""
        others = [r for j, r in self.assignment.items() if j != m]
        missing = sorted(rho for rho in r_fail if all(rho not in r for r in others))
        if missing:
            return f"nobody else serves {missing}"
        kept = self.assignment[m] - r_fail
        for rho, k in self.task.c_min:
            n = sum(1 for r in others if rho in r) + (1 if rho in kept else 0)
            if n < k:
                return (
                    f"dropping {sorted(r_fail)} leaves the team short-handed on "
                    f"{rho!r} ({n} of {k} required holders)"
                )
        return None

    def _fold(self, j: str, extra: Modification | None = None) -> None:
        """Fold j's stored modifications (and ``extra``) into its model
        and product, incrementally on the plan-relevant window."""
        mods = self.pending[j] + ([extra] if extra is not None else [])
        if not mods:
            return
        self.pending[j] = []
        slice_ = self.slice_for(j)
        for mod in mods:
            delta = delta_model(self.models[j], mod)
            self.models[j] = delta.new_model
            self.products[j] = updated(self.products[j], slice_, delta)
        self._window_dirty.add(j)

    def _fold_all(self) -> None:
        """Fold every stored modification and rebuild the affected
        products outright, so each one again equals a from-scratch
        build of its robot's fully-modified model."""
        for j in sorted(self.models):
            mods, self.pending[j] = self.pending[j], []
            for mod in mods:
                self.models[j] = apply_modification(self.models[j], mod)
            if mods or j in self._window_dirty:
                self.products[j] = build_product(self.b, self.models[j], self.alphabet)
        self._window_dirty.clear()

    def _done(self, d: Decision, t0: float) -> Decision:
        d = replace(d, elapsed_ms=(time.perf_counter() - t0) * 1000.0)
        self.decisions.append(d)
        return d
