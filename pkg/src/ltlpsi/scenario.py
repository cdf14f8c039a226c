"""Scenario documents: one JSON file describing a team and its fate.

A scenario bundles everything a run needs — the capability catalog, the
robots instantiated from it, a reference to the task file, an optional
pre-built automaton, and the schedule of capability modifications that
will hit the team mid-run.  The loader validates cross-references up
front so a typo fails at load time, not twenty instants into execution.

Robot capabilities are instantiated from the shared catalog: each robot
names the capabilities it carries and the state each one starts in, so
two robots can share a motion model yet begin in different rooms.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

from .buchi import BuchiAutomaton, translate
from .robot import Capability, Modification, RobotModel, compose
from .tasklang import FormulaAst, parse_task, rewrite

SCHEMA = "scenario/1"


class ScenarioError(ValueError):
    """The scenario document is malformed or self-inconsistent."""


@dataclass(frozen=True)
class Scenario:
    """A loaded, validated scenario, ready to synthesize and run."""

    name: str
    models: dict[str, RobotModel]
    task: FormulaAst
    task_text: str
    automaton: BuchiAutomaton | None
    schedule: tuple[Modification, ...]
    seed: int
    bound: int
    horizon: int | None
    digest: str

    def buchi(self) -> BuchiAutomaton:
        """The automaton the plan runs against: the bundled one when the
        scenario ships it, a fresh translation of the task otherwise."""
        if self.automaton is not None:
            return self.automaton
        return translate(rewrite(self.task))


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


def _capability_template(name: str, raw: dict) -> Capability:
    _require(isinstance(raw, dict), f"capability {name!r}: entry must be an object")
    states = raw.get("states")
    _require(
        isinstance(states, dict) and states,
        f"capability {name!r}: 'states' must map state names to label lists",
    )
    labels = []
    props: set[str] = set()
    for s, ls in sorted(states.items()):
        _require(
            isinstance(ls, list) and all(isinstance(p, str) for p in ls),
            f"capability {name!r}: labels of {s!r} must be a list of strings",
        )
        labels.append((s, frozenset(ls)))
        props.update(ls)
    transitions = []
    for entry in raw.get("transitions", ()):
        _require(
            isinstance(entry, list) and len(entry) == 3,
            f"capability {name!r}: transitions are [src, dst, weight] triples",
        )
        x, y, w = entry
        _require(
            isinstance(w, int) and not isinstance(w, bool),
            f"capability {name!r}: weight of {x!r}->{y!r} must be an integer",
        )
        transitions.append((x, y, w))
    # the template needs *some* initial to construct; robots re-seat it
    first = sorted(states)[0]
    try:
        return Capability(
            name=name,
            states=frozenset(states),
            initial=first,
            props=frozenset(props),
            transitions=tuple(transitions),
            labels=tuple(labels),
        )
    except ValueError as exc:
        raise ScenarioError(f"capability {name!r}: {exc}") from exc


def _robot_model(name: str, raw: dict, catalog: dict[str, Capability]) -> RobotModel:
    _require(isinstance(raw, dict), f"robot {name!r}: entry must be an object")
    caps_raw = raw.get("capabilities")
    _require(
        isinstance(caps_raw, dict) and caps_raw,
        f"robot {name!r}: 'capabilities' must map capability names to initial states",
    )
    instances = []
    for cap_name, initial in caps_raw.items():
        template = catalog.get(cap_name)
        _require(
            template is not None,
            f"robot {name!r}: capability {cap_name!r} is not in the catalog",
        )
        _require(
            initial in template.states,
            f"robot {name!r}: initial state {initial!r} unknown to capability {cap_name!r}",
        )
        instances.append(replace(template, initial=initial))
    try:
        return compose(name, instances, raw.get("shared_props", ()))
    except ValueError as exc:
        raise ScenarioError(f"robot {name!r}: {exc}") from exc


def _modification(index: int, raw: dict, models: dict[str, RobotModel]) -> Modification:
    where = f"schedule entry {index}"
    _require(isinstance(raw, dict), f"{where}: must be an object")
    robot = raw.get("robot")
    _require(robot in models, f"{where}: robot {robot!r} is not on the team")
    t = raw.get("t")
    _require(
        isinstance(t, int) and not isinstance(t, bool) and t >= 0,
        f"{where}: 't' must be a non-negative integer",
    )
    cap_names = {c.name for c in models[robot].capabilities}

    def check_cap(cap: str) -> str:
        _require(
            cap in cap_names,
            f"{where}: robot {robot!r} has no capability {cap!r}",
        )
        return cap

    added_states = []
    for entry in raw.get("added_states", ()):
        _require(
            isinstance(entry, list) and len(entry) == 3,
            f"{where}: added_states entries are [capability, state, labels]",
        )
        cap, state, ls = entry
        added_states.append((check_cap(cap), state, frozenset(ls)))
    added = []
    for entry in raw.get("added", ()):
        _require(
            isinstance(entry, list) and len(entry) == 4,
            f"{where}: added entries are [capability, src, dst, weight]",
        )
        cap, x, y, w = entry
        added.append((check_cap(cap), x, y, w))
    removed = []
    for entry in raw.get("removed", ()):
        _require(
            isinstance(entry, list) and len(entry) == 3,
            f"{where}: removed entries are [capability, src, dst]",
        )
        cap, x, y = entry
        removed.append((check_cap(cap), x, y))
    _require(
        added_states or added or removed,
        f"{where}: a modification must add or remove something",
    )
    return Modification(
        robot=robot,
        t=t,
        added_states=tuple(added_states),
        added=tuple(added),
        removed=tuple(removed),
    )


def load_scenario(path: str | Path) -> Scenario:
    """Read, validate, and assemble a scenario document.

    Relative ``task`` and ``automaton`` references resolve against the
    scenario file's own directory.  The digest covers the scenario bytes
    and both referenced files, so a plan stamped with it goes stale the
    moment any of the three changes.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    try:
        data = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path.name} is not valid JSON: {exc}") from exc
    _require(isinstance(data, dict), f"{path.name}: top level must be an object")
    _require(
        data.get("schema") == SCHEMA,
        f"{path.name}: not a scenario document (schema {data.get('schema')!r})",
    )

    catalog_raw = data.get("capabilities")
    _require(
        isinstance(catalog_raw, dict) and catalog_raw,
        "scenario declares no capabilities",
    )
    catalog = {
        name: _capability_template(name, raw) for name, raw in catalog_raw.items()
    }

    robots_raw = data.get("robots")
    _require(isinstance(robots_raw, dict) and robots_raw, "scenario declares no robots")
    models = {name: _robot_model(name, raw, catalog) for name, raw in robots_raw.items()}

    task_ref = data.get("task")
    _require(
        isinstance(task_ref, str) and bool(task_ref),
        "scenario must reference a task file",
    )
    task_path = path.parent / task_ref
    try:
        task_blob = task_path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read task file {task_ref!r}: {exc}") from exc
    task_text = task_blob.decode("utf-8")
    try:
        task = parse_task(task_text)
    except ValueError as exc:
        raise ScenarioError(f"task file {task_ref!r}: {exc}") from exc

    declared = frozenset().union(
        *(cap.props for cap in catalog.values())
    ) if catalog else frozenset()
    missing = task.actions - declared
    _require(
        not missing,
        "task mentions propositions no capability can ever show: "
        + ", ".join(sorted(missing)),
    )

    automaton = None
    automaton_blob = b""
    automaton_ref = data.get("automaton")
    if automaton_ref is not None:
        _require(
            isinstance(automaton_ref, str) and bool(automaton_ref),
            "'automaton' must be a file reference when present",
        )
        automaton_path = path.parent / automaton_ref
        try:
            automaton_blob = automaton_path.read_bytes()
        except OSError as exc:
            raise ScenarioError(
                f"cannot read automaton file {automaton_ref!r}: {exc}"
            ) from exc
        try:
            automaton = BuchiAutomaton.from_json(json.loads(automaton_blob))
        except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
            raise ScenarioError(f"automaton file {automaton_ref!r}: {exc}") from exc

    schedule_raw = data.get("schedule", [])
    _require(isinstance(schedule_raw, list), "'schedule' must be a list")
    schedule = tuple(
        _modification(i, raw, models) for i, raw in enumerate(schedule_raw)
    )
    stamps = [mod.t for mod in schedule]
    _require(
        all(a < b for a, b in zip(stamps, stamps[1:])),
        "schedule times must be strictly increasing",
    )

    seed = data.get("seed", 0)
    _require(
        isinstance(seed, int) and not isinstance(seed, bool),
        "'seed' must be an integer",
    )
    bound = data.get("bound", 12)
    _require(
        isinstance(bound, int) and not isinstance(bound, bool) and bound >= 1,
        "'bound' must be a positive integer",
    )
    horizon = data.get("horizon")
    if horizon is not None:
        _require(
            isinstance(horizon, int) and not isinstance(horizon, bool) and horizon >= 1,
            "'horizon' must be a positive integer or null",
        )

    h = hashlib.sha256()
    for part in (blob, task_blob, automaton_blob):
        h.update(len(part).to_bytes(8, "big"))
        h.update(part)
    return Scenario(
        name=data.get("name", path.stem),
        models=models,
        task=task,
        task_text=task_text,
        automaton=automaton,
        schedule=schedule,
        seed=seed,
        bound=bound,
        horizon=horizon,
        digest=h.hexdigest(),
    )
