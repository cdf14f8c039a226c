#!/usr/bin/env python3
"""Regenerate everything under fixtures/ from one source of truth.

Run from the repository root:

    python3 tools/build_fixtures.py

The committed fixtures are this script's verbatim output; a test compares
them so the two cannot drift apart.  Scenario variants (one per scheduled
modification, plus the combined run) share the same world and differ only
in their schedules.

World notes, load-bearing and deliberate:

* Rooms are joined by two-phase doors: each direction has a threshold
  state that still shows the old room's ``_c`` indicator plus the next
  room's bare name.  A robot paused on a threshold has not yet arrived.
* The dock is entered from room B and has no way out.  That makes every
  plan that needs a robot to leave the dock later infeasible, so the
  search lands on the run where the team discharges both errands first
  and then parks: couriers in the dock, the camera holder in room B.
* Door weights make the east corridor (room D to the hall) the cheap
  route out of rooms D/E; losing it forces the detour through room C.
"""

from __future__ import annotations

import json
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

ROOMS = ["roomB", "roomC", "roomD", "roomE", "roomG", "hall", "storage", "dock"]

# (a, b, weight) — each two-way door; weight applies to all four legs
DOORS = [
    ("roomE", "roomD", 1),
    ("roomD", "hall", 1),
    ("roomD", "roomC", 2),
    ("roomC", "hall", 1),
    ("hall", "roomB", 1),
    ("hall", "storage", 1),
    ("roomG", "storage", 1),
]

ONE_WAY_DOORS = [("roomB", "dock", 1)]


def _threshold(a: str, b: str) -> tuple[str, list[str]]:
    """The state a robot occupies mid-crossing from room a into room b."""
    return f"{a}>{b}", [f"{a}_c", b]


def door_states(a: str, b: str, *, both_ways: bool = True) -> dict[str, list[str]]:
    out = dict([_threshold(a, b)])
    if both_ways:
        out.update([_threshold(b, a)])
    return out


def door_transitions(a: str, b: str, w: int, *, both_ways: bool = True) -> list[list]:
    legs = [[a, f"{a}>{b}", w], [f"{a}>{b}", b, w]]
    if both_ways:
        legs += [[b, f"{b}>{a}", w], [f"{b}>{a}", a, w]]
    return legs


def motion_capability() -> dict:
    states: dict[str, list[str]] = {room: [f"{room}_c"] for room in ROOMS}
    transitions: list[list] = []
    for a, b, w in DOORS:
        states.update(door_states(a, b))
        transitions += door_transitions(a, b, w)
    for a, b, w in ONE_WAY_DOORS:
        states.update(door_states(a, b, both_ways=False))
        transitions += door_transitions(a, b, w, both_ways=False)
    return {"states": states, "transitions": sorted(transitions)}


def toggle_capability(prop: str, *, hold: bool = False) -> dict:
    """A one-prop device: off shows nothing, on shows the prop.

    ``hold`` adds an explicit on->on transition (a device that keeps
    running), which also makes that pair a legal removal target.
    """
    transitions = [["off", "on", 1], ["on", "off", 1]]
    if hold:
        transitions.append(["on", "on", 0])
    return {
        "states": {"off": [], "on": [prop]},
        "transitions": sorted(transitions),
    }


def warehouse_scenario(name: str, schedule: list[dict]) -> dict:
    return {
        "schema": "scenario/1",
        "name": name,
        "capabilities": {
            "motion": motion_capability(),
            "camera": toggle_capability("camera", hold=True),
            "beep": toggle_capability("beep"),
            "scan": toggle_capability("scan"),
        },
        "robots": {
            "green": {"capabilities": {"motion": "roomD", "camera": "off"}},
            "blue": {"capabilities": {"motion": "roomC", "beep": "off"}},
            "orange": {"capabilities": {"motion": "roomE"}},
            "pink": {
                "capabilities": {
                    "motion": "roomG",
                    "beep": "off",
                    "camera": "off",
                    "scan": "off",
                }
            },
        },
        "task": "warehouse.task",
        "automaton": "warehouse_automaton.json",
        "schedule": schedule,
        "seed": 1,
        "bound": 8,
        "horizon": None,
    }


# The blue robot gains a door between rooms B and G.
MOD_DOOR_GAINED = {
    "robot": "blue",
    "t": 2,
    "added_states": [
        ["motion", "roomB>roomG", ["roomB_c", "roomG"]],
        ["motion", "roomG>roomB", ["roomG_c", "roomB"]],
    ],
    "added": [
        ["motion", "roomB", "roomB>roomG", 1],
        ["motion", "roomB>roomG", "roomG", 1],
        ["motion", "roomG", "roomG>roomB", 1],
        ["motion", "roomG>roomB", "roomB", 1],
    ],
}

# The orange robot loses the door between room D and the hall.
MOD_DOOR_LOST = {
    "robot": "orange",
    "t": 3,
    "removed": [
        ["motion", "roomD", "roomD>hall"],
        ["motion", "roomD>hall", "hall"],
        ["motion", "hall", "hall>roomD"],
        ["motion", "hall>roomD", "roomD"],
    ],
}

# The pink robot's camera dies while it is off: it can never turn on again.
MOD_CAMERA_LOST = {
    "robot": "pink",
    "t": 12,
    "removed": [
        ["camera", "off", "on"],
        ["camera", "on", "on"],
    ],
}

WAREHOUSE_TASK = """\
cmin: 1:2
F(beep & storage_c)@{3} & F(dock_c)@{1} & G(dock_c@{1} -> (roomB_c & camera)@{2})
"""


def warehouse_automaton() -> dict:
    """The task automaton the warehouse scenarios run against.

    Hand-rolled rather than translated: it keeps only the runs where the
    two one-shot errands discharge at separate instants, which is the
    shape the team plan in the acceptance suite commits to.  A test
    checks every word this automaton accepts also satisfies the task.
    """
    off_dock = {"false_some": [["dock_c", "1"]]}
    handover = {
        "true_all": [["dock_c", "1"], ["roomB_c", "2"], ["camera", "2"]],
    }

    def edge(src: int, dst: int, guard: dict) -> dict:
        slots = {
            "true_all": [],
            "true_some": [],
            "false_all": [],
            "false_some": [],
        }
        slots.update(guard)
        return {"src": src, "dst": dst, **slots}

    return {
        "schema": "automaton/1",
        "states": [0, 2, 3],
        "initial": 2,
        "accepting": [0],
        "edges": [
            edge(0, 0, off_dock),
            edge(0, 0, handover),
            edge(0, 2, off_dock),
            edge(
                2,
                3,
                {
                    "true_all": [["beep", "3"], ["storage_c", "3"]],
                    "false_some": [["dock_c", "1"]],
                },
            ),
            edge(2, 2, off_dock),
            edge(3, 0, handover),
            edge(3, 3, off_dock),
        ],
    }


# ---------------------------------------------------------------------------
# toy worlds for the remaining ladder outcomes

TOY_FULL_TASK = "F(act_a)@{1} | F(act_b)@{1}\n"

# Losing the last leg of the short errand forces a whole new team plan:
# the robot backtracks and takes the other branch of the disjunction.
TOY_FULL = {
    "schema": "scenario/1",
    "name": "toy_full",
    "capabilities": {
        "motion": {
            "states": {
                "base": ["base_c"],
                "pathA": ["pathA_c"],
                "goalA": ["goalA_c", "act_a"],
                "pathB": ["pathB_c"],
                "goalB": ["goalB_c", "act_b"],
            },
            "transitions": [
                ["base", "pathA", 1],
                ["pathA", "base", 1],
                ["pathA", "goalA", 1],
                ["goalA", "pathA", 1],
                ["base", "pathB", 5],
                ["pathB", "base", 5],
                ["pathB", "goalB", 5],
                ["goalB", "pathB", 5],
            ],
        }
    },
    "robots": {"solo": {"capabilities": {"motion": "base"}}},
    "task": "toy_full.task",
    "schedule": [{"robot": "solo", "t": 1, "removed": [["motion", "pathA", "goalA"]]}],
    "seed": 0,
    "bound": 6,
    "horizon": None,
}

TOY_FAILED_TASK = "F(beep)@{1}\n"

# The only transition that can ever make the robot beep is removed before
# it fires: no reallocation or resynthesis can save the task.
TOY_FAILED = {
    "schema": "scenario/1",
    "name": "toy_failed",
    "capabilities": {"beep": toggle_capability("beep")},
    "robots": {"solo": {"capabilities": {"beep": "off"}}},
    "task": "toy_failed.task",
    "schedule": [{"robot": "solo", "t": 0, "removed": [["beep", "off", "on"]]}],
    "seed": 0,
    "bound": 6,
    "horizon": None,
}


def build() -> dict[str, object]:
    return {
        "warehouse.task": WAREHOUSE_TASK,
        "warehouse_automaton.json": warehouse_automaton(),
        "warehouse.json": warehouse_scenario("warehouse", []),
        "warehouse_mod1.json": warehouse_scenario("warehouse_mod1", [MOD_DOOR_GAINED]),
        "warehouse_mod2.json": warehouse_scenario("warehouse_mod2", [MOD_DOOR_LOST]),
        "warehouse_mod3.json": warehouse_scenario("warehouse_mod3", [MOD_CAMERA_LOST]),
        "warehouse_mods.json": warehouse_scenario(
            "warehouse_mods", [MOD_DOOR_GAINED, MOD_DOOR_LOST, MOD_CAMERA_LOST]
        ),
        "toy_full.task": TOY_FULL_TASK,
        "toy_full.json": TOY_FULL,
        "toy_failed.task": TOY_FAILED_TASK,
        "toy_failed.json": TOY_FAILED,
    }


def render(content: object) -> str:
    if isinstance(content, str):
        return content
    return json.dumps(content, indent=2, sort_keys=True) + "\n"


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    for name, content in sorted(build().items()):
        (FIXTURES / name).write_text(render(content), encoding="utf-8")
        print(f"wrote fixtures/{name}")


if __name__ == "__main__":
    main()
