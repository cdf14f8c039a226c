"""Robot models: weighted capability automata and their composition.

A robot is a set of capabilities running side by side.  Each capability
is a finite transition system whose states carry the action propositions
the robot exhibits there.  The composite model's motion options are all
combinations where every capability either holds its state or takes one
of its own transitions, and at least something actually changes; the
cost of a composite move is the summed cost of the taken transitions.

Capability edits (lost or gained transitions, fresh states) arrive as
:class:`Modification` values; :func:`delta_model` turns one into the
composite-level difference the synthesis product consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import product as cartesian

State = tuple[str, ...]


class ModificationError(ValueError):
    pass


@dataclass(frozen=True)
class Capability:
    name: str
    states: frozenset[str]
    initial: str
    props: frozenset[str]
    transitions: tuple[tuple[str, str, int], ...]  # (src, dst, weight)
    labels: tuple[tuple[str, frozenset[str]], ...]  # state -> props there

    def __post_init__(self):
        if self.initial not in self.states:
            raise ValueError(f"capability {self.name}: initial state {self.initial!r} unknown")
        label_map = dict(self.labels)
        if set(label_map) != set(self.states):
            raise ValueError(f"capability {self.name}: labels must cover exactly the states")
        for s, props in label_map.items():
            if not props <= self.props:
                raise ValueError(
                    f"capability {self.name}: state {s!r} labels {sorted(props - self.props)} "
                    "outside the declared propositions"
                )
        seen = set()
        for x, y, w in self.transitions:
            if x not in self.states or y not in self.states:
                raise ValueError(f"capability {self.name}: transition {x!r}->{y!r} leaves the state set")
            if w < 0:
                raise ValueError(f"capability {self.name}: negative weight on {x!r}->{y!r}")
            if (x, y) in seen:
                raise ValueError(f"capability {self.name}: duplicate transition {x!r}->{y!r}")
            seen.add((x, y))

    @property
    def label_map(self) -> dict[str, frozenset[str]]:
        return dict(self.labels)

    @property
    def edge_map(self) -> dict[tuple[str, str], int]:
        return {(x, y): w for x, y, w in self.transitions}

    def replaced(self, *, states=None, transitions=None, labels=None) -> "Capability":
        return Capability(
            name=self.name,
            states=self.states if states is None else states,
            initial=self.initial,
            props=self.props,
            transitions=self.transitions if transitions is None else transitions,
            labels=self.labels if labels is None else labels,
        )


def _moves(cap: Capability) -> dict[str, dict[str, int]]:
    """Per-state move options: target -> cheapest cost.  Holding the
    current state is always available at no cost, so explicit self-loops
    never price below it."""
    out: dict[str, dict[str, int]] = {s: {s: 0} for s in cap.states}
    for x, y, w in cap.transitions:
        best = out[x].get(y)
        if best is None or w < best:
            out[x][y] = w
    for s in cap.states:
        out[s][s] = 0
    return out


@dataclass(frozen=True)
class RobotModel:
    name: str
    capabilities: tuple[Capability, ...]
    initial: State = field(init=False)
    # derived tables; computed once in __post_init__
    states: frozenset[State] = field(init=False)
    labels: dict = field(init=False, compare=False)
    gamma: dict = field(init=False, compare=False)

    def __post_init__(self):
        caps = self.capabilities
        names = [c.name for c in caps]
        if len(set(names)) != len(names):
            raise ValueError(f"robot {self.name}: duplicate capability names")
        object.__setattr__(self, "initial", tuple(c.initial for c in caps))
        states = frozenset(cartesian(*(sorted(c.states) for c in caps)))
        object.__setattr__(self, "states", states)
        label_maps = [c.label_map for c in caps]
        labels = {
            s: frozenset().union(*(label_maps[i][x] for i, x in enumerate(s))) for s in states
        }
        object.__setattr__(self, "labels", labels)
        moves = [_moves(c) for c in caps]
        gamma: dict[tuple[State, State], int] = {}
        adjacency: dict[State, list[tuple[State, int]]] = {s: [] for s in states}
        for s in states:
            options = [sorted(moves[i][x].items()) for i, x in enumerate(s)]
            for combo in cartesian(*options):
                target = tuple(x for x, _ in combo)
                if target == s:
                    continue
                weight = sum(w for _, w in combo)
                best = gamma.get((s, target))
                if best is None or weight < best:
                    gamma[(s, target)] = weight
        for (s, target), weight in gamma.items():
            adjacency[s].append((target, weight))
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(
            self, "_adjacency", {s: tuple(sorted(nbrs)) for s, nbrs in adjacency.items()}
        )

    def moves_from(self, s: State) -> tuple[tuple[State, int], ...]:
        return self._adjacency[s]

    def capability(self, name: str) -> Capability:
        for c in self.capabilities:
            if c.name == name:
                return c
        raise KeyError(f"robot {self.name} has no capability {name!r}")


def compose(name: str, capabilities, shared_props=()) -> RobotModel:
    """Build a robot from capabilities, insisting their proposition
    namespaces are disjoint unless explicitly shared."""
    caps = tuple(capabilities)
    shared = frozenset(shared_props)
    claimed: dict[str, str] = {}
    for c in caps:
        for p in c.props:
            if p in shared:
                continue
            if p in claimed and claimed[p] != c.name:
                raise ValueError(
                    f"robot {name}: proposition {p!r} claimed by both "
                    f"{claimed[p]!r} and {c.name!r}; declare it shared if intended"
                )
            claimed[p] = c.name
    return RobotModel(name, caps)


def reseat(model: RobotModel, state: State) -> RobotModel:
    """The same robot, taken as starting from ``state``.

    Used when planning must restart mid-run: the composite state the
    robot currently occupies becomes the initial state of every
    capability.
    """
    if state not in model.states:
        raise ValueError(f"robot {model.name}: cannot reseat at unknown state {state!r}")
    caps = tuple(replace(c, initial=x) for c, x in zip(model.capabilities, state))
    return RobotModel(model.name, caps)


@dataclass(frozen=True)
class Modification:
    """One capability edit event for one robot at one instant."""

    robot: str
    t: int
    added_states: tuple[tuple[str, str, frozenset[str]], ...] = ()  # (capability, state, labels)
    added: tuple[tuple[str, str, str, int], ...] = ()  # (capability, src, dst, weight)
    removed: tuple[tuple[str, str, str], ...] = ()  # (capability, src, dst)


def apply_modification(model: RobotModel, mod: Modification) -> RobotModel:
    """Rebuild the robot with the modification applied.

    Removing a transition the capability does not have, re-adding one it
    already has, or re-declaring an existing state is an error: edits are
    reports of physical change, so a mismatch means the caller's picture
    of the robot has drifted.
    """
    if mod.robot != model.name:
        raise ModificationError(f"modification for {mod.robot!r} applied to {model.name!r}")
    caps = {c.name: c for c in model.capabilities}

    for cap_name, state, labels in mod.added_states:
        cap = caps.get(cap_name)
        if cap is None:
            raise ModificationError(f"unknown capability {cap_name!r}")
        if state in cap.states:
            raise ModificationError(f"capability {cap_name}: state {state!r} already exists")
        caps[cap_name] = cap.replaced(
            states=cap.states | {state},
            labels=cap.labels + ((state, frozenset(labels)),),
        )

    for cap_name, x, y, w in mod.added:
        cap = caps.get(cap_name)
        if cap is None:
            raise ModificationError(f"unknown capability {cap_name!r}")
        if (x, y) in cap.edge_map:
            raise ModificationError(f"capability {cap_name}: transition {x!r}->{y!r} already present")
        caps[cap_name] = cap.replaced(transitions=cap.transitions + ((x, y, w),))

    for cap_name, x, y in mod.removed:
        cap = caps.get(cap_name)
        if cap is None:
            raise ModificationError(f"unknown capability {cap_name!r}")
        if (x, y) not in cap.edge_map:
            raise ModificationError(f"capability {cap_name}: transition {x!r}->{y!r} not present")
        caps[cap_name] = cap.replaced(
            transitions=tuple(t for t in cap.transitions if (t[0], t[1]) != (x, y))
        )

    return RobotModel(model.name, tuple(caps[c.name] for c in model.capabilities))


@dataclass(frozen=True)
class DeltaModel:
    """Composite-level effect of a modification."""

    robot: str
    new_model: RobotModel
    removed: frozenset  # (s, s') pairs gone from the motion graph
    added: frozenset  # (s, s') pairs newly available

    @property
    def is_noop(self) -> bool:
        return not self.removed and not self.added


def delta_model(model: RobotModel, mod: Modification) -> DeltaModel:
    """Apply ``mod`` and report the motion-graph difference.

    Removing an explicit self-transition never changes the composite
    graph (holding a state is free anyway), so such edits come out as
    no-ops here — by construction, not by special-casing.
    """
    new_model = apply_modification(model, mod)
    old_edges = frozenset(model.gamma)
    new_edges = frozenset(new_model.gamma)
    return DeltaModel(
        robot=model.name,
        new_model=new_model,
        removed=old_edges - new_edges,
        added=new_edges - old_edges,
    )
