"""Exact satisfaction checking of tasks on lasso-shaped team words.

This module is the semantic ground truth: it evaluates the task tree
directly, block by block, with true quantification over the robots that
hold each binding.  It deliberately shares no evaluation machinery with
the automaton pipeline so the two can be compared against each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .tasklang import (
    Block,
    FormulaAst,
    PAlways,
    PAnd,
    PAtom,
    PEventually,
    PNot,
    POr,
    PUntil,
    TAlways,
    TAnd,
    TEventually,
    TOr,
    TUntil,
    TaskNode,
    zeta,
)

Labels = frozenset[str]
Assignment = Mapping[str, frozenset[str]]


@dataclass(frozen=True)
class LassoWord:
    """An infinite team word given as prefix + cycle.

    ``labels[j]`` is robot ``j``'s label sequence over the first ``n``
    instants; from instant ``n`` on, the word repeats instants
    ``loop .. n-1`` forever.
    """

    labels: Mapping[str, tuple[Labels, ...]]
    loop: int

    def __post_init__(self):
        lengths = {len(trace) for trace in self.labels.values()}
        if not self.labels:
            raise ValueError("a word needs at least one robot")
        if len(lengths) != 1:
            raise ValueError(f"robot traces disagree on length: {sorted(lengths)}")
        n = lengths.pop()
        if n == 0:
            raise ValueError("a word needs at least one instant")
        if not 0 <= self.loop < n:
            raise ValueError(f"loop index {self.loop} outside 0..{n - 1}")

    @property
    def length(self) -> int:
        return len(next(iter(self.labels.values())))

    def robots(self) -> list[str]:
        return sorted(self.labels)

    def succ(self, t: int) -> int:
        return t + 1 if t + 1 < self.length else self.loop

    def order_from(self, t: int) -> list[int]:
        """All distinct instants reachable from ``t``, in visit order."""
        tail = list(range(t, self.length))
        if t > self.loop:
            tail.extend(range(self.loop, t))
        return tail

    def at(self, j: str, t: int) -> Labels:
        return self.labels[j][t]


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    reason: str | None = None

    def __bool__(self) -> bool:  # pragma: no cover - convenience
        return self.ok


def constraints_ok(assignment: Assignment, task: FormulaAst) -> bool:
    """Assignment-level constraints: distinctness and minimum multiplicity."""
    for c in task.c_distinct:
        for r in assignment.values():
            if len(r & c) > 1:
                return False
    for rho, k in task.c_min:
        if sum(1 for r in assignment.values() if rho in r) < k:
            return False
    return True


def _eval_phi(phi, word: LassoWord, j: str, t: int, strict: bool, memo: dict) -> bool:
    key = (id(phi), j, t)
    if key in memo:
        return memo[key]
    if isinstance(phi, PAtom):
        val = phi.name in word.at(j, t)
    elif isinstance(phi, PNot):
        val = not _eval_phi(phi.child, word, j, t, strict, memo)
    elif isinstance(phi, PAnd):
        val = _eval_phi(phi.left, word, j, t, strict, memo) and _eval_phi(
            phi.right, word, j, t, strict, memo
        )
    elif isinstance(phi, POr):
        val = _eval_phi(phi.left, word, j, t, strict, memo) or _eval_phi(
            phi.right, word, j, t, strict, memo
        )
    elif isinstance(phi, PUntil):
        val = False
        for s in word.order_from(t):
            if _eval_phi(phi.right, word, j, s, strict, memo):
                val = True
                break
            if not _eval_phi(phi.left, word, j, s, strict, memo):
                break
    elif isinstance(phi, PAlways):
        start = word.succ(t) if strict else t
        val = all(_eval_phi(phi.child, word, j, s, strict, memo) for s in word.order_from(start))
    elif isinstance(phi, PEventually):
        val = any(_eval_phi(phi.child, word, j, s, strict, memo) for s in word.order_from(t))
    else:  # pragma: no cover
        raise AssertionError(phi)
    memo[key] = val
    return val


class _Evaluator:
    def __init__(self, word: LassoWord, assignment: Assignment, task: FormulaAst, strict: bool):
        self.word = word
        self.task = task
        self.strict = strict
        self.holders: dict[str, tuple[str, ...]] = {
            rho: tuple(j for j in word.robots() if rho in assignment.get(j, frozenset()))
            for rho in task.bindings
        }
        self.phi_memo: dict = {}
        self.task_memo: dict = {}

    def block(self, node: Block, t: int) -> bool:
        for k in zeta(node.psi, self.task.bindings):
            holder_sets = [self.holders[rho] for rho in k]
            if not all(holder_sets):
                continue  # a candidate set is usable only if fully covered
            robots = {j for hs in holder_sets for j in hs}
            if node.negated:
                if any(
                    not _eval_phi(node.phi, self.word, j, t, self.strict, self.phi_memo)
                    for j in robots
                ):
                    return True
            else:
                if all(
                    _eval_phi(node.phi, self.word, j, t, self.strict, self.phi_memo)
                    for j in robots
                ):
                    return True
        return False

    def eval(self, node: TaskNode, t: int) -> bool:
        key = (id(node), t)
        if key in self.task_memo:
            return self.task_memo[key]
        if isinstance(node, Block):
            val = self.block(node, t)
        elif isinstance(node, TAnd):
            val = self.eval(node.left, t) and self.eval(node.right, t)
        elif isinstance(node, TOr):
            val = self.eval(node.left, t) or self.eval(node.right, t)
        elif isinstance(node, TUntil):
            val = False
            for s in self.word.order_from(t):
                if self.eval(node.right, s):
                    val = True
                    break
                if not self.eval(node.left, s):
                    break
        elif isinstance(node, TAlways):
            start = self.word.succ(t) if self.strict else t
            val = all(self.eval(node.child, s) for s in self.word.order_from(start))
        elif isinstance(node, TEventually):
            val = any(self.eval(node.child, s) for s in self.word.order_from(t))
        else:  # pragma: no cover
            raise AssertionError(node)
        self.task_memo[key] = val
        return val


def satisfies(
    word: LassoWord,
    assignment: Assignment,
    task: FormulaAst,
    strict_always: bool = False,
) -> CheckResult:
    """Does the team word under this binding assignment satisfy the task?

    ``strict_always`` switches every always-operator to the irreflexive
    reading (the property must hold at all *later* instants).
    """
    missing = set(assignment) - set(word.labels)
    if missing:
        raise ValueError(f"assignment mentions robots with no trace: {sorted(missing)}")
    stray = frozenset().union(*assignment.values()) - task.bindings if assignment else frozenset()
    if stray:
        raise ValueError(f"assignment uses bindings the task never declares: {sorted(stray)}")
    if not constraints_ok(assignment, task):
        return CheckResult(False, "assignment violates the task's allocation constraints")
    ok = _Evaluator(word, assignment, task, strict_always).eval(task.root, 0)
    return CheckResult(ok, None if ok else "word falsifies the formula at the initial instant")
