"""Task language: binding-annotated temporal formulas.

A task is a temporal formula over *atomic blocks*.  Each block pairs an
action formula ``phi`` (over action propositions, evaluated per robot)
with a negation-free *binding formula* ``psi`` (over decimal binding
identifiers) that says which task bindings must jointly supply the
behavior.  Teams satisfy a block by choosing a binding set from
``zeta(psi)`` and having every robot holding one of those bindings meet
``phi``.

Concrete syntax (see README for the full EBNF)::

    cmin: 1:2
    F(beep & storage_c)@{3} & F(dock_c)@{1} & G(dock_c@{1} -> (roomB_c & camera)@{2})

Header lines declare assignment constraints: ``cdistinct: {1,2}`` forbids
one robot from holding both bindings, ``cmin: 1:2`` demands at least two
robots on binding 1.  ``G``/``F``/``U`` are reserved temporal operators,
``->`` is lowest-precedence implication sugar, and ``@{psi}`` annotates
the atom or parenthesized group immediately before it.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Union

Binding = str
Action = str


class TaskError(ValueError):
    """Parse or validation error, annotated with a source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, column {col}: {message}"
        super().__init__(message)


class UnsupportedTaskError(ValueError):
    """The task is well-formed but outside the fragment the automaton
    translation can represent exactly."""


# ---------------------------------------------------------------------------
# binding formulas (negation-free, over decimal binding identifiers)

@dataclass(frozen=True)
class BVar:
    name: Binding


@dataclass(frozen=True)
class BAnd:
    left: "BNode"
    right: "BNode"


@dataclass(frozen=True)
class BOr:
    left: "BNode"
    right: "BNode"


BNode = Union[BVar, BAnd, BOr]


def binding_props(psi: BNode) -> frozenset[Binding]:
    if isinstance(psi, BVar):
        return frozenset((psi.name,))
    return binding_props(psi.left) | binding_props(psi.right)


def _eval_binding(psi: BNode, true_set: frozenset[Binding]) -> bool:
    if isinstance(psi, BVar):
        return psi.name in true_set
    if isinstance(psi, BAnd):
        return _eval_binding(psi.left, true_set) and _eval_binding(psi.right, true_set)
    return _eval_binding(psi.left, true_set) or _eval_binding(psi.right, true_set)


@lru_cache(maxsize=None)
def zeta(psi: BNode, alphabet: frozenset[Binding]) -> frozenset[frozenset[Binding]]:
    """All unions of minimal models of ``psi``.

    Binding formulas are negation-free, hence monotone: supersets of
    models are models, so minimal models exist and the family of unions
    of minimal models is exactly the candidate binding sets a team may
    commit to.
    """
    props = sorted(binding_props(psi))
    missing = set(props) - set(alphabet)
    if missing:
        raise ValueError(f"binding formula uses undeclared bindings: {sorted(missing)}")
    models = []
    for n in range(len(props) + 1):
        for combo in itertools.combinations(props, n):
            s = frozenset(combo)
            if _eval_binding(psi, s):
                models.append(s)
    minimal = [m for m in models if not any(o < m for o in models)]
    family: set[frozenset[Binding]] = set()
    for n in range(1, len(minimal) + 1):
        for combo in itertools.combinations(minimal, n):
            family.add(frozenset().union(*combo))
    return frozenset(family)


# ---------------------------------------------------------------------------
# action formulas (the phi inside a block, evaluated on one robot's trace)

@dataclass(frozen=True)
class PAtom:
    name: Action


@dataclass(frozen=True)
class PNot:
    child: "PNode"


@dataclass(frozen=True)
class PAnd:
    left: "PNode"
    right: "PNode"


@dataclass(frozen=True)
class POr:
    left: "PNode"
    right: "PNode"


@dataclass(frozen=True)
class PUntil:
    left: "PNode"
    right: "PNode"


@dataclass(frozen=True)
class PAlways:
    child: "PNode"


@dataclass(frozen=True)
class PEventually:
    child: "PNode"


PNode = Union[PAtom, PNot, PAnd, POr, PUntil, PAlways, PEventually]


def action_props(phi: PNode) -> frozenset[Action]:
    if isinstance(phi, PAtom):
        return frozenset((phi.name,))
    if isinstance(phi, (PNot, PAlways, PEventually)):
        return action_props(phi.child)
    return action_props(phi.left) | action_props(phi.right)


# ---------------------------------------------------------------------------
# task layer

@dataclass(frozen=True)
class Block:
    """An action formula annotated with a binding formula.

    ``negated`` marks outer negation: the team satisfies the block when
    some covered binding set contains a robot whose trace *violates*
    ``phi``.  Inner negation is just a ``PNot`` at the root of ``phi``.
    """

    phi: PNode
    psi: BNode
    negated: bool = False

    @property
    def negation_style(self) -> str:
        if self.negated:
            return "outer-neg"
        if isinstance(self.phi, PNot):
            return "inner-neg"
        return "plain"


@dataclass(frozen=True)
class TAnd:
    left: "TaskNode"
    right: "TaskNode"


@dataclass(frozen=True)
class TOr:
    left: "TaskNode"
    right: "TaskNode"


@dataclass(frozen=True)
class TUntil:
    left: "TaskNode"
    right: "TaskNode"


@dataclass(frozen=True)
class TAlways:
    child: "TaskNode"


@dataclass(frozen=True)
class TEventually:
    child: "TaskNode"


TaskNode = Union[Block, TAnd, TOr, TUntil, TAlways, TEventually]


@dataclass(frozen=True)
class FormulaAst:
    root: TaskNode
    c_distinct: frozenset[frozenset[Binding]]
    c_min: frozenset[tuple[Binding, int]]
    actions: frozenset[Action]
    bindings: frozenset[Binding]

    def blocks(self) -> Iterator[Block]:
        def walk(node: TaskNode) -> Iterator[Block]:
            if isinstance(node, Block):
                yield node
            elif isinstance(node, (TAlways, TEventually)):
                yield from walk(node.child)
            else:
                yield from walk(node.left)
                yield from walk(node.right)

        return walk(self.root)


# ---------------------------------------------------------------------------
# tokenizer / parser

_HEADER_RE = re.compile(r"^\s*(cdistinct|cmin)\s*:\s*(.*)$")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"[0-9]+")


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize_line(text: str, line_no: int, out: list[_Tok]) -> None:
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "#":
            return
        if ch.isspace():
            i += 1
            continue
        col = i + 1
        if text.startswith("->", i):
            out.append(_Tok("->", "->", line_no, col))
            i += 2
            continue
        if ch in "(){}@&|!,:":
            out.append(_Tok(ch, ch, line_no, col))
            i += 1
            continue
        m = _INT_RE.match(text, i)
        if m:
            out.append(_Tok("int", m.group(), line_no, col))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            word = m.group()
            kind = word if word in ("U", "G", "F") else "ident"
            out.append(_Tok(kind, word, line_no, col))
            i = m.end()
            continue
        raise TaskError(f"unexpected character {ch!r}", line_no, col)


class _Parser:
    def __init__(self, toks: list[_Tok], eof_line: int):
        self._toks = toks
        self._i = 0
        self._eof = _Tok("eof", "", eof_line, 1)

    def peek(self) -> _Tok:
        return self._toks[self._i] if self._i < len(self._toks) else self._eof

    def advance(self) -> _Tok:
        tok = self.peek()
        if tok.kind != "eof":
            self._i += 1
        return tok

    def expect(self, kind: str) -> _Tok:
        tok = self.peek()
        if tok.kind != kind:
            raise TaskError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return self.advance()

    # task-level expression grammar, loosest binding first
    def parse(self) -> "_Node":
        node = self.implication()
        tok = self.peek()
        if tok.kind != "eof":
            raise TaskError(f"unexpected {tok.text!r} after formula", tok.line, tok.col)
        return node

    def implication(self) -> "_Node":
        left = self.disjunction()
        tok = self.peek()
        if tok.kind == "->":
            self.advance()
            right = self.implication()
            return _Node("imp", tok, left=left, right=right)
        return left

    def disjunction(self) -> "_Node":
        left = self.conjunction()
        while self.peek().kind == "|":
            tok = self.advance()
            right = self.conjunction()
            left = _Node("or", tok, left=left, right=right)
        return left

    def conjunction(self) -> "_Node":
        left = self.until()
        while self.peek().kind == "&":
            tok = self.advance()
            right = self.until()
            left = _Node("and", tok, left=left, right=right)
        return left

    def until(self) -> "_Node":
        left = self.unary()
        if self.peek().kind == "U":
            tok = self.advance()
            right = self.until()
            return _Node("until", tok, left=left, right=right)
        return left

    def unary(self) -> "_Node":
        tok = self.peek()
        if tok.kind in ("G", "F", "!"):
            self.advance()
            kind = {"G": "always", "F": "eventually", "!": "not"}[tok.kind]
            return _Node(kind, tok, left=self.unary())
        return self.postfix()

    def postfix(self) -> "_Node":
        node = self.primary()
        while self.peek().kind == "@":
            tok = self.advance()
            self.expect("{")
            psi = self.binding_or()
            self.expect("}")
            node = _Node("annot", tok, left=node, psi=psi)
        return node

    def primary(self) -> "_Node":
        tok = self.peek()
        if tok.kind == "(":
            self.advance()
            node = self.implication()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.advance()
            return _Node("atom", tok)
        if tok.kind == "int":
            raise TaskError(
                f"binding {tok.text!r} may only appear inside a @{{...}} annotation", tok.line, tok.col
            )
        raise TaskError(f"expected an action or '(', found {tok.text or 'end of input'!r}", tok.line, tok.col)

    # binding formulas: | over & over primaries; negation is rejected
    def binding_or(self) -> BNode:
        left = self.binding_and()
        while self.peek().kind == "|":
            self.advance()
            left = BOr(left, self.binding_and())
        return left

    def binding_and(self) -> BNode:
        left = self.binding_primary()
        while self.peek().kind == "&":
            self.advance()
            left = BAnd(left, self.binding_primary())
        return left

    def binding_primary(self) -> BNode:
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return BVar(tok.text)
        if tok.kind == "(":
            self.advance()
            node = self.binding_or()
            self.expect(")")
            return node
        if tok.kind == "!":
            raise TaskError("negation is not allowed in a binding formula", tok.line, tok.col)
        if tok.kind == "}":
            raise TaskError("empty binding formula", tok.line, tok.col)
        raise TaskError(f"expected a binding, found {tok.text or 'end of input'!r}", tok.line, tok.col)


class _Node:
    """Neutral parse node; elaboration decides the task/action layer."""

    __slots__ = ("kind", "tok", "left", "right", "psi")

    def __init__(self, kind: str, tok: _Tok, left=None, right=None, psi=None):
        self.kind = kind
        self.tok = tok
        self.left = left
        self.right = right
        self.psi = psi


def _elaborate_phi(node: _Node) -> PNode:
    if node.kind == "atom":
        return PAtom(node.tok.text)
    if node.kind == "not":
        return PNot(_elaborate_phi(node.left))
    if node.kind == "and":
        return PAnd(_elaborate_phi(node.left), _elaborate_phi(node.right))
    if node.kind == "or":
        return POr(_elaborate_phi(node.left), _elaborate_phi(node.right))
    if node.kind == "imp":
        return POr(PNot(_elaborate_phi(node.left)), _elaborate_phi(node.right))
    if node.kind == "until":
        return PUntil(_elaborate_phi(node.left), _elaborate_phi(node.right))
    if node.kind == "always":
        return PAlways(_elaborate_phi(node.left))
    if node.kind == "eventually":
        return PEventually(_elaborate_phi(node.left))
    if node.kind == "annot":
        raise TaskError("nested binding annotation", node.tok.line, node.tok.col)
    raise AssertionError(node.kind)


def _elaborate_task(node: _Node) -> TaskNode:
    if node.kind == "annot":
        return Block(_elaborate_phi(node.left), node.psi, negated=False)
    if node.kind == "not":
        inner = _elaborate_task(node.left)
        if not isinstance(inner, Block):
            raise TaskError(
                "negation may only be applied to a binding-annotated block", node.tok.line, node.tok.col
            )
        return Block(inner.phi, inner.psi, negated=not inner.negated)
    if node.kind == "imp":
        left = _elaborate_task(node.left)
        if not isinstance(left, Block):
            raise TaskError(
                "the antecedent of '->' must be a binding-annotated block", node.tok.line, node.tok.col
            )
        negated = Block(left.phi, left.psi, negated=not left.negated)
        return TOr(negated, _elaborate_task(node.right))
    if node.kind == "and":
        return TAnd(_elaborate_task(node.left), _elaborate_task(node.right))
    if node.kind == "or":
        return TOr(_elaborate_task(node.left), _elaborate_task(node.right))
    if node.kind == "until":
        return TUntil(_elaborate_task(node.left), _elaborate_task(node.right))
    if node.kind == "always":
        return TAlways(_elaborate_task(node.left))
    if node.kind == "eventually":
        return TEventually(_elaborate_task(node.left))
    if node.kind == "atom":
        raise TaskError(
            f"action {node.tok.text!r} must carry a binding annotation", node.tok.line, node.tok.col
        )
    raise AssertionError(node.kind)


def _parse_cdistinct(body: str, line_no: int) -> list[frozenset[Binding]]:
    toks: list[_Tok] = []
    _tokenize_line(body, line_no, toks)
    sets: list[frozenset[Binding]] = []
    i = 0
    while i < len(toks):
        if toks[i].kind == ",":
            i += 1
            continue
        if toks[i].kind != "{":
            raise TaskError("expected '{' in cdistinct constraint", toks[i].line, toks[i].col)
        i += 1
        members: set[Binding] = set()
        while i < len(toks) and toks[i].kind != "}":
            if toks[i].kind == ",":
                i += 1
                continue
            if toks[i].kind != "int":
                raise TaskError("cdistinct sets contain binding identifiers", toks[i].line, toks[i].col)
            members.add(toks[i].text)
            i += 1
        if i >= len(toks):
            raise TaskError("unterminated cdistinct set", line_no, len(body))
        i += 1
        if len(members) < 2:
            raise TaskError("a cdistinct set needs at least two bindings", line_no, 1)
        sets.append(frozenset(members))
    if not sets:
        raise TaskError("empty cdistinct constraint", line_no, 1)
    return sets


def _parse_cmin(body: str, line_no: int) -> list[tuple[Binding, int]]:
    toks: list[_Tok] = []
    _tokenize_line(body, line_no, toks)
    pairs: list[tuple[Binding, int]] = []
    i = 0
    while i < len(toks):
        if toks[i].kind == ",":
            i += 1
            continue
        if toks[i].kind != "int":
            raise TaskError("expected 'binding:count' in cmin constraint", toks[i].line, toks[i].col)
        rho = toks[i].text
        if i + 1 >= len(toks) or toks[i + 1].kind != ":":
            raise TaskError("expected ':' after cmin binding", toks[i].line, toks[i].col)
        if i + 2 >= len(toks) or toks[i + 2].kind != "int":
            raise TaskError("expected a count after ':'", toks[i + 1].line, toks[i + 1].col)
        count = int(toks[i + 2].text)
        if count < 1:
            raise TaskError("cmin counts must be positive", toks[i + 2].line, toks[i + 2].col)
        pairs.append((rho, count))
        i += 3
    if not pairs:
        raise TaskError("empty cmin constraint", line_no, 1)
    return pairs


def parse_task(text: str) -> FormulaAst:
    """Parse task text (headers + one formula) into a :class:`FormulaAst`.

    Raises :class:`TaskError` with line/column info on malformed input.
    """
    c_distinct: list[frozenset[Binding]] = []
    c_min: dict[Binding, int] = {}
    toks: list[_Tok] = []
    last_line = 1
    for line_no, line in enumerate(text.splitlines(), start=1):
        last_line = line_no
        header = _HEADER_RE.match(line.split("#", 1)[0])
        if header:
            name, body = header.groups()
            if name == "cdistinct":
                c_distinct.extend(_parse_cdistinct(body, line_no))
            else:
                for rho, count in _parse_cmin(body, line_no):
                    if rho in c_min:
                        raise TaskError(f"duplicate cmin entry for binding {rho}", line_no, 1)
                    c_min[rho] = count
            continue
        _tokenize_line(line, line_no, toks)
    if not toks:
        raise TaskError("no formula found", last_line, 1)
    parser = _Parser(toks, last_line)
    root = _elaborate_task(parser.parse())

    bindings: set[Binding] = set()
    actions: set[Action] = set()
    ast_probe = FormulaAst(root, frozenset(), frozenset(), frozenset(), frozenset())
    for block in ast_probe.blocks():
        bindings |= binding_props(block.psi)
        actions |= action_props(block.phi)
    for rho, _ in c_min.items():
        if rho not in bindings:
            raise TaskError(f"cmin references binding {rho}, which appears in no annotation")
    for c in c_distinct:
        for rho in c:
            if rho not in bindings:
                raise TaskError(f"cdistinct references binding {rho}, which appears in no annotation")
    return FormulaAst(
        root=root,
        c_distinct=frozenset(c_distinct),
        c_min=frozenset(c_min.items()),
        actions=frozenset(actions),
        bindings=frozenset(bindings),
    )


# ---------------------------------------------------------------------------
# annotated literals and the literal-level temporal IR (negation normal form)

@dataclass(frozen=True)
class AnnotatedLiteral:
    """One action proposition tied to one binding.

    ``exists`` selects the quantifier over robots holding the binding
    (some holder vs. every holder); ``positive`` selects the polarity of
    the action proposition.  A literal whose binding nobody holds is
    false in every flavor — holding the binding is part of the claim.
    """

    action: Action
    binding: Binding
    exists: bool
    positive: bool

    def negate(self) -> "AnnotatedLiteral":
        # not(every holder has pi) == some holder lacks pi, and dually:
        # the quantifier and the polarity flip together.
        return AnnotatedLiteral(self.action, self.binding, not self.exists, not self.positive)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        q = "E" if self.exists else "A"
        sign = "+" if self.positive else "-"
        return f"{q}{sign}{self.action}@{self.binding}"


@dataclass(frozen=True)
class LTrue:
    pass


@dataclass(frozen=True)
class LFalse:
    pass


@dataclass(frozen=True)
class LLit:
    lit: AnnotatedLiteral


@dataclass(frozen=True)
class LAnd:
    left: "LNode"
    right: "LNode"


@dataclass(frozen=True)
class LOr:
    left: "LNode"
    right: "LNode"


@dataclass(frozen=True)
class LUntil:
    left: "LNode"
    right: "LNode"


@dataclass(frozen=True)
class LRelease:
    left: "LNode"
    right: "LNode"


LNode = Union[LTrue, LFalse, LLit, LAnd, LOr, LUntil, LRelease]

TRUE = LTrue()
FALSE = LFalse()


def l_and(parts: list[LNode]) -> LNode:
    flat = [p for p in parts if not isinstance(p, LTrue)]
    if any(isinstance(p, LFalse) for p in flat):
        return FALSE
    if not flat:
        return TRUE
    node = flat[0]
    for part in flat[1:]:
        node = LAnd(node, part)
    return node


def l_or(parts: list[LNode]) -> LNode:
    flat = [p for p in parts if not isinstance(p, LFalse)]
    if any(isinstance(p, LTrue) for p in flat):
        return TRUE
    if not flat:
        return FALSE
    node = flat[0]
    for part in flat[1:]:
        node = LOr(node, part)
    return node


def eventually(node: LNode) -> LNode:
    return LUntil(TRUE, node)


def always(node: LNode) -> LNode:
    return LRelease(FALSE, node)


def negate_nnf(node: LNode) -> LNode:
    """Negation over the literal IR, kept in negation normal form."""
    if isinstance(node, LTrue):
        return FALSE
    if isinstance(node, LFalse):
        return TRUE
    if isinstance(node, LLit):
        return LLit(node.lit.negate())
    if isinstance(node, LAnd):
        return LOr(negate_nnf(node.left), negate_nnf(node.right))
    if isinstance(node, LOr):
        return LAnd(negate_nnf(node.left), negate_nnf(node.right))
    if isinstance(node, LUntil):
        return LRelease(negate_nnf(node.left), negate_nnf(node.right))
    return LUntil(negate_nnf(node.left), negate_nnf(node.right))


def _subst(phi: PNode, rho: Binding, exists: bool, positive: bool) -> LNode:
    """NNF of ``phi`` (or of its negation when ``positive`` is false),
    with every action atom turned into a literal over ``rho``."""
    if isinstance(phi, PAtom):
        return LLit(AnnotatedLiteral(phi.name, rho, exists, positive))
    if isinstance(phi, PNot):
        return _subst(phi.child, rho, exists, not positive)
    if isinstance(phi, PAnd):
        ctor = LAnd if positive else LOr
        return ctor(_subst(phi.left, rho, exists, positive), _subst(phi.right, rho, exists, positive))
    if isinstance(phi, POr):
        ctor = LOr if positive else LAnd
        return ctor(_subst(phi.left, rho, exists, positive), _subst(phi.right, rho, exists, positive))
    if isinstance(phi, PUntil):
        ctor = LUntil if positive else LRelease
        return ctor(_subst(phi.left, rho, exists, positive), _subst(phi.right, rho, exists, positive))
    if isinstance(phi, PAlways):
        if positive:
            return LRelease(FALSE, _subst(phi.child, rho, exists, True))
        return LUntil(TRUE, _subst(phi.child, rho, exists, False))
    if isinstance(phi, PEventually):
        if positive:
            return LUntil(TRUE, _subst(phi.child, rho, exists, True))
        return LRelease(FALSE, _subst(phi.child, rho, exists, False))
    raise AssertionError(phi)


def _outer_neg_expressible(phi: PNode, positive: bool) -> bool:
    # The negated block needs "some holder violates phi" as a letter
    # formula.  Existence distributes over disjunction only, so the
    # pushed-in negation may contain literals and ors, nothing else.
    if isinstance(phi, PAtom):
        return True
    if isinstance(phi, PNot):
        return _outer_neg_expressible(phi.child, not positive)
    if isinstance(phi, PAnd):
        # building NNF(not phi): an and under negative polarity becomes or
        if positive:
            return False
        return _outer_neg_expressible(phi.left, False) and _outer_neg_expressible(phi.right, False)
    if isinstance(phi, POr):
        if not positive:
            return False
        return _outer_neg_expressible(phi.left, True) and _outer_neg_expressible(phi.right, True)
    return False


def rewrite(ast: FormulaAst) -> LNode:
    """Lower a task to plain LTL over annotated literals.

    Each block becomes a disjunction over its candidate binding sets;
    positive blocks quantify every holder universally, outer-negated
    blocks ask for a violating holder existentially.  Constraint headers
    are not part of the lowered formula — they gate the assignment and
    are enforced by the checker and the allocator.
    """

    def cov(pi0: Action, rho: Binding) -> LNode:
        # "somebody holds rho": the holder either has pi0 or lacks it.
        return LOr(
            LLit(AnnotatedLiteral(pi0, rho, True, True)),
            LLit(AnnotatedLiteral(pi0, rho, True, False)),
        )

    def go(node: TaskNode) -> LNode:
        if isinstance(node, Block):
            family = sorted(zeta(node.psi, ast.bindings), key=lambda k: (len(k), sorted(k)))
            if not node.negated:
                return l_or(
                    [l_and([_subst(node.phi, rho, False, True) for rho in sorted(k)]) for k in family]
                )
            if not _outer_neg_expressible(node.phi, False):
                raise UnsupportedTaskError(
                    "outer negation of a block whose action formula contains a disjunction "
                    "or a temporal operator has no exact letter-level form"
                )
            pi0 = min(action_props(node.phi))
            disjuncts: list[LNode] = []
            for k in family:
                for witness in sorted(k):
                    core = _subst(node.phi, witness, True, False)
                    others = [cov(pi0, rho) for rho in sorted(k) if rho != witness]
                    disjuncts.append(l_and([core, *others]))
            return l_or(disjuncts)
        if isinstance(node, TAnd):
            return LAnd(go(node.left), go(node.right))
        if isinstance(node, TOr):
            return LOr(go(node.left), go(node.right))
        if isinstance(node, TUntil):
            return LUntil(go(node.left), go(node.right))
        if isinstance(node, TAlways):
            return always(go(node.child))
        if isinstance(node, TEventually):
            return eventually(go(node.child))
        raise AssertionError(node)

    return go(ast.root)
