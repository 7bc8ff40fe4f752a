"""Repair-strategy DSL: representation, interpreter, cost, and persistence.

A strategy names an edit type (Insert/Replace), a location traversal rooted
at the flow's source node, an index expression for the child slot, and an
edit tree mixing constant nodes with reference traversals resolved against
the input program. The concrete syntax is specified in
``docs/strategy-grammar.md``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

from .dataflow import FlowTriple
from .syntax import (
    AstDoc,
    Node,
    NODE_TAGS,
    EDGE_KINDS,
    SYN_PARENT,
    SYN_CHILD,
    SEM_PARENT,
    SEM_CHILD,
    VALUE_LEAF_TAGS,
    IndexOutOfRange,
    freeze,
    insert_child,
    replace_child,
)


class TraversalStuck(Exception):
    pass


class NotAnAncestor(Exception):
    pass


class StrategyParseError(Exception):
    def __init__(self, message: str, pos: int):
        super().__init__(f"at offset {pos}: {message}")
        self.pos = pos


class StrategyInapplicable(Exception):
    pass


@dataclass(frozen=True)
class Constant:
    z: int


@dataclass(frozen=True)
class OffsetIndex:
    anchor: "LocExpr"
    z: int


IndexExprT = Union[Constant, OffsetIndex]


@dataclass(frozen=True)
class TypeIs:
    tag: str


@dataclass(frozen=True)
class NeighbourTypeIs:
    step: "EdgeStep"
    tag: str


ClauseT = Union[TypeIs, NeighbourTypeIs]


@dataclass(frozen=True)
class EdgeStep:
    kind: str
    index: IndexExprT


@dataclass(frozen=True)
class KleeneStep:
    kind: str
    clauses: tuple[ClauseT, ...]


StepT = Union[EdgeStep, KleeneStep]


@dataclass(frozen=True)
class LocExpr:
    """Traversal chain; base None anchors at the triple's source node."""

    base: Union["LocExpr", None]
    steps: tuple[StepT, ...] = ()


SOURCE = LocExpr(None, ())


@dataclass(frozen=True)
class ConstantNode:
    tag: str
    value: str
    children: tuple["EAstT", ...] = ()


@dataclass(frozen=True)
class ReferenceNode:
    loc: LocExpr


EAstT = Union[ConstantNode, ReferenceNode]


@dataclass(frozen=True)
class Strategy:
    edit_type: str  # "Insert" | "Replace"
    loc: LocExpr
    index: IndexExprT
    out: EAstT


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------

def _neighbours(doc: AstDoc, n: int, kind: str) -> list[int]:
    if kind == SYN_CHILD:
        return list(doc.children(n))
    if kind == SYN_PARENT:
        p = doc.parent(n)
        return [] if p == -1 else [p]
    if kind == SEM_CHILD:
        return list(doc.sem_children(n))
    if kind == SEM_PARENT:
        return list(doc.sem_parents(n))
    raise TraversalStuck(f"unknown edge kind {kind!r}")


def _clause_holds(doc: AstDoc, n: int, clause: ClauseT) -> bool:
    if isinstance(clause, TypeIs):
        return doc.nodetype(n) == clause.tag
    neighbours = _neighbours(doc, n, clause.step.kind)
    if not neighbours:
        return False
    if not isinstance(clause.step.index, Constant):
        return False
    i = max(clause.step.index.z, 0)
    if i >= len(neighbours):
        return False
    return doc.nodetype(neighbours[i]) == clause.tag


def eval_loc(loc: LocExpr, triple: FlowTriple) -> int:
    """Resolve a location traversal to a node of the triple's document."""
    doc = triple.doc.doc
    node = triple.source if loc.base is None else eval_loc(loc.base, triple)
    for step in loc.steps:
        node = _apply_step(doc, node, step, triple)
    return node


def _apply_step(doc: AstDoc, n: int, step: StepT, triple: FlowTriple) -> int:
    if isinstance(step, EdgeStep):
        neighbours = _neighbours(doc, n, step.kind)
        if not neighbours:
            raise TraversalStuck(f"no {step.kind} edge at node {n}")
        i = eval_index(step.index, n, triple)
        if step.kind in (SYN_PARENT, SEM_PARENT) and i < 0:
            i = 0
        if i < 0 or i >= len(neighbours):
            raise IndexOutOfRange(
                f"{step.kind} index {i} out of range at node {n}")
        return neighbours[i]
    # Breadth-first Kleene traversal; the start node itself is a candidate.
    # Ties break by ascending edge index, then node id.
    seen = {n}
    queue = [n]
    while queue:
        cur = queue.pop(0)
        if all(_clause_holds(doc, cur, c) for c in step.clauses):
            return cur
        nbrs = _neighbours(doc, cur, step.kind)
        for nxt in sorted(range(len(nbrs)), key=lambda i: (i, nbrs[i])):
            node = nbrs[nxt]
            if node not in seen:
                seen.add(node)
                queue.append(node)
    raise TraversalStuck(
        f"no node satisfying {step.clauses} reachable over {step.kind} from {n}")


def eval_index(ix: IndexExprT, at: int, triple: FlowTriple) -> int:
    """Resolve an index expression at a node."""
    if isinstance(ix, Constant):
        return ix.z
    doc = triple.doc.doc
    anchor = eval_loc(ix.anchor, triple)
    for i, c in enumerate(doc.children(at)):
        if doc.contains(c, anchor):
            return i + ix.z
    raise NotAnAncestor(f"node {at} has no child containing node {anchor}")


def materialize(out: EAstT, triple: FlowTriple) -> AstDoc:
    """Instantiate an edit tree against the triple's document."""
    return freeze(_materialize_node(out, triple))


def _materialize_node(out: EAstT, triple: FlowTriple) -> Node:
    if isinstance(out, ReferenceNode):
        return triple.doc.doc.to_node(eval_loc(out.loc, triple))
    children = [_materialize_node(c, triple) for c in out.children]
    text = out.value if not children else ""
    return Node(out.tag, text, children)


def apply_strategy(s: Strategy, triple: FlowTriple) -> AstDoc:
    """Run a strategy against a flow; result is returned un-validated."""
    doc = triple.doc.doc
    try:
        loc = eval_loc(s.loc, triple)
        index = eval_index(s.index, loc, triple)
        frag = materialize(s.out, triple)
        if s.edit_type == "Replace":
            return replace_child(doc, loc, index, frag)
        return insert_child(doc, loc, index, frag)
    except Exception as exc:
        raise StrategyInapplicable(str(exc)) from exc


# ---------------------------------------------------------------------------
# Cost
# ---------------------------------------------------------------------------

def _loc_cost(loc: LocExpr) -> int:
    total = 0 if loc.base is None else _loc_cost(loc.base)
    for step in loc.steps:
        if isinstance(step, KleeneStep):
            total += 1
        else:
            total += 2 + _index_cost(step.index)
    return total


def _index_cost(ix: IndexExprT) -> int:
    if isinstance(ix, Constant):
        return abs(ix.z)
    return abs(ix.z) + _loc_cost(ix.anchor)


def _out_cost(out: EAstT) -> int:
    if isinstance(out, ReferenceNode):
        return _loc_cost(out.loc)
    return 1 + sum(_out_cost(c) for c in out.children)


def cost(s: Strategy) -> int:
    """Deterministic preference score; lower is better.

    One point per Kleene step, two per edge step, the magnitude of every
    constant, and one per constant node in the edit tree.
    """
    return _loc_cost(s.loc) + _index_cost(s.index) + _out_cost(s.out)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _ser_loc(loc: LocExpr) -> str:
    base = "Source" if loc.base is None else _ser_loc(loc.base)
    if not loc.steps:
        return base
    steps = ", ".join(_ser_step(s) for s in loc.steps)
    return f"ApplyTraversal({base}, {steps})"


def _ser_step(step: StepT) -> str:
    if isinstance(step, EdgeStep):
        return f"GetEdge({step.kind}, {_ser_index(step.index)})"
    clauses = " and ".join(_ser_clause(c) for c in step.clauses)
    return f"GetKleeneStar({step.kind}, {clauses})"


def _ser_clause(c: ClauseT) -> str:
    if isinstance(c, TypeIs):
        return f"GetClause({c.tag})"
    return f"GetNeighbourClause({_ser_step(c.step)}, {c.tag})"


def _ser_index(ix: IndexExprT) -> str:
    if isinstance(ix, Constant):
        return f"GetConstant({ix.z})"
    return f"GetOffsetIndex({_ser_loc(ix.anchor)}, {ix.z})"


def _ser_out(out: EAstT) -> str:
    if isinstance(out, ReferenceNode):
        return f"ReferenceAST({_ser_loc(out.loc)})"
    parts = [out.tag, json.dumps(out.value)]
    parts.extend(_ser_out(c) for c in out.children)
    return f"ConstantAST({', '.join(parts)})"


def serialize(s: Strategy) -> str:
    """Canonical single-line term for a strategy."""
    return f"{s.edit_type}({_ser_loc(s.loc)}, {_ser_index(s.index)}, {_ser_out(s.out)})"


class _TermParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str) -> StrategyParseError:
        return StrategyParseError(msg, self.pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t\n":
            self.pos += 1

    def eat(self, lit: str) -> None:
        self.skip_ws()
        if not self.text.startswith(lit, self.pos):
            raise self.error(f"expected {lit!r}")
        self.pos += len(lit)

    def peek_name(self) -> str:
        self.skip_ws()
        j = self.pos
        while j < len(self.text) and (self.text[j].isalnum() or self.text[j] == "_"):
            j += 1
        return self.text[self.pos:j]

    def name(self) -> str:
        word = self.peek_name()
        if not word:
            raise self.error("expected a name")
        self.pos += len(word)
        return word

    def integer(self) -> int:
        self.skip_ws()
        j = self.pos
        if j < len(self.text) and self.text[j] == "-":
            j += 1
        start = j
        while j < len(self.text) and self.text[j].isdigit():
            j += 1
        if j == start:
            raise self.error("expected an integer")
        value = int(self.text[self.pos:j])
        self.pos = j
        return value

    def string(self) -> str:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != '"':
            raise self.error("expected a JSON string")
        decoder = json.JSONDecoder()
        try:
            value, end = decoder.raw_decode(self.text, self.pos)
        except json.JSONDecodeError as exc:
            raise self.error(f"bad string literal: {exc.msg}")
        self.pos = end
        return value

    def at(self, lit: str) -> bool:
        self.skip_ws()
        return self.text.startswith(lit, self.pos)

    # -- grammar ---------------------------------------------------------

    def strategy(self) -> Strategy:
        head = self.name()
        if head not in ("Insert", "Replace"):
            raise self.error(f"unknown strategy head {head!r}")
        self.eat("(")
        loc = self.loc()
        self.eat(",")
        index = self.index()
        self.eat(",")
        out = self.out()
        self.eat(")")
        self.skip_ws()
        if self.pos != len(self.text):
            raise self.error("trailing input after strategy term")
        return Strategy(head, loc, index, out)

    def loc(self) -> LocExpr:
        head = self.name()
        if head == "Source":
            return SOURCE
        if head != "ApplyTraversal":
            raise self.error(f"expected a location, found {head!r}")
        self.eat("(")
        base = self.loc()
        steps = []
        while self.at(","):
            self.eat(",")
            steps.append(self.step())
        self.eat(")")
        if not steps:
            raise self.error("ApplyTraversal needs at least one traversal")
        if base is SOURCE or (base.base is None and not base.steps):
            return LocExpr(None, tuple(steps))
        return LocExpr(base, tuple(steps))

    def step(self) -> StepT:
        head = self.name()
        if head == "GetEdge":
            self.eat("(")
            kind = self.edge_kind()
            self.eat(",")
            index = self.index()
            self.eat(")")
            return EdgeStep(kind, index)
        if head == "GetKleeneStar":
            self.eat("(")
            kind = self.edge_kind()
            self.eat(",")
            clauses = [self.clause()]
            while self.peek_name() == "and":
                self.name()
                clauses.append(self.clause())
            self.eat(")")
            return KleeneStep(kind, tuple(clauses))
        raise self.error(f"expected a traversal, found {head!r}")

    def clause(self) -> ClauseT:
        head = self.name()
        if head == "GetClause":
            self.eat("(")
            tag = self.node_tag()
            self.eat(")")
            return TypeIs(tag)
        if head == "GetNeighbourClause":
            self.eat("(")
            step = self.step()
            if not isinstance(step, EdgeStep):
                raise self.error("neighbour probes must be single edges")
            self.eat(",")
            tag = self.node_tag()
            self.eat(")")
            return NeighbourTypeIs(step, tag)
        raise self.error(f"expected a clause, found {head!r}")

    def index(self) -> IndexExprT:
        head = self.name()
        if head == "GetConstant":
            self.eat("(")
            z = self.integer()
            self.eat(")")
            return Constant(z)
        if head == "GetOffsetIndex":
            self.eat("(")
            anchor = self.loc()
            self.eat(",")
            z = self.integer()
            self.eat(")")
            return OffsetIndex(anchor, z)
        raise self.error(f"expected an index, found {head!r}")

    def out(self) -> EAstT:
        head = self.name()
        if head == "ReferenceAST":
            self.eat("(")
            loc = self.loc()
            self.eat(")")
            return ReferenceNode(loc)
        if head != "ConstantAST":
            raise self.error(f"expected an edit tree, found {head!r}")
        self.eat("(")
        tag = self.node_tag()
        self.eat(",")
        value = self.string()
        children = []
        while self.at(","):
            self.eat(",")
            children.append(self.out())
        self.eat(")")
        return ConstantNode(tag, value, tuple(children))

    def edge_kind(self) -> str:
        kind = self.name()
        if kind not in EDGE_KINDS:
            raise self.error(f"unknown edge kind {kind!r}")
        return kind

    def node_tag(self) -> str:
        tag = self.name()
        if tag not in NODE_TAGS:
            raise self.error(f"unknown node type {tag!r}")
        return tag


def deserialize(text: str) -> Strategy:
    """Parse a canonical strategy term."""
    return _TermParser(text.strip()).strategy()


# ---------------------------------------------------------------------------
# Strategy store files
# ---------------------------------------------------------------------------

STORE_HEADER = "# flowmend-strategies v1"


def dump_store(spec_name: str, strategies: list[Strategy]) -> str:
    lines = [STORE_HEADER]
    for s in strategies:
        lines.append(f"spec={spec_name} cost={cost(s)}")
        lines.append(serialize(s))
    return "\n".join(lines) + "\n"


def load_store(text: str) -> list[tuple[str, Strategy]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != STORE_HEADER:
        raise StrategyParseError("missing store header", 0)
    out: list[tuple[str, Strategy]] = []
    i = 1
    while i < len(lines):
        header = lines[i]
        if not header.startswith("spec="):
            raise StrategyParseError(f"bad record header {header!r}", 0)
        spec_name = header.split()[0][len("spec="):]
        if i + 1 >= len(lines):
            raise StrategyParseError("record missing its strategy term", 0)
        out.append((spec_name, deserialize(lines[i + 1])))
        i += 2
    return out
