"""Front end for the supported JavaScript subset.

Parses source text into an immutable annotated-tree document (``AstDoc``),
pretty-prints documents back to canonical source, and provides the tree-edit
primitives (replace/insert child) that the rest of the pipeline builds on.
The accepted grammar is documented in ``docs/grammar.md``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

SYN_PARENT = "SynParent"
SYN_CHILD = "SynChild"
SEM_PARENT = "SemParent"
SEM_CHILD = "SemChild"

EDGE_KINDS = (SYN_PARENT, SYN_CHILD, SEM_PARENT, SEM_CHILD)
CHILD_KINDS = (SYN_CHILD, SEM_CHILD)

ANNOTATION_TAGS = ("source", "sink", "sanitizer", "guard", "witness")

NODE_TAGS = frozenset({
    "BlockStmt", "IfStmt", "Expr", "CallExpr", "IndexExpr", "DotExpr",
    "VarExpr", "VarDecl", "DeclExpr", "Declarator", "AssignExpr",
    "BinaryExpr", "BinaryOp", "UnaryExpr", "ReturnStmt", "FuncExpr",
    "Param", "Label", "Literal", "Program", "ObjectLit", "PropInit",
})

# (min arity, max arity or None for unbounded)
ARITY = {
    "Program": (0, None),
    "BlockStmt": (0, None),
    "IfStmt": (2, 3),
    "Expr": (1, 1),
    "CallExpr": (1, None),
    "IndexExpr": (2, 2),
    "DotExpr": (2, 2),
    "VarExpr": (0, 0),
    "VarDecl": (0, 0),
    "DeclExpr": (1, 1),
    "Declarator": (1, 2),
    "AssignExpr": (2, 2),
    "BinaryExpr": (3, 3),
    "BinaryOp": (0, 0),
    "UnaryExpr": (2, 2),
    "ReturnStmt": (0, 1),
    "FuncExpr": (1, None),
    "Param": (0, 0),
    "Label": (0, 0),
    "Literal": (0, 0),
    "ObjectLit": (0, None),
    "PropInit": (2, 2),
}

STATEMENT_TAGS = frozenset({"Expr", "DeclExpr", "IfStmt", "ReturnStmt", "BlockStmt"})
STATEMENT_LIST_TAGS = frozenset({"Program", "BlockStmt"})
VALUE_LEAF_TAGS = frozenset({"VarExpr", "VarDecl", "Param", "Label", "Literal", "BinaryOp"})


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class MalformedTree(Exception):
    pass


class NotAChild(Exception):
    pass


class IndexOutOfRange(Exception):
    pass


class NotAStatementList(Exception):
    pass


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str
    index: int


@dataclass
class Node:
    """Mutable build-time tree node; frozen into an AstDoc afterwards."""

    tag: str
    text: str = ""
    children: list["Node"] = field(default_factory=list)
    span: Optional[tuple[int, int, int, int]] = None

    def clone(self) -> "Node":
        return Node(self.tag, self.text, [c.clone() for c in self.children], self.span)


class AstDoc:
    """Immutable annotated syntax tree.

    Nodes are dense preorder ids ``0..n-1`` (so id order is textual order).
    Syntactic structure is stored as per-node child tuples; semantic edges and
    annotations are added by the dataflow pass. ``edges`` materializes the
    four-kind edge view (SynParent/SynChild/SemParent/SemChild).
    """

    __slots__ = ("_types", "_values", "_children", "_parent", "_sem_children",
                 "_sem_parents", "_annotations", "_spans", "root")

    def __init__(self, types, values, children, sem_children=None,
                 annotations=None, spans=None):
        n = len(types)
        self._types: tuple[str, ...] = tuple(types)
        self._values: tuple[str, ...] = tuple(values)
        self._children: tuple[tuple[int, ...], ...] = tuple(tuple(c) for c in children)
        parent = [-1] * n
        for p, kids in enumerate(self._children):
            for c in kids:
                parent[c] = p
        self._parent: tuple[int, ...] = tuple(parent)
        sem = sem_children or {}
        self._sem_children: dict[int, tuple[int, ...]] = {
            k: tuple(v) for k, v in sem.items() if v
        }
        sem_par: dict[int, list[int]] = {}
        for src, dsts in self._sem_children.items():
            for d in dsts:
                sem_par.setdefault(d, []).append(src)
        self._sem_parents: dict[int, tuple[int, ...]] = {
            k: tuple(sorted(v)) for k, v in sem_par.items()
        }
        self._annotations: dict[int, frozenset[str]] = {
            k: frozenset(v) for k, v in (annotations or {}).items() if v
        }
        self._spans: tuple[Optional[tuple[int, int, int, int]], ...] = (
            tuple(spans) if spans is not None else tuple([None] * n)
        )
        self.root = 0
        self._validate()

    def _validate(self) -> None:
        for n, tag in enumerate(self._types):
            if tag not in NODE_TAGS:
                raise MalformedTree(f"unknown node type {tag!r} at node {n}")
            lo, hi = ARITY[tag]
            k = len(self._children[n])
            if k < lo or (hi is not None and k > hi):
                raise MalformedTree(
                    f"{tag} node {n} has {k} children, expected "
                    f"{lo}..{'*' if hi is None else hi}")

    # -- five-tuple accessors -------------------------------------------------

    @property
    def nodes(self) -> range:
        return range(len(self._types))

    def value(self, n: int) -> str:
        return self._values[n]

    def nodetype(self, n: int) -> str:
        return self._types[n]

    @property
    def edges(self) -> Iterator[Edge]:
        for p in self.nodes:
            for i, c in enumerate(self._children[p]):
                yield Edge(p, c, SYN_CHILD, i)
                yield Edge(c, p, SYN_PARENT, -1)
        for src in sorted(self._sem_children):
            for i, dst in enumerate(self._sem_children[src]):
                yield Edge(src, dst, SEM_CHILD, i)
                yield Edge(dst, src, SEM_PARENT, -1)

    def annotations(self, n: int) -> frozenset[str]:
        return self._annotations.get(n, frozenset())

    def annotated(self, tag: str) -> list[int]:
        return sorted(n for n, tags in self._annotations.items() if tag in tags)

    # -- structure ------------------------------------------------------------

    def children(self, n: int) -> tuple[int, ...]:
        return self._children[n]

    def parent(self, n: int) -> int:
        """Syntactic parent id, or -1 for the root."""
        return self._parent[n]

    def arity(self, n: int) -> int:
        return len(self._children[n])

    def sem_children(self, n: int) -> tuple[int, ...]:
        return self._sem_children.get(n, ())

    def sem_parents(self, n: int) -> tuple[int, ...]:
        return self._sem_parents.get(n, ())

    def sem_edge_count(self) -> int:
        return sum(len(v) for v in self._sem_children.values())

    def span(self, n: int) -> Optional[tuple[int, int, int, int]]:
        return self._spans[n]

    def subtree(self, n: int) -> list[int]:
        out = [n]
        i = 0
        while i < len(out):
            out.extend(self._children[out[i]])
            i += 1
        return out

    def contains(self, ancestor: int, n: int) -> bool:
        while n != -1:
            if n == ancestor:
                return True
            n = self._parent[n]
        return False

    def depth(self, n: int) -> int:
        d = 0
        while self._parent[n] != -1:
            n = self._parent[n]
            d += 1
        return d

    # -- conversions ----------------------------------------------------------

    def to_node(self, n: int = 0) -> Node:
        return Node(self._types[n], self._values[n] if not self._children[n] else "",
                    [self.to_node(c) for c in self._children[n]], self._spans[n])

    def with_semantics(self, sem_children: dict[int, tuple[int, ...]],
                       annotations: dict[int, frozenset[str]]) -> "AstDoc":
        return AstDoc(self._types, self._values, self._children,
                      sem_children, annotations, self._spans)


def child_index(doc: AstDoc, parent: int, child: int) -> int:
    """Index of the SynChild edge parent->child."""
    try:
        return doc.children(parent).index(child)
    except ValueError:
        raise NotAChild(f"node {child} is not a child of node {parent}") from None


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = frozenset({
    "var", "let", "const", "function", "if", "else", "return", "typeof",
    "new", "in", "throw", "true", "false", "null",
})

PUNCT = [
    "===", "!==", "=>", "==", "!=", "<=", ">=", "&&", "||",
    "(", ")", "{", "}", "[", "]", ",", ";", ":", ".",
    "+", "-", "*", "/", "<", ">", "=", "!",
]


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "keyword" | "number" | "string" | "punct" | "eof"
    text: str
    line: int
    col: int


def _lex(source: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end < 0:
                raise ParseError("unterminated block comment", line, col)
            segment = source[i:end + 2]
            newlines = segment.count("\n")
            if newlines:
                line += newlines
                col = len(segment) - segment.rfind("\n")
            else:
                col += len(segment)
            i = end + 2
            continue
        if ch.isalpha() or ch == "_" or ch == "$":
            j = i
            while j < n and (source[j].isalnum() or source[j] in "_$"):
                j += 1
            text = source[i:j]
            toks.append(Token("keyword" if text in KEYWORDS else "ident", text, line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            toks.append(Token("number", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in "'\"":
            j = i + 1
            while j < n and source[j] != ch:
                if source[j] == "\\":
                    j += 1
                if source[j] == "\n":
                    raise ParseError("unterminated string", line, col)
                j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col)
            toks.append(Token("string", source[i:j + 1], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        for p in PUNCT:
            if source.startswith(p, i):
                toks.append(Token("punct", p, line, col))
                col += len(p)
                i += len(p)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    def peek(self, off: int = 0) -> Token:
        return self.toks[min(self.pos + off, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("punct", "keyword") and t.text == text

    def eat(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            raise ParseError(f"expected {text!r}, found {t.text or '<eof>'!r}", t.line, t.col)
        self.pos += 1
        return t

    def error(self, msg: str) -> ParseError:
        t = self.peek()
        return ParseError(msg, t.line, t.col)

    # -- statements -----------------------------------------------------------

    def parse_program(self) -> Node:
        stmts = []
        first = self.peek()
        while self.peek().kind != "eof":
            stmts.append(self.parse_statement())
        node = Node("Program", children=stmts)
        node.span = (first.line, first.col, self.peek().line, self.peek().col)
        return node

    def parse_statement(self) -> Node:
        t = self.peek()
        if self.at("{"):
            return self.parse_block()
        if self.at("if"):
            return self.parse_if()
        if self.at("return"):
            self.eat("return")
            if self.at(";"):
                end = self.eat(";")
                return self._spanned(Node("ReturnStmt"), t, end)
            expr = self.parse_expression()
            end = self.eat(";")
            return self._spanned(Node("ReturnStmt", children=[expr]), t, end)
        if self.at("throw"):
            self.eat("throw")
            expr = self.parse_expression()
            end = self.eat(";")
            op = Node("Label", "throw")
            inner = Node("UnaryExpr", children=[op, expr])
            return self._spanned(Node("Expr", children=[inner]), t, end)
        if self.at("var") or self.at("let") or self.at("const"):
            self.pos += 1
            name = self.expect_ident()
            decl = Node("VarDecl", name.text,
                        span=(name.line, name.col, name.line, name.col + len(name.text)))
            if self.at("="):
                self.eat("=")
                init = self.parse_assignment()
                declarator = Node("Declarator", children=[decl, init])
            else:
                declarator = Node("Declarator", children=[decl])
            end = self.eat(";")
            return self._spanned(Node("DeclExpr", children=[declarator]), t, end)
        expr = self.parse_expression()
        end = self.eat(";")
        return self._spanned(Node("Expr", children=[expr]), t, end)

    def parse_block(self) -> Node:
        first = self.eat("{")
        stmts = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise self.error("unterminated block")
            stmts.append(self.parse_statement())
        end = self.eat("}")
        return self._spanned(Node("BlockStmt", children=stmts), first, end)

    def parse_if(self) -> Node:
        first = self.eat("if")
        self.eat("(")
        cond = self.parse_expression()
        self.eat(")")
        then = self.parse_statement()
        kids = [cond, self._as_block(then)]
        if self.at("else"):
            self.eat("else")
            kids.append(self._as_block(self.parse_statement()))
        node = Node("IfStmt", children=kids)
        last = self.toks[self.pos - 1]
        return self._spanned(node, first, last)

    def _as_block(self, stmt: Node) -> Node:
        if stmt.tag == "BlockStmt":
            return stmt
        return Node("BlockStmt", children=[stmt], span=stmt.span)

    # -- expressions ----------------------------------------------------------

    def parse_expression(self) -> Node:
        return self.parse_assignment()

    def parse_assignment(self) -> Node:
        lhs = self.parse_binary(0)
        if self.at("="):
            if lhs.tag not in ("VarExpr", "DotExpr", "IndexExpr"):
                raise self.error("invalid assignment target")
            self.eat("=")
            rhs = self.parse_assignment()
            return Node("AssignExpr", children=[lhs, rhs],
                        span=_merge_spans(lhs.span, rhs.span))
        return lhs

    BINARY_LEVELS = [["||"], ["&&"], ["===", "!==", "==", "!="],
                     ["<", ">", "<=", ">=", "in"], ["+", "-"], ["*", "/"]]

    def parse_binary(self, level: int) -> Node:
        if level >= len(self.BINARY_LEVELS):
            return self.parse_unary()
        node = self.parse_binary(level + 1)
        while any(self.at(op) for op in self.BINARY_LEVELS[level]):
            op_tok = self.peek()
            self.pos += 1
            rhs = self.parse_binary(level + 1)
            op = Node("BinaryOp", op_tok.text,
                      span=(op_tok.line, op_tok.col, op_tok.line, op_tok.col + len(op_tok.text)))
            node = Node("BinaryExpr", children=[node, op, rhs],
                        span=_merge_spans(node.span, rhs.span))
        return node

    def parse_unary(self) -> Node:
        t = self.peek()
        if self.at("!") or self.at("typeof") or self.at("-"):
            self.pos += 1
            operand = self.parse_unary()
            op = Node("Label", t.text, span=(t.line, t.col, t.line, t.col + len(t.text)))
            return Node("UnaryExpr", children=[op, operand],
                        span=_merge_spans(op.span, operand.span))
        if self.at("new"):
            self.eat("new")
            callee = self.parse_postfix(self.parse_primary(), calls=False)
            op = Node("Label", "new", span=(t.line, t.col, t.line, t.col + 3))
            target = Node("UnaryExpr", children=[op, callee],
                          span=_merge_spans(op.span, callee.span))
            self.eat("(")
            args = self.parse_args()
            end = self.eat(")")
            node = Node("CallExpr", children=[target] + args)
            return self._spanned(node, t, end)
        return self.parse_postfix(self.parse_primary())

    def parse_postfix(self, node: Node, calls: bool = True) -> Node:
        while True:
            if self.at("."):
                self.eat(".")
                name = self.expect_ident(allow_keyword=True)
                label = Node("Label", name.text,
                             span=(name.line, name.col, name.line, name.col + len(name.text)))
                node = Node("DotExpr", children=[node, label],
                            span=_merge_spans(node.span, label.span))
            elif self.at("["):
                self.eat("[")
                index = self.parse_expression()
                end = self.eat("]")
                node = Node("IndexExpr", children=[node, index],
                            span=_merge_spans(node.span, (end.line, end.col, end.line, end.col + 1)))
            elif calls and self.at("("):
                self.eat("(")
                args = self.parse_args()
                end = self.eat(")")
                node = Node("CallExpr", children=[node] + args,
                            span=_merge_spans(node.span, (end.line, end.col, end.line, end.col + 1)))
            else:
                return node

    def parse_args(self) -> list[Node]:
        args = []
        if not self.at(")"):
            args.append(self.parse_assignment())
            while self.at(","):
                self.eat(",")
                args.append(self.parse_assignment())
        return args

    def parse_primary(self) -> Node:
        t = self.peek()
        if t.kind == "ident":
            self.pos += 1
            return Node("VarExpr", t.text, span=(t.line, t.col, t.line, t.col + len(t.text)))
        if t.kind in ("number", "string"):
            self.pos += 1
            return Node("Literal", t.text, span=(t.line, t.col, t.line, t.col + len(t.text)))
        if t.kind == "keyword" and t.text in ("true", "false", "null"):
            self.pos += 1
            return Node("Literal", t.text, span=(t.line, t.col, t.line, t.col + len(t.text)))
        if self.at("function"):
            return self.parse_function()
        if self.at("("):
            arrow = self.try_parse_arrow()
            if arrow is not None:
                return arrow
            self.eat("(")
            node = self.parse_expression()
            self.eat(")")
            return node
        if self.at("{"):
            return self.parse_object_literal()
        raise self.error(f"unexpected token {t.text or '<eof>'!r}")

    def parse_function(self) -> Node:
        first = self.eat("function")
        kids: list[Node] = []
        if self.peek().kind == "ident":
            name = self.expect_ident()
            kids.append(Node("Label", name.text,
                             span=(name.line, name.col, name.line, name.col + len(name.text))))
        self.eat("(")
        kids.extend(self.parse_params())
        self.eat(")")
        body = self.parse_block()
        kids.append(body)
        node = Node("FuncExpr", children=kids)
        return self._spanned(node, first, self.toks[self.pos - 1])

    def try_parse_arrow(self) -> Optional[Node]:
        # Lookahead to the matching ')', arrow iff '=>' follows.
        depth = 0
        j = self.pos
        while j < len(self.toks):
            text = self.toks[j].text
            if self.toks[j].kind == "punct":
                if text == "(":
                    depth += 1
                elif text == ")":
                    depth -= 1
                    if depth == 0:
                        break
            j += 1
        if j + 1 >= len(self.toks) or self.toks[j + 1].text != "=>":
            return None
        first = self.eat("(")
        params = self.parse_params()
        self.eat(")")
        self.eat("=>")
        if self.at("{"):
            body = self.parse_block()
        else:
            expr = self.parse_assignment()
            body = Node("BlockStmt", children=[Node("ReturnStmt", children=[expr])],
                        span=expr.span)
        node = Node("FuncExpr", children=params + [body])
        return self._spanned(node, first, self.toks[self.pos - 1])

    def parse_params(self) -> list[Node]:
        params = []
        if self.peek().kind == "ident":
            params.append(self._param(self.expect_ident()))
            while self.at(","):
                self.eat(",")
                params.append(self._param(self.expect_ident()))
        return params

    @staticmethod
    def _param(tok: Token) -> Node:
        return Node("Param", tok.text, span=(tok.line, tok.col, tok.line, tok.col + len(tok.text)))

    def parse_object_literal(self) -> Node:
        first = self.eat("{")
        props = []
        while not self.at("}"):
            key_tok = self.peek()
            if key_tok.kind == "ident" or key_tok.kind == "keyword":
                self.pos += 1
                key = Node("Label", key_tok.text,
                           span=(key_tok.line, key_tok.col, key_tok.line,
                                 key_tok.col + len(key_tok.text)))
            elif key_tok.kind == "string":
                self.pos += 1
                key = Node("Literal", key_tok.text,
                           span=(key_tok.line, key_tok.col, key_tok.line,
                                 key_tok.col + len(key_tok.text)))
            else:
                raise self.error("expected property name")
            self.eat(":")
            value = self.parse_assignment()
            props.append(Node("PropInit", children=[key, value],
                              span=_merge_spans(key.span, value.span)))
            if self.at(","):
                self.eat(",")
            elif not self.at("}"):
                raise self.error("expected ',' or '}' in object literal")
        end = self.eat("}")
        return self._spanned(Node("ObjectLit", children=props), first, end)

    def expect_ident(self, allow_keyword: bool = False) -> Token:
        t = self.peek()
        if t.kind == "ident" or (allow_keyword and t.kind == "keyword"):
            self.pos += 1
            return t
        raise self.error(f"expected identifier, found {t.text or '<eof>'!r}")

    @staticmethod
    def _spanned(node: Node, first: Token, last: Token) -> Node:
        node.span = (first.line, first.col, last.line, last.col + len(last.text))
        return node


def _merge_spans(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return (a[0], a[1], b[2], b[3])


# ---------------------------------------------------------------------------
# Canonical printer
# ---------------------------------------------------------------------------

_PRECEDENCE = {"||": 2, "&&": 3, "===": 4, "!==": 4, "==": 4, "!=": 4,
               "<": 5, ">": 5, "<=": 5, ">=": 5, "in": 5, "+": 6, "-": 6,
               "*": 7, "/": 7}


def _expr_prec(node: Node) -> int:
    if node.tag == "AssignExpr":
        return 1
    if node.tag == "BinaryExpr":
        return _PRECEDENCE[node.children[1].text]
    if node.tag == "UnaryExpr":
        return 8
    return 9


def _render_expr(node: Node, compact: bool, indent: int = 0) -> str:
    tag = node.tag
    if tag in ("VarExpr", "VarDecl", "Param", "Label", "Literal", "BinaryOp"):
        return node.text
    if tag == "DotExpr":
        base = _wrap(node.children[0], 9, compact, indent)
        return f"{base}.{node.children[1].text}"
    if tag == "IndexExpr":
        base = _wrap(node.children[0], 9, compact, indent)
        return f"{base}[{_render_expr(node.children[1], compact, indent)}]"
    if tag == "CallExpr":
        target = node.children[0]
        args = ", ".join(_render_expr(a, compact, indent) for a in node.children[1:])
        if target.tag == "UnaryExpr" and target.children[0].text == "new":
            return f"{_render_expr(target, compact, indent)}({args})"
        return f"{_wrap(target, 9, compact, indent)}({args})"
    if tag == "UnaryExpr":
        op = node.children[0].text
        operand = _wrap(node.children[1], 8, compact, indent)
        joiner = " " if op.isalpha() else ""
        return f"{op}{joiner}{operand}"
    if tag == "BinaryExpr":
        op = node.children[1].text
        prec = _PRECEDENCE[op]
        left = _wrap(node.children[0], prec, compact, indent)
        right = _wrap(node.children[2], prec + 1, compact, indent)
        return f"{left} {op} {right}"
    if tag == "AssignExpr":
        lhs = _render_expr(node.children[0], compact, indent)
        rhs = _render_expr(node.children[1], compact, indent)
        return f"{lhs} = {rhs}"
    if tag == "ObjectLit":
        if not node.children:
            return "{}"
        props = ", ".join(
            f"{p.children[0].text}: {_render_expr(p.children[1], compact, indent)}"
            for p in node.children)
        return "{ " + props + " }"
    if tag == "FuncExpr":
        return _render_func(node, compact, indent)
    if tag == "Declarator":
        head = node.children[0].text
        if len(node.children) == 2:
            return f"{head} = {_render_expr(node.children[1], compact, indent)}"
        return head
    raise MalformedTree(f"cannot render {tag} as an expression")


def _wrap(node: Node, min_prec: int, compact: bool, indent: int) -> str:
    text = _render_expr(node, compact, indent)
    if _expr_prec(node) < min_prec or node.tag == "FuncExpr" and min_prec >= 9:
        return f"({text})"
    return text


def _render_func(node: Node, compact: bool, indent: int) -> str:
    kids = list(node.children)
    name = ""
    if kids and kids[0].tag == "Label":
        name = " " + kids[0].text
        kids = kids[1:]
    params = ", ".join(p.text for p in kids[:-1])
    body = kids[-1]
    if compact:
        return f"function{name} ({params}) {_render_block_compact(body)}"
    inner = _render_stmts(body.children, indent + 1)
    pad = "    " * indent
    head = f"function{name} ({params}) {{"
    if not inner:
        return head + "}"
    return head + "\n" + inner + "\n" + pad + "}"


def _render_block_compact(block: Node) -> str:
    if not block.children:
        return "{}"
    stmts = " ".join(_render_stmt_compact(s) for s in block.children)
    return "{ " + stmts + " }"


def _render_stmt_compact(node: Node) -> str:
    tag = node.tag
    if tag == "Expr":
        inner = node.children[0]
        if inner.tag == "UnaryExpr" and inner.children[0].text == "throw":
            return f"throw {_render_expr(inner.children[1], True)};"
        return _render_expr(inner, True) + ";"
    if tag == "DeclExpr":
        return f"let {_render_expr(node.children[0], True)};"
    if tag == "ReturnStmt":
        if node.children:
            return f"return {_render_expr(node.children[0], True)};"
        return "return;"
    if tag == "IfStmt":
        out = (f"if ({_render_expr(node.children[0], True)}) "
               f"{_render_block_compact(_as_block_node(node.children[1]))}")
        if len(node.children) == 3:
            out += f" else {_render_block_compact(_as_block_node(node.children[2]))}"
        return out
    if tag == "BlockStmt":
        return _render_block_compact(node)
    raise MalformedTree(f"cannot render {tag} as a statement")


def _render_stmt(node: Node, indent: int) -> str:
    pad = "    " * indent
    tag = node.tag
    if tag == "Expr":
        inner = node.children[0]
        if inner.tag == "UnaryExpr" and inner.children[0].text == "throw":
            return f"{pad}throw {_render_expr(inner.children[1], False, indent)};"
        return pad + _render_expr(inner, False, indent) + ";"
    if tag == "DeclExpr":
        return f"{pad}let {_render_expr(node.children[0], False, indent)};"
    if tag == "ReturnStmt":
        if node.children:
            return f"{pad}return {_render_expr(node.children[0], False, indent)};"
        return pad + "return;"
    if tag == "IfStmt":
        cond = _render_expr(node.children[0], False, indent)
        then = _as_block_node(node.children[1])
        out = f"{pad}if ({cond}) {{\n"
        out += _render_stmts(then.children, indent + 1)
        out += ("\n" if then.children else "") + pad + "}"
        if len(node.children) == 3:
            alt = _as_block_node(node.children[2])
            out += " else {\n"
            out += _render_stmts(alt.children, indent + 1)
            out += ("\n" if alt.children else "") + pad + "}"
        return out
    if tag == "BlockStmt":
        out = pad + "{\n" + _render_stmts(node.children, indent + 1)
        return out + ("\n" if node.children else "") + pad + "}"
    raise MalformedTree(f"cannot render {tag} as a statement")


def _render_stmts(stmts: list[Node], indent: int) -> str:
    return "\n".join(_render_stmt(s, indent) for s in stmts)


def _as_block_node(node: Node) -> Node:
    if node.tag == "BlockStmt":
        return node
    return Node("BlockStmt", children=[node], span=node.span)


def _node_value(node: Node) -> str:
    if node.tag == "Program":
        return " ".join(_render_stmt_compact(s) for s in node.children)
    if node.tag in STATEMENT_TAGS:
        return _render_stmt_compact(node)
    if node.tag == "PropInit":
        return f"{node.children[0].text}: {_render_expr(node.children[1], True)}"
    return _render_expr(node, True)


def emit_node(node: Node) -> str:
    """Canonical pretty print of a build-time tree."""
    if node.tag == "Program":
        body = _render_stmts(node.children, 0)
        return body + ("\n" if body else "")
    if node.tag in STATEMENT_TAGS:
        return _render_stmt(node, 0)
    return _node_value(node)


# ---------------------------------------------------------------------------
# Freezing and public operations
# ---------------------------------------------------------------------------

def freeze(tree: Node) -> AstDoc:
    """Assign dense preorder ids and recompute node values."""
    types: list[str] = []
    values: list[str] = []
    children: list[list[int]] = []
    spans: list[Optional[tuple[int, int, int, int]]] = []

    def visit(node: Node) -> int:
        my_id = len(types)
        types.append(node.tag)
        values.append(_node_value(node))
        children.append([])
        spans.append(node.span)
        for child in node.children:
            children[my_id].append(visit(child))
        return my_id

    visit(tree)
    return AstDoc(types, values, children, spans=spans)


def parse(source: str) -> AstDoc:
    """Parse subset source into a Program-rooted document."""
    return freeze(_Parser(_lex(source)).parse_program())


def parse_fragment(source: str, kind: str = "stmt") -> AstDoc:
    """Parse a single statement ('stmt') or bare expression ('expr') fragment."""
    parser = _Parser(_lex(source))
    if kind == "expr":
        node = parser.parse_expression()
    else:
        node = parser.parse_statement()
    tok = parser.peek()
    if tok.kind != "eof":
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return freeze(node)


def emit(doc: AstDoc) -> str:
    """Deterministic canonical source for a document or fragment."""
    return emit_node(doc.to_node())


def fragment(doc: AstDoc, n: int) -> AstDoc:
    """Syntactic subtree rooted at n as a standalone document."""
    return freeze(doc.to_node(n))


def replace_child(doc: AstDoc, parent: int, index: int, subtree: AstDoc) -> AstDoc:
    """New document with the child at (parent, index) replaced by subtree."""
    if index < 0 or index >= doc.arity(parent):
        raise IndexOutOfRange(f"index {index} out of range for node {parent}")
    return _edit(doc, parent, index, subtree, replace=True)


def insert_child(doc: AstDoc, parent: int, index: int, subtree: AstDoc) -> AstDoc:
    """New document with subtree inserted at (parent, index); siblings shift right."""
    if doc.nodetype(parent) not in STATEMENT_LIST_TAGS:
        raise NotAStatementList(
            f"node {parent} ({doc.nodetype(parent)}) is not a statement list")
    if index < 0 or index > doc.arity(parent):
        raise IndexOutOfRange(f"index {index} out of range for node {parent}")
    return _edit(doc, parent, index, subtree, replace=False)


def remove_child(doc: AstDoc, parent: int, index: int) -> AstDoc:
    """New document with the child at (parent, index) removed."""
    if index < 0 or index >= doc.arity(parent):
        raise IndexOutOfRange(f"index {index} out of range for node {parent}")
    return _edit(doc, parent, index, None, replace=True)


def _edit(doc: AstDoc, parent: int, index: int, subtree: Optional[AstDoc],
          replace: bool) -> AstDoc:
    root = doc.to_node()
    # Recover the mutable node for `parent` by path from root.
    path = []
    n = parent
    while doc.parent(n) != -1:
        path.append(child_index(doc, doc.parent(n), n))
        n = doc.parent(n)
    target = root
    for idx in reversed(path):
        target = target.children[idx]
    new_child = subtree.to_node() if subtree is not None else None
    if replace:
        if new_child is None:
            del target.children[index]
        else:
            target.children[index] = new_child
    else:
        target.children.insert(index, new_child)
    return freeze(root)


def isomorphic(a: AstDoc, b: AstDoc) -> bool:
    """Tree isomorphism: same types, values, and child order."""

    def eq(x: int, y: int) -> bool:
        if a.nodetype(x) != b.nodetype(y) or a.arity(x) != b.arity(y):
            return False
        if not a.children(x) and a.value(x) != b.value(y):
            return False
        return all(eq(cx, cy) for cx, cy in zip(a.children(x), b.children(y)))

    return eq(a.root, b.root)
