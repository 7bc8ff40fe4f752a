"""Taint annotation for parsed documents.

Given a vulnerability spec (sources, sinks, sanitizers, guards), adds
semantic dataflow edges and node annotations to a document, then slices the
annotated graph into per-flow triples. Spec files use the line format
described in ``docs/flowspec.md``.

Propagation is flow-insensitive across statements but def-use ordered: a
variable use binds to the latest definition textually before it.  Member
reads off a tainted variable are fused (the edge lands on the member
expression, not the intermediate base reference), as is a bare variable
passed to an in-file-resolvable callee (the edge lands on the parameter).
Calls to well-known value-preserving builtins (``JSON.parse`` et al.) are
transparent.  These conventions reproduce the reference flow chains the
fixtures are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .syntax import (
    AstDoc,
    SEM_CHILD,
)

# Builtins whose result carries their argument's taint unchanged.
PROPAGATOR_NAMES = frozenset({"JSON.parse", "JSON.stringify", "String"})


class SpecError(Exception):
    pass


@dataclass(frozen=True)
class SourcePattern:
    kind: str  # "handler-param" | "call-result" | "named-param"
    name: str
    index: int = 0


@dataclass(frozen=True)
class SinkPattern:
    kind: str  # "dynamic-call" | "call-arg"
    name: str = ""
    index: int = 0


@dataclass(frozen=True)
class GuardPattern:
    kind: str  # "method-call" | "typeof-check" | "in-operator"
    name: str = ""


@dataclass(frozen=True)
class VulnSpec:
    name: str
    sources: tuple[SourcePattern, ...]
    sinks: tuple[SinkPattern, ...]
    sanitizers: tuple[str, ...] = ()
    guards: tuple[GuardPattern, ...] = ()


@dataclass(frozen=True)
class AnnotatedAst:
    doc: AstDoc
    spec: VulnSpec


@dataclass(frozen=True)
class FlowTriple:
    """One (source, witness?, sink) flow; doc holds only this flow's edges."""

    source: int
    sink: int
    witness: Optional[int]
    doc: AnnotatedAst


# ---------------------------------------------------------------------------
# Spec files
# ---------------------------------------------------------------------------

def parse_spec_text(text: str, origin: str = "<spec>") -> list[VulnSpec]:
    specs: list[VulnSpec] = []
    blocks = [b for b in text.split("\n---") if b.strip()]
    if not blocks:
        raise SpecError(f"{origin}: empty spec file")
    for block in blocks:
        name = ""
        sources: list[SourcePattern] = []
        sinks: list[SinkPattern] = []
        sanitizers: list[str] = []
        guards: list[GuardPattern] = []
        for raw in block.splitlines():
            line = raw.strip()
            if not line or line.startswith("#") or line == "---":
                continue
            if ":" not in line:
                raise SpecError(f"{origin}: malformed line {line!r}")
            key, _, rest = line.partition(":")
            key = key.strip()
            args = rest.split()
            if key == "name":
                name = rest.strip()
            elif key == "source":
                sources.append(_parse_source(args, origin, len(sources)))
            elif key == "sink":
                sinks.append(_parse_sink(args, origin, len(sinks)))
            elif key == "sanitizer":
                if len(args) != 1:
                    raise SpecError(f"{origin}: sanitizers[{len(sanitizers)}]: expected one name")
                sanitizers.append(args[0])
            elif key == "guard":
                guards.append(_parse_guard(args, origin, len(guards)))
            else:
                raise SpecError(f"{origin}: unknown field {key!r}")
        if not name:
            raise SpecError(f"{origin}: missing spec name")
        if not sources or not sinks:
            raise SpecError(f"{origin}: spec {name!r} needs at least one source and one sink")
        specs.append(VulnSpec(name, tuple(sources), tuple(sinks),
                              tuple(sanitizers), tuple(guards)))
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise SpecError(f"{origin}: duplicate spec names")
    return specs


def _parse_source(args: list[str], origin: str, idx: int) -> SourcePattern:
    where = f"{origin}: sources[{idx}]"
    if not args:
        raise SpecError(f"{where}: empty pattern")
    kind = args[0]
    if kind == "handler-param":
        if len(args) != 3 or not args[2].isdigit():
            raise SpecError(f"{where}: expected 'handler-param <registrar> <param-index>'")
        return SourcePattern("handler-param", args[1], int(args[2]))
    if kind == "named-param":
        if len(args) != 2:
            raise SpecError(f"{where}: expected 'named-param <name>'")
        return SourcePattern("named-param", args[1])
    if kind == "call-result":
        if len(args) != 2:
            raise SpecError(f"{where}: expected 'call-result <callee>'")
        return SourcePattern("call-result", args[1])
    raise SpecError(f"{where}: unknown source kind {kind!r}")


def _parse_sink(args: list[str], origin: str, idx: int) -> SinkPattern:
    where = f"{origin}: sinks[{idx}]"
    if not args:
        raise SpecError(f"{where}: empty pattern")
    kind = args[0]
    if kind == "dynamic-call":
        if len(args) != 1:
            raise SpecError(f"{where}: 'dynamic-call' takes no arguments")
        return SinkPattern("dynamic-call")
    if kind == "call-arg":
        if len(args) != 3 or not args[2].isdigit():
            raise SpecError(f"{where}: expected 'call-arg <callee> <arg-index>'")
        return SinkPattern("call-arg", args[1], int(args[2]))
    raise SpecError(f"{where}: unknown sink kind {kind!r}")


def _parse_guard(args: list[str], origin: str, idx: int) -> GuardPattern:
    where = f"{origin}: guards[{idx}]"
    if not args:
        raise SpecError(f"{where}: empty pattern")
    kind = args[0]
    if kind == "method-call":
        if len(args) != 2:
            raise SpecError(f"{where}: expected 'method-call <method>'")
        return GuardPattern("method-call", args[1])
    if kind == "typeof-check":
        if len(args) != 2:
            raise SpecError(f"{where}: expected 'typeof-check <type>'")
        return GuardPattern("typeof-check", args[1])
    if kind == "in-operator":
        if len(args) != 1:
            raise SpecError(f"{where}: 'in-operator' takes no arguments")
        return GuardPattern("in-operator")
    raise SpecError(f"{where}: unknown guard kind {kind!r}")


def load_spec(path: str | Path) -> list[VulnSpec]:
    """Load and validate the vulnerability specs in a .flowspec file."""
    p = Path(path)
    return parse_spec_text(p.read_text(encoding="utf-8"), origin=str(p))


def bundled_spec(name: str) -> VulnSpec:
    """Load one of the specs shipped with the package (udc, xss)."""
    here = Path(__file__).parent / "specs" / f"{name}.flowspec"
    return load_spec(here)[0]


# ---------------------------------------------------------------------------
# Scope and binding analysis
# ---------------------------------------------------------------------------

class _Bindings:
    """Lexical name binding with textual def-use ordering."""

    def __init__(self, doc: AstDoc):
        self.doc = doc
        self.scope_of: dict[int, int] = {}
        self.scopes: list[int] = [doc.root]
        self._compute_scopes()
        # (scope, name) -> sorted list of (effective_position, def_node)
        self.defs: dict[tuple[int, str], list[tuple[int, int]]] = {}
        # def_node -> ordered list of use VarExpr nodes
        self.uses_of_def: dict[int, list[int]] = {}
        self._collect()

    def _compute_scopes(self) -> None:
        doc = self.doc

        def walk(n: int, scope: int) -> None:
            self.scope_of[n] = scope
            inner = scope
            if doc.nodetype(n) == "FuncExpr":
                self.scopes.append(n)
                inner = n
            for c in doc.children(n):
                walk(c, inner)

        walk(doc.root, doc.root)
        # A FuncExpr node itself belongs to the enclosing scope; its subtree
        # (params, body) to the new one, which walk already arranged.

    def _subtree_max(self, n: int) -> int:
        return max(self.doc.subtree(n))

    def _collect(self) -> None:
        doc = self.doc
        declares: dict[tuple[int, str], bool] = {}
        raw_defs: list[tuple[int, str, int, int]] = []  # (scope, name, pos, node)

        for n in doc.nodes:
            tag = doc.nodetype(n)
            if tag == "Param":
                raw_defs.append((doc.parent(n), doc.value(n), n, n))
                declares[(doc.parent(n), doc.value(n))] = True
            elif tag == "VarDecl":
                declarator = doc.parent(n)
                scope = self.scope_of[n]
                raw_defs.append((scope, doc.value(n), self._subtree_max(declarator), n))
                declares[(scope, doc.value(n))] = True

        for n in doc.nodes:
            if doc.nodetype(n) != "AssignExpr":
                continue
            lhs = doc.children(n)[0]
            if doc.nodetype(lhs) != "VarExpr":
                continue
            name = doc.value(lhs)
            scope = self._declaring_scope(self.scope_of[n], name, declares)
            raw_defs.append((scope, name, self._subtree_max(n), lhs))

        for scope, name, pos, node in raw_defs:
            self.defs.setdefault((scope, name), []).append((pos, node))
        for key in self.defs:
            self.defs[key].sort()

        for n in sorted(doc.nodes):
            if doc.nodetype(n) != "VarExpr" or self._is_def_position(n):
                continue
            name = doc.value(n)
            scope = self._declaring_scope(self.scope_of[n], name, declares)
            entries = self.defs.get((scope, name))
            if not entries:
                continue
            bound = None
            for pos, dnode in entries:
                if pos < n:
                    bound = dnode
                else:
                    break
            if bound is not None:
                self.uses_of_def.setdefault(bound, []).append(n)

    def _declaring_scope(self, scope: int, name: str, declares) -> int:
        s = scope
        while True:
            if declares.get((s, name)):
                return s
            if s == self.doc.root:
                return scope
            # A FuncExpr node itself belongs to its enclosing scope.
            s = self.scope_of[s]

    def _is_def_position(self, n: int) -> bool:
        p = self.doc.parent(n)
        return (p != -1 and self.doc.nodetype(p) == "AssignExpr"
                and self.doc.children(p)[0] == n)

    def uses(self, def_node: int) -> list[int]:
        return self.uses_of_def.get(def_node, [])


# ---------------------------------------------------------------------------
# Callee resolution
# ---------------------------------------------------------------------------

def _callee_text(doc: AstDoc, callee: int) -> str:
    return doc.value(callee)


def _callee_matches(doc: AstDoc, callee: int, name: str) -> bool:
    if doc.value(callee) == name:
        return True
    if doc.nodetype(callee) == "DotExpr":
        label = doc.children(callee)[1]
        return doc.value(label) == name
    return False


def _function_table(doc: AstDoc) -> dict[str, int]:
    """Map textual callee keys to in-file FuncExpr nodes.

    Covers ``name = function``, ``var name = function``, and literal-key
    writes ``obj["key"] = function`` / ``obj.key = function``.
    """
    table: dict[str, int] = {}
    for n in doc.nodes:
        tag = doc.nodetype(n)
        if tag == "Declarator" and doc.arity(n) == 2:
            name_node, init = doc.children(n)
            if doc.nodetype(init) == "FuncExpr":
                table[doc.value(name_node)] = init
        elif tag == "AssignExpr":
            lhs, rhs = doc.children(n)
            if doc.nodetype(rhs) != "FuncExpr":
                continue
            table[doc.value(lhs)] = rhs
        elif tag == "FuncExpr":
            kids = doc.children(n)
            if kids and doc.nodetype(kids[0]) == "Label":
                table[doc.value(kids[0])] = n
    return table


def _func_params(doc: AstDoc, func: int) -> list[int]:
    return [c for c in doc.children(func) if doc.nodetype(c) == "Param"]


# ---------------------------------------------------------------------------
# Annotation
# ---------------------------------------------------------------------------

class _Annotator:
    def __init__(self, doc: AstDoc, spec: VulnSpec):
        self.doc = doc
        self.spec = spec
        self.bind = _Bindings(doc)
        self.functions = _function_table(doc)
        self.edges: dict[int, set[int]] = {}
        self.taint: set[int] = set()
        self.dynamic: set[int] = set()
        self.tags: dict[int, set[str]] = {}

    def run(self) -> AnnotatedAst:
        sources = self._match_sources()
        for s in sources:
            self._tag(s, "source")
        self._propagate(sources)
        self._apply_guards()
        self._match_sinks()
        sem_children = {src: tuple(sorted(dsts)) for src, dsts in self.edges.items()}
        annotations = {n: frozenset(v) for n, v in self.tags.items()}
        return AnnotatedAst(self.doc.with_semantics(sem_children, annotations), self.spec)

    def _tag(self, n: int, tag: str) -> None:
        self.tags.setdefault(n, set()).add(tag)

    def _edge(self, src: int, dst: int) -> None:
        if src != dst:
            self.edges.setdefault(src, set()).add(dst)

    # -- sources --------------------------------------------------------------

    def _match_sources(self) -> list[int]:
        doc = self.doc
        out: set[int] = set()
        for pat in self.spec.sources:
            if pat.kind == "named-param":
                for n in doc.nodes:
                    if doc.nodetype(n) == "Param" and doc.value(n) == pat.name:
                        out.add(n)
            elif pat.kind == "call-result":
                for n in doc.nodes:
                    if doc.nodetype(n) == "CallExpr" and _callee_matches(
                            doc, doc.children(n)[0], pat.name):
                        out.add(n)
            elif pat.kind == "handler-param":
                for n in doc.nodes:
                    if doc.nodetype(n) != "CallExpr":
                        continue
                    if _callee_text(doc, doc.children(n)[0]) != pat.name:
                        continue
                    funcs = [a for a in doc.children(n)[1:]
                             if doc.nodetype(a) == "FuncExpr"]
                    if not funcs:
                        continue
                    params = _func_params(doc, funcs[-1])
                    if pat.index < len(params):
                        out.add(params[pat.index])
        return sorted(out)

    # -- propagation ----------------------------------------------------------

    def _propagate(self, seeds: list[int]) -> None:
        work = list(seeds)
        while work:
            n = work.pop(0)
            if n in self.taint:
                continue
            self.taint.add(n)
            targets = self._step(n)
            for t in sorted(set(targets)):
                if t not in self.taint:
                    work.append(t)

    def _step(self, n: int) -> list[int]:
        doc = self.doc
        tag = doc.nodetype(n)
        if tag in ("Param", "VarDecl") or self._is_assign_lhs(n):
            return self._chain_uses(n)
        return self._climb(n, n)

    def _is_assign_lhs(self, n: int) -> bool:
        p = self.doc.parent(n)
        return (self.doc.nodetype(n) == "VarExpr" and p != -1
                and self.doc.nodetype(p) == "AssignExpr"
                and self.doc.children(p)[0] == n)

    def _chain_uses(self, def_node: int) -> list[int]:
        """Sequentially chain a definition through its uses in textual order."""
        doc = self.doc
        out: list[int] = []
        prev = def_node
        for use in self.bind.uses(def_node):
            target, local = self._fuse_use(use)
            if target is None:
                continue
            self._edge(prev, target)
            out.append(target)
            if local:
                prev = target
        return out

    def _fuse_use(self, use: int) -> tuple[Optional[int], bool]:
        """Fused taint carrier for a variable use; local=False for cross-function."""
        doc = self.doc
        p = doc.parent(use)
        ptag = doc.nodetype(p) if p != -1 else ""
        kids = doc.children(p) if p != -1 else ()
        if ptag in ("DotExpr", "IndexExpr") and kids[0] == use:
            return p, True
        if ptag == "IndexExpr" and kids[1] == use:
            self.dynamic.add(p)
            return p, True
        if ptag == "CallExpr" and use in kids[1:]:
            func = self._resolve_call(p)
            if func is not None:
                params = _func_params(doc, func)
                j = list(kids[1:]).index(use)
                if j < len(params):
                    return params[j], False
                return None, True
        return use, True

    def _resolve_call(self, call: int) -> Optional[int]:
        return self.functions.get(_callee_text(self.doc, self.doc.children(call)[0]))

    def _climb(self, x: int, pos: int) -> list[int]:
        """Emit flow targets for tainted expression x occupying pos's slot."""
        doc = self.doc
        p = doc.parent(pos)
        if p == -1:
            return []
        ptag = doc.nodetype(p)
        kids = doc.children(p)
        out: list[int] = []
        if ptag in ("DotExpr", "IndexExpr") and kids[0] == pos:
            self._edge(x, p)
            out.append(p)
        elif ptag == "IndexExpr" and kids[1] == pos:
            self._edge(x, p)
            self.dynamic.add(p)
            out.append(p)
        elif ptag == "CallExpr" and pos in kids[1:]:
            out.extend(self._call_arg_flow(x, p))
        elif ptag == "BinaryExpr":
            op = doc.value(kids[1])
            if op == "+" and pos in (kids[0], kids[2]):
                self._edge(x, p)
                out.append(p)
                # Shortcut past the concat node when it directly feeds a
                # definition, keeping reference chains one edge per carrier.
                short = self._definition_target(p)
                if short is not None:
                    self._edge(x, short)
                    out.append(short)
        elif ptag == "Declarator" and doc.arity(p) == 2 and kids[1] == pos:
            self._edge(x, kids[0])
            out.append(kids[0])
        elif ptag == "AssignExpr" and kids[1] == pos:
            lhs = kids[0]
            if doc.nodetype(lhs) == "VarExpr":
                self._edge(x, lhs)
                out.append(lhs)
        return out

    def _definition_target(self, expr: int) -> Optional[int]:
        doc = self.doc
        p = doc.parent(expr)
        if p == -1:
            return None
        ptag = doc.nodetype(p)
        kids = doc.children(p)
        if ptag == "Declarator" and doc.arity(p) == 2 and kids[1] == expr:
            return kids[0]
        if ptag == "AssignExpr" and kids[1] == expr and doc.nodetype(kids[0]) == "VarExpr":
            return kids[0]
        return None

    def _call_arg_flow(self, x: int, call: int) -> list[int]:
        doc = self.doc
        callee = doc.children(call)[0]
        kids = doc.children(call)
        func = self._resolve_call(call)
        if func is not None:
            params = _func_params(doc, func)
            args = list(kids[1:])
            j = args.index(x) if x in args else None
            if j is None:
                # x is nested inside an argument; find which one.
                for jj, a in enumerate(args):
                    if doc.contains(a, x):
                        j = jj
                        break
            if j is not None and j < len(params):
                self._edge(x, params[j])
                return [params[j]]
            return []
        for san in self.spec.sanitizers:
            if _callee_matches(doc, callee, san):
                self._edge(x, call)
                self._tag(call, "sanitizer")
                return [call]
        if _callee_text(doc, callee) in PROPAGATOR_NAMES:
            return self._climb(x, call)
        if doc.nodetype(callee) == "DotExpr" and doc.value(doc.children(callee)[1]) == "get":
            self._edge(x, call)
            self.dynamic.add(call)
            return [call]
        return []

    # -- guards ---------------------------------------------------------------

    def _apply_guards(self) -> None:
        doc = self.doc
        for g in sorted(self._match_guard_nodes()):
            regions = self._guard_regions(g)
            if not regions:
                continue
            region: set[int] = set()
            for r in regions:
                region.update(doc.subtree(r))
            self._tag(g, "guard")
            self._interpose(g, region)

    def _match_guard_nodes(self) -> list[int]:
        doc = self.doc
        out = []
        for n in doc.nodes:
            for pat in self.spec.guards:
                if self._guard_match(n, pat) and self._subtree_tainted(n):
                    out.append(n)
                    break
        return out

    def _guard_match(self, n: int, pat: GuardPattern) -> bool:
        doc = self.doc
        tag = doc.nodetype(n)
        if pat.kind == "method-call":
            if tag != "CallExpr":
                return False
            callee = doc.children(n)[0]
            return (doc.nodetype(callee) == "DotExpr"
                    and doc.value(doc.children(callee)[1]) == pat.name)
        if pat.kind == "typeof-check":
            if tag != "BinaryExpr":
                return False
            lhs, op, rhs = doc.children(n)
            if doc.value(op) not in ("===", "!==", "==", "!="):
                return False
            for a, b in ((lhs, rhs), (rhs, lhs)):
                if (doc.nodetype(a) == "UnaryExpr"
                        and doc.value(doc.children(a)[0]) == "typeof"
                        and doc.nodetype(b) == "Literal"
                        and doc.value(b)[1:-1] == pat.name):
                    return True
            return False
        if pat.kind == "in-operator":
            return (tag == "BinaryExpr"
                    and doc.value(doc.children(n)[1]) == "in")
        return False

    def _subtree_tainted(self, n: int) -> bool:
        return any(m in self.taint for m in self.doc.subtree(n))

    def _guard_regions(self, g: int) -> list[int]:
        """Subtree roots protected by guard g."""
        doc = self.doc
        regions: list[int] = []
        walk = g
        while True:
            p = doc.parent(walk)
            if p == -1:
                break
            ptag = doc.nodetype(p)
            kids = doc.children(p)
            if ptag == "BinaryExpr" and doc.value(kids[1]) == "&&":
                if walk == kids[0]:
                    regions.append(kids[2])
                walk = p
                continue
            if ptag == "UnaryExpr" and doc.value(kids[0]) == "!":
                walk = p
                continue
            if ptag == "IfStmt" and walk == kids[0]:
                then = kids[1]
                if self._is_early_exit(then):
                    regions.extend(self._following_statements(p))
                else:
                    regions.append(then)
                break
            break
        return regions

    def _is_early_exit(self, block: int) -> bool:
        doc = self.doc
        kids = doc.children(block)
        if not kids:
            return False
        for s in kids:
            tag = doc.nodetype(s)
            if tag == "ReturnStmt":
                continue
            if tag == "Expr":
                inner = doc.children(s)[0]
                if (doc.nodetype(inner) == "UnaryExpr"
                        and doc.value(doc.children(inner)[0]) == "throw"):
                    continue
            return False
        return True

    def _following_statements(self, stmt: int) -> list[int]:
        doc = self.doc
        p = doc.parent(stmt)
        if p == -1 or doc.nodetype(p) not in ("BlockStmt", "Program"):
            return []
        kids = doc.children(p)
        i = kids.index(stmt)
        return list(kids[i + 1:])

    def _interpose(self, g: int, region: set[int]) -> None:
        """Reroute every semantic edge entering the region through g."""
        rerouted_targets: set[int] = set()
        crossing_sources: set[int] = set()
        for src in sorted(self.edges):
            if src in region or src == g:
                continue
            into = {d for d in self.edges[src] if d in region}
            if not into:
                continue
            self.edges[src] -= into
            crossing_sources.add(src)
            rerouted_targets |= into
        for src in sorted(crossing_sources):
            self._edge(src, g)
        for dst in sorted(rerouted_targets):
            self._edge(g, dst)

    # -- sinks ----------------------------------------------------------------

    def _match_sinks(self) -> None:
        doc = self.doc
        dynamic_reach = self._reachable_from(self.dynamic)
        for pat in self.spec.sinks:
            if pat.kind == "dynamic-call":
                for n in doc.nodes:
                    if doc.nodetype(n) != "CallExpr":
                        continue
                    callee = doc.children(n)[0]
                    if callee in self.taint and (callee in self.dynamic
                                                 or callee in dynamic_reach):
                        self._tag(callee, "sink")
            elif pat.kind == "call-arg":
                for n in doc.nodes:
                    if doc.nodetype(n) != "CallExpr":
                        continue
                    if _callee_text(doc, doc.children(n)[0]) != pat.name:
                        continue
                    args = doc.children(n)[1:]
                    if pat.index >= len(args):
                        continue
                    arg_nodes = set(doc.subtree(args[pat.index]))
                    for t in sorted(arg_nodes):
                        if t not in self.taint:
                            continue
                        onward = self.edges.get(t, set())
                        if not (onward & arg_nodes):
                            self._tag(t, "sink")

    def _reachable_from(self, starts: set[int]) -> set[int]:
        seen: set[int] = set()
        work = sorted(starts)
        while work:
            n = work.pop(0)
            for d in sorted(self.edges.get(n, ())):
                if d not in seen:
                    seen.add(d)
                    work.append(d)
        return seen


def annotate(doc: AstDoc, spec: VulnSpec) -> AnnotatedAst:
    """Add semantic dataflow edges and source/sink/sanitizer/guard annotations."""
    if doc.sem_edge_count() != 0:
        raise ValueError("document already carries semantic edges")
    return _Annotator(doc, spec).run()


# ---------------------------------------------------------------------------
# Slicing
# ---------------------------------------------------------------------------

def _bfs_dist(adj: dict[int, tuple[int, ...]], start: int) -> dict[int, int]:
    dist = {start: 0}
    work = [start]
    while work:
        n = work.pop(0)
        for d in adj.get(n, ()):
            if d not in dist:
                dist[d] = dist[n] + 1
                work.append(d)
    return dist


def slice_flows(aast: AnnotatedAst) -> list[FlowTriple]:
    """One triple per (source, sink) pair connected by a semantic path.

    Each triple's document keeps only the semantic edges lying on a shortest
    source-to-sink path, mirroring the one-tree-per-flow convention the
    strategy interpreter expects.  The witness, when one blocks every path,
    gets the ``witness`` annotation in the sliced document.
    """
    doc = aast.doc
    fwd = {n: doc.sem_children(n) for n in doc.nodes if doc.sem_children(n)}
    rev: dict[int, list[int]] = {}
    for src, dsts in fwd.items():
        for d in dsts:
            rev.setdefault(d, []).append(src)
    rev_t = {k: tuple(sorted(v)) for k, v in rev.items()}

    triples: list[FlowTriple] = []
    for s in doc.annotated("source"):
        ds = _bfs_dist(fwd, s)
        for k in doc.annotated("sink"):
            if k not in ds or k == s:
                continue
            dt = _bfs_dist(rev_t, k)
            total = ds[k]
            kept: dict[int, list[int]] = {}
            kept_nodes: set[int] = set()
            for a, dsts in fwd.items():
                for b in dsts:
                    if a in ds and b in dt and ds[a] + 1 + dt[b] == total:
                        kept.setdefault(a, []).append(b)
                        kept_nodes.update((a, b))
            witness = _pick_witness(doc, kept, s, k)
            annotations = {n: doc.annotations(n) for n in doc.nodes if doc.annotations(n)}
            if witness is not None:
                annotations[witness] = annotations.get(witness, frozenset()) | {"witness"}
            sliced = doc.with_semantics(
                {a: tuple(sorted(b)) for a, b in kept.items()}, annotations)
            triples.append(FlowTriple(s, k, witness, AnnotatedAst(sliced, aast.spec)))
    return triples


def _pick_witness(doc: AstDoc, kept: dict[int, list[int]], s: int, k: int) -> Optional[int]:
    nodes = {s, k}
    for a, bs in kept.items():
        nodes.add(a)
        nodes.update(bs)
    candidates = sorted(n for n in nodes
                        if n not in (s, k)
                        and ({"sanitizer", "guard"} & doc.annotations(n)))
    for w in candidates:
        adj = {a: tuple(b for b in bs if b != w)
               for a, bs in kept.items() if a != w}
        if k not in _bfs_dist(adj, s):
            return w
    return None
