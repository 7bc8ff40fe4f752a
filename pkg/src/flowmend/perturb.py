"""Witness removal: manufacture (unsafe, edit, safe) training examples.

Each witnessing-safe flow is perturbed by deleting its guard or sanitizer,
and the removed construct is captured as an Edit that, replayed against the
unsafe program, reproduces the safe one. Captured edits are normalized for
learnability: return values are truncated to bare ``return`` and thrown
messages to ``throw new Error()``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .dataflow import AnnotatedAst, FlowTriple, VulnSpec, annotate, slice_flows
from .syntax import (
    AstDoc,
    Node,
    STATEMENT_TAGS,
    child_index,
    emit,
    fragment,
    freeze,
    insert_child,
    isomorphic,
    parse,
    parse_fragment,
    remove_child,
    replace_child,
)
from .witnessing import find_vulnerabilities


class UnsupportedGuardShape(Exception):
    pass


class UnsupportedSanitizerShape(Exception):
    pass


@dataclass(frozen=True)
class Edit:
    """Captured repair unit, expressed against the unsafe document."""

    edit_type: str  # "Insert" | "Replace"
    editloc: int
    index: int
    editprog: AstDoc
    triple: FlowTriple

    def apply(self, doc: AstDoc) -> AstDoc:
        if self.edit_type == "Replace":
            return replace_child(doc, self.editloc, self.index, self.editprog)
        return insert_child(doc, self.editloc, self.index, self.editprog)


@dataclass(frozen=True)
class PairedExample:
    unsafe: AnnotatedAst
    edit: Edit
    safe: AstDoc


def _node_path(doc: AstDoc, n: int) -> list[int]:
    path = []
    while doc.parent(n) != -1:
        path.append(child_index(doc, doc.parent(n), n))
        n = doc.parent(n)
    path.reverse()
    return path


def _resolve_path(doc: AstDoc, path: list[int]) -> int:
    n = doc.root
    for i in path:
        n = doc.children(n)[i]
    return n


def _normalize(frag: AstDoc) -> AstDoc:
    """Strip customized return values and thrown messages from a captured edit."""

    def rewrite(node: Node) -> Node:
        if node.tag == "ReturnStmt":
            return Node("ReturnStmt")
        if (node.tag == "Expr" and node.children
                and node.children[0].tag == "UnaryExpr"
                and node.children[0].children[0].text == "throw"):
            error_callee = Node("UnaryExpr", children=[
                Node("Label", "new"), Node("VarExpr", "Error")])
            thrown = Node("UnaryExpr", children=[
                Node("Label", "throw"), Node("CallExpr", children=[error_callee])])
            return Node("Expr", children=[thrown])
        node.children = [rewrite(c) for c in node.children]
        return node

    return freeze(rewrite(frag.to_node()))


def _guard_context(doc: AstDoc, witness: int) -> tuple[str, int]:
    """Classify the witness position: ('if', node) or ('and', operand-node)."""
    node = witness
    while True:
        p = doc.parent(node)
        if p == -1:
            raise UnsupportedGuardShape("witness has no guarding context")
        ptag = doc.nodetype(p)
        kids = doc.children(p)
        if ptag == "UnaryExpr" and doc.value(kids[0]) == "!":
            node = p
            continue
        if ptag == "BinaryExpr" and doc.value(kids[1]) == "&&":
            return "and", node
        if ptag == "IfStmt" and node == kids[0]:
            return "if", node
        raise UnsupportedGuardShape(
            f"witness parent {ptag} is neither IfStmt nor && BinaryExpr")


def _is_early_exit(doc: AstDoc, block: int) -> bool:
    kids = doc.children(block)
    if doc.nodetype(block) != "BlockStmt" or not kids:
        return False
    for s in kids:
        if doc.nodetype(s) == "ReturnStmt":
            continue
        if doc.nodetype(s) == "Expr":
            inner = doc.children(s)[0]
            if (doc.nodetype(inner) == "UnaryExpr"
                    and doc.value(doc.children(inner)[0]) == "throw"):
                continue
        return False
    return True


def remove_guard(safe: FlowTriple) -> PairedExample:
    """Delete a guard witness, per the IfStmt / && / early-return shapes."""
    doc = safe.doc.doc
    if safe.witness is None or "guard" not in doc.annotations(safe.witness):
        raise UnsupportedGuardShape("triple's witness is not a guard")
    shape, cond_node = _guard_context(doc, safe.witness)

    if shape == "and":
        binexpr = doc.parent(cond_node)
        kids = doc.children(binexpr)
        witindex = 0 if cond_node == kids[0] else 2
        nonwit = kids[2 - witindex]
        grandpa = doc.parent(binexpr)
        paridx = child_index(doc, grandpa, binexpr)
        unsafe_doc = replace_child(doc, grandpa, paridx, fragment(doc, nonwit))
        editprog = _normalize(fragment(doc, binexpr))
        return _finish(safe, unsafe_doc, "Replace", _node_path(doc, grandpa),
                       paridx, editprog)

    ifstmt = doc.parent(cond_node)
    then = doc.children(ifstmt)[1]
    if _is_early_exit(doc, then):
        block = doc.parent(ifstmt)
        idx = child_index(doc, block, ifstmt)
        unsafe_doc = remove_child(doc, block, idx)
        editprog = _normalize(fragment(doc, ifstmt))
        return _finish(safe, unsafe_doc, "Insert", _node_path(doc, block),
                       idx, editprog)

    then_kids = doc.children(then)
    if len(then_kids) != 1:
        raise UnsupportedGuardShape(
            "guarded branch does not hold exactly one statement")
    grandpa = doc.parent(ifstmt)
    paridx = child_index(doc, grandpa, ifstmt)
    unsafe_doc = replace_child(doc, grandpa, paridx, fragment(doc, then_kids[0]))
    editprog = _normalize(fragment(doc, ifstmt))
    return _finish(safe, unsafe_doc, "Replace", _node_path(doc, grandpa),
                   paridx, editprog)


def remove_sanitizer(safe: FlowTriple) -> PairedExample:
    """Delete a sanitizer witness: self-assignment statement or inline call."""
    doc = safe.doc.doc
    if safe.witness is None or "sanitizer" not in doc.annotations(safe.witness):
        raise UnsupportedSanitizerShape("triple's witness is not a sanitizer")
    call = safe.witness
    args = doc.children(call)[1:]
    parent = doc.parent(call)
    if parent == -1:
        raise UnsupportedSanitizerShape("sanitizer call has no parent")

    if (doc.nodetype(parent) == "AssignExpr"
            and doc.children(parent)[1] == call
            and doc.nodetype(doc.children(parent)[0]) == "VarExpr"
            and len(args) == 1
            and doc.nodetype(args[0]) == "VarExpr"
            and doc.value(args[0]) == doc.value(doc.children(parent)[0])):
        stmt = doc.parent(parent)
        block = doc.parent(stmt)
        idx = child_index(doc, block, stmt)
        unsafe_doc = remove_child(doc, block, idx)
        editprog = fragment(doc, stmt)
        return _finish(safe, unsafe_doc, "Insert", _node_path(doc, block),
                       idx, editprog)

    if not args:
        raise UnsupportedSanitizerShape("sanitizer call has no argument")
    idx = child_index(doc, parent, call)
    unsafe_doc = replace_child(doc, parent, idx, fragment(doc, args[0]))
    editprog = fragment(doc, call)
    return _finish(safe, unsafe_doc, "Replace", _node_path(doc, parent),
                   idx, editprog)


def _finish(safe: FlowTriple, unsafe_doc: AstDoc, edit_type: str,
            editloc_path: list[int], index: int, editprog: AstDoc) -> PairedExample:
    spec = safe.doc.spec
    unsafe_ann = annotate(unsafe_doc, spec)
    unsafe_triple = _matching_flow(unsafe_ann, safe)
    if unsafe_triple is None:
        raise UnsupportedGuardShape(
            "witness removal did not expose the expected vulnerable flow")
    editloc = _resolve_path(unsafe_doc, editloc_path)
    edit = Edit(edit_type, editloc, index, editprog, unsafe_triple)
    reconstructed = edit.apply(unsafe_doc)
    return PairedExample(unsafe_ann, edit, reconstructed)


def _matching_flow(unsafe_ann: AnnotatedAst, safe: FlowTriple) -> Optional[FlowTriple]:
    """The unsafe flow corresponding to the perturbed safe triple."""
    safe_doc = safe.doc.doc
    want = (safe_doc.value(safe.source), safe_doc.value(safe.sink))
    flagged = set(find_vulnerabilities(unsafe_ann).pairs)
    if not flagged:
        return None
    candidates = [t for t in slice_flows(unsafe_ann)
                  if (t.source, t.sink) in flagged]
    doc = unsafe_ann.doc
    for t in candidates:
        if (doc.value(t.source), doc.value(t.sink)) == want:
            return t
    return candidates[0] if candidates else None


def make_pairs(corpus: list[AnnotatedAst]) -> tuple[list[PairedExample], list[str]]:
    """Perturb every witnessed flow in the corpus; skipped shapes are logged."""
    pairs: list[PairedExample] = []
    skips: list[str] = []
    for i, aast in enumerate(corpus):
        for triple in slice_flows(aast):
            if triple.witness is None:
                continue
            tags = aast.doc.annotations(triple.witness)
            where = (f"doc {i} flow ({triple.source}->{triple.sink}) "
                     f"witness {triple.witness}")
            try:
                if "guard" in tags:
                    pair = remove_guard(triple)
                elif "sanitizer" in tags:
                    pair = remove_sanitizer(triple)
                else:
                    skips.append(f"{where}: witness carries no guard/sanitizer tag")
                    continue
            except (UnsupportedGuardShape, UnsupportedSanitizerShape) as exc:
                skips.append(f"{where}: {exc}")
                continue
            if not _round_trips(pair):
                skips.append(f"{where}: edit does not round-trip")
                continue
            pairs.append(pair)
    return pairs, skips


def _round_trips(pair: PairedExample) -> bool:
    replayed = pair.edit.apply(pair.unsafe.doc)
    if not isomorphic(replayed, pair.safe):
        return False
    safe_ann = annotate(pair.safe, pair.unsafe.spec)
    doc = pair.unsafe.doc
    want = (doc.value(pair.edit.triple.source), doc.value(pair.edit.triple.sink))
    sd = safe_ann.doc
    still_flagged = [
        (s, k) for s, k in find_vulnerabilities(safe_ann).pairs
        if (sd.value(s), sd.value(k)) == want
    ]
    return not still_flagged


# ---------------------------------------------------------------------------
# Paired-dataset directory layout
# ---------------------------------------------------------------------------

def save_pair(root: Path, spec_name: str, pair_id: str, pair: PairedExample) -> Path:
    """Write unsafe.js / safe.js / edit.meta under pairs/<spec>/<id>/."""
    d = Path(root) / spec_name / pair_id
    d.mkdir(parents=True, exist_ok=True)
    unsafe_doc = pair.unsafe.doc
    (d / "unsafe.js").write_text(emit(unsafe_doc), encoding="utf-8")
    (d / "safe.js").write_text(emit(pair.safe), encoding="utf-8")
    editprog = pair.edit.editprog
    kind = "stmt" if editprog.nodetype(0) in STATEMENT_TAGS else "expr"
    triple = pair.edit.triple
    meta = {
        "spec": pair.unsafe.spec.name,
        "edit_type": pair.edit.edit_type,
        "editloc_path": _node_path(unsafe_doc, pair.edit.editloc),
        "index": pair.edit.index,
        "editprog": emit(editprog),
        "editprog_kind": kind,
        "source_value": unsafe_doc.value(triple.source),
        "sink_value": unsafe_doc.value(triple.sink),
        "source_span": _format_span(unsafe_doc.span(triple.source)),
        "sink_span": _format_span(unsafe_doc.span(triple.sink)),
    }
    (d / "edit.meta").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return d


def _format_span(span) -> str:
    if span is None:
        return "?"
    return f"{span[0]}:{span[1]}-{span[2]}:{span[3]}"


def load_pair(pair_dir: Path, spec: VulnSpec) -> PairedExample:
    """Rebuild a PairedExample from the pairs/ directory layout."""
    d = Path(pair_dir)
    meta = json.loads((d / "edit.meta").read_text(encoding="utf-8"))
    unsafe_doc = parse((d / "unsafe.js").read_text(encoding="utf-8"))
    safe_doc = parse((d / "safe.js").read_text(encoding="utf-8"))
    unsafe_ann = annotate(unsafe_doc, spec)
    triple = None
    for t in slice_flows(unsafe_ann):
        doc = unsafe_ann.doc
        if (doc.value(t.source) == meta["source_value"]
                and doc.value(t.sink) == meta["sink_value"]):
            triple = t
            break
    if triple is None:
        raise ValueError(f"{d}: stored flow not found on re-analysis")
    editprog = parse_fragment(meta["editprog"], meta["editprog_kind"])
    editloc = _resolve_path(unsafe_doc, meta["editloc_path"])
    edit = Edit(meta["edit_type"], editloc, meta["index"], editprog, triple)
    return PairedExample(unsafe_ann, edit, safe_doc)
