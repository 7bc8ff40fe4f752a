"""Strategy synthesis from paired examples.

Preprocessing records, per example, the concrete source-to-editloc
traversals (a semantic prefix followed by syntactic parent steps) and, for
every edit-program node, reference traversals from the semantic location to
same-valued nodes. Consecutive same-kind edges compress into Kleene edges.
Ranked pairwise merging then anti-unifies traversals, indices, and edit
programs into strategies; every emitted strategy must reproduce both parent
pairs' safe programs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

from .perturb import Edit, PairedExample
from .strategy import (
    Constant,
    ConstantNode,
    EAstT,
    EdgeStep,
    KleeneStep,
    LocExpr,
    NeighbourTypeIs,
    OffsetIndex,
    ReferenceNode,
    StepT,
    Strategy,
    StrategyInapplicable,
    TypeIs,
    apply_strategy,
    cost,
    serialize,
    _out_cost,
)
from .syntax import (
    AstDoc,
    SEM_CHILD,
    SEM_PARENT,
    SYN_CHILD,
    SYN_PARENT,
    VALUE_LEAF_TAGS,
    isomorphic,
)


class NoTraversalFound(Exception):
    pass


@dataclass(frozen=True)
class ConcreteEdge:
    kind: str
    index: int
    src: int
    dst: int


@dataclass(frozen=True)
class KleeneEdge:
    kind: str
    clauses: tuple
    src: int
    dst: int


EdgeT = Union[ConcreteEdge, KleeneEdge]


@dataclass(frozen=True)
class ConcreteTraversal:
    edges: tuple[EdgeT, ...]
    sem_loc: int


@dataclass
class EditMeta:
    pair: PairedExample
    traversals: list[ConcreteTraversal]      # compressed location traversals
    raw_traversals: list[ConcreteTraversal]  # uncompressed, for lifting
    # editprog node -> sem_loc -> reference traversals (uncompressed)
    refs: dict[int, dict[int, list[ConcreteTraversal]]] = field(default_factory=dict)

    @property
    def edit(self) -> Edit:
        return self.pair.edit


@dataclass(frozen=True)
class LearnConfig:
    max_depth: int = 6
    max_location_paths: int = 8
    max_ref_paths: int = 4
    max_east_candidates: int = 16
    max_pairs_per_group: int = 64
    max_path_edges: int = 64


_KIND_ORDER = {SYN_PARENT: 0, SYN_CHILD: 1, SEM_PARENT: 2, SEM_CHILD: 3}


def _neighbour_edges(doc: AstDoc, n: int) -> list[ConcreteEdge]:
    out = []
    p = doc.parent(n)
    if p != -1:
        out.append(ConcreteEdge(SYN_PARENT, -1, n, p))
    for i, c in enumerate(doc.children(n)):
        out.append(ConcreteEdge(SYN_CHILD, i, n, c))
    for i, c in enumerate(doc.sem_parents(n)):
        out.append(ConcreteEdge(SEM_PARENT, i, n, c))
    for i, c in enumerate(doc.sem_children(n)):
        out.append(ConcreteEdge(SEM_CHILD, i, n, c))
    out.sort(key=lambda e: (_KIND_ORDER[e.kind], e.index, e.dst))
    return out


def get_clauses(doc: AstDoc, n: int) -> tuple:
    clauses = [TypeIs(doc.nodetype(n))]
    p = doc.parent(n)
    if p != -1:
        clauses.append(NeighbourTypeIs(
            EdgeStep(SYN_PARENT, Constant(-1)), doc.nodetype(p)))
    return tuple(clauses)


# ---------------------------------------------------------------------------
# Traversal extraction
# ---------------------------------------------------------------------------

def get_edit_loc_traversals(ex: PairedExample,
                            config: LearnConfig = LearnConfig()) -> list[ConcreteTraversal]:
    """Shortest semantic-prefix-then-parent paths from source to editloc.

    Meeting nodes come from a forward BFS over semantic children intersected
    with the editloc's subtree (backward direction of the bidirectional
    search); the syntactic suffix is the parent chain, so the semantic
    location is always a descendant of the edit location, which offset
    indices require.
    """
    doc = ex.edit.triple.doc.doc
    source = ex.edit.triple.source
    editloc = ex.edit.editloc

    dist: dict[int, int] = {source: 0}
    pred: dict[int, tuple[int, int]] = {}
    queue = [source]
    while queue:
        n = queue.pop(0)
        for i, d in enumerate(doc.sem_children(n)):
            if d not in dist:
                dist[d] = dist[n] + 1
                pred[d] = (n, i)
                queue.append(d)

    candidates = [m for m in sorted(dist) if doc.contains(editloc, m)]
    paths: list[tuple[int, int, ConcreteTraversal]] = []
    for m in candidates:
        sem_edges: list[EdgeT] = []
        cur = m
        while cur != source:
            p, i = pred[cur]
            sem_edges.append(ConcreteEdge(SEM_CHILD, i, p, cur))
            cur = p
        sem_edges.reverse()
        syn_edges: list[EdgeT] = []
        cur = m
        while cur != editloc:
            p = doc.parent(cur)
            syn_edges.append(ConcreteEdge(SYN_PARENT, -1, cur, p))
            cur = p
        edges = tuple(sem_edges + syn_edges)
        if len(edges) > config.max_path_edges:
            continue
        paths.append((len(edges), m, ConcreteTraversal(edges, m)))
    paths.sort(key=lambda t: (t[0], t[1]))
    out = [t for _, _, t in paths[:config.max_location_paths]]
    if not out:
        raise NoTraversalFound(
            f"no semantic-then-parent path from {source} to {editloc}")
    return out


def compress(t: ConcreteTraversal, doc: AstDoc) -> ConcreteTraversal:
    """Fold maximal same-kind runs (length >= 2, never SynChild) into Kleene edges."""
    edges = list(t.edges)
    out: list[EdgeT] = []
    i = 0
    while i < len(edges):
        e = edges[i]
        if isinstance(e, KleeneEdge) or e.kind == SYN_CHILD:
            out.append(e)
            i += 1
            continue
        j = i
        while j < len(edges) and isinstance(edges[j], ConcreteEdge) \
                and edges[j].kind == e.kind:
            j += 1
        if j - i >= 2:
            end = edges[j - 1].dst
            out.append(KleeneEdge(e.kind, get_clauses(doc, end), e.src, end))
        else:
            out.append(e)
        i = j
    return ConcreteTraversal(tuple(out), t.sem_loc)


def expand_kleene(edge: KleeneEdge, doc: AstDoc) -> Optional[int]:
    """BFS expansion of a Kleene edge from its recorded start (test oracle hook)."""
    seen = {edge.src}
    queue = [edge.src]
    while queue:
        n = queue.pop(0)
        ok = True
        for c in edge.clauses:
            if isinstance(c, TypeIs):
                ok = ok and doc.nodetype(n) == c.tag
            else:
                p = doc.parent(n)
                ok = ok and p != -1 and doc.nodetype(p) == c.tag
        if ok:
            return n
        nbrs = (doc.children(n) if edge.kind == SYN_CHILD
                else [doc.parent(n)] if edge.kind == SYN_PARENT and doc.parent(n) != -1
                else doc.sem_parents(n) if edge.kind == SEM_PARENT
                else doc.sem_children(n))
        for d in nbrs:
            if d not in seen:
                seen.add(d)
                queue.append(d)
    return None


def max_level_bfs(start: int, value: str, doc: AstDoc,
                  config: LearnConfig = LearnConfig()) -> list[ConcreteTraversal]:
    """Depth-capped BFS over all edge kinds collecting paths to same-valued nodes."""
    paths: dict[int, tuple[ConcreteEdge, ...]] = {start: ()}
    queue = [start]
    found: list[tuple[int, int, ConcreteTraversal]] = []
    if doc.value(start) == value:
        found.append((0, start, ConcreteTraversal((), start)))
    while queue:
        n = queue.pop(0)
        if len(paths[n]) >= config.max_depth:
            continue
        for e in _neighbour_edges(doc, n):
            if e.dst in paths:
                continue
            paths[e.dst] = paths[n] + (e,)
            queue.append(e.dst)
            if doc.value(e.dst) == value:
                found.append((len(paths[e.dst]), e.dst,
                              ConcreteTraversal(paths[e.dst], start)))
    found.sort(key=lambda t: (t[0], t[1]))
    return [t for _, _, t in found[:config.max_ref_paths]]


def preprocess(ex: PairedExample, config: LearnConfig = LearnConfig()) -> EditMeta:
    """Record location traversals and per-edit-node reference traversals."""
    raw = get_edit_loc_traversals(ex, config)
    doc = ex.edit.triple.doc.doc
    compressed = [compress(t, doc) for t in raw]
    meta = EditMeta(ex, compressed, raw)
    prog = ex.edit.editprog
    for node in prog.nodes:
        value = prog.value(node)
        per_semloc: dict[int, list[ConcreteTraversal]] = {}
        for t in compressed:
            if t.sem_loc not in per_semloc:
                per_semloc[t.sem_loc] = max_level_bfs(t.sem_loc, value, doc, config)
        meta.refs[node] = per_semloc
    return meta


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------

def _skeleton(prog: AstDoc) -> list[tuple[int, str]]:
    return sorted((prog.depth(n), prog.nodetype(n)) for n in prog.nodes)


def _similarity(a: AstDoc, b: AstDoc) -> int:
    sa, sb = _skeleton(a), _skeleton(b)
    count = 0
    i = j = 0
    while i < len(sa) and j < len(sb):
        if sa[i] == sb[j]:
            count += 1
            i += 1
            j += 1
        elif sa[i] < sb[j]:
            i += 1
        else:
            j += 1
    return count


def _group_key(meta: EditMeta) -> tuple[str, str]:
    return (meta.edit.edit_type, meta.edit.editprog.nodetype(0))


def rank_similar(metas: list[EditMeta],
                 config: LearnConfig = LearnConfig()) -> list[tuple[int, int]]:
    """Same-type same-root pairs, most similar edit skeletons first."""
    groups: dict[tuple[str, str], list[int]] = {}
    for i, m in enumerate(metas):
        groups.setdefault(_group_key(m), []).append(i)
    ranked: list[tuple[int, int, int]] = []
    for key in sorted(groups):
        members = groups[key]
        scored = []
        for i, j in itertools.combinations(members, 2):
            sim = _similarity(metas[i].edit.editprog, metas[j].edit.editprog)
            scored.append((-sim, i, j))
        scored.sort()
        ranked.extend(scored[:config.max_pairs_per_group])
    return [(i, j) for _, i, j in ranked]


# ---------------------------------------------------------------------------
# Merging
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _MergeCtx:
    sem_loc_a: int
    sem_loc_b: int
    doc_a: AstDoc
    doc_b: AstDoc
    ts_loc: LocExpr


def _child_index_containing(doc: AstDoc, parent: int, target: int) -> Optional[int]:
    if parent == target:
        return None
    for i, c in enumerate(doc.children(parent)):
        if doc.contains(c, target):
            return i
    return None


def merge_index(ia: int, ib: int, nodes: tuple[int, int],
                ctx: _MergeCtx) -> list:
    """Anti-unify two concrete child indices."""
    if ia == ib:
        return [Constant(ia)]
    da = _child_index_containing(ctx.doc_a, nodes[0], ctx.sem_loc_a)
    db = _child_index_containing(ctx.doc_b, nodes[1], ctx.sem_loc_b)
    if da is None or db is None:
        return []
    if ia - da == ib - db:
        return [OffsetIndex(ctx.ts_loc, ia - da)]
    return []


def merge_edge(ea: EdgeT, eb: EdgeT, ctx: _MergeCtx) -> list[StepT]:
    if isinstance(ea, KleeneEdge) and isinstance(eb, KleeneEdge) and ea.kind == eb.kind:
        shared = tuple(c for c in ea.clauses if c in eb.clauses)
        if not shared:
            return []
        return [KleeneStep(ea.kind, shared)]
    if isinstance(ea, ConcreteEdge) and isinstance(eb, ConcreteEdge) and ea.kind == eb.kind:
        return [EdgeStep(ea.kind, ix)
                for ix in merge_index(ea.index, eb.index, (ea.src, eb.src), ctx)]
    return []


def merge_traversal(ta: ConcreteTraversal, tb: ConcreteTraversal,
                    ctx: _MergeCtx) -> list[tuple[StepT, ...]]:
    """Per-position merge; empty unless lengths agree."""
    if len(ta.edges) != len(tb.edges):
        return []
    options = []
    for ea, eb in zip(ta.edges, tb.edges):
        merged = merge_edge(ea, eb, ctx)
        if not merged:
            return []
        options.append(merged)
    return [tuple(combo) for combo in itertools.product(*options)]


def _constant_copy(prog: AstDoc, n: int) -> ConstantNode:
    kids = tuple(_constant_copy(prog, c) for c in prog.children(n))
    value = prog.value(n) if not kids else ""
    return ConstantNode(prog.nodetype(n), value, kids)


def merge_prog(meta_a: EditMeta, meta_b: EditMeta, na: int, nb: int,
               ctx: _MergeCtx, config: LearnConfig) -> list[EAstT]:
    """Anti-unify two edit-program subtrees into edit-tree candidates."""
    pa, pb = meta_a.edit.editprog, meta_b.edit.editprog
    out: list[EAstT] = []
    ta, tb = pa.nodetype(na), pb.nodetype(nb)
    if ta == tb and pa.value(na) == pb.value(nb):
        out.append(_constant_copy(pa, na))
    elif ta == tb and pa.arity(na) == pb.arity(nb):
        if pa.arity(na) == 0:
            if ta not in VALUE_LEAF_TAGS:
                out.append(ConstantNode(ta, "", ()))
        else:
            child_opts = []
            for ca, cb in zip(pa.children(na), pb.children(nb)):
                opts = merge_prog(meta_a, meta_b, ca, cb, ctx, config)
                if not opts:
                    child_opts = None
                    break
                child_opts.append(opts[:4])
            if child_opts is not None:
                for combo in itertools.islice(
                        itertools.product(*child_opts), config.max_east_candidates):
                    out.append(ConstantNode(ta, "", tuple(combo)))
    refs_a = meta_a.refs.get(na, {}).get(ctx.sem_loc_a, [])
    refs_b = meta_b.refs.get(nb, {}).get(ctx.sem_loc_b, [])
    for ra, rb in itertools.product(refs_a, refs_b):
        for steps in merge_traversal(ra, rb, ctx):
            base = ctx.ts_loc if ctx.ts_loc.steps else None
            loc = LocExpr(base, steps) if steps else ctx.ts_loc
            out.append(ReferenceNode(loc))
    unique: dict[str, EAstT] = {}
    for cand in out:
        unique.setdefault(repr(cand), cand)
    ordered = sorted(unique.values(), key=lambda e: (_out_cost(e), repr(e)))
    return ordered[:config.max_east_candidates]


def _sem_prefix(steps: tuple[StepT, ...]) -> tuple[StepT, ...]:
    prefix = []
    for s in steps:
        if s.kind == SEM_CHILD:
            prefix.append(s)
        else:
            break
    return tuple(prefix)


def merge_edits(meta_a: EditMeta, meta_b: EditMeta,
                config: LearnConfig = LearnConfig()) -> list[Strategy]:
    """All merged strategies for a pair of edits that survive self-consistency."""
    if meta_a.edit.edit_type != meta_b.edit.edit_type:
        return []
    edit_type = meta_a.edit.edit_type
    results: list[Strategy] = []
    for ta, tb in itertools.product(meta_a.traversals, meta_b.traversals):
        base_ctx = _MergeCtx(ta.sem_loc, tb.sem_loc,
                             meta_a.pair.unsafe.doc, meta_b.pair.unsafe.doc,
                             LocExpr(None, ()))
        for steps in merge_traversal(ta, tb, base_ctx):
            ts_loc = LocExpr(None, _sem_prefix(steps))
            ctx = _MergeCtx(ta.sem_loc, tb.sem_loc,
                            meta_a.pair.unsafe.doc, meta_b.pair.unsafe.doc, ts_loc)
            loc = LocExpr(None, steps)
            indices = merge_index(meta_a.edit.index, meta_b.edit.index,
                                  (meta_a.edit.editloc, meta_b.edit.editloc), ctx)
            if not indices:
                continue
            easts = merge_prog(meta_a, meta_b, 0, 0, ctx, config)
            for ix, east in itertools.product(indices, easts):
                results.append(Strategy(edit_type, loc, ix, east))
    return [s for s in _dedupe(results) if _self_consistent(s, (meta_a, meta_b))]


def _self_consistent(s: Strategy, metas: tuple[EditMeta, ...]) -> bool:
    for meta in metas:
        try:
            patched = apply_strategy(s, meta.edit.triple)
        except StrategyInapplicable:
            return False
        if not isomorphic(patched, meta.pair.safe):
            return False
    return True


def _dedupe(strategies: list[Strategy]) -> list[Strategy]:
    seen: dict[str, Strategy] = {}
    for s in strategies:
        seen.setdefault(serialize(s), s)
    return [seen[k] for k in sorted(seen, key=lambda k: (cost(seen[k]), k))]


def lift(meta: EditMeta) -> Strategy:
    """Per-example strategy with fully concrete traversals and edit tree."""
    raw = meta.raw_traversals[0]
    steps = tuple(EdgeStep(e.kind, Constant(e.index)) for e in raw.edges)
    return Strategy(meta.edit.edit_type, LocExpr(None, steps),
                    Constant(meta.edit.index), _constant_copy(meta.edit.editprog, 0))


def learn(pairs: list[PairedExample],
          config: LearnConfig = LearnConfig()) -> tuple[list[Strategy], list[str]]:
    """Synthesize strategies from paired examples; returns (strategies, skip log)."""
    metas: list[EditMeta] = []
    skips: list[str] = []
    for i, pair in enumerate(pairs):
        try:
            metas.append(preprocess(pair, config))
        except NoTraversalFound as exc:
            skips.append(f"pair {i}: {exc}")
    merged_by_group: dict[tuple[str, str], list[Strategy]] = {}
    for i, j in rank_similar(metas, config):
        found = merge_edits(metas[i], metas[j], config)
        merged_by_group.setdefault(_group_key(metas[i]), []).extend(found)
    out: list[Strategy] = []
    groups: dict[tuple[str, str], list[EditMeta]] = {}
    for m in metas:
        groups.setdefault(_group_key(m), []).append(m)
    for key in sorted(groups):
        merged = merged_by_group.get(key, [])
        if merged:
            out.extend(merged)
        else:
            # No generalization survived; fall back to each member's own edit.
            for m in groups[key]:
                lifted = lift(m)
                if _self_consistent(lifted, (m,)):
                    out.append(lifted)
                else:
                    skips.append(f"lifted strategy for a {key} edit failed replay")
    return _dedupe(out), skips
