"""Vulnerability and witness judgements over annotated documents.

A (source, sink) pair is vulnerable when some semantic path between them
stays clear of sanitizer/guard nodes; a (source, witness, sink) triple holds
when an annotated sanitizer/guard sits on a semantic path between them.
Reports carry replayable evidence paths.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dataflow import AnnotatedAst


@dataclass(frozen=True)
class VulnerabilityReport:
    # (source, sink) ordered pairs with one sanitizer/guard-free path each.
    pairs: tuple[tuple[int, int], ...]
    evidence: dict[tuple[int, int], tuple[int, ...]]


@dataclass(frozen=True)
class WitnessReport:
    # (source, witness, sink) ordered triples with the two path halves.
    triples: tuple[tuple[int, int, int], ...]
    evidence: dict[tuple[int, int, int], tuple[tuple[int, ...], tuple[int, ...]]]


def _san_guard(doc, n: int) -> bool:
    return bool({"sanitizer", "guard"} & doc.annotations(n))


def _bfs_paths(doc, start: int, blocked: bool) -> dict[int, tuple[int, ...]]:
    """First BFS path from start to every reachable node.

    With blocked=True only sanitizer/guard-free edges are traversed (an edge
    is free iff neither endpoint is a sanitizer or guard).
    """
    if blocked and _san_guard(doc, start):
        return {start: (start,)}
    paths: dict[int, tuple[int, ...]] = {start: (start,)}
    work = [start]
    while work:
        n = work.pop(0)
        for d in doc.sem_children(n):
            if d in paths:
                continue
            if blocked and (_san_guard(doc, n) or _san_guard(doc, d)):
                continue
            paths[d] = paths[n] + (d,)
            work.append(d)
    return paths


def find_vulnerabilities(aast: AnnotatedAst) -> VulnerabilityReport:
    """All (source, sink) pairs joined by a sanitizer/guard-free semantic path."""
    doc = aast.doc
    pairs: list[tuple[int, int]] = []
    evidence: dict[tuple[int, int], tuple[int, ...]] = {}
    for s in doc.annotated("source"):
        free = _bfs_paths(doc, s, blocked=True)
        for k in doc.annotated("sink"):
            if k != s and k in free:
                pairs.append((s, k))
                evidence[(s, k)] = free[k]
    return VulnerabilityReport(tuple(pairs), evidence)


def find_witnesses(aast: AnnotatedAst) -> WitnessReport:
    """All (source, witness, sink) triples with the witness on a semantic path."""
    doc = aast.doc
    triples: list[tuple[int, int, int]] = []
    evidence: dict[tuple[int, int, int], tuple[tuple[int, ...], tuple[int, ...]]] = {}
    mids = sorted(n for n in doc.nodes if _san_guard(doc, n))
    reach = {s: _bfs_paths(doc, s, blocked=False) for s in doc.annotated("source")}
    mid_reach = {m: _bfs_paths(doc, m, blocked=False) for m in mids}
    for s in doc.annotated("source"):
        for m in mids:
            if m not in reach[s]:
                continue
            for k in doc.annotated("sink"):
                if k == s or k not in mid_reach[m]:
                    continue
                triples.append((s, m, k))
                evidence[(s, m, k)] = (reach[s][m], mid_reach[m][k])
    triples.sort()
    return WitnessReport(tuple(triples), evidence)
