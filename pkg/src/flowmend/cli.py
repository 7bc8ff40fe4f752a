"""Command-line pipeline: scan, mine pairs, learn strategies, fix, evaluate.

Machine-readable output is line-delimited JSON (``docs/report.md``); the
eval command additionally prints an aligned summary table. Exit codes: scan
returns 1 when any vulnerability is found; fix returns 2 when no validated
candidate exists; everything else returns 0 unless the invocation itself is
invalid.
"""

from __future__ import annotations

import argparse
import difflib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import dataflow, perturb, strategy as strategy_mod, witnessing
from .learn import LearnConfig, learn as learn_strategies
from .dataflow import AnnotatedAst, SpecError, VulnSpec
from .syntax import AstDoc, ParseError, emit, isomorphic, parse


@dataclass
class FixCandidate:
    strategy_id: str
    patched_source: str
    validated: bool
    diff: str


@dataclass
class EvalRow:
    fixture: str
    outcome: str  # "fixed" | "not-fixed" | "error"
    unique_fixes: int
    detail: str = ""


@dataclass
class EvalReport:
    rows: list[EvalRow]

    @property
    def total(self) -> int:
        return len(self.rows)

    @property
    def fixed(self) -> int:
        return sum(1 for r in self.rows if r.outcome == "fixed")

    @property
    def success_rate(self) -> float:
        return self.fixed / self.total if self.total else 0.0

    @property
    def mean_unique_fixes(self) -> float:
        if not self.rows:
            return 0.0
        return sum(r.unique_fixes for r in self.rows) / len(self.rows)


def _emit_record(record: dict, out=None) -> None:
    print(json.dumps(record, sort_keys=True), file=out or sys.stdout)


def _load_specs(spec_arg: str) -> list[VulnSpec]:
    path = Path(spec_arg)
    if path.exists():
        return dataflow.load_spec(path)
    bundled = Path(__file__).parent / "specs" / f"{spec_arg}.flowspec"
    if bundled.exists():
        return dataflow.load_spec(bundled)
    raise SpecError(f"spec {spec_arg!r} is neither a file nor a bundled spec name")


def _span_str(doc: AstDoc, n: int) -> str:
    span = doc.span(n)
    if span is None:
        return "?"
    return f"{span[0]}:{span[1]}-{span[2]}:{span[3]}"


def _node_record(doc: AstDoc, n: int) -> dict:
    return {"span": _span_str(doc, n), "value": doc.value(n)}


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------

def cmd_scan(args) -> int:
    specs = _load_specs(args.spec)
    exit_code = 0
    for path in sorted(args.paths):
        p = Path(path)
        try:
            source = p.read_text(encoding="utf-8")
            doc = parse(source)
        except (OSError, ParseError) as exc:
            _emit_record({"kind": "error", "file": str(p), "message": str(exc)})
            continue
        for spec in specs:
            aast = dataflow.annotate(doc, spec)
            d = aast.doc
            vr = witnessing.find_vulnerabilities(aast)
            for (s, k) in vr.pairs:
                exit_code = 1
                _emit_record({
                    "kind": "vulnerability", "file": str(p), "spec": spec.name,
                    "source": _node_record(d, s), "sink": _node_record(d, k),
                    "path": [_span_str(d, n) for n in vr.evidence[(s, k)]],
                })
            wr = witnessing.find_witnesses(aast)
            for (s, w, k) in wr.triples:
                _emit_record({
                    "kind": "witness", "file": str(p), "spec": spec.name,
                    "source": _node_record(d, s), "witness": _node_record(d, w),
                    "sink": _node_record(d, k),
                })
    return exit_code


# ---------------------------------------------------------------------------
# mine
# ---------------------------------------------------------------------------

def _read_corpus(corpus_dir: Path, spec: VulnSpec) -> tuple[list[AnnotatedAst], list[str]]:
    docs: list[AnnotatedAst] = []
    errors: list[str] = []
    for path in sorted(Path(corpus_dir).glob("*.js")):
        try:
            docs.append(dataflow.annotate(parse(path.read_text(encoding="utf-8")), spec))
        except ParseError as exc:
            errors.append(f"{path}: {exc}")
    return docs, errors


def cmd_mine(args) -> int:
    specs = _load_specs(args.spec)
    out_dir = Path(args.out)
    manifest = {"specs": {}, "errors": []}
    for spec in specs:
        corpus, errors = _read_corpus(Path(args.corpus), spec)
        manifest["errors"].extend(errors)
        pairs, skips = perturb.make_pairs(corpus)
        for i, pair in enumerate(pairs):
            perturb.save_pair(out_dir, spec.name, f"{i:04d}", pair)
        manifest["specs"][spec.name] = {
            "pairs": len(pairs),
            "skipped": len(skips),
            "skip_reasons": skips,
        }
        _emit_record({"kind": "mined", "spec": spec.name,
                      "pairs": len(pairs), "skipped": len(skips)})
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# learn
# ---------------------------------------------------------------------------

def _learn_config(args) -> LearnConfig:
    return LearnConfig(
        max_depth=args.max_depth, max_pairs_per_group=args.max_pairs)


def cmd_learn(args) -> int:
    pairs_dir = Path(args.pairs)
    specs = {s.name: s for s in _load_specs(args.spec)}
    records: list[tuple[str, strategy_mod.Strategy]] = []
    for spec_name in sorted(specs):
        spec_dir = pairs_dir / spec_name
        if not spec_dir.is_dir():
            continue
        pairs = []
        for pair_dir in sorted(spec_dir.iterdir()):
            if not pair_dir.is_dir():
                continue
            try:
                pairs.append(perturb.load_pair(pair_dir, specs[spec_name]))
            except (ValueError, ParseError, KeyError) as exc:
                _emit_record({"kind": "warning", "pair": str(pair_dir),
                              "message": str(exc)})
        strategies, skips = learn_strategies(pairs, _learn_config(args))
        for s in strategies:
            records.append((spec_name, s))
        costs = [strategy_mod.cost(s) for s in strategies]
        _emit_record({
            "kind": "learned", "spec": spec_name, "pairs": len(pairs),
            "strategies": len(strategies),
            "cost_range": [min(costs), max(costs)] if costs else None,
            "skips": skips,
        })
    lines = [strategy_mod.STORE_HEADER]
    for spec_name, s in records:
        lines.append(f"spec={spec_name} cost={strategy_mod.cost(s)}")
        lines.append(strategy_mod.serialize(s))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# fix
# ---------------------------------------------------------------------------

def _validates(patched_source: str, spec: VulnSpec,
               want: tuple[str, str]) -> bool:
    try:
        doc = parse(patched_source)
    except ParseError:
        return False
    aast = dataflow.annotate(doc, spec)
    d = aast.doc
    for s, k in witnessing.find_vulnerabilities(aast).pairs:
        if (d.value(s), d.value(k)) == want:
            return False
    return True


def _diff(original: str, patched: str, path: str) -> str:
    return "".join(difflib.unified_diff(
        original.splitlines(keepends=True), patched.splitlines(keepends=True),
        fromfile=f"a/{path}", tofile=f"b/{path}"))


def generate_fixes(doc: AstDoc, spec: VulnSpec,
                   strategies: list[strategy_mod.Strategy],
                   k: int, path: str = "input.js") -> list[FixCandidate]:
    """Apply strategies in ascending cost; keep validated distinct candidates."""
    base = emit(doc)
    aast = dataflow.annotate(doc, spec)
    d = aast.doc
    flagged = witnessing.find_vulnerabilities(aast).pairs
    flagged_keys = {(d.value(s), d.value(k)) for s, k in flagged}
    triples = [t for t in dataflow.slice_flows(aast)
               if (t.source, t.sink) in set(flagged)]
    ordered = sorted(strategies, key=lambda s: (strategy_mod.cost(s),
                                                strategy_mod.serialize(s)))
    candidates: list[FixCandidate] = []
    seen_sources = {base}
    for triple in triples:
        want = (d.value(triple.source), d.value(triple.sink))
        for i, strat in enumerate(ordered):
            if len(candidates) >= k:
                return candidates
            try:
                patched = strategy_mod.apply_strategy(strat, triple)
                patched_source = emit(patched)
            except Exception:
                continue
            if patched_source in seen_sources:
                continue
            seen_sources.add(patched_source)
            if not _validates(patched_source, spec, want):
                continue
            candidates.append(FixCandidate(
                strategy_id=f"{spec.name}/s{i}",
                patched_source=patched_source,
                validated=True,
                diff=_diff(base, patched_source, path)))
    return candidates


def cmd_fix(args) -> int:
    specs = _load_specs(args.spec)
    store = strategy_mod.load_store(Path(args.store).read_text(encoding="utf-8"))
    path = Path(args.file)
    try:
        doc = parse(path.read_text(encoding="utf-8"))
    except ParseError as exc:
        _emit_record({"kind": "error", "file": str(path), "message": str(exc)})
        return 2
    out_dir = Path(args.out) if args.out else None
    total = 0
    for spec in specs:
        strategies = [s for name, s in store if name == spec.name]
        if not strategies:
            continue
        aast = dataflow.annotate(doc, spec)
        if not witnessing.find_vulnerabilities(aast).pairs:
            continue
        candidates = generate_fixes(doc, spec, strategies, args.k, path.name)
        for i, cand in enumerate(candidates):
            total += 1
            record = {"kind": "fix", "file": str(path), "spec": spec.name,
                      "strategy": cand.strategy_id, "validated": cand.validated,
                      "diff": cand.diff}
            if out_dir:
                out_dir.mkdir(parents=True, exist_ok=True)
                fix_path = out_dir / f"{path.stem}.fix{i}.js"
                fix_path.write_text(cand.patched_source, encoding="utf-8")
                (out_dir / f"{path.stem}.fix{i}.diff").write_text(
                    cand.diff, encoding="utf-8")
                record["patched"] = str(fix_path)
            _emit_record(record)
    if total == 0:
        _emit_record({"kind": "no-fix", "file": str(path),
                      "message": "no flagged flow or no applicable strategy"})
        return 2
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _edit_region_lines(unsafe_doc: AstDoc, edit: perturb.Edit) -> tuple[int, int]:
    """Line range of the edited slot in the canonical emission of unsafe."""
    reparsed = parse(emit(unsafe_doc))
    path = []
    n = edit.editloc
    while unsafe_doc.parent(n) != -1:
        p = unsafe_doc.parent(n)
        path.append(unsafe_doc.children(p).index(n))
        n = p
    node = reparsed.root
    for i in reversed(path):
        node = reparsed.children(node)[i]
    kids = reparsed.children(node)
    if edit.edit_type == "Replace" and edit.index < len(kids):
        span = reparsed.span(kids[edit.index])
        if span:
            return span[0], span[2]
    # Insertion point: between the neighbouring statements.
    lo = hi = None
    if 0 < edit.index <= len(kids):
        prev_span = reparsed.span(kids[edit.index - 1])
        if prev_span:
            lo = prev_span[2]
    if edit.index < len(kids):
        next_span = reparsed.span(kids[edit.index])
        if next_span:
            hi = next_span[0]
    span = reparsed.span(node)
    return (lo if lo is not None else (span[0] if span else 1),
            hi if hi is not None else (span[2] if span else 10 ** 9))


def diff_confined(original: str, patched: str, line_range: tuple[int, int]) -> bool:
    """True when all textual changes fall within the edit region's lines."""
    lo, hi = line_range
    matcher = difflib.SequenceMatcher(
        a=original.splitlines(), b=patched.splitlines(), autojunk=False)
    for op, i1, i2, _, _ in matcher.get_opcodes():
        if op == "equal":
            continue
        start = i1 + 1
        end = i2 if i2 > i1 else i1 + 1
        if start < lo - 1 or end > hi + 1:
            return False
    return True


def cmd_eval(args) -> int:
    specs = _load_specs(args.spec)
    config = _learn_config(args)
    overall = []
    for spec in specs:
        files = sorted(Path(args.corpus).glob("*.js"))
        seed_docs: list[AnnotatedAst] = []
        if args.seed_corpus:
            seed_docs, _ = _read_corpus(Path(args.seed_corpus), spec)
        rows: list[EvalRow] = []
        for held_out in files:
            row = _eval_one(held_out, files, seed_docs, spec, config, args.k)
            rows.append(row)
            _emit_record({"kind": "eval-row", "spec": spec.name,
                          "fixture": row.fixture, "outcome": row.outcome,
                          "unique_fixes": row.unique_fixes, "detail": row.detail})
        report = EvalReport(rows)
        overall.append((spec.name, report))
        _emit_record({"kind": "eval-summary", "spec": spec.name,
                      "total": report.total, "fixed": report.fixed,
                      "success_rate": round(report.success_rate, 4),
                      "mean_unique_fixes": round(report.mean_unique_fixes, 4)})
    print(format_eval_table(overall))
    return 0


def _eval_one(held_out: Path, files: list[Path], seed_docs: list[AnnotatedAst],
              spec: VulnSpec, config: LearnConfig, k: int) -> EvalRow:
    name = held_out.name
    try:
        held_doc = parse(held_out.read_text(encoding="utf-8"))
    except ParseError as exc:
        return EvalRow(name, "error", 0, f"parse error: {exc}")
    train_docs = list(seed_docs)
    for path in files:
        if path == held_out:
            continue
        try:
            train_docs.append(dataflow.annotate(
                parse(path.read_text(encoding="utf-8")), spec))
        except ParseError:
            continue
    train_pairs, _ = perturb.make_pairs(train_docs)
    if not train_pairs:
        return EvalRow(name, "not-fixed", 0, "no training pairs")
    strategies, _ = learn_strategies(train_pairs, config)
    held_pairs, skips = perturb.make_pairs([dataflow.annotate(held_doc, spec)])
    if not held_pairs:
        return EvalRow(name, "error", 0,
                       f"no witnessed flow to perturb ({'; '.join(skips) or 'none found'})")
    pair = held_pairs[0]
    unsafe_doc = pair.unsafe.doc
    candidates = generate_fixes(unsafe_doc, spec, strategies, k, name)
    region = _edit_region_lines(unsafe_doc, pair.edit)
    base = emit(unsafe_doc)
    confined = [c for c in candidates
                if diff_confined(base, c.patched_source, region)]
    if confined:
        return EvalRow(name, "fixed", len(confined))
    if candidates:
        return EvalRow(name, "not-fixed", 0, "candidates not confined to edit region")
    return EvalRow(name, "not-fixed", 0, "no validated candidate")


def format_eval_table(reports: list[tuple[str, EvalReport]]) -> str:
    lines = []
    header = f"{'spec':<16} {'fixture':<36} {'outcome':<10} {'fixes':>5}"
    lines.append(header)
    lines.append("-" * len(header))
    for spec_name, report in reports:
        for row in report.rows:
            lines.append(f"{spec_name:<16} {row.fixture:<36} "
                         f"{row.outcome:<10} {row.unique_fixes:>5}")
        lines.append(f"{spec_name:<16} {'TOTAL':<36} "
                     f"{report.fixed}/{report.total} "
                     f"rate={report.success_rate:.2%} "
                     f"mean-fixes={report.mean_unique_fixes:.2f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowmend",
        description="Detect, mine, learn, and repair information-flow "
                    "vulnerabilities in a JavaScript-subset language.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="report vulnerabilities and witnesses")
    p.add_argument("paths", nargs="+")
    p.add_argument("--spec", required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("mine", help="perturb a safe corpus into paired examples")
    p.add_argument("corpus")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("learn", help="synthesize strategies from mined pairs")
    p.add_argument("pairs")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--max-pairs", type=int, default=64)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("fix", help="repair a flagged file with learned strategies")
    p.add_argument("file")
    p.add_argument("--spec", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fix)

    p = sub.add_parser("eval", help="leave-one-out evaluation over a safe corpus")
    p.add_argument("corpus")
    p.add_argument("--spec", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--max-pairs", type=int, default=64)
    p.add_argument("--seed-corpus")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        _emit_record({"kind": "error", "message": str(exc)})
        return 2


if __name__ == "__main__":
    sys.exit(main())
