"""flowmend: detect, mine, learn, and repair information-flow vulnerabilities
in a JavaScript-subset language."""

from .syntax import AstDoc, parse, emit, child_index, replace_child, insert_child
from .dataflow import VulnSpec, load_spec, annotate, slice_flows
from .witnessing import find_vulnerabilities, find_witnesses
from .perturb import Edit, PairedExample, make_pairs
from .strategy import Strategy, apply_strategy, cost, serialize, deserialize
from .learn import learn

__all__ = [
    "AstDoc", "parse", "emit", "child_index", "replace_child", "insert_child",
    "VulnSpec", "load_spec", "annotate", "slice_flows",
    "find_vulnerabilities", "find_witnesses",
    "Edit", "PairedExample", "make_pairs",
    "Strategy", "apply_strategy", "cost", "serialize", "deserialize",
    "learn",
]
