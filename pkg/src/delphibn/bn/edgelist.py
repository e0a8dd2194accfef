"""JSON edge-list interchange format.

Schema::

    {"name": str, "nodes": [str, ...], "edges": [[from, to], ...],
     "descriptions": {node: text}, "states": {node: [value, ...]}}

``descriptions`` and ``states`` are optional.
"""

from __future__ import annotations

import json
from pathlib import Path

from .bif import parse_bif
from .graph import (
    BayesianNetworkStructure,
    DirectedEdge,
    DuplicateEdgeError,
    DuplicateNodeError,
    SelfLoopError,
    StructureError,
    UnknownNodeError,
    normalize_name,
    require_acyclic,
)


def parse_edge_list_json(text: str, *, require_dag: bool = False) -> BayesianNetworkStructure:
    """Parse and validate an edge-list document.

    Raises:
        StructureError: bad JSON or schema; the subclasses DuplicateNodeError,
            UnknownNodeError, SelfLoopError and DuplicateEdgeError name the
            offending node or edge.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructureError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise StructureError("edge-list document must be a JSON object")
    nodes = doc.get("nodes")
    edges = doc.get("edges", [])
    if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
        raise StructureError("'nodes' must be an array of strings")
    if not isinstance(edges, list):
        raise StructureError("'edges' must be an array of [from, to] pairs")

    by_key = {}
    for raw in nodes:
        node = normalize_name(raw)
        if node.key in by_key:
            raise DuplicateNodeError(f"duplicate node {raw!r}")
        by_key[node.key] = node

    seen = set()
    for pair in edges:
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(x, str) for x in pair)):
            raise StructureError(f"edge {pair!r} is not a [from, to] pair of strings")
        src, dst = (normalize_name(x) for x in pair)
        for end, raw in ((src, pair[0]), (dst, pair[1])):
            if end.key not in by_key:
                raise UnknownNodeError(f"edge {pair!r} references unknown node {raw!r}")
        if src == dst:
            raise SelfLoopError(f"self-loop edge {pair!r}")
        if (src.key, dst.key) in seen:
            raise DuplicateEdgeError(f"duplicate edge {pair!r}")
        seen.add((src.key, dst.key))

    descriptions = doc.get("descriptions") or {}
    states = doc.get("states") or {}
    for label, mapping in (("descriptions", descriptions), ("states", states)):
        if not isinstance(mapping, dict):
            raise StructureError(f"'{label}' must be an object")
        for k in mapping:
            if normalize_name(k).key not in by_key:
                raise UnknownNodeError(f"{label} entry for unknown node {k!r}")

    structure = BayesianNetworkStructure.build(
        str(doc.get("name", "unnamed")),
        list(by_key.values()),
        [tuple(p) for p in edges],
        descriptions=descriptions,
        states=states,
    )
    return require_acyclic(structure) if require_dag else structure


def to_edge_list_json(structure: BayesianNetworkStructure) -> str:
    doc: dict = {
        "name": structure.name,
        "nodes": [n.text for n in structure.nodes],
        "edges": [[e.source.text, e.target.text] for e in structure.sorted_edges()],
    }
    if structure.descriptions:
        doc["descriptions"] = {n.text: structure.descriptions[n] for n in structure.nodes if n in structure.descriptions}
    if structure.states:
        doc["states"] = {n.text: list(structure.states[n]) for n in structure.nodes if n in structure.states}
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def load_network(path: str | Path) -> BayesianNetworkStructure:
    """Load a ground-truth network from ``.bif`` or ``.json``; must be acyclic."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".bif":
        return parse_bif(text)
    if path.suffix.lower() == ".json":
        return parse_edge_list_json(text, require_dag=True)
    raise StructureError(f"{path}: unsupported network format {path.suffix!r}")


def edges_from_pairs(structure: BayesianNetworkStructure, pairs) -> frozenset[DirectedEdge]:
    """Map (from, to) name pairs onto ``structure``'s nodes."""
    return frozenset(DirectedEdge(structure.node(a), structure.node(b)) for a, b in pairs)
