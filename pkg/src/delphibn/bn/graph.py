"""Graph data model shared by every other module.

Node identity is the normalized, case-folded key; the cleaned original text is
kept for display. Structures are immutable once built.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

_WRAPPERS = "<>\"'`“”‘’"
_WS = re.compile(r"\s+")


class StructureError(ValueError):
    """Base class for invalid graph content."""


class EmptyNameError(StructureError):
    pass


class SelfLoopError(StructureError):
    pass


class DuplicateNodeError(StructureError):
    pass


class DuplicateEdgeError(StructureError):
    pass


class UnknownNodeError(StructureError):
    pass


class CycleError(StructureError):
    pass


@dataclass(frozen=True, order=True)
class NodeName:
    """A node label. Compares, hashes and sorts by ``key`` only."""

    key: str
    text: str = field(compare=False)

    def __str__(self) -> str:
        return self.text


def normalize_name(raw: str | NodeName) -> NodeName:
    """Clean a raw node label and derive its comparison key.

    Trims and collapses whitespace and peels surrounding angle brackets and
    quotes (``"< Age group >"`` becomes ``"Age group"``). The key is the
    case-folded text.

    Raises:
        EmptyNameError: nothing is left after cleaning.
    """
    if isinstance(raw, NodeName):
        return raw
    text = _WS.sub(" ", str(raw)).strip()
    while True:
        peeled = text.strip(_WRAPPERS).strip()
        if peeled == text:
            break
        text = peeled
    if not text:
        raise EmptyNameError(f"empty node name: {raw!r}")
    return NodeName(key=text.casefold(), text=text)


@dataclass(frozen=True, order=True)
class DirectedEdge:
    source: NodeName
    target: NodeName

    def __post_init__(self):
        if self.source == self.target:
            raise SelfLoopError(f"self-loop on {self.source.text!r}")

    @classmethod
    def of(cls, source: str | NodeName, target: str | NodeName) -> DirectedEdge:
        return cls(normalize_name(source), normalize_name(target))

    @property
    def reversed(self) -> DirectedEdge:
        return DirectedEdge(self.target, self.source)

    def __str__(self) -> str:
        return f"{self.source.text} -> {self.target.text}"


@dataclass(frozen=True)
class BayesianNetworkStructure:
    """Named nodes plus a directed edge set.

    Edge endpoints must be declared nodes. Acyclicity is not enforced here
    because elicited intermediate graphs may contain cycles; ground-truth
    loaders check it themselves.
    """

    name: str
    nodes: tuple[NodeName, ...]
    edges: frozenset[DirectedEdge]
    descriptions: Mapping[NodeName, str] = field(default_factory=dict, hash=False)
    states: Mapping[NodeName, tuple[str, ...]] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        seen: dict[str, NodeName] = {}
        for node in self.nodes:
            if node.key in seen:
                raise DuplicateNodeError(f"duplicate node {node.text!r}")
            seen[node.key] = node
        for edge in self.edges:
            for end in (edge.source, edge.target):
                if end.key not in seen:
                    raise UnknownNodeError(f"edge {edge} references unknown node {end.text!r}")

    @classmethod
    def build(
        cls,
        name: str,
        nodes: Iterable[str | NodeName],
        edges: Iterable[tuple[str | NodeName, str | NodeName] | DirectedEdge] = (),
        descriptions: Mapping[str, str] | None = None,
        states: Mapping[str, Iterable[str]] | None = None,
    ) -> BayesianNetworkStructure:
        """Build from plain strings; edge endpoints resolve to the declared nodes."""
        node_list = tuple(normalize_name(n) for n in nodes)
        by_key = {n.key: n for n in node_list}

        def canon(raw):
            n = normalize_name(raw)
            return by_key.get(n.key, n)

        edge_set = set()
        for e in edges:
            s, t = (e.source, e.target) if isinstance(e, DirectedEdge) else e
            edge_set.add(DirectedEdge(canon(s), canon(t)))
        return cls(
            name=name,
            nodes=node_list,
            edges=frozenset(edge_set),
            descriptions={canon(k): v for k, v in (descriptions or {}).items()},
            states={canon(k): tuple(v) for k, v in (states or {}).items()},
        )

    def node(self, name: str | NodeName) -> NodeName:
        key = normalize_name(name).key
        for n in self.nodes:
            if n.key == key:
                return n
        raise UnknownNodeError(f"{self.name}: no node {name!r}")

    def has_node(self, name: str | NodeName) -> bool:
        key = normalize_name(name).key
        return any(n.key == key for n in self.nodes)

    def with_edges(self, edges: Iterable[DirectedEdge]) -> BayesianNetworkStructure:
        """Same nodes, different edges (endpoints snap to this structure's nodes)."""
        return BayesianNetworkStructure.build(
            self.name, self.nodes, edges, descriptions=self.descriptions, states=self.states
        )

    def sorted_edges(self) -> list[DirectedEdge]:
        """Edges ordered by node declaration order of (source, target)."""
        index = {n.key: i for i, n in enumerate(self.nodes)}
        return sorted(self.edges, key=lambda e: (index[e.source.key], index[e.target.key]))

    def adjacency_matrix(self) -> np.ndarray:
        """n x n 0/1 matrix, cell (i, j) set iff edge i -> j, in ``nodes`` order."""
        index = {n.key: i for i, n in enumerate(self.nodes)}
        mat = np.zeros((len(self.nodes), len(self.nodes)), dtype=np.int8)
        for e in self.edges:
            mat[index[e.source.key], index[e.target.key]] = 1
        return mat

    def is_acyclic(self) -> bool:
        return not find_cycles(self.edges)

    def parents(self, node: str | NodeName) -> list[NodeName]:
        target = self.node(node)
        return [e.source for e in self.sorted_edges() if e.target == target]


def _digraph(edges: Iterable[DirectedEdge]) -> nx.DiGraph:
    g = nx.DiGraph()
    for e in sorted(edges):
        g.add_edge(e.source, e.target)
    return g


def _canonical_cycle(cycle: list[NodeName]) -> tuple[NodeName, ...]:
    i = cycle.index(min(cycle))
    return tuple(cycle[i:] + cycle[:i])


def find_cycles(edges: Iterable[DirectedEdge]) -> list[tuple[NodeName, ...]]:
    """Report cycles in a directed edge set.

    Every 2-cycle is listed explicitly. Each strongly connected component with
    more than two nodes contributes at least one representative cycle (skipped
    if it coincides with an already listed 2-cycle). The result is empty iff
    the edges are acyclic. Cycles are rotated to start at their smallest node.
    """
    edge_set = set(edges)
    cycles: list[tuple[NodeName, ...]] = []
    for e in sorted(edge_set):
        if e.source < e.target and e.reversed in edge_set:
            cycles.append((e.source, e.target))
    g = _digraph(edge_set)
    for comp in sorted(nx.strongly_connected_components(g), key=min):
        if len(comp) <= 2:
            continue
        sub = g.subgraph(sorted(comp))
        found = nx.find_cycle(sub, source=min(comp))
        cyc = _canonical_cycle([u for u, _ in found])
        if cyc not in cycles:
            cycles.append(cyc)
    return cycles


def edges_on_cycles(edges: Iterable[DirectedEdge]) -> set[DirectedEdge]:
    """Edges lying on at least one directed cycle (both ends in one SCC)."""
    edge_set = set(edges)
    g = _digraph(edge_set)
    comp_of = {}
    for i, comp in enumerate(nx.strongly_connected_components(g)):
        for node in comp:
            comp_of[node] = i
    return {e for e in edge_set if comp_of[e.source] == comp_of[e.target]}


def break_cycles(weighted_edges: Mapping[DirectedEdge, int]) -> frozenset[DirectedEdge]:
    """Greedily remove cycle edges until the graph is acyclic.

    Repeatedly drops the edge with the lowest weight among edges that lie on
    some cycle; ties go to the lexicographically smallest (source, target)
    key pair. Deterministic, and never touches an edge that is not on a cycle.
    """
    kept = dict(weighted_edges)
    while True:
        candidates = edges_on_cycles(kept)
        if not candidates:
            return frozenset(kept)
        victim = min(candidates, key=lambda e: (kept[e], e.source.key, e.target.key))
        del kept[victim]


def require_acyclic(structure: BayesianNetworkStructure) -> BayesianNetworkStructure:
    cycles = find_cycles(structure.edges)
    if cycles:
        shown = " -> ".join(n.text for n in cycles[0])
        raise CycleError(f"{structure.name}: structure is cyclic ({shown})")
    return structure
