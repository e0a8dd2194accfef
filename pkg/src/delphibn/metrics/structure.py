"""Edge-level comparison of a learned structure against a reference one."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass

import numpy as np

from ..bn.graph import BayesianNetworkStructure, normalize_name


class AlignmentError(ValueError):
    """Learned and reference structures do not share a node universe."""


class MappingError(ValueError):
    """An alias map points outside the reference node set or is not injective."""


@dataclass(frozen=True)
class ConfusionCounts:
    """Cell counts over the full n x n adjacency matrix, diagonal included."""

    tp: int
    fp: int
    fn_: int
    tn: int

    @property
    def n_cells(self) -> int:
        return self.tp + self.fp + self.fn_ + self.tn

    @classmethod
    def from_totals(cls, tp: int, fp: int, fn: int, n_nodes: int) -> ConfusionCounts:
        """Counts for an ``n_nodes`` network; TN fills the rest of the matrix."""
        tn = n_nodes * n_nodes - tp - fp - fn
        if min(tp, fp, fn, tn) < 0:
            raise ValueError(f"counts ({tp}, {fp}, {fn}) do not fit a {n_nodes}-node matrix")
        return cls(tp, fp, fn, tn)


@dataclass(frozen=True)
class MetricReport:
    counts: ConfusionCounts
    shd: int
    shd_per_edge: float
    fscore_macro: float

    def to_record(self) -> dict:
        """Flat record using the published table headers."""
        return {
            "TP": self.counts.tp,
            "FP": self.counts.fp,
            "FN": self.counts.fn_,
            "TN": self.counts.tn,
            "SHD": self.shd,
            "SHD/edg": self.shd_per_edge,
            "F-score": self.fscore_macro,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> MetricReport:
        counts = ConfusionCounts(rec["TP"], rec["FP"], rec["FN"], rec["TN"])
        return cls(counts, rec["SHD"], rec["SHD/edg"], rec["F-score"])


def _edge_keys(structure: BayesianNetworkStructure) -> set[tuple[str, str]]:
    return {(e.source.key, e.target.key) for e in structure.edges}


def confusion_counts(learned: BayesianNetworkStructure, truth: BayesianNetworkStructure) -> ConfusionCounts:
    """Directed edge confusion counts; a reversed edge is one FP plus one FN.

    Raises:
        AlignmentError: ``learned`` has nodes that ``truth`` lacks.
    """
    truth_keys = {n.key for n in truth.nodes}
    extra = [n.text for n in learned.nodes if n.key not in truth_keys]
    if extra:
        raise AlignmentError(f"nodes not in {truth.name!r}: {', '.join(extra)}")
    got, want = _edge_keys(learned), _edge_keys(truth)
    tp = len(got & want)
    fp = len(got - want)
    fn = len(want - got)
    n = len(truth.nodes)
    return ConfusionCounts(tp=tp, fp=fp, fn_=fn, tn=n * n - tp - fp - fn)


def shd(counts: ConfusionCounts) -> int:
    return counts.fp + counts.fn_


def shd_per_edge(counts: ConfusionCounts, true_edge_count: int) -> float:
    if true_edge_count <= 0:
        raise ZeroDivisionError("SHD per edge is undefined for a reference with no edges")
    return shd(counts) / true_edge_count


def _f1(tp: int, fp: int, fn: int) -> float:
    # empty class on both sides counts as perfect
    denom = 2 * tp + fp + fn
    return 1.0 if denom == 0 else 2 * tp / denom


def fscore_macro(counts: ConfusionCounts) -> float:
    """Unweighted mean of the edge-class and no-edge-class F1 scores."""
    edge = _f1(counts.tp, counts.fp, counts.fn_)
    no_edge = _f1(counts.tn, counts.fn_, counts.fp)
    return (edge + no_edge) / 2


def evaluate(learned: BayesianNetworkStructure, truth: BayesianNetworkStructure) -> MetricReport:
    counts = confusion_counts(learned, truth)
    return MetricReport(
        counts=counts,
        shd=shd(counts),
        shd_per_edge=shd_per_edge(counts, len(truth.edges)),
        fscore_macro=fscore_macro(counts),
    )


@dataclass(frozen=True)
class NodeRecall:
    generated_count: int
    matched_count: int
    recall: float

    def to_dict(self) -> dict:
        return asdict(self)


def node_recall(
    generated: Sequence[str],
    truth: BayesianNetworkStructure,
    alias_map: Mapping[str, str],
) -> NodeRecall:
    """Share of reference nodes covered by generated names, through an alias map.

    ``alias_map`` sends generated names to reference names; lookups use the
    normalized key of both sides. Generated names without an alias are
    simply unmatched.

    Raises:
        MappingError: an alias target is not a reference node, or two
            generated names map to the same reference node.
    """
    aliases = resolve_alias_map(alias_map, truth)
    matched = {aliases[normalize_name(g).key] for g in generated if normalize_name(g).key in aliases}
    return NodeRecall(
        generated_count=len(generated),
        matched_count=len(matched),
        recall=len(matched) / len(truth.nodes) if truth.nodes else 0.0,
    )


def resolve_alias_map(alias_map: Mapping[str, str], truth: BayesianNetworkStructure) -> dict[str, str]:
    """Validate an alias map and key it by normalized generated name."""
    truth_keys = {n.key for n in truth.nodes}
    resolved: dict[str, str] = {}
    owner: dict[str, str] = {}
    for gen, target in alias_map.items():
        tkey = normalize_name(target).key
        if tkey not in truth_keys:
            raise MappingError(f"alias {gen!r} -> {target!r}: {target!r} is not a node of {truth.name!r}")
        gkey = normalize_name(gen).key
        if tkey in owner and owner[tkey] != gkey:
            raise MappingError(f"aliases {owner[tkey]!r} and {gen!r} both map to {target!r}")
        owner[tkey] = gkey
        resolved[gkey] = tkey
    return resolved


def pairwise_shd_matrix(
    structures: Sequence[BayesianNetworkStructure], truth_edge_count: int
) -> tuple[np.ndarray, float]:
    """Normalized SHD between every pair of structures over one node set.

    Returns the symmetric matrix (zero diagonal) and the mean of its
    off-diagonal entries.
    """
    if len(structures) < 2:
        raise ValueError("need at least two structures")
    keyset = {n.key for n in structures[0].nodes}
    for s in structures[1:]:
        if {n.key for n in s.nodes} != keyset:
            raise AlignmentError(f"{s.name!r} does not share the node set of {structures[0].name!r}")
    if truth_edge_count <= 0:
        raise ZeroDivisionError("truth_edge_count must be positive")
    k = len(structures)
    edges = [_edge_keys(s) for s in structures]
    mat = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            mat[i, j] = mat[j, i] = len(edges[i] ^ edges[j]) / truth_edge_count
    mean = float(mat.sum() / (k * (k - 1)))
    return mat, mean

