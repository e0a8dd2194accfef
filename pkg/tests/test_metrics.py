from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import f1_score

from delphibn.bn import BayesianNetworkStructure
from delphibn.metrics import (
    AlignmentError,
    ConfusionCounts,
    MappingError,
    MetricReport,
    confusion_counts,
    evaluate,
    fscore_macro,
    node_recall,
    pairwise_shd_matrix,
    shd,
    shd_per_edge,
)

NODES = list("ABCDEFGH")


def net(edges, nodes=NODES[:4]):
    return BayesianNetworkStructure.build("g", nodes, edges)


def test_reversed_edge_counts_twice():
    truth = net([("A", "B")])
    learned = net([("B", "A")])
    c = confusion_counts(learned, truth)
    assert (c.tp, c.fp, c.fn_) == (0, 1, 1)
    assert shd(c) == 2


def test_counts_cover_full_matrix_with_diagonal():
    c = confusion_counts(net([("A", "B")]), net([("A", "B"), ("C", "D")]))
    assert c.n_cells == 16
    assert c == ConfusionCounts(1, 0, 1, 14)


def test_from_totals_rejects_impossible_counts():
    with pytest.raises(ValueError):
        ConfusionCounts.from_totals(5, 5, 5, 3)


def test_fscore_macro_matches_sklearn_on_flattened_matrix():
    rng = random.Random(3)
    for _ in range(50):
        n = rng.randint(2, 7)
        nodes = NODES[:n]
        pairs = [(a, b) for a in nodes for b in nodes if a != b]
        t = net(rng.sample(pairs, rng.randint(1, len(pairs))), nodes)
        l_ = net(rng.sample(pairs, rng.randint(0, len(pairs))), nodes)
        ours = evaluate(l_, t).fscore_macro
        ref = f1_score(t.adjacency_matrix().ravel(), l_.adjacency_matrix().ravel(), average="macro", labels=[0, 1], zero_division=1.0)
        assert ours == pytest.approx(ref, abs=1e-12)


def test_fscore_perfect_and_empty():
    assert fscore_macro(ConfusionCounts(3, 0, 0, 13)) == 1.0
    assert fscore_macro(ConfusionCounts(0, 0, 0, 16)) == 1.0


def test_shd_per_edge_needs_reference_edges():
    with pytest.raises(ZeroDivisionError):
        shd_per_edge(ConfusionCounts(0, 1, 0, 3), 0)


def test_alignment_error_for_foreign_nodes():
    with pytest.raises(AlignmentError):
        confusion_counts(net([], ["A", "Z"]), net([("A", "B")]))


def test_record_round_trip():
    r = evaluate(net([("A", "B")]), net([("A", "B"), ("B", "C")]))
    assert MetricReport.from_record(r.to_record()) == r
    assert set(r.to_record()) == {"TP", "FP", "FN", "TN", "SHD", "SHD/edg", "F-score"}


def test_node_recall_through_alias_map():
    truth = net([], ["HISTORY", "CVP", "SHUNT"])
    r = node_recall(["History", "CVP", "CVP", "PulmShunt"], truth, {"History": "HISTORY", "cvp": "CVP"})
    assert (r.generated_count, r.matched_count) == (4, 2)
    assert r.recall == pytest.approx(2 / 3)


def test_alias_map_must_point_inside_and_be_injective():
    truth = net([], ["A", "B"])
    with pytest.raises(MappingError):
        node_recall(["x"], truth, {"x": "Z"})
    with pytest.raises(MappingError):
        node_recall(["x", "y"], truth, {"x": "A", "y": "A"})


def test_pairwise_matrix():
    a, b, c = net([("A", "B")]), net([("B", "A")]), net([("A", "B")])
    mat, mean = pairwise_shd_matrix([a, b, c], truth_edge_count=2)
    assert mat.tolist() == [[0, 1, 0], [1, 0, 1], [0, 1, 0]]
    assert mean == pytest.approx(4 / 6)
    assert np.allclose(mat, mat.T)


graphs = st.integers(2, 8).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda p: p[0] != p[1])),
        st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda p: p[0] != p[1])),
    )
)


@settings(max_examples=200, deadline=None)
@given(graphs)
def test_shd_is_symmetric_difference(g):
    n, e1, e2 = g
    nodes = NODES[:n]
    s1 = net([(nodes[a], nodes[b]) for a, b in e1], nodes)
    s2 = net([(nodes[a], nodes[b]) for a, b in e2], nodes)
    assert shd(confusion_counts(s1, s2)) == len(e1 ^ e2)
    assert shd(confusion_counts(s1, s2)) == shd(confusion_counts(s2, s1))
