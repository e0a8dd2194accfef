from .structure import (
    AlignmentError,
    ConfusionCounts,
    MappingError,
    MetricReport,
    NodeRecall,
    confusion_counts,
    evaluate,
    fscore_macro,
    node_recall,
    pairwise_shd_matrix,
    resolve_alias_map,
    shd,
    shd_per_edge,
)
from .wilcoxon import WilcoxonResult, wilcoxon_signed_rank

__all__ = [
    "AlignmentError",
    "ConfusionCounts",
    "MappingError",
    "MetricReport",
    "NodeRecall",
    "WilcoxonResult",
    "confusion_counts",
    "evaluate",
    "fscore_macro",
    "node_recall",
    "pairwise_shd_matrix",
    "resolve_alias_map",
    "shd",
    "shd_per_edge",
    "wilcoxon_signed_rank",
]
