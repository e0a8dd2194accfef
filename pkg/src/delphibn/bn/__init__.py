from .bif import BIFDuplicateError, BIFReferenceError, BIFSyntaxError, parse_bif, to_bif
from .edgelist import edges_from_pairs, load_network, parse_edge_list_json, to_edge_list_json
from .graph import (
    BayesianNetworkStructure,
    CycleError,
    DirectedEdge,
    DuplicateEdgeError,
    DuplicateNodeError,
    EmptyNameError,
    NodeName,
    SelfLoopError,
    StructureError,
    UnknownNodeError,
    break_cycles,
    edges_on_cycles,
    find_cycles,
    normalize_name,
    require_acyclic,
)

__all__ = [
    "BIFDuplicateError",
    "BIFReferenceError",
    "BIFSyntaxError",
    "BayesianNetworkStructure",
    "CycleError",
    "DirectedEdge",
    "DuplicateEdgeError",
    "DuplicateNodeError",
    "EmptyNameError",
    "NodeName",
    "SelfLoopError",
    "StructureError",
    "UnknownNodeError",
    "break_cycles",
    "edges_from_pairs",
    "edges_on_cycles",
    "find_cycles",
    "load_network",
    "normalize_name",
    "parse_bif",
    "parse_edge_list_json",
    "require_acyclic",
    "to_bif",
    "to_edge_list_json",
]
