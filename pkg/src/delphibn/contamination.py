"""Guided-instruction probe for training-data contamination, and its scoring.

The model is asked to list the nodes, then the edges, of a network named by
its source publication. An analyst-authored alias map ties the generated
names to the reference nodes; the tool only counts.
"""

from __future__ import annotations

import json
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .bn import BayesianNetworkStructure, DirectedEdge, normalize_name
from .llm import ChatBackend, ChatConversation
from .metrics import MetricReport, evaluate, node_recall, resolve_alias_map
from .prompts import prompt

DEFAULT_EXACT_THRESHOLD = 0.5

_NUMBERED = re.compile(r"^\s*(?:\d+[.)]|\(\d+\))\s+(.*\S)")
_BULLET = re.compile(r"^\s*[-*•]\s+(.*\S)")
_NAME_END = re.compile(r":|\s[-–—]\s")
_LIST_PREFIX = re.compile(r"^\s*(?:\d+[.)]|\(\d+\)|[-*•])\s*")
_EDGE_ARROW = re.compile(r"\s*(?:-+>|→)\s*")
_COMMENTARY = re.compile(r"\s*(?::|\s[-–—]\s|\(|;).*$")
_NOT_A_NAME = re.compile(r"[\"'`,]")
MAX_NAME_LEN = 80


@dataclass
class ProbeReplies:
    nodes_reply: str
    edges_reply: str
    conversation: ChatConversation


def run_probe(
    backend: ChatBackend,
    paper_name: str,
    url: str | None = None,
    *,
    templates: str | Path | None = None,
    conversation_id: str = "probe",
) -> ProbeReplies:
    """Ask for the node list, then the edge list, on one conversation."""
    if not paper_name.strip():
        raise ValueError("paper_name must be non-empty")
    conv = ChatConversation(backend, conversation_id)
    values = {"paper_name": paper_name, "url_clause": f" and also available on {url}" if url else ""}
    nodes_reply = conv.send(prompt("probe_nodes", templates, **values))
    edges_reply = conv.send(prompt("probe_edges", templates, **values))
    return ProbeReplies(nodes_reply, edges_reply, conv)


def _leading_name(item: str) -> str:
    item = item.strip().strip("*_`")
    name = _NAME_END.split(item, maxsplit=1)[0]
    return name.strip().strip("*_`\"' ")


def extract_generated_nodes(reply: str, *, unique: bool = True) -> list[str]:
    """Leading names of the list items in a node-list reply.

    Numbered items are used when present (nested bullets are then treated
    as details); otherwise top-level bullets. The name is the text before
    the first ``:`` or `` - ``. With ``unique`` repeats are collapsed by
    normalized key, keeping the first spelling.
    """
    lines = reply.splitlines()
    items = [m.group(1) for m in map(_NUMBERED.match, lines) if m]
    if not items:
        items = [m.group(1) for m in map(_BULLET.match, lines) if m]
    names = [n for n in map(_leading_name, items) if n]
    return _dedupe(names) if unique else names


def _dedupe(names: Sequence[str]) -> list[str]:
    seen = set()
    out = []
    for n in names:
        key = normalize_name(n).key
        if key not in seen:
            seen.add(key)
            out.append(n)
    return out


def parse_arrow_edges(reply: str) -> list[tuple[str, str]]:
    """Every ``A->B`` line in order, repeats included.

    A line counts when, after an optional list marker and before optional
    commentary, it is nothing but names joined by arrows; a chain ``A->B->C``
    gives two edges. Edges quoted inside prose are ignored.
    """
    out = []
    for line in reply.splitlines():
        body = _LIST_PREFIX.sub("", line).strip().strip("*_`")
        if not _EDGE_ARROW.search(body):
            continue
        names = _EDGE_ARROW.split(body)
        names[-1] = _COMMENTARY.sub("", names[-1]).rstrip(" .")
        names = [n.strip().strip("*_`") for n in names]
        if any(not n or len(n) > MAX_NAME_LEN or _NOT_A_NAME.search(n) for n in names):
            continue
        out.extend(zip(names, names[1:]))
    return out


@dataclass
class ContaminationReport:
    generated_nodes: list[str]
    generated_count: int
    matched_count: int
    recall: float
    exact_name_match: bool
    edge_analysis: MetricReport | None = None
    edge_ratio: float | None = None
    edge_mentions: int = 0

    def to_row(self, bn: str = "", model: str = "") -> dict:
        """One row in the node-probe / edge-probe table layout."""
        row = {
            "BN": bn,
            "LLM": model,
            "#nodes": self.generated_count,
            "Rec": round(self.recall, 3),
            "*": "*" if self.exact_name_match else "",
            "% edg": "" if self.edge_ratio is None else round(self.edge_ratio, 3),
            "F-score": "",
            "SHD": "",
        }
        if self.edge_analysis is not None:
            row["F-score"] = round(self.edge_analysis.fscore_macro, 3)
            row["SHD"] = self.edge_analysis.shd
        return row


def load_alias_map(path: str | Path) -> dict[str, str]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in data.items()):
        raise ValueError(f"{path}: alias map must be a JSON object of name -> name")
    return data


def score_probe(
    generated: str | Sequence[str],
    edges_reply: str,
    truth: BayesianNetworkStructure,
    alias_map: Mapping[str, str],
    *,
    count_as_zero: bool = False,
    exact_threshold: float = DEFAULT_EXACT_THRESHOLD,
    case_sensitive: bool = False,
) -> ContaminationReport:
    """Score the two probe replies against the reference network.

    ``generated`` is the raw node-list reply or an already extracted list;
    the count keeps repeated items, as the model produced them. With
    ``count_as_zero`` (a hypothetical list the analyst rejects) everything is
    zero and no edge analysis is made.

    Edge mentions count only when both ends have an alias; the ratio uses
    mentions, the metrics use the distinct mapped edges.

    Raises:
        MappingError: the alias map points outside the reference or is not
            one-to-one.
    """
    if isinstance(generated, str):
        raw_items = extract_generated_nodes(generated, unique=False)
    else:
        raw_items = list(generated)
    aliases = resolve_alias_map(alias_map, truth)
    if count_as_zero or not raw_items:
        return ContaminationReport([], 0, 0, 0.0, False)
    unique_items = _dedupe(raw_items)

    rec = node_recall(raw_items, truth, alias_map)
    by_key = {n.key: n for n in truth.nodes}
    mapped = {}
    for name in unique_items:
        key = normalize_name(name).key
        if key in aliases:
            mapped[name] = by_key[aliases[key]]
    if case_sensitive:
        same = sum(normalize_name(g).text == t.text for g, t in mapped.items())
    else:
        same = sum(normalize_name(g).key == t.key for g, t in mapped.items())
    exact = bool(mapped) and same / len(mapped) >= exact_threshold

    mentions = 0
    edges = set()
    for a, b in parse_arrow_edges(edges_reply):
        ka, kb = normalize_name(a).key, normalize_name(b).key
        if ka in aliases and kb in aliases:
            mentions += 1
            if aliases[ka] != aliases[kb]:
                edges.add(DirectedEdge(by_key[aliases[ka]], by_key[aliases[kb]]))
    analysis = evaluate(truth.with_edges(edges), truth)
    return ContaminationReport(
        generated_nodes=unique_items,
        generated_count=rec.generated_count,
        matched_count=rec.matched_count,
        recall=rec.recall,
        exact_name_match=exact,
        edge_analysis=analysis,
        edge_ratio=mentions / len(truth.edges) if truth.edges else None,
        edge_mentions=mentions,
    )
