"""Three-prompt baseline: Understand, Causal Discovery, Revision on one conversation."""

from __future__ import annotations

import logging
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .bn import BayesianNetworkStructure, DirectedEdge, NodeName, break_cycles, normalize_name
from .delphi import DroppedEdge, reconcile_node_names, resolve_name
from .llm import ChatBackend, ChatConversation
from .prompts import prompt

log = logging.getLogger(__name__)

SENTINEL = "*"
PLACEHOLDER_VALUES = ("yes", "no")

REVISION_TAGS = "edge-tags"
REVISION_LINES = "arrow-lines"
REVISION_FALLBACK = "kept-discovery"

_EDGE_TAG = re.compile(r"<edge>(.*?)(?:</edge>|<\\\\edge>|<\\edge>)", re.DOTALL | re.IGNORECASE)
_ARROW = re.compile(r"\s*(?:→|->)\s*")
_LIST_MARK = re.compile(r"^\s*(?:[-*•]+|\d+[.)]|\(\d+\))?\s*")
_NEGATIVE = re.compile(
    r"\b(incorrect|not correct|wrong|false|invalid|inaccurate|not accurate|unlikely|remove[ds]?"
    r"|no direct|not (?:a )?direct|does not|doesn't|should be reversed|reversed)\b",
    re.IGNORECASE,
)


class UnderstandError(RuntimeError):
    """The model gave no usable explanation of the variables."""


@dataclass
class HarnessRun:
    conversation: ChatConversation
    node_meanings: dict[str, str]
    discovered_edges: frozenset[DirectedEdge]
    revised_edges: frozenset[DirectedEdge]
    final_edges: frozenset[DirectedEdge]
    dropped: list[DroppedEdge] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def rows(edges):
            return [[e.source.text, e.target.text] for e in sorted(edges, key=lambda e: (e.source.key, e.target.key))]

        return {
            "node_meanings": dict(self.node_meanings),
            "discovered_edges": rows(self.discovered_edges),
            "revised_edges": rows(self.revised_edges),
            "final_edges": rows(self.final_edges),
            "dropped": [d.to_dict() for d in self.dropped],
            "diagnostics": dict(self.diagnostics),
            "conversation": self.conversation.to_dict(),
        }


def variables_for(structure: BayesianNetworkStructure) -> list[tuple[str, tuple[str, ...]]]:
    """Variable names with their state lists; ``yes,no`` when states are unknown."""
    out = []
    for node in structure.nodes:
        states = tuple(structure.states.get(node, ()) or ())
        if not states:
            log.info("no states for %r; using placeholder values %s", node.text, ",".join(PLACEHOLDER_VALUES))
            states = PLACEHOLDER_VALUES
        out.append((node.text, states))
    return out


def format_variables(variables: Sequence[tuple[str, Sequence[str]]]) -> str:
    lines = []
    for name, values in variables:
        if not values:
            raise ValueError(f"variable {name!r} has no values")
        lines.append(f"variable {name}, values {', '.join(values)}")
    return "\n".join(lines)


def split_meanings(reply: str, names: Sequence[str]) -> dict[str, str]:
    """Best-effort per-variable split of an explanation reply.

    A block (paragraph or list item) belongs to the variable named at its
    start. If no block can be attributed the whole reply is kept under ``*``.
    """
    blocks = [b.strip() for b in re.split(r"\n\s*\n|\n(?=\s*(?:[-*•]|\d+[.)]))", reply) if b.strip()]
    by_len = sorted(names, key=len, reverse=True)
    meanings: dict[str, str] = {}
    for block in blocks:
        head = _LIST_MARK.sub("", block).lstrip("*_ #`").lower()
        for name in by_len:
            low = name.lower()
            if head.startswith(low) and not head[len(low) : len(low) + 1].isalnum():
                meanings.setdefault(name, block)
                break
    if not meanings:
        return {SENTINEL: reply.strip()}
    return {n: meanings[n] for n in names if n in meanings}


def _conversation(target: ChatBackend | ChatConversation) -> ChatConversation:
    if isinstance(target, ChatConversation):
        return target
    return ChatConversation(target, "harness")


def run_understand(
    target: ChatBackend | ChatConversation,
    domain: str,
    variables: Sequence[tuple[str, Sequence[str]]],
    *,
    templates: str | Path | None = None,
) -> dict[str, str]:
    """Send the Understand prompt and return the variable explanations.

    Raises:
        ValueError: a variable without values.
        UnderstandError: empty reply.
    """
    conv = _conversation(target)
    reply = conv.send(prompt("harness_understand", templates, domain=domain, variables=format_variables(variables)))
    if not reply.strip():
        raise UnderstandError("the model returned an empty explanation of the variables")
    return split_meanings(reply, [name for name, _ in variables])


def parse_edge_tags(reply: str) -> list[DirectedEdge]:
    """Edges written as ``<edge>A→B</edge>``, in order of first appearance.

    ``->`` works as the arrow; ``</edge>``, ``<\\edge>`` and ``<\\\\edge>``
    all close a tag. Tags without exactly one arrow are skipped with a warning.
    """
    edges: list[DirectedEdge] = []
    seen = set()
    for m in _EDGE_TAG.finditer(reply):
        parts = _ARROW.split(m.group(1).strip())
        if len(parts) != 2 or not all(p.strip() for p in parts):
            log.warning("skipping malformed edge tag %r", m.group(0))
            continue
        try:
            edge = DirectedEdge.of(parts[0], parts[1])
        except ValueError as exc:
            log.warning("skipping edge tag %r: %s", m.group(0), exc)
            continue
        if edge not in seen:
            seen.add(edge)
            edges.append(edge)
    return edges


def format_edge_tags(edges: Sequence[DirectedEdge]) -> str:
    return "\n".join(f"<edge>{e.source.text}→{e.target.text}</edge>" for e in edges)


def _prefix_node(text: str, nodes: Sequence[NodeName]) -> tuple[NodeName | None, str]:
    """Longest canonical name opening ``text``; returns it and the remainder."""
    low = text.lower()
    for node in sorted(nodes, key=lambda n: len(n.text), reverse=True):
        name = node.text.lower()
        if low.startswith(name) and not low[len(name) : len(name) + 1].isalnum():
            return node, text[len(name) :]
    head = re.split(r"\s*(?::|\s-\s|\(|,|;|\*\*)", text, maxsplit=1)[0]
    node, _ = resolve_name(head, nodes) if head.strip() else (None, None)
    return node, text[len(head) :]


def _suffix_node(text: str, nodes: Sequence[NodeName]) -> NodeName | None:
    low = text.lower()
    for node in sorted(nodes, key=lambda n: len(n.text), reverse=True):
        name = node.text.lower()
        if low.endswith(name) and not low[: -len(name)][-1:].isalnum():
            return node
    node, _ = resolve_name(text, nodes) if text.strip() else (None, None)
    return node


def _line_edges(line: str, nodes: Sequence[NodeName]) -> list[tuple[DirectedEdge, str]]:
    """Every ``A → B`` statement in a line with the text that follows it."""
    out = []
    pieces = _ARROW.split(line)
    for i in range(len(pieces) - 1):
        left = pieces[i]
        if i:
            # earlier arrow's target and trailing commentary share this piece
            left = re.split(r"(?::|;|,|\bto\b|\bbe\b|\bis\b)\s*", left)[-1]
        left = _LIST_MARK.sub("", left).strip(" *_`\"'")
        src = _suffix_node(left, nodes)
        tgt, rest = _prefix_node(pieces[i + 1].lstrip(" *_`\"'"), nodes)
        if src is not None and tgt is not None and src != tgt:
            out.append((DirectedEdge(src, tgt), rest))
    return out


def _strip_names(line: str, nodes: Sequence[NodeName]) -> str:
    """The line with node names removed, so names cannot read as verdicts."""
    for node in sorted(nodes, key=lambda n: len(n.text), reverse=True):
        line = re.sub(re.escape(node.text), " ", line, flags=re.IGNORECASE)
    return line


def parse_revision(reply: str, nodes: Sequence[str | NodeName]) -> tuple[str, frozenset[DirectedEdge], list[DroppedEdge]]:
    """Interpret the Revision reply.

    Edge tags win when present. Otherwise each line holding an ``A → B``
    statement is a verdict: kept unless it carries a negative word, in which
    case a second statement on the same line is taken as the correction.
    With neither, the policy is ``kept-discovery`` and the edge set is empty.
    """
    canonical = [normalize_name(n) for n in nodes]
    tags = parse_edge_tags(reply)
    if tags:
        rec = reconcile_node_names([(e.source.text, e.target.text) for e in tags], canonical)
        return REVISION_TAGS, rec.edge_set, rec.dropped
    kept: set[DirectedEdge] = set()
    found = False
    for line in reply.splitlines():
        stated = _line_edges(line, canonical)
        if not stated:
            continue
        found = True
        first, _ = stated[0]
        if _NEGATIVE.search(_strip_names(line, canonical)):
            kept.update(edge for edge, _ in stated[1:])
        else:
            kept.add(first)
    if not found:
        return REVISION_FALLBACK, frozenset(), []
    return REVISION_LINES, frozenset(kept), []


def run_harness(
    backend: ChatBackend,
    domain: str,
    variables: Sequence[tuple[str, Sequence[str]]],
    truth_nodes: Sequence[str | NodeName] | None = None,
    *,
    templates: str | Path | None = None,
) -> HarnessRun:
    """Understand, Causal Discovery, Revision; then break any remaining cycle.

    ``truth_nodes`` defaults to the variable names. Discovered names are
    snapped onto them with the same reconciliation the expert method uses.
    """
    nodes = [normalize_name(n) for n in (truth_nodes if truth_nodes is not None else [v for v, _ in variables])]
    conv = ChatConversation(backend, "harness")
    meanings = run_understand(conv, domain, variables, templates=templates)

    discovery_reply = conv.send(prompt("harness_discovery", templates))
    tagged = parse_edge_tags(discovery_reply)
    rec = reconcile_node_names([(e.source.text, e.target.text) for e in tagged], nodes)
    discovered = rec.edge_set
    dropped = list(rec.dropped)

    statements = "\n".join(f"{e.source.text} → {e.target.text}" for e in rec.edges)
    if not statements:
        statements = "(no causal statements were proposed)"
    revision_reply = conv.send(prompt("harness_revision", templates, statements=statements))
    policy, revised, rev_dropped = parse_revision(revision_reply, nodes)
    dropped.extend(rev_dropped)
    if policy == REVISION_FALLBACK:
        log.info("revision reply had no edge statements; keeping the discovered edges")
        revised = discovered

    final = break_cycles({e: 1 for e in revised})
    diagnostics = {
        "revision_policy": policy,
        "cycles_broken": len(revised) - len(final),
        "invented_node_drops": sum(d.reason == "invented-node" for d in dropped),
        "discovered": len(discovered),
        "revised": len(revised),
    }
    return HarnessRun(conv, meanings, discovered, frozenset(revised), final, dropped, diagnostics)
