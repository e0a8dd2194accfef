"""Multi-expert structure elicitation with majority voting.

A facilitator conversation writes expert personas; each persona becomes the
system message of an independent expert conversation that proposes directed
edges over a fixed node list. Proposed names are snapped onto the canonical
nodes, mutual pairs are settled by asking the same expert, and the final
structure keeps the edges a strict majority voted for.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from rapidfuzz.distance import Levenshtein

from .bn import DirectedEdge, NodeName, break_cycles, normalize_name
from .llm import ChatBackend, ChatConversation, JSONExtractionError, ReplayError, extract_json_block
from .prompts import prompt

log = logging.getLogger(__name__)

DEFAULT_N_EXPERTS = 7
DEFAULT_N_PROFILES = 9
REASK_SUFFIX = "Return exactly the JSON schema requested"

INVENTED_NODE = "invented-node"
SELF_LOOP = "self-loop"
MALFORMED_PAIR = "malformed-pair"


class ConfigurationError(ValueError):
    pass


class ProfileParseError(ValueError):
    pass


@dataclass(frozen=True)
class ExpertProfile:
    id: int
    description: str

    def __post_init__(self):
        if not self.description.strip():
            raise ValueError(f"expert profile {self.id} has an empty description")


@dataclass(frozen=True)
class DroppedEdge:
    raw: tuple
    reason: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"raw": list(self.raw), "reason": self.reason, "detail": self.detail}


@dataclass
class ReconciledEdges:
    """Edges in first-seen order, plus what was dropped and what was fuzzy-mapped."""

    edges: list[DirectedEdge]
    dropped: list[DroppedEdge]
    mapped: dict[str, str] = field(default_factory=dict)

    @property
    def edge_set(self) -> frozenset[DirectedEdge]:
        return frozenset(self.edges)


@dataclass
class TwoCycleResolution:
    edges: list[DirectedEdge]
    resolved: int
    fallbacks: list[str]


@dataclass
class ExpertElicitation:
    profile: ExpertProfile
    conversation: ChatConversation
    raw_edges: list[tuple[str, str]]
    reconciled_edges: frozenset[DirectedEdge]
    dropped: list[DroppedEdge]
    two_cycles_resolved: int = 0
    refused: bool = False
    refusal_reason: str = ""
    mapped_names: dict[str, str] = field(default_factory=dict)
    decycle_fallbacks: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "profile": {"id": self.profile.id, "description": self.profile.description},
            "raw_edges": [list(p) for p in self.raw_edges],
            "reconciled_edges": _edge_rows(self.reconciled_edges),
            "dropped": [d.to_dict() for d in self.dropped],
            "two_cycles_resolved": self.two_cycles_resolved,
            "refused": self.refused,
            "refusal_reason": self.refusal_reason,
            "mapped_names": dict(sorted(self.mapped_names.items())),
            "decycle_fallbacks": list(self.decycle_fallbacks),
            "conversation": self.conversation.to_dict(),
        }


@dataclass
class VoteResult:
    vote_counts: dict[DirectedEdge, int]
    final_edges: frozenset[DirectedEdge]
    n_voters: int
    cycles_broken: int


@dataclass
class ElicitationResult:
    per_expert: list[ExpertElicitation]
    vote_counts: dict[DirectedEdge, int]
    final_edges: frozenset[DirectedEdge]
    diagnostics: dict
    profiles: list[ExpertProfile] = field(default_factory=list)

    @property
    def n_experts(self) -> int:
        return len(self.per_expert)

    def to_dict(self) -> dict:
        votes = sorted(self.vote_counts.items(), key=lambda kv: _edge_sort_key(kv[0]))
        return {
            "n_experts": self.n_experts,
            "profiles": [{"id": p.id, "description": p.description} for p in self.profiles],
            "per_expert": [e.to_dict() for e in self.per_expert],
            "vote_counts": [[e.source.text, e.target.text, c] for e, c in votes],
            "final_edges": _edge_rows(self.final_edges),
            "diagnostics": dict(self.diagnostics),
        }


def _edge_sort_key(e: DirectedEdge) -> tuple[str, str]:
    return (e.source.key, e.target.key)


def _edge_rows(edges: Iterable[DirectedEdge]) -> list[list[str]]:
    return [[e.source.text, e.target.text] for e in sorted(edges, key=_edge_sort_key)]


def format_node_list(nodes: Sequence[str | NodeName]) -> str:
    return ",".join(f"< {normalize_name(n).text} >" for n in nodes)


# -- facilitator ----------------------------------------------------------------

_EXPERT_KEY = re.compile(r"^expert_(\d+)$")


def _profile_text(value) -> str:
    if isinstance(value, str):
        return value.strip()
    if isinstance(value, dict):
        return "; ".join(f"{k}: {_profile_text(v)}" for k, v in value.items())
    if isinstance(value, list):
        return "; ".join(_profile_text(v) for v in value)
    return str(value)


def parse_profiles(reply: str, n_profiles: int = DEFAULT_N_PROFILES) -> list[ExpertProfile]:
    """Read ``{"expert_1": ..., "expert_n": ...}`` into profiles ordered by index.

    Raises:
        ProfileParseError: no JSON object, wrong or extra keys, empty description.
    """
    try:
        data = extract_json_block(reply)
    except JSONExtractionError as exc:
        raise ProfileParseError(str(exc)) from exc
    if not isinstance(data, dict):
        raise ProfileParseError(f"expected a JSON object of profiles, got {type(data).__name__}")
    indexed = {}
    for key, value in data.items():
        m = _EXPERT_KEY.match(str(key).strip().lower())
        if m is None:
            raise ProfileParseError(f"unexpected profile key {key!r}")
        indexed[int(m.group(1))] = _profile_text(value)
    if sorted(indexed) != list(range(1, n_profiles + 1)):
        raise ProfileParseError(f"expected keys expert_1..expert_{n_profiles}, got {len(indexed)} profile(s)")
    try:
        return [ExpertProfile(i, indexed[i]) for i in range(1, n_profiles + 1)]
    except ValueError as exc:
        raise ProfileParseError(str(exc)) from exc


def generate_expert_profiles(
    facilitator: ChatBackend,
    knowledge_area: str,
    bn_task: str,
    *,
    n_profiles: int = DEFAULT_N_PROFILES,
    templates: str | Path | None = None,
    conversation: ChatConversation | None = None,
) -> list[ExpertProfile]:
    """Ask the facilitator for ``n_profiles`` expert personas.

    Two prompts on one conversation: the qualities the experts need, then the
    profiles as JSON. A malformed second reply gets one re-ask.

    Raises:
        ValueError: empty knowledge area or task.
        ProfileParseError: the re-ask also failed.
    """
    if not knowledge_area.strip() or not bn_task.strip():
        raise ValueError("knowledge_area and bn_task must be non-empty")
    conv = conversation or ChatConversation(
        facilitator, "facilitator", system=prompt("facilitator_system", templates)
    )
    values = {"knowledge_area": knowledge_area, "main_task": bn_task, "n_profiles": n_profiles}
    conv.send(prompt("facilitator_qualities", templates, **values))
    profiles_prompt = prompt("facilitator_profiles", templates, **values)
    reply = conv.send(profiles_prompt)
    try:
        return parse_profiles(reply, n_profiles)
    except ProfileParseError as first:
        log.warning("facilitator profiles unparseable, re-asking: %s", first)
    reply = conv.send(f"{profiles_prompt}\n\n{REASK_SUFFIX}")
    return parse_profiles(reply, n_profiles)


# -- name reconciliation ----------------------------------------------------------


def match_threshold(raw_key: str) -> int:
    return max(2, math.ceil(0.25 * len(raw_key)))


def resolve_name(raw: str, canonical: Sequence[NodeName]) -> tuple[NodeName | None, int | None]:
    """Snap ``raw`` onto a canonical node.

    Exact normalized-key match first; otherwise the unique closest key by
    Levenshtein distance, if within ``match_threshold``. Returns the node (or
    None) and the distance used (0 for exact, None when unresolved).
    """
    try:
        key = normalize_name(raw).key
    except ValueError:
        return None, None
    for node in canonical:
        if node.key == key:
            return node, 0
    dists = [Levenshtein.distance(key, node.key) for node in canonical]
    best = min(dists)
    if best <= match_threshold(key) and dists.count(best) == 1:
        return canonical[dists.index(best)], best
    return None, None


def reconcile_node_names(raw_edges: Iterable, canonical: Sequence[str | NodeName]) -> ReconciledEdges:
    """Map raw ``(source, target)`` pairs onto canonical nodes.

    Pairs with an unresolvable endpoint are dropped as invented nodes; pairs
    that collapse onto one node are dropped as self-loops; duplicates after
    mapping are kept once, in first-seen position.
    """
    nodes = [normalize_name(n) for n in canonical]
    if not nodes:
        raise ValueError("canonical node list is empty")
    edges: list[DirectedEdge] = []
    seen: set[DirectedEdge] = set()
    dropped: list[DroppedEdge] = []
    mapped: dict[str, str] = {}
    for pair in raw_edges:
        pair = tuple(pair)
        if len(pair) != 2 or not all(isinstance(x, str) for x in pair):
            dropped.append(DroppedEdge(pair, MALFORMED_PAIR, f"expected 2 names, got {len(pair)} item(s)"))
            continue
        ends = []
        for raw in pair:
            node, dist = resolve_name(raw, nodes)
            if node is None:
                break
            if dist:
                mapped[raw] = node.text
            ends.append(node)
        if len(ends) < 2:
            dropped.append(DroppedEdge(pair, INVENTED_NODE, f"no canonical node for {pair[len(ends)]!r}"))
            continue
        if ends[0] == ends[1]:
            dropped.append(DroppedEdge(pair, SELF_LOOP, f"both ends map to {ends[0].text!r}"))
            continue
        edge = DirectedEdge(ends[0], ends[1])
        if edge not in seen:
            seen.add(edge)
            edges.append(edge)
    return ReconciledEdges(edges, dropped, mapped)


# -- per-expert decycling -----------------------------------------------------------


def _decycle_answer(reply: str, a: NodeName, b: NodeName) -> DirectedEdge | None:
    try:
        data = extract_json_block(reply)
    except JSONExtractionError:
        return None
    if isinstance(data, list) and len(data) == 1 and isinstance(data[0], list):
        data = data[0]
    if not (isinstance(data, list) and len(data) == 2 and all(isinstance(x, str) for x in data)):
        return None
    src, _ = resolve_name(data[0], [a, b])
    tgt, _ = resolve_name(data[1], [a, b])
    if src is None or tgt is None or src == tgt:
        return None
    return DirectedEdge(src, tgt)


def resolve_two_cycles(
    conversation: ChatConversation,
    edges: Sequence[DirectedEdge],
    *,
    templates: str | Path | None = None,
) -> TwoCycleResolution:
    """Ask the expert to pick one direction for every mutual pair.

    Pairs are visited in first-seen order on the expert's own conversation.
    An unusable answer keeps the direction that appeared first.
    """
    present = set(edges)
    removed: set[DirectedEdge] = set()
    resolved = 0
    fallbacks = []
    for edge in edges:
        if edge in removed or edge.reversed not in present or edge.reversed in removed:
            continue
        a, b = edge.source, edge.target
        reply = conversation.send(prompt("decycle", templates, node_a=a.text, node_b=b.text))
        chosen = _decycle_answer(reply, a, b)
        if chosen is None:
            chosen = edge
            note = f"decycle reply for {a.text!r}/{b.text!r} unusable; kept first-seen {edge}"
            log.warning(note)
            fallbacks.append(note)
        removed.add(chosen.reversed)
        resolved += 1
    return TwoCycleResolution([e for e in edges if e not in removed], resolved, fallbacks)


# -- single expert --------------------------------------------------------------------


def _pairs_from_json(data) -> list | None:
    if isinstance(data, dict):
        lists = [v for v in data.values() if isinstance(v, list)]
        if len(lists) != 1:
            return None
        data = lists[0]
    if not isinstance(data, list):
        return None
    if len(data) == 2 and all(isinstance(x, str) for x in data):
        return [data]
    return data


def elicit_expert_structure(
    backend: ChatBackend,
    profile: ExpertProfile,
    nodes: Sequence[str | NodeName],
    *,
    templates: str | Path | None = None,
    decycle: bool = True,
) -> ExpertElicitation:
    """Run one expert: reasoning prompt, JSON prompt, reconciliation, decycling.

    A reply with no usable JSON is a refusal and contributes an empty edge list.
    """
    canonical = [normalize_name(n) for n in nodes]
    if len(canonical) < 2:
        raise ValueError("need at least two nodes")
    conv = ChatConversation(
        backend, f"expert-{profile.id}", system=prompt("expert_system", templates, profile=profile.description)
    )
    node_list = format_node_list(canonical)
    conv.send(prompt("expert_reasoning", templates, node_list=node_list))
    reply = conv.send(prompt("expert_json", templates, node_list=node_list))

    try:
        pairs = _pairs_from_json(extract_json_block(reply))
        reason = "" if pairs is not None else "JSON is not a list of pairs"
    except JSONExtractionError as exc:
        pairs, reason = None, str(exc)
    if pairs is None:
        log.info("expert %d refused or returned no edge list: %s", profile.id, reason)
        return ExpertElicitation(profile, conv, [], frozenset(), [], refused=True, refusal_reason=reason)

    raw_edges = [tuple(p) for p in pairs if isinstance(p, list) and len(p) == 2 and all(isinstance(x, str) for x in p)]
    rec = reconcile_node_names([tuple(p) if isinstance(p, list) else (p,) for p in pairs], canonical)
    resolution = TwoCycleResolution(rec.edges, 0, [])
    if decycle:
        resolution = resolve_two_cycles(conv, rec.edges, templates=templates)
    return ExpertElicitation(
        profile,
        conv,
        raw_edges,
        frozenset(resolution.edges),
        rec.dropped,
        two_cycles_resolved=resolution.resolved,
        mapped_names=rec.mapped,
        decycle_fallbacks=resolution.fallbacks,
    )


def _failed_expert(backend: ChatBackend, profile: ExpertProfile, exc: Exception) -> ExpertElicitation:
    conv = ChatConversation(backend, f"expert-{profile.id}")
    return ExpertElicitation(
        profile, conv, [], frozenset(), [], refused=True, refusal_reason=f"{type(exc).__name__}: {exc}"
    )


def elicit_experts(
    backend: ChatBackend,
    profiles: Sequence[ExpertProfile],
    nodes: Sequence[str | NodeName],
    *,
    parallelism: int = 1,
    templates: str | Path | None = None,
) -> list[ExpertElicitation]:
    """Elicit every profile independently, returned in profile order.

    A hard failure of one expert (backend error, bad reply shape) becomes a
    refusal so it cannot abort the run. Replay errors are not downgraded: they
    mean the run is not the recorded one.
    """
    if parallelism < 1:
        raise ConfigurationError("parallelism must be >= 1")

    def one(profile: ExpertProfile) -> ExpertElicitation:
        try:
            return elicit_expert_structure(backend, profile, nodes, templates=templates)
        except ReplayError:
            raise
        except Exception as exc:  # noqa: BLE001 - isolate one expert's failure
            log.error("expert %d failed, counted as refusal: %s", profile.id, exc)
            return _failed_expert(backend, profile, exc)

    if parallelism == 1 or len(profiles) <= 1:
        return [one(p) for p in profiles]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, profiles))


# -- voting -------------------------------------------------------------------------


def majority_vote(expert_edge_sets: Sequence[Iterable[DirectedEdge]]) -> VoteResult:
    """Keep edges proposed by more than half of the experts.

    Any longer cycle among the survivors is broken by removing the
    least-voted cycle edges first.

    Raises:
        ConfigurationError: no experts, or an even number of them.
    """
    n = len(expert_edge_sets)
    if n < 1 or n % 2 == 0:
        raise ConfigurationError(f"number of experts must be odd and >= 1, got {n}")
    counts: Counter[DirectedEdge] = Counter()
    for edges in expert_edge_sets:
        counts.update(set(edges))
    winners = {e: c for e, c in counts.items() if 2 * c > n}
    final = break_cycles(winners)
    return VoteResult(dict(counts), final, n, len(winners) - len(final))


def aggregate(elicitations: Sequence[ExpertElicitation]) -> ElicitationResult:
    vote = majority_vote([e.reconciled_edges for e in elicitations])
    diagnostics = {
        "n_experts": vote.n_voters,
        "post_vote_cycles_broken": vote.cycles_broken,
        "experts_refused": sum(e.refused for e in elicitations),
        "two_cycles_resolved": sum(e.two_cycles_resolved for e in elicitations),
        "invented_node_drops": sum(d.reason == INVENTED_NODE for e in elicitations for d in e.dropped),
        "decycle_fallbacks": sum(len(e.decycle_fallbacks) for e in elicitations),
    }
    return ElicitationResult(list(elicitations), vote.vote_counts, vote.final_edges, diagnostics)


def select_profiles(
    profiles: Sequence[ExpertProfile], n_experts: int | None, subset: Sequence[int] | None = None
) -> list[ExpertProfile]:
    """The first ``n_experts`` profiles, or the ones whose ids are in ``subset``."""
    by_id = {p.id: p for p in profiles}
    if subset is not None:
        missing = [i for i in subset if i not in by_id]
        if missing:
            raise ConfigurationError(f"profile ids not available: {missing}")
        if n_experts is not None and len(subset) != n_experts:
            raise ConfigurationError(f"subset has {len(subset)} ids but n_experts is {n_experts}")
        chosen = [by_id[i] for i in sorted(set(subset))]
    else:
        if n_experts is None or n_experts > len(profiles):
            raise ConfigurationError(f"cannot pick {n_experts} experts from {len(profiles)} profiles")
        chosen = list(profiles[:n_experts])
    if len(chosen) % 2 == 0:
        raise ConfigurationError(f"number of experts must be odd, got {len(chosen)}")
    return chosen


def run_delphi(
    backend: ChatBackend,
    nodes: Sequence[str | NodeName],
    knowledge_area: str,
    bn_task: str,
    *,
    n_experts: int | None = DEFAULT_N_EXPERTS,
    profile_subset: Sequence[int] | None = None,
    facilitator: ChatBackend | None = None,
    n_profiles: int = DEFAULT_N_PROFILES,
    parallelism: int = 1,
    templates: str | Path | None = None,
) -> ElicitationResult:
    """Profiles, subset selection, independent experts, vote.

    ``facilitator`` defaults to ``backend``. Under a replay backend the whole
    pipeline is deterministic because every conversation has its own stream.
    """
    if n_experts is not None and (n_experts < 1 or n_experts % 2 == 0):
        raise ConfigurationError(f"n_experts must be odd and >= 1, got {n_experts}")
    if n_experts is not None and n_experts > n_profiles:
        raise ConfigurationError(f"n_experts={n_experts} exceeds the {n_profiles} generated profiles")
    profiles = generate_expert_profiles(
        facilitator or backend, knowledge_area, bn_task, n_profiles=n_profiles, templates=templates
    )
    chosen = select_profiles(profiles, n_experts, profile_subset)
    elicitations = elicit_experts(backend, chosen, nodes, parallelism=parallelism, templates=templates)
    result = aggregate(elicitations)
    result.profiles = profiles
    return result
