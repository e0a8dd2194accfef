from __future__ import annotations

import json
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delphibn.bn import DirectedEdge, normalize_name
from delphibn.delphi import (
    INVENTED_NODE,
    MALFORMED_PAIR,
    REASK_SUFFIX,
    SELF_LOOP,
    ConfigurationError,
    ExpertProfile,
    ProfileParseError,
    elicit_expert_structure,
    elicit_experts,
    format_node_list,
    generate_expert_profiles,
    majority_vote,
    match_threshold,
    parse_profiles,
    reconcile_node_names,
    resolve_name,
    resolve_two_cycles,
    run_delphi,
    select_profiles,
)
from delphibn.llm import (
    ChatConversation,
    RecordingBackend,
    ReplayBackend,
    ReplayDivergenceError,
    ScriptedBackend,
    Transcript,
    extract_json_block,
)

from scripted import DelphiScript, profiles_reply

NODES = ["Smoker", "Pollution", "Cancer", "Xray", "Dyspnoea"]


def E(a, b):
    return DirectedEdge.of(a, b)


def test_format_node_list():
    assert format_node_list(["A", " b  c "]) == "< A >,< b c >"


def test_parse_profiles_nine_keys_in_order():
    profiles = parse_profiles(profiles_reply(9), 9)
    assert [p.id for p in profiles] == list(range(1, 10))
    assert profiles[0].description.startswith("Expert 1:")
    nested = json.dumps({f"expert_{i}": {"field": "x", "years": i} for i in range(1, 4)})
    assert parse_profiles(nested, 3)[2].description == "field: x; years: 3"


@pytest.mark.parametrize(
    "reply",
    [profiles_reply(7), "no json at all", '["a", "b"]', json.dumps({"expert_1": "a", "chair": "b"}),
     json.dumps({f"expert_{i}": "" if i == 2 else "x" for i in range(1, 10)})],
)
def test_parse_profiles_rejects(reply):
    with pytest.raises(ProfileParseError):
        parse_profiles(reply, 9)


def test_facilitator_reasks_once_then_fails():
    calls = []

    def reply(messages):
        calls.append(messages[-1].content)
        if "Think step-by-step" in messages[-1].content:
            return "qualities"
        return profiles_reply(7)

    with pytest.raises(ProfileParseError):
        generate_expert_profiles(ScriptedBackend(reply), "medicine", "diagnose cancer")
    assert len(calls) == 3
    assert calls[2].endswith(REASK_SUFFIX)

    fixed = iter([profiles_reply(7), profiles_reply(9)])
    b = ScriptedBackend(lambda m: "q" if "Think step-by-step" in m[-1].content else next(fixed))
    assert len(generate_expert_profiles(b, "medicine", "diagnose cancer")) == 9


def test_facilitator_prompts_mention_inputs():
    seen = []
    b = ScriptedBackend(lambda m: seen.append(m[-1].content) or profiles_reply(9))
    generate_expert_profiles(b, "oncology", "find the causes of lung cancer")
    assert "oncology" in seen[0] and "find the causes of lung cancer" in seen[0]
    with pytest.raises(ValueError):
        generate_expert_profiles(b, " ", "task")


def test_match_threshold():
    assert match_threshold("ab") == 2
    assert match_threshold("a" * 12) == 3
    assert match_threshold("a" * 13) == 4


def test_resolve_name_exact_fuzzy_and_ambiguous():
    nodes = [normalize_name(n) for n in ["Smoker", "Cancer", "Lung", "Lungs2"]]
    assert resolve_name("SMOKER", nodes) == (nodes[0], 0)
    assert resolve_name("Smokerr", nodes) == (nodes[0], 1)
    assert resolve_name("Astronaut", nodes) == (None, None)
    # "Lungx" is one edit from "lung" and two from "lungs2": unique minimum
    assert resolve_name("Lungx", nodes)[0] == nodes[2]
    tie = [normalize_name(n) for n in ["cat", "car"]]
    assert resolve_name("caz", tie) == (None, None)


def test_reconcile_drop_reasons():
    rec = reconcile_node_names(
        [("Smokerr", "Cancer"), ("Smoker", "Astronaut"), ("Cancer", "cancer "), ("A", "B", "C"),
         ("smoker", "CANCER")],
        NODES,
    )
    assert rec.edges == [E("Smoker", "Cancer")]
    assert [d.reason for d in rec.dropped] == [INVENTED_NODE, SELF_LOOP, MALFORMED_PAIR]
    assert rec.mapped == {"Smokerr": "Smoker"}
    with pytest.raises(ValueError):
        reconcile_node_names([], [])


def test_reconcile_urinary_reply_drops_invented_endpoints(fixtures):
    nodes = json.loads((fixtures / "urinary_nodes.json").read_text())
    pairs = extract_json_block((fixtures / "urinary_llama2_reply.txt").read_text())
    rec = reconcile_node_names(pairs, nodes)
    assert len(pairs) == 36
    assert rec.edges == []
    assert {d.reason for d in rec.dropped} == {INVENTED_NODE}
    assert rec.mapped["Diarrhea"] == "Diarrhoea"


def test_reconcile_hailfinder_reply_keeps_every_pair(fixtures):
    nodes = json.loads((fixtures / "hailfinder_nodes.json").read_text())
    pairs = extract_json_block((fixtures / "hailfinder_reply.txt").read_text())
    rec = reconcile_node_names(pairs, nodes)
    assert len(pairs) == len(rec.edges) == 52
    keys = {normalize_name(n).key for n in nodes}
    assert all(e.source.key in keys and e.target.key in keys for e in rec.edges)


def _decycle_conv(reply):
    return ChatConversation(ScriptedBackend(lambda m: reply), "expert-1", system="s")


def test_resolve_two_cycles_asks_expert():
    edges = [E("A", "B"), E("C", "D"), E("B", "A")]
    res = resolve_two_cycles(_decycle_conv('```json\n["B", "A"]\n```'), edges)
    assert res.edges == [E("C", "D"), E("B", "A")]
    assert res.resolved == 1 and res.fallbacks == []


def test_resolve_two_cycles_fallback_keeps_first_seen():
    res = resolve_two_cycles(_decycle_conv("I cannot decide."), [E("A", "B"), E("B", "A")])
    assert res.edges == [E("A", "B")]
    assert len(res.fallbacks) == 1


def test_expert_structure_pipeline():
    script = DelphiScript({1: [["Smokerr", "Cancer"], ["Cancer", "Smoker"], ["Cancer", "Moon"]]},
                          decycle={1: ["Smoker", "Cancer"]})
    out = elicit_expert_structure(ScriptedBackend(script), ExpertProfile(1, "Expert 1: x"), NODES)
    assert out.reconciled_edges == {E("Smoker", "Cancer")}
    assert out.two_cycles_resolved == 1
    assert [d.reason for d in out.dropped] == [INVENTED_NODE]
    assert not out.refused
    prompts = out.conversation.user_prompts()
    assert "< Smoker >,< Pollution >" in prompts[0]
    assert out.conversation.conversation_id == "expert-1"


@pytest.mark.parametrize("reply", ["As an expert I decline to answer.", '{"note": "none"}', '"text"'])
def test_expert_without_edge_list_is_refusal(reply):
    out = elicit_expert_structure(ScriptedBackend(DelphiScript({1: reply})), ExpertProfile(1, "Expert 1: x"), NODES)
    assert out.refused and out.reconciled_edges == frozenset()


def test_expert_failure_isolated_but_replay_errors_propagate():
    def flaky(messages):
        if "Expert 2" in messages[0].content:
            raise RuntimeError("server down")
        return DelphiScript({1: [["Smoker", "Cancer"]], 3: [["Smoker", "Cancer"]]})(messages)

    profiles = [ExpertProfile(i, f"Expert {i}: x") for i in (1, 2, 3)]
    outs = elicit_experts(ScriptedBackend(flaky), profiles, NODES, parallelism=3)
    assert [o.refused for o in outs] == [False, True, False]
    assert "server down" in outs[1].refusal_reason

    with pytest.raises(ReplayDivergenceError):
        t = Transcript()
        elicit_experts(RecordingBackend(ScriptedBackend(DelphiScript({})), t), profiles[:1], NODES)
        elicit_experts(ReplayBackend(t), profiles[:1], ["Other", "Nodes"])


def test_majority_vote_five_experts():
    ab, bc, ca = E("A", "B"), E("B", "C"), E("C", "A")
    sets = [{ab, bc}, {ab, bc}, {ab}, {bc, ca}, set()]
    vote = majority_vote(sets)
    assert vote.vote_counts[ab] == 3 and vote.vote_counts[bc] == 3
    assert vote.final_edges == {ab, bc}


def test_majority_vote_breaks_longer_cycles():
    ab, bc, ca = E("A", "B"), E("B", "C"), E("C", "A")
    vote = majority_vote([{ab, bc, ca}, {ab, bc, ca}, {ab, bc}])
    assert vote.final_edges == {ab, bc}
    assert vote.cycles_broken == 1


@pytest.mark.parametrize("sets", [[], [set(), set()], [set()] * 4])
def test_majority_vote_rejects_even_or_empty(sets):
    with pytest.raises(ConfigurationError):
        majority_vote(sets)


PAIRS = [E("A", "B"), E("B", "C"), E("A", "C"), E("C", "D")]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sets(st.sampled_from(PAIRS)), min_size=1, max_size=7).filter(lambda s: len(s) % 2 == 1),
       st.sampled_from(PAIRS))
def test_vote_monotone_in_added_support(sets, edge):
    """Adding one vote for an edge never removes it from an acyclic result."""
    before = majority_vote(sets).final_edges
    for i, s in enumerate(sets):
        if edge not in s:
            after = majority_vote(sets[:i] + [s | {edge}] + sets[i + 1 :]).final_edges
            assert edge not in before or edge in after
            break


def test_vote_matches_enumerated_threshold():
    ab = E("A", "B")
    for votes in product([False, True], repeat=5):
        got = majority_vote([{ab} if v else set() for v in votes]).final_edges
        assert (ab in got) == (sum(votes) >= 3)


def test_select_profiles():
    profiles = [ExpertProfile(i, f"p{i}") for i in range(1, 10)]
    assert [p.id for p in select_profiles(profiles, 7)] == list(range(1, 8))
    assert [p.id for p in select_profiles(profiles, 3, [9, 2, 5])] == [2, 5, 9]
    for n, subset in [(4, None), (3, [1, 2]), (3, [1, 2, 99]), (11, None)]:
        with pytest.raises(ConfigurationError):
            select_profiles(profiles, n, subset)


def test_run_delphi_end_to_end():
    good = [["Smoker", "Cancer"], ["Pollution", "Cancer"]]
    script = DelphiScript({1: good, 2: good, 3: good, 4: good + [["Cancer", "Xray"]], 5: "I refuse.",
                           6: [["Cancer", "Dyspnoea"]], 7: []})
    result = run_delphi(ScriptedBackend(script), NODES, "medicine", "diagnose lung cancer")
    assert result.n_experts == 7
    assert len(result.profiles) == 9
    assert result.final_edges == {E("Smoker", "Cancer"), E("Pollution", "Cancer")}
    assert result.diagnostics["experts_refused"] == 1
    assert result.vote_counts[E("Cancer", "Xray")] == 1
    data = result.to_dict()
    assert data["final_edges"] == [["Pollution", "Cancer"], ["Smoker", "Cancer"]]
    json.dumps(data)


@pytest.mark.parametrize("n", [0, 2, 8, 11])
def test_run_delphi_rejects_bad_expert_counts(n):
    with pytest.raises(ConfigurationError):
        run_delphi(ScriptedBackend(DelphiScript({})), NODES, "m", "t", n_experts=n)
