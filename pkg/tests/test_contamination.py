from __future__ import annotations

import pytest

from delphibn.bn import BayesianNetworkStructure, load_network
from delphibn.contamination import (
    extract_generated_nodes,
    load_alias_map,
    parse_arrow_edges,
    run_probe,
    score_probe,
)
from delphibn.llm import ScriptedBackend
from delphibn.metrics import MappingError
from delphibn.runner.config import bundled_network

ALARM = load_network(bundled_network("alarm"))


def test_extract_numbered_items_over_bullets():
    reply = "Nodes:\n1. HR: heart rate\n   - measured by ECG\n2) CO - cardiac output\n3. **BP**\n"
    assert extract_generated_nodes(reply) == ["HR", "CO", "BP"]


def test_extract_bullets_and_duplicates():
    reply = "- Smoker: habit\n* smoker\n- Cancer\n"
    assert extract_generated_nodes(reply) == ["Smoker", "Cancer"]
    assert extract_generated_nodes(reply, unique=False) == ["Smoker", "smoker", "Cancer"]
    assert extract_generated_nodes("no list here") == []


def test_parse_arrow_edges_lines_chains_and_prose():
    reply = (
        "1. A -> B\n"
        "- B → C → D (mediated)\n"
        "Note that the model has \"A -> D\" in the text.\n"
        "E->F: strong effect\n"
    )
    assert parse_arrow_edges(reply) == [("A", "B"), ("B", "C"), ("C", "D"), ("E", "F")]


def test_probe_prompts_name_paper_and_optional_url():
    seen = []
    backend = ScriptedBackend(lambda m: seen.append(m[-1].content) or "1. HR")
    replies = run_probe(backend, "A Study of Alarms")
    assert len(seen) == 2 and all("A Study of Alarms" in s for s in seen)
    assert "http" not in seen[0]
    assert replies.conversation.conversation_id == "probe"
    seen.clear()
    run_probe(backend, "A Study of Alarms", "https://example.org/alarm")
    assert all("https://example.org/alarm" in s for s in seen)
    with pytest.raises(ValueError):
        run_probe(backend, "  ")


def test_alarm_gpt4_probe(fixtures):
    report = score_probe(
        (fixtures / "alarm_gpt4_nodes.txt").read_text(),
        (fixtures / "alarm_gpt4_edges.txt").read_text(),
        ALARM,
        load_alias_map(fixtures / "alarm_gpt4_alias.json"),
    )
    assert report.generated_count == 37
    assert report.recall == pytest.approx(0.865, abs=5e-4)
    assert report.exact_name_match
    assert report.edge_ratio == pytest.approx(0.913, abs=5e-4)
    assert report.edge_analysis.fscore_macro == pytest.approx(0.632, abs=5e-4)
    assert report.edge_analysis.shd == 60
    row = report.to_row("alarm", "GPT-4")
    assert list(row) == ["BN", "LLM", "#nodes", "Rec", "*", "% edg", "F-score", "SHD"]
    assert row["*"] == "*"


def test_alarm_gpt35_probe(fixtures):
    report = score_probe(
        (fixtures / "alarm_gpt35_nodes.txt").read_text(),
        (fixtures / "alarm_gpt35_edges.txt").read_text(),
        ALARM,
        load_alias_map(fixtures / "alarm_gpt35_alias.json"),
    )
    assert report.generated_count == 10
    assert report.recall == pytest.approx(0.243, abs=5e-4)
    assert report.edge_ratio == pytest.approx(0.174, abs=5e-4)
    assert report.edge_analysis.fscore_macro == pytest.approx(0.509, abs=5e-4)
    assert report.edge_analysis.shd == 51


def test_hypothetical_list_scored_as_zero(fixtures):
    reply = (fixtures / "nonexistent_gpt4_nodes.txt").read_text()
    assert len(extract_generated_nodes(reply, unique=False)) == 14
    report = score_probe(reply, "", ALARM, {}, count_as_zero=True)
    assert (report.generated_count, report.recall, report.exact_name_match) == (0, 0.0, False)
    assert report.edge_analysis is None
    assert report.to_row()["SHD"] == ""


def test_identical_recall_gives_perfect_scores():
    truth = BayesianNetworkStructure.build("t", ["A", "B", "C"], [("A", "B"), ("B", "C")])
    report = score_probe("1. A\n2. B\n3. C", "A -> B\nB -> C", truth, {n: n for n in "ABC"})
    assert report.recall == 1.0 and report.edge_ratio == 1.0
    assert report.edge_analysis.fscore_macro == 1.0 and report.edge_analysis.shd == 0


def test_exact_name_threshold_and_case():
    truth = BayesianNetworkStructure.build("t", ["HR", "CO"], [("HR", "CO")])
    aliases = {"hr": "HR", "cardiac output": "CO"}
    assert score_probe(["hr", "cardiac output"], "", truth, aliases).exact_name_match
    assert not score_probe(["hr", "cardiac output"], "", truth, aliases, case_sensitive=True).exact_name_match
    assert not score_probe(["hr", "cardiac output"], "", truth, aliases, exact_threshold=0.75).exact_name_match


def test_alias_map_validation(tmp_path):
    truth = BayesianNetworkStructure.build("t", ["HR", "CO"], [("HR", "CO")])
    with pytest.raises(MappingError):
        score_probe(["x"], "", truth, {"x": "Nope"})
    with pytest.raises(MappingError):
        score_probe(["x", "y"], "", truth, {"x": "HR", "y": "HR"})
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ValueError):
        load_alias_map(bad)
