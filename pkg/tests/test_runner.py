from __future__ import annotations

import csv
import json

import pytest

from delphibn.runner import (
    ConfigError,
    config_from_dict,
    emit_reports,
    load_records,
    run_expert_sweep,
    run_grid,
    run_subset_robustness,
)
from delphibn.runner.config import load_config
from delphibn.runner.grid import RECORDS_FILE, deterministic_view
from delphibn.runner.reports import comparison_table, diagnostics_means, wilcoxon_table
from delphibn.runner.sweeps import subset_indices
from delphibn.runner.verify import replay_verify

from scripted import rules_script

COMA_GOOD = [["Metastatic cancer", "Brain tumor"], ["Brain tumor", "Coma"], ["Brain tumor", "Severe headaches"]]
HARNESS = ("Metastatic cancer: spread of cancer.",
           "<edge>Metastatic cancer→Total serum calcium</edge><edge>Total serum calcium→Coma</edge>",
           "All statements are correct.")


def tiny_network(tmp_path):
    doc = {"name": "tiny", "nodes": ["Rain", "Sprinkler", "Wet grass"],
           "edges": [["Rain", "Wet grass"], ["Sprinkler", "Wet grass"]]}
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(doc))
    return path


def write_config(tmp_path, *, networks=None, rules=None, **extra):
    script = tmp_path / "script.json"
    script.write_text(json.dumps({"rules": rules if rules is not None else rules_script(
        {i: COMA_GOOD for i in (1, 2, 3)}, harness=HARNESS)}))
    data = {
        "networks": networks or [{"bundled": "coma"}],
        "backend": {"kind": "scripted", "model": "scripted-llm", "script": "script.json"},
        "output_dir": "out",
        **extra,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


@pytest.mark.parametrize(
    "patch",
    [{"n_experts": 4}, {"methods": ["oracle"]}, {"colour": "blue"}, {"networks": []},
     {"backend": {"kind": "live"}}, {"sweep": [2]}, {"subset_mode": {"size": 6}},
     {"n_experts": 11}, {"networks": [{"bundled": "coma"}, {"bundled": "coma"}]},
     {"networks": [{"bundled": "nope"}]}],
)
def test_config_rejects(tmp_path, patch):
    base = {"networks": [{"bundled": "coma"}], "backend": {"kind": "scripted", "script": "s.json"}}
    with pytest.raises(ConfigError):
        config_from_dict({**base, **patch}, tmp_path)


def test_config_resolves_paths_and_catalog(tmp_path):
    config = load_config(write_config(tmp_path))
    assert config.output_dir == str((tmp_path / "out").resolve())
    assert config.networks[0].knowledge_area.startswith("oncology")
    assert config.n_experts == 7 and config.backend.temperature == 0.7
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_grid_two_networks_two_methods_and_resume(tmp_path):
    tiny = tiny_network(tmp_path)
    rules = (rules_script({i: [["Rain", "Wet grass"]] for i in range(1, 5)},
                          harness=("Rain: rain.", "<edge>Rain→Wet grass</edge>", "Correct."), scope="Sprinkler",
                          generic=False)
             + rules_script({i: COMA_GOOD for i in range(1, 5)}, harness=HARNESS))
    config = load_config(write_config(tmp_path, networks=[{"bundled": "coma"}, str(tiny)], rules=rules))
    records = run_grid(config)
    assert [r["cell_id"] for r in records] == ["coma-delphi", "coma-harness", "tiny-delphi", "tiny-harness"]
    assert all(r["status"] == "ok" for r in records)
    by = {r["cell_id"]: r for r in records}
    assert by["coma-delphi"]["metrics"]["TP"] == 3 and by["coma-delphi"]["metrics"]["FN"] == 2
    assert by["tiny-delphi"]["metrics"]["SHD"] == 1
    assert by["tiny-harness"]["diagnostics"]["revision_policy"] == "kept-discovery"
    out = tmp_path / "out"
    assert (out / "transcripts" / "coma-delphi.jsonl").is_file()

    again = run_grid(config)
    assert [deterministic_view(r) for r in again] == [deterministic_view(r) for r in records]
    assert [r["meta"] for r in again] == [r["meta"] for r in records]  # skipped, not rerun
    assert len(load_records(out / RECORDS_FILE)) == 4


def test_grid_records_cell_failure_and_continues(tmp_path):
    rules = [r for r in rules_script(harness=HARNESS) if r["contains"] != "Now please propose to me"]
    config = load_config(write_config(tmp_path, rules=rules))
    records = run_grid(config)
    status = {r["method"]: r["status"] for r in records}
    assert status == {"delphi": "error", "harness": "ok"}
    assert "ProfileParseError" in records[0]["error"] or "KeyError" in records[0]["error"]


def _scripted_pool_rules():
    # experts 1-3 agree on the coma structure, 4-9 return nothing
    return rules_script({i: COMA_GOOD for i in (1, 2, 3)}, harness=HARNESS)


def test_sweep_reuses_pool_and_matches_grid(tmp_path):
    config = load_config(write_config(tmp_path, rules=_scripted_pool_rules(), sweep=[1, 3, 5, 7, 9]))
    rows = run_expert_sweep(config)
    by_n = {r["n_experts"]: r["coma"] for r in rows}
    assert by_n[1] == by_n[3] == by_n[5] == pytest.approx(2 / 5)
    assert by_n[7] == by_n[9] == pytest.approx(1.0)
    grid = {r["method"]: r for r in run_grid(config)}
    assert grid["delphi"]["metrics"]["SHD/edg"] == pytest.approx(by_n[7])
    assert (tmp_path / "out" / "pools" / "coma.json").is_file()
    with open(tmp_path / "out" / "sweep.csv") as fh:
        assert next(csv.reader(fh)) == ["n_experts", "mean_shd_per_edge", "coma"]


def test_subset_indices():
    assert len(subset_indices(9, 7)) == 36
    sample = subset_indices(9, 7, samples=5, seed=3)
    assert len(set(sample)) == 5 and sample == subset_indices(9, 7, samples=5, seed=3)


def test_subsets_identical_experts_no_variance(tmp_path):
    rules = rules_script({i: COMA_GOOD for i in range(1, 10)})
    config = load_config(write_config(tmp_path, rules=rules, subset_mode={"size": 7}))
    report = run_subset_robustness(config)["coma"]
    assert report["n_subsets"] == 36
    assert report["std"] == 0.0 and report["inter_expert_mean"] == 0.0
    assert (tmp_path / "out" / "subsets_coma_matrix.csv").is_file()


def _record(bn, method, value, model="m", diagnostics=None):
    return {"bn": bn, "method": method, "model": model, "status": "ok", "true_edges": 5,
            "metrics": {"TP": 1, "FP": 0, "FN": 0, "TN": 24, "SHD": 0, "SHD/edg": value, "F-score": 1.0},
            "diagnostics": diagnostics or {"cycles_broken": 0, "two_cycles_resolved": 0, "refusals": 0,
                                           "invented_node_drops": 0}}


def test_reports_single_record(tmp_path):
    paths = emit_reports([_record("coma", "delphi", 0.4)], tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["comparison.csv", "detailed.csv", "diagnostics.csv", "diagnostics_means.csv",
                     "report.md", "wilcoxon.csv"]
    assert (tmp_path / "comparison.csv").read_text().splitlines()[1] == "coma,5,0.4000"
    with pytest.raises(ValueError):
        emit_reports([], tmp_path)


def test_reports_from_published_values(fixtures):
    data = json.loads((fixtures / "shd_per_edge_by_model.json").read_text())
    records = []
    for row in data["rows"]:
        for model in ("Llama2", "GPT-3.5", "GPT-4"):
            harness, delphi = row[model]
            records += [_record(row["bn"], "harness", harness, model), _record(row["bn"], "delphi", delphi, model)]
    _, rows = wilcoxon_table(records)
    assert [r[0] for r in rows] == ["Llama2", "GPT-3.5", "GPT-4"]
    assert all(r[1] == 10 for r in rows)
    _, comp = comparison_table(records)
    assert comp[-1][0] == "mean"

    cycles = data["cycles_delphi"]["GPT-3.5"]
    recs = [_record(f"bn{i}", "delphi", 0.0, "GPT-3.5", {"cycles_broken": c}) for i, c in enumerate(cycles)]
    _, means = diagnostics_means(recs)
    assert means[0][2] == pytest.approx(15.6)


def test_replay_verify_round_trip(tmp_path):
    config_path = write_config(tmp_path)
    records = run_grid(load_config(config_path))
    assert all(r["status"] == "ok" for r in records)
    replay = json.loads(config_path.read_text())
    replay["backend"] = {"kind": "replay", "model": "scripted-llm", "transcript_dir": "out/transcripts"}
    replay["output_dir"] = "replayed"
    replay_path = tmp_path / "replay.json"
    replay_path.write_text(json.dumps(replay))
    assert replay_verify(load_config(replay_path)) == []
    with pytest.raises(ConfigError):
        replay_verify(load_config(config_path))
