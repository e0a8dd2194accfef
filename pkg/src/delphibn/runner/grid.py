"""Method x network grid with resumable, self-describing run records."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from ..bn import BayesianNetworkStructure
from ..delphi import run_delphi
from ..harness import run_harness, variables_for
from ..llm import (
    ChatBackend,
    OpenAIChatBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
    Transcript,
)
from ..metrics import evaluate
from .config import BackendSpec, ConfigError, ExperimentConfig, NetworkSpec

log = logging.getLogger(__name__)

RECORDS_FILE = "records.jsonl"

BackendFactory = Callable[[str], ChatBackend]


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _file_sha(path: str | None) -> str | None:
    return _sha(Path(path).read_text(encoding="utf-8")) if path else None


def cell_id(network: NetworkSpec, method: str) -> str:
    return f"{network.name}-{method}"


def cell_snapshot(config: ExperimentConfig, network: NetworkSpec, method: str) -> dict:
    """Everything that determines a cell's outcome, minus secrets and paths to outputs."""
    backend = asdict(config.backend)
    backend["script_sha"] = _file_sha(config.backend.script)
    return {
        "network": {**asdict(network), "sha": _file_sha(network.path)},
        "method": method,
        "backend": backend,
        "n_experts": config.n_experts,
        "n_profiles": config.n_profiles,
        "templates": config.templates,
    }


def cell_hash(snapshot: dict) -> str:
    return _sha(json.dumps(snapshot, sort_keys=True))[:16]


def load_script(path: str) -> ScriptedBackend:
    """Scripted replies: a JSON list of ``{"contains": ..., "reply": ...}`` rules."""
    try:
        rules = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read script {path}: {exc}") from exc
    default = None
    if isinstance(rules, dict):
        default = rules.get("default")
        rules = rules.get("rules", [])
    return ScriptedBackend.from_rules(rules, default=default)


def replay_transcript_path(spec: BackendSpec, cid: str) -> Path:
    return Path(spec.transcript_dir) / f"{cid}.jsonl"


def make_backend(spec: BackendSpec, cid: str, output_dir: str | Path) -> tuple[ChatBackend, str]:
    """Backend for one cell, plus the transcript file it reads or writes."""
    if spec.kind == "replay":
        path = replay_transcript_path(spec, cid)
        if not path.is_file():
            raise ConfigError(f"replay transcript missing: {path}")
        return ReplayBackend(Transcript.load(path), model=spec.model), str(path)
    path = Path(output_dir) / "transcripts" / f"{cid}.jsonl"
    if spec.kind == "live":
        inner = OpenAIChatBackend(spec.base_url, spec.model, temperature=spec.temperature)
    else:
        inner = load_script(spec.script)
        inner.model = spec.model
    return RecordingBackend(inner, Transcript(path=path)), str(path)


def run_cell(
    backend: ChatBackend,
    network: NetworkSpec,
    method: str,
    truth: BayesianNetworkStructure,
    *,
    n_experts: int = 7,
    n_profiles: int = 9,
    expert_parallelism: int = 1,
    templates: str | None = None,
) -> tuple[dict, dict, dict]:
    """Run one method on one network; returns (result dict, metrics, diagnostics)."""
    nodes = [n.text for n in truth.nodes]
    if method == "delphi":
        result = run_delphi(
            backend,
            nodes,
            network.knowledge_area,
            network.bn_task,
            n_experts=n_experts,
            n_profiles=n_profiles,
            parallelism=expert_parallelism,
            templates=templates,
        )
        final = result.final_edges
        d = result.diagnostics
        diagnostics = {
            "cycles_broken": d["post_vote_cycles_broken"],
            "two_cycles_resolved": d["two_cycles_resolved"],
            "refusals": d["experts_refused"],
            "invented_node_drops": d["invented_node_drops"],
        }
    else:
        result = run_harness(backend, network.domain, variables_for(truth), nodes, templates=templates)
        final = result.final_edges
        d = result.diagnostics
        diagnostics = {
            "cycles_broken": d["cycles_broken"],
            "two_cycles_resolved": 0,
            "refusals": 0,
            "invented_node_drops": d["invented_node_drops"],
            "revision_policy": d["revision_policy"],
        }
    report = evaluate(truth.with_edges(final), truth)
    return result.to_dict(), report.to_record(), diagnostics


def load_records(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        return []
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def write_records(path: str | Path, records: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in records), encoding="utf-8")


def run_grid(config: ExperimentConfig, *, backend_factory: BackendFactory | None = None) -> list[dict]:
    """Run every (network, method) cell and persist one record per cell.

    Cells whose content hash already has a successful record in the output
    directory are skipped. A failing cell is recorded with its error and the
    grid moves on; replay divergence counts as a failure of that cell.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    records_path = out / RECORDS_FILE
    previous = {r["cell_hash"]: r for r in load_records(records_path)}

    cells = []
    for network in config.networks:
        truth = network.load()
        for method in config.methods:
            snap = cell_snapshot(config, network, method)
            cells.append((network, method, truth, snap, cell_hash(snap)))

    def execute(cell) -> dict:
        network, method, truth, snap, h = cell
        cid = cell_id(network, method)
        if h in previous and previous[h].get("status") == "ok":
            log.info("cell %s already complete, skipping", cid)
            return previous[h]
        started = time.perf_counter()
        record = {
            "cell_id": cid,
            "cell_hash": h,
            "bn": network.name,
            "method": method,
            "model": config.backend.model,
            "config": snap,
            "true_edges": len(truth.edges),
        }
        try:
            if backend_factory is not None:
                backend, transcript = backend_factory(cid), None
            else:
                backend, transcript = make_backend(config.backend, cid, out)
            result, metrics, diagnostics = run_cell(
                backend, network, method, truth,
                n_experts=config.n_experts, n_profiles=config.n_profiles,
                expert_parallelism=config.expert_parallelism, templates=config.templates,
            )
            record.update(status="ok", error=None, result=result, metrics=metrics, diagnostics=diagnostics)
            record["transcript"] = transcript
        except Exception as exc:  # noqa: BLE001 - a cell failure must not stop the grid
            log.error("cell %s failed: %s", cid, exc)
            record.update(status="error", error=f"{type(exc).__name__}: {exc}", result=None, metrics=None, diagnostics=None)
            record["transcript"] = None
        record["meta"] = {
            "seconds": round(time.perf_counter() - started, 6),
            "finished_at": datetime.now(timezone.utc).isoformat(),
        }
        return record

    if config.parallelism == 1:
        records = [execute(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            records = list(pool.map(execute, cells))

    # keep records of cells outside this grid; replace those we just ran
    current = {r["cell_hash"] for r in records}
    kept = [r for r in previous.values() if r["cell_hash"] not in current]
    write_records(records_path, kept + records)
    return records


def deterministic_view(record: dict) -> dict:
    """A record without its timing metadata."""
    return {k: v for k, v in record.items() if k != "meta"}
