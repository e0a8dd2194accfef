"""Replay a recorded grid twice and check that nothing moves."""

from __future__ import annotations

import tempfile
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .grid import deterministic_view, run_grid
from .reports import emit_reports


def replay_verify(config: ExperimentConfig) -> list[str]:
    """Problems found while replaying; an empty list means bit-identical reruns.

    Every cell must replay without error, and two independent replays must
    give identical records (timing aside) and identical report files.
    """
    if config.backend.kind != "replay":
        raise ConfigError("replay-verify needs a replay backend")
    problems = []
    runs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i in range(2):
            out = Path(tmp) / f"run{i}"
            records = run_grid(replace(config, output_dir=str(out), parallelism=1))
            files = {p.name: p.read_bytes() for p in emit_reports(records, out / "reports")}
            runs.append(([deterministic_view(r) for r in records], files))
    for r in runs[0][0]:
        if r["status"] != "ok":
            problems.append(f"{r['cell_id']}: {r['error']}")
    if runs[0][0] != runs[1][0]:
        problems.append("records differ between the two replays")
    for name in sorted(set(runs[0][1]) | set(runs[1][1])):
        if runs[0][1].get(name) != runs[1][1].get(name):
            problems.append(f"report {name} differs between the two replays")
    return problems
