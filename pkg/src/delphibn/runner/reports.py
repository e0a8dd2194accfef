"""CSV and markdown tables built from run records.

Reports carry no timestamps or timings, so replayed grids produce
byte-identical files.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from collections.abc import Sequence
from pathlib import Path

from ..metrics import wilcoxon_signed_rank

METRIC_COLUMNS = ("TP", "FP", "FN", "TN", "SHD", "SHD/edg", "F-score")
DIAGNOSTIC_COLUMNS = ("cycles_broken", "two_cycles_resolved", "refusals", "invented_node_drops")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[_cell(v) for v in row] for row in rows])
    return buf.getvalue()


def _markdown(title: str, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [f"## {title}", "", "| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(_cell(v) for v in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def _ordered(values) -> list:
    return list(dict.fromkeys(values))


def detailed_table(records: Sequence[dict]) -> tuple[list[str], list[list]]:
    """One row per record: confusion counts, SHD, SHD/edg, F-score."""
    header = ["BN", "LLM", "method", "status", *METRIC_COLUMNS]
    rows = []
    for r in records:
        m = r.get("metrics") or {}
        rows.append([r["bn"], r["model"], r["method"], r["status"], *(m.get(c) for c in METRIC_COLUMNS)])
    return header, rows


def comparison_table(records: Sequence[dict]) -> tuple[list[str], list[list]]:
    """SHD/edg per network, one column per (model, method), with a mean row."""
    cols = _ordered((r["model"], r["method"]) for r in records)
    table: dict[str, dict] = defaultdict(dict)
    for r in records:
        if r["status"] == "ok":
            table[r["bn"]][(r["model"], r["method"])] = r["metrics"]["SHD/edg"]
    header = ["BN", "#edg", *(f"{model}/{method}" for model, method in cols)]
    edges = {r["bn"]: r.get("true_edges") for r in records}
    rows = [[bn, edges[bn], *(table[bn].get(c) for c in cols)] for bn in _ordered(r["bn"] for r in records)]
    means = []
    for c in cols:
        vals = [table[bn][c] for bn in table if c in table[bn]]
        means.append(sum(vals) / len(vals) if vals else None)
    rows.append(["mean", "", *means])
    return header, rows


def diagnostics_table(records: Sequence[dict]) -> tuple[list[str], list[list]]:
    header = ["BN", "LLM", "method", *DIAGNOSTIC_COLUMNS]
    rows = []
    for r in records:
        d = r.get("diagnostics") or {}
        rows.append([r["bn"], r["model"], r["method"], *(d.get(c) for c in DIAGNOSTIC_COLUMNS)])
    return header, rows


def diagnostics_means(records: Sequence[dict]) -> tuple[list[str], list[list]]:
    header = ["LLM", "method", *(f"mean {c}" for c in DIAGNOSTIC_COLUMNS)]
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for r in records:
        if r["status"] == "ok":
            groups[(r["model"], r["method"])].append(r["diagnostics"])
    rows = []
    for (model, method), ds in groups.items():
        rows.append([model, method, *(sum(d.get(c, 0) for d in ds) / len(ds) for c in DIAGNOSTIC_COLUMNS)])
    return header, rows


def wilcoxon_table(records: Sequence[dict], a: str = "harness", b: str = "delphi") -> tuple[list[str], list[list]]:
    """Per model: signed-rank test of SHD/edg, method ``a`` against ``b``, over shared networks."""
    header = ["LLM", "pairs", "n_effective", "W", "p_two_sided", "test"]
    by_model: dict[str, dict[str, dict]] = defaultdict(lambda: defaultdict(dict))
    for r in records:
        if r["status"] == "ok":
            by_model[r["model"]][r["bn"]][r["method"]] = r["metrics"]["SHD/edg"]
    rows = []
    for model, per_bn in by_model.items():
        pairs = [(v[a], v[b]) for v in per_bn.values() if a in v and b in v]
        if not pairs:
            continue
        res = wilcoxon_signed_rank(pairs)
        rows.append([model, len(pairs), res.n_effective, res.statistic, res.p_two_sided, res.method])
    return header, rows


def emit_reports(records: Sequence[dict], output_dir: str | Path) -> list[Path]:
    """Write the comparison, detailed, diagnostics and Wilcoxon tables.

    Each table goes to ``<name>.csv``; all of them also go to ``report.md``.

    Raises:
        ValueError: no records.
        OSError: the output directory is not writable.
    """
    if not records:
        raise ValueError("no records to report")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = {
        "comparison": ("SHD normalized by true edge count", comparison_table(records)),
        "detailed": ("Confusion counts and scores", detailed_table(records)),
        "diagnostics": ("Repairs and refusals per run", diagnostics_table(records)),
        "diagnostics_means": ("Mean repairs and refusals", diagnostics_means(records)),
        "wilcoxon": ("Wilcoxon signed-rank, harness vs delphi", wilcoxon_table(records)),
    }
    written = []
    md = []
    for name, (title, (header, rows)) in tables.items():
        path = out / f"{name}.csv"
        path.write_text(_csv_text(header, rows), encoding="utf-8")
        written.append(path)
        md.append(_markdown(title, header, rows))
    md_path = out / "report.md"
    md_path.write_text("\n".join(md), encoding="utf-8")
    written.append(md_path)
    return written
