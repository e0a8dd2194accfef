"""Command line entry point.

Exit codes: 0 success, 1 hard error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .bn import load_network
from .contamination import load_alias_map, run_probe, score_probe
from .delphi import ConfigurationError
from .llm import OpenAIChatBackend, RecordingBackend, ReplayBackend, Transcript
from .runner import (
    ConfigError,
    SubsetMode,
    emit_reports,
    load_config,
    load_records,
    run_expert_sweep,
    run_grid,
    run_subset_robustness,
)
from .runner.config import NetworkSpec, network_spec
from .runner.grid import RECORDS_FILE, load_script, run_cell
from .runner.verify import replay_verify

log = logging.getLogger("delphibn")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG = 0, 1, 2


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("live", "replay", "scripted"), default="live")
    p.add_argument("--base-url", help="OpenAI-compatible server root (live backend)")
    p.add_argument("--model", default="unknown")
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--transcript", help="transcript to replay, or to record into for live/scripted runs")
    p.add_argument("--script", help="scripted reply rules (JSON)")


def _single_backend(args):
    if args.backend == "replay":
        if not args.transcript:
            raise ConfigError("--transcript is required with --backend replay")
        return ReplayBackend(Transcript.load(args.transcript), model=args.model)
    if args.backend == "live":
        if not args.base_url:
            raise ConfigError("--base-url is required with --backend live")
        inner = OpenAIChatBackend(args.base_url, args.model, temperature=args.temperature)
    else:
        if not args.script:
            raise ConfigError("--script is required with --backend scripted")
        inner = load_script(args.script)
        inner.model = args.model
    if args.transcript:
        return RecordingBackend(inner, Transcript(path=args.transcript))
    return inner


def _config(args):
    config = load_config(args.config)
    overrides = {}
    if getattr(args, "output_dir", None):
        overrides["output_dir"] = str(Path(args.output_dir).resolve())
    if getattr(args, "parallelism", None):
        overrides["parallelism"] = args.parallelism
    return replace(config, **overrides) if overrides else config


def cmd_elicit(args) -> int:
    entry = {"path": args.network}
    for key in ("knowledge_area", "bn_task", "domain"):
        if getattr(args, key):
            entry[key] = getattr(args, key)
    network: NetworkSpec = network_spec(entry, Path.cwd())
    truth = network.load()
    if args.n_experts < 1 or args.n_experts % 2 == 0:
        raise ConfigError(f"--n-experts must be odd, got {args.n_experts}")
    result, metrics, diagnostics = run_cell(
        _single_backend(args), network, args.method, truth,
        n_experts=args.n_experts, expert_parallelism=args.parallelism,
    )
    payload = {"bn": network.name, "method": args.method, "model": args.model,
               "metrics": metrics, "diagnostics": diagnostics, "result": result}
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(json.dumps({"bn": network.name, "method": args.method, **metrics}))
    return EXIT_OK


def cmd_grid(args) -> int:
    config = _config(args)
    records = run_grid(config)
    emit_reports(records, Path(config.output_dir) / "reports")
    failed = [r for r in records if r["status"] != "ok"]
    for r in records:
        status = r["status"] if r["status"] != "ok" else f"SHD/edg={r['metrics']['SHD/edg']:.3f}"
        print(f"{r['cell_id']}: {status}")
    return EXIT_ERROR if failed else EXIT_OK


def cmd_sweep(args) -> int:
    config = _config(args)
    sweep = [int(x) for x in args.sweep.split(",")] if args.sweep else None
    for row in run_expert_sweep(config, sweep=sweep):
        print(f"n={row['n_experts']}: mean SHD/edg={row['mean_shd_per_edge']:.4f}")
    return EXIT_OK


def cmd_subsets(args) -> int:
    config = _config(args)
    if args.size or args.samples or args.seed is not None:
        base = config.subset_mode or SubsetMode()
        samples = base.samples if not args.samples else ("all" if args.samples == "all" else int(args.samples))
        config = replace(
            config,
            subset_mode=SubsetMode(
                size=args.size or base.size, samples=samples, seed=base.seed if args.seed is None else args.seed
            ),
        )
    report = run_subset_robustness(config)
    for bn, r in report.items():
        print(f"{bn}: {r['n_subsets']} subsets, mean SHD/edg={r['mean']:.4f} std={r['std']:.4f}, "
              f"inter-expert={r['inter_expert_mean']:.4f}")
    return EXIT_OK


def cmd_contaminate(args) -> int:
    truth = load_network(args.network)
    alias_map = load_alias_map(args.alias_map)
    if args.nodes_reply:
        nodes_reply = Path(args.nodes_reply).read_text(encoding="utf-8")
        edges_reply = Path(args.edges_reply).read_text(encoding="utf-8") if args.edges_reply else ""
    else:
        if not args.paper_name:
            raise ConfigError("--paper-name is required when probing a backend")
        replies = run_probe(_single_backend(args), args.paper_name, args.url)
        nodes_reply, edges_reply = replies.nodes_reply, replies.edges_reply
    report = score_probe(
        nodes_reply, edges_reply, truth, alias_map,
        count_as_zero=args.count_as_zero, exact_threshold=args.exact_threshold,
    )
    row = report.to_row(args.bn or truth.name, args.model)
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
            writer.writeheader()
            writer.writerow(row)
    print(json.dumps(row))
    return EXIT_OK


def cmd_report(args) -> int:
    records_path = Path(args.records)
    if records_path.is_dir():
        records_path = records_path / RECORDS_FILE
    records = load_records(records_path)
    if not records:
        raise ConfigError(f"no records in {records_path}")
    for path in emit_reports(records, args.output_dir or records_path.parent / "reports"):
        print(path)
    return EXIT_OK


def cmd_replay_verify(args) -> int:
    problems = replay_verify(load_config(args.config))
    for p in problems:
        print(p)
    print("replay verified: identical" if not problems else f"replay verification failed ({len(problems)} problem(s))")
    return EXIT_ERROR if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delphibn", description="Elicit Bayesian network structures from LLMs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("elicit", help="one network, one method")
    p.add_argument("--network", required=True, help="BIF or JSON edge-list file")
    p.add_argument("--method", choices=("delphi", "harness"), default="delphi")
    p.add_argument("--n-experts", type=int, default=7)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--knowledge-area")
    p.add_argument("--bn-task")
    p.add_argument("--domain")
    p.add_argument("--output", help="write the full result JSON here")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_elicit)

    for name, func, helptext in (
        ("grid", cmd_grid, "every network x method in a config"),
        ("sweep", cmd_sweep, "SHD/edg against the number of experts"),
        ("subsets", cmd_subsets, "vote over expert subsets"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--output-dir")
        p.add_argument("--parallelism", type=int)
        if name == "sweep":
            p.add_argument("--sweep", help="comma-separated odd expert counts, e.g. 1,3,5,7,9")
        if name == "subsets":
            p.add_argument("--size", type=int)
            p.add_argument("--samples", help="'all' or a number of sampled subsets")
            p.add_argument("--seed", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("contaminate", help="probe or score a training-data contamination check")
    p.add_argument("--network", required=True, help="reference network file")
    p.add_argument("--alias-map", required=True, help="JSON object: generated name -> reference name")
    p.add_argument("--paper-name")
    p.add_argument("--url")
    p.add_argument("--nodes-reply", help="score this saved node-list reply instead of probing")
    p.add_argument("--edges-reply", help="saved edge-list reply")
    p.add_argument("--count-as-zero", action="store_true", help="treat the node list as hypothetical")
    p.add_argument("--exact-threshold", type=float, default=0.5)
    p.add_argument("--bn")
    p.add_argument("--output", help="CSV file for the report row")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_contaminate)

    p = sub.add_parser("report", help="tables from a records file")
    p.add_argument("--records", required=True, help="records.jsonl or the run directory holding it")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("replay-verify", help="replay a recorded grid twice and compare")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_replay_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level handler maps to the exit code
        log.debug("hard error", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
