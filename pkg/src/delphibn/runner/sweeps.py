"""Expert-count sweeps and subset robustness over one shared pool of experts.

Each network gets all profiles elicited once; sweeps and subsets only
re-vote over those stored structures.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import statistics
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..bn import BayesianNetworkStructure, DirectedEdge
from ..delphi import ConfigurationError, elicit_experts, generate_expert_profiles, majority_vote
from ..metrics import evaluate, pairwise_shd_matrix
from .config import ExperimentConfig, NetworkSpec
from .grid import BackendFactory, cell_hash, cell_snapshot, make_backend


@dataclass
class ExpertPool:
    network: str
    edge_sets: list[frozenset[DirectedEdge]]
    refused: list[bool]
    profile_ids: list[int]

    def to_dict(self) -> dict:
        return {
            "network": self.network,
            "profile_ids": self.profile_ids,
            "refused": self.refused,
            "edge_sets": [
                [[e.source.text, e.target.text] for e in sorted(s, key=lambda e: (e.source.key, e.target.key))]
                for s in self.edge_sets
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, truth: BayesianNetworkStructure) -> ExpertPool:
        sets = [frozenset(DirectedEdge(truth.node(a), truth.node(b)) for a, b in s) for s in d["edge_sets"]]
        return cls(d["network"], sets, list(d["refused"]), list(d["profile_ids"]))


def pool_cell_id(network: NetworkSpec) -> str:
    return f"{network.name}-pool"


def elicit_pool(
    config: ExperimentConfig,
    network: NetworkSpec,
    truth: BayesianNetworkStructure,
    *,
    backend_factory: BackendFactory | None = None,
) -> ExpertPool:
    """Elicit every profile for one network, reusing a stored pool when unchanged."""
    snap = cell_snapshot(config, network, "pool")
    h = cell_hash(snap)
    path = Path(config.output_dir) / "pools" / f"{network.name}.json"
    if path.is_file():
        stored = json.loads(path.read_text(encoding="utf-8"))
        if stored.get("cell_hash") == h:
            return ExpertPool.from_dict(stored["pool"], truth)
    cid = pool_cell_id(network)
    if backend_factory is not None:
        backend = backend_factory(cid)
    else:
        backend, _ = make_backend(config.backend, cid, config.output_dir)
    profiles = generate_expert_profiles(
        backend, network.knowledge_area, network.bn_task, n_profiles=config.n_profiles, templates=config.templates
    )
    experts = elicit_experts(
        backend, profiles, [n.text for n in truth.nodes],
        parallelism=config.expert_parallelism, templates=config.templates,
    )
    pool = ExpertPool(
        network.name,
        [e.reconciled_edges for e in experts],
        [e.refused for e in experts],
        [e.profile.id for e in experts],
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"cell_hash": h, "pool": pool.to_dict()}, indent=2, sort_keys=True), encoding="utf-8")
    return pool


def vote_shd_per_edge(pool_sets, truth: BayesianNetworkStructure) -> float:
    vote = majority_vote(pool_sets)
    return evaluate(truth.with_edges(vote.final_edges), truth).shd_per_edge


def sweep_pool(pool: ExpertPool, truth: BayesianNetworkStructure, sweep) -> dict[int, float]:
    """SHD/edg of the vote over the first ``n`` experts, for each ``n``."""
    out = {}
    for n in sweep:
        if n > len(pool.edge_sets):
            raise ConfigurationError(f"sweep asks for {n} experts but only {len(pool.edge_sets)} were elicited")
        out[n] = vote_shd_per_edge(pool.edge_sets[:n], truth)
    return out


def subset_indices(n_pool: int, size: int, samples: int | str = "all", seed: int = 0) -> list[tuple[int, ...]]:
    """All ``size``-combinations of the pool, or a seeded sample of distinct ones."""
    if size > n_pool:
        raise ConfigurationError(f"subset size {size} exceeds pool of {n_pool}")
    combos = list(itertools.combinations(range(n_pool), size))
    if samples == "all" or samples >= len(combos):
        return combos
    rng = np.random.default_rng(seed)
    picks = sorted(rng.choice(len(combos), size=samples, replace=False).tolist())
    return [combos[i] for i in picks]


def subset_distribution(pool: ExpertPool, truth: BayesianNetworkStructure, combos) -> list[float]:
    return [vote_shd_per_edge([pool.edge_sets[i] for i in c], truth) for c in combos]


def _summary(values: list[float]) -> dict:
    # statistics works on exact fractions, so identical values give a std of exactly 0
    return {
        "n_subsets": len(values),
        "mean": statistics.fmean(values),
        "std": statistics.pstdev(values),
        "min": min(values),
        "max": max(values),
    }


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def run_expert_sweep(
    config: ExperimentConfig,
    *,
    sweep=None,
    backend_factory: BackendFactory | None = None,
) -> list[dict]:
    """Mean SHD/edg across networks for each expert count; writes ``sweep.csv``."""
    sweep = tuple(sweep or config.sweep)
    if not sweep:
        raise ConfigurationError("sweep is empty")
    for n in sweep:
        if n < 1 or n % 2 == 0 or n > config.n_profiles:
            raise ConfigurationError(f"sweep entry {n} must be odd and at most {config.n_profiles}")
    per_bn = {}
    for network in config.networks:
        truth = network.load()
        pool = elicit_pool(config, network, truth, backend_factory=backend_factory)
        per_bn[network.name] = sweep_pool(pool, truth, sweep)
    rows = []
    for n in sweep:
        values = {bn: per_bn[bn][n] for bn in per_bn}
        rows.append({"n_experts": n, "mean_shd_per_edge": sum(values.values()) / len(values), **values})
    names = list(per_bn)
    _write_csv(
        Path(config.output_dir) / "sweep.csv",
        ["n_experts", "mean_shd_per_edge", *names],
        [[r["n_experts"], _fmt(r["mean_shd_per_edge"]), *(_fmt(r[b]) for b in names)] for r in rows],
    )
    return rows


def run_subset_robustness(config: ExperimentConfig, *, backend_factory: BackendFactory | None = None) -> dict:
    """Vote over every (or a sample of) expert subset, per network.

    Writes ``subsets.csv`` (distribution summary and mean inter-expert SHD
    per network), ``subsets.json`` (all values) and one pairwise matrix CSV
    per network.
    """
    mode = config.subset_mode
    size, samples, seed = (mode.size, mode.samples, mode.seed) if mode else (config.n_experts, "all", 0)
    out = Path(config.output_dir)
    report = {}
    for network in config.networks:
        truth = network.load()
        pool = elicit_pool(config, network, truth, backend_factory=backend_factory)
        combos = subset_indices(len(pool.edge_sets), size, samples, seed)
        values = subset_distribution(pool, truth, combos)
        structures = [truth.with_edges(s) for s in pool.edge_sets]
        if truth.edges and len(structures) > 1:
            matrix, inter_mean = pairwise_shd_matrix(structures, len(truth.edges))
        else:
            matrix, inter_mean = np.zeros((len(structures), len(structures))), math.nan
        report[network.name] = {
            **_summary(values),
            "values": values,
            "subsets": [[pool.profile_ids[i] for i in c] for c in combos],
            "inter_expert_mean": inter_mean,
            "matrix": matrix.tolist(),
        }
        _write_csv(
            out / f"subsets_{network.name}_matrix.csv",
            ["expert", *map(str, pool.profile_ids)],
            [[pid, *(_fmt(x) for x in row)] for pid, row in zip(pool.profile_ids, matrix.tolist())],
        )
    _write_csv(
        out / "subsets.csv",
        ["BN", "n_subsets", "mean", "std", "min", "max", "inter_expert_mean"],
        [
            [bn, r["n_subsets"], _fmt(r["mean"]), _fmt(r["std"]), _fmt(r["min"]), _fmt(r["max"]), _fmt(r["inter_expert_mean"])]
            for bn, r in report.items()
        ],
    )
    (out / "subsets.json").write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
    return report
