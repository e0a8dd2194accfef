"""Experiment configuration, read from JSON.

Relative paths are resolved against the directory of the config file.
Secrets never live in the file: the live backend reads its key from the
environment.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..bn import BayesianNetworkStructure, load_network

METHODS = ("delphi", "harness")
BACKEND_KINDS = ("live", "replay", "scripted")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "scripted"
    model: str = "scripted"
    base_url: str | None = None
    temperature: float = 0.7
    transcript_dir: str | None = None
    script: str | None = None

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind == "live" and not self.base_url:
            raise ConfigError("live backend needs base_url")
        if self.kind == "replay" and not self.transcript_dir:
            raise ConfigError("replay backend needs transcript_dir")
        if self.kind == "scripted" and not self.script:
            raise ConfigError("scripted backend needs a script file")


@dataclass(frozen=True)
class NetworkSpec:
    path: str
    name: str
    knowledge_area: str
    bn_task: str
    domain: str

    def load(self) -> BayesianNetworkStructure:
        try:
            return load_network(self.path)
        except OSError as exc:
            raise ConfigError(f"cannot read network {self.path}: {exc}") from exc


@dataclass(frozen=True)
class SubsetMode:
    size: int = 7
    samples: int | str = "all"
    seed: int = 0

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ConfigError(f"subset size must be odd and >= 1, got {self.size}")
        if self.samples != "all" and (not isinstance(self.samples, int) or self.samples < 1):
            raise ConfigError(f"subset samples must be 'all' or a positive int, got {self.samples!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    networks: tuple[NetworkSpec, ...]
    methods: tuple[str, ...] = METHODS
    backend: BackendSpec = field(default_factory=BackendSpec)
    n_experts: int = 7
    n_profiles: int = 9
    sweep: tuple[int, ...] = ()
    subset_mode: SubsetMode | None = None
    output_dir: str = "runs"
    parallelism: int = 1
    expert_parallelism: int = 1
    templates: str | None = None

    def __post_init__(self):
        if not self.networks:
            raise ConfigError("at least one network is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}, got {list(self.methods)}")
        if self.n_experts < 1 or self.n_experts % 2 == 0:
            raise ConfigError(f"n_experts must be odd, got {self.n_experts}")
        if self.n_experts > self.n_profiles:
            raise ConfigError(f"n_experts={self.n_experts} exceeds n_profiles={self.n_profiles}")
        for n in self.sweep:
            if n < 1 or n % 2 == 0:
                raise ConfigError(f"sweep entries must be odd, got {n}")
            if n > self.n_profiles:
                raise ConfigError(f"sweep entry {n} exceeds n_profiles={self.n_profiles}")
        if self.subset_mode is not None and self.subset_mode.size > self.n_profiles:
            raise ConfigError(f"subset size {self.subset_mode.size} exceeds n_profiles={self.n_profiles}")
        if self.parallelism < 1 or self.expert_parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        names = [n.name for n in self.networks]
        if len(set(names)) != len(names):
            raise ConfigError(f"network names must be unique, got {names}")

    def to_dict(self) -> dict:
        return asdict(self)


def _catalog() -> dict:
    from importlib import resources

    text = resources.files("delphibn").joinpath("data", "networks", "catalog.json").read_text(encoding="utf-8")
    return json.loads(text)


def bundled_network(name: str) -> str:
    from importlib import resources

    base = resources.files("delphibn").joinpath("data", "networks")
    for suffix in (".bif", ".json"):
        candidate = base.joinpath(name + suffix)
        if candidate.is_file():
            return str(candidate)
    raise ConfigError(f"no bundled network named {name!r}")


def network_spec(entry: str | dict, base: Path) -> NetworkSpec:
    """A config network entry: a path, a bundled name, or an object with overrides."""
    if isinstance(entry, str):
        entry = {"path": entry}
    if not isinstance(entry, dict) or ("path" not in entry and "bundled" not in entry):
        raise ConfigError(f"network entry needs 'path' or 'bundled': {entry!r}")
    if "bundled" in entry:
        path = bundled_network(entry["bundled"])
    else:
        path = str((base / entry["path"]).resolve())
    name = entry.get("name") or Path(path).stem
    meta = _catalog().get(name, {})
    knowledge_area = entry.get("knowledge_area") or meta.get("knowledge_area") or name
    return NetworkSpec(
        path=path,
        name=name,
        knowledge_area=knowledge_area,
        bn_task=entry.get("bn_task") or meta.get("bn_task") or f"a Bayesian network for {knowledge_area}",
        domain=entry.get("domain") or meta.get("domain") or knowledge_area,
    )


_KNOWN = {
    "bn_fixtures", "networks", "methods", "backend", "n_experts", "n_profiles", "sweep",
    "subset_mode", "output_dir", "parallelism", "expert_parallelism", "templates",
}


def config_from_dict(data: dict, base: str | Path = ".") -> ExperimentConfig:
    base = Path(base)
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - _KNOWN)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    entries = data.get("networks", data.get("bn_fixtures"))
    if not entries:
        raise ConfigError("config needs 'networks' (or 'bn_fixtures')")
    backend = dict(data.get("backend", {}))
    for key in ("transcript_dir", "script"):
        if backend.get(key):
            backend[key] = str((base / backend[key]).resolve())
    try:
        subset = data.get("subset_mode")
        return ExperimentConfig(
            networks=tuple(network_spec(e, base) for e in entries),
            methods=tuple(data.get("methods", METHODS)),
            backend=BackendSpec(**backend),
            n_experts=int(data.get("n_experts", 7)),
            n_profiles=int(data.get("n_profiles", 9)),
            sweep=tuple(int(n) for n in data.get("sweep", ())),
            subset_mode=SubsetMode(**subset) if subset else None,
            output_dir=str((base / data.get("output_dir", "runs")).resolve()),
            parallelism=int(data.get("parallelism", 1)),
            expert_parallelism=int(data.get("expert_parallelism", 1)),
            templates=str((base / data["templates"]).resolve()) if data.get("templates") else None,
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data, path.parent)
