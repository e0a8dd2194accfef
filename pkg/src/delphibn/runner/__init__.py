from .config import BackendSpec, ConfigError, ExperimentConfig, NetworkSpec, SubsetMode, config_from_dict, load_config
from .grid import deterministic_view, load_records, make_backend, run_grid
from .reports import emit_reports
from .sweeps import ExpertPool, elicit_pool, run_expert_sweep, run_subset_robustness, subset_indices

__all__ = [
    "BackendSpec",
    "ConfigError",
    "ExperimentConfig",
    "ExpertPool",
    "NetworkSpec",
    "SubsetMode",
    "config_from_dict",
    "deterministic_view",
    "elicit_pool",
    "emit_reports",
    "load_config",
    "load_records",
    "make_backend",
    "run_expert_sweep",
    "run_grid",
    "run_subset_robustness",
    "subset_indices",
]
