"""Experiment configuration, execution and statistics."""
from .config import KINDS, ExperimentConfig, build_config, load_config, with_overrides
from .runner import RunResult, execute, run, worker_count
from .stats import estimate_intensity, mean_se

__all__ = ["KINDS", "ExperimentConfig", "RunResult", "build_config", "estimate_intensity",
           "execute", "load_config", "mean_se", "run", "with_overrides", "worker_count"]
