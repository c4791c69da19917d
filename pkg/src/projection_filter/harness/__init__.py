"""Config-driven experiment runner and command-line entry point."""
from .config import BaselineConfig, ExperimentConfig, FilterConfig, bundled_config, load_config, parse_config
from .runner import build_grids, run_experiment

__all__ = ["BaselineConfig", "ExperimentConfig", "FilterConfig", "build_grids", "bundled_config", "load_config",
           "parse_config", "run_experiment"]
