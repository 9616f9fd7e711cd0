"""Reproducible stage runners and the command-line entry point."""

from posterkit.pipeline.config import Stage, StageConfig, load_stage_config
from posterkit.pipeline.stages import RunReport, run_stage

__all__ = ["RunReport", "Stage", "StageConfig", "load_stage_config", "run_stage"]
