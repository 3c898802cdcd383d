"""Experiment configuration, orchestration, summaries and the ``mpu`` command."""
from .config import ExperimentConfig
from .runner import run
from .summarize import summarize

__all__ = ["ExperimentConfig", "run", "summarize"]
