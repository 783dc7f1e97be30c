"""Heterogeneous SoC scheduling simulator with heuristic and actor-critic schedulers."""
from .engine import SimConfig, run_episode
from .platform import Platform, ProcessingElement, load_synthetic_platform
from .schedulers import (HEFTRTScheduler, METScheduler, RandomScheduler, STFScheduler,
                         make_scheduler)
from .workload import DagGenParams, JobDag, TaskTemplate, load_synthetic_job, synthesize_dag

__version__ = "0.1.0"

__all__ = [
    "SimConfig", "run_episode", "Platform", "ProcessingElement", "load_synthetic_platform",
    "HEFTRTScheduler", "METScheduler", "RandomScheduler", "STFScheduler", "make_scheduler",
    "DagGenParams", "JobDag", "TaskTemplate", "load_synthetic_job", "synthesize_dag",
]
