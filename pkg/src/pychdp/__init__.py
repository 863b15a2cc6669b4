"""Cooperative hybrid diffusion policies for parameterized-action RL."""

# -*- coding: utf-8 -*-
__version__ = "0.1.0"

from .codebook import ArgmaxHead, Codebook
from .config import RunConfig, TrainConfig, load_run_config
from .diffusion import NoiseSchedule, make_schedule
from .envs import HybridAction, make
from .runner import ExperimentRunner
from .trainer import CHDPAgent, CHDPTrainer

__all__ = [
    "__version__",
    "ArgmaxHead",
    "CHDPAgent",
    "CHDPTrainer",
    "Codebook",
    "ExperimentRunner",
    "HybridAction",
    "NoiseSchedule",
    "RunConfig",
    "TrainConfig",
    "load_run_config",
    "make",
    "make_schedule",
]
