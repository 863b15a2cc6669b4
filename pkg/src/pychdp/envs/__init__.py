"""Parameterized-action benchmark environments."""

from .base import EnvSpec, HybridAction, HybridEnv, StepResult
from .registry import available, make

__all__ = ["EnvSpec", "HybridAction", "HybridEnv", "StepResult", "available", "make"]
