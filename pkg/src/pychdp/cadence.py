"""Checkpoint cadence strategies for training runs."""

from abc import ABC, abstractmethod
from typing import Optional


class CheckpointCadence(ABC):
    """Abstract base class for deciding when to write a checkpoint."""

    @abstractmethod
    def should_checkpoint(
        self, step: int, last_step: Optional[int], evaluated: bool
    ) -> bool:
        """Determine if a checkpoint should be written now.

        Args:
        ----
            step: Current environment step
            last_step: Step of the previous checkpoint, or None
            evaluated: Whether an evaluation just finished at this step

        Returns:
        -------
            bool: True if a checkpoint should be written, False otherwise

        """
        pass


class StepIntervalCadence(CheckpointCadence):
    """Checkpoint every fixed number of environment steps."""

    def __init__(self, interval: int):
        """Initialize interval-based cadence.

        Args:
        ----
            interval: Environment steps between checkpoints

        """
        if interval < 1:
            raise ValueError(f"interval must be >= 1, got {interval}")
        self.interval = interval

    def should_checkpoint(
        self, step: int, last_step: Optional[int], evaluated: bool
    ) -> bool:
        """Check if enough steps passed since the last checkpoint."""
        return step - (last_step or 0) >= self.interval


class EvaluationCadence(CheckpointCadence):
    """Checkpoint right after every evaluation."""

    def should_checkpoint(
        self, step: int, last_step: Optional[int], evaluated: bool
    ) -> bool:
        """Check if an evaluation just happened."""
        return evaluated and step != last_step
