"""Codeword Bandit: one state, four discrete actions, one parameter each.

Action ``k`` pays ``PAYOFFS[k] - |c - TARGETS[k]|``. The best return, 1.0,
needs action ``BEST`` at c = 0; every other action earns at most 0.5, so
the optimal discrete action is known before training.
"""

from typing import Any, Dict, Tuple

import numpy as np

from .base import EnvSpec, HybridEnv

PAYOFFS = (0.25, 0.5, 1.0, 0.0)
TARGETS = (-0.5, 0.5, 0.0, 0.75)
BEST = 2
SUCCESS_TOLERANCE = 0.1


class CodewordBanditEnv(HybridEnv):
    """Single-decision bandit with a known best discrete action."""

    def __init__(self):
        """Build the task."""
        super().__init__(
            EnvSpec(
                env_id="codeword_bandit",
                obs_dim=1,
                n_discrete=len(PAYOFFS),
                action_dim=1,
                horizon=1,
                param_slices=tuple((0, 1) for _ in PAYOFFS),
                success=f"action {BEST} with |c| < {SUCCESS_TOLERANCE}",
                reward="payoff[k] - |c - target[k]|",
            )
        )

    @property
    def best_index(self) -> int:
        """The optimal discrete action."""
        return BEST

    def _reset(self) -> np.ndarray:
        return self._observe()

    def _step(
        self, k: int, params: np.ndarray
    ) -> Tuple[float, bool, bool, Dict[str, Any]]:
        error = abs(float(params[0]) - TARGETS[k])
        success = k == BEST and error < SUCCESS_TOLERANCE
        return PAYOFFS[k] - error, success, False, {"error": error}

    def _observe(self) -> np.ndarray:
        return np.ones(1)
