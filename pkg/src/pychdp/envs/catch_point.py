"""Catch Point: move next to a target point and catch it."""

from typing import Any, Dict, Tuple

import numpy as np

from .base import EnvSpec, HybridEnv

MOVE, CATCH = 0, 1
ARENA = 1.0
MOVE_SCALE = 0.2
CAPTURE_RADIUS = 0.15
ATTEMPTS = 3
STEP_COST = 0.05
SUCCESS_BONUS = 10.0
EXHAUSTED_PENALTY = 5.0


class CatchPointEnv(HybridEnv):
    """Two discrete actions: MOVE (2-D displacement) and CATCH (no parameters).

    CATCH succeeds within the capture radius; otherwise it burns one of three
    attempts and the episode fails once none are left.
    """

    def __init__(self):
        """Build the task."""
        super().__init__(
            EnvSpec(
                env_id="catch_point",
                obs_dim=5,
                n_discrete=2,
                action_dim=2,
                horizon=20,
                param_slices=((0, 2), (2, 2)),
                success="CATCH within 0.15 of the target",
                reward="-0.05 per step, +10 on catch, -5 when attempts run out",
            )
        )
        self.agent_pos = np.zeros(2)
        self.target_pos = np.zeros(2)
        self.attempts = ATTEMPTS

    def _reset(self) -> np.ndarray:
        self.attempts = ATTEMPTS
        self.agent_pos = self.np_random.uniform(-0.9, 0.9, size=2)
        self.target_pos = self.np_random.uniform(-0.9, 0.9, size=2)
        while np.linalg.norm(self.target_pos - self.agent_pos) < 2 * CAPTURE_RADIUS:
            self.target_pos = self.np_random.uniform(-0.9, 0.9, size=2)
        return self._observe()

    def _step(
        self, k: int, params: np.ndarray
    ) -> Tuple[float, bool, bool, Dict[str, Any]]:
        reward = -STEP_COST
        success = failed = False
        if k == MOVE:
            moved = self.agent_pos + params * MOVE_SCALE
            self.agent_pos = np.clip(moved, -ARENA, ARENA)
        else:
            if np.linalg.norm(self.target_pos - self.agent_pos) < CAPTURE_RADIUS:
                success = True
                reward += SUCCESS_BONUS
            else:
                self.attempts -= 1
                if self.attempts == 0:
                    failed = True
                    reward -= EXHAUSTED_PENALTY
        distance = float(np.linalg.norm(self.target_pos - self.agent_pos))
        info = {"distance": distance, "attempts": self.attempts}
        return reward, success, failed, info

    def _observe(self) -> np.ndarray:
        return np.concatenate(
            [self.agent_pos, self.target_pos, [self.attempts / ATTEMPTS]]
        )
