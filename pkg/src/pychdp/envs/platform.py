"""Platform: run and jump along three platforms, past gaps and enemies.

The course is the unit segment with platforms [0, 0.25], [0.35, 0.6] and
[0.7, 1.0]; one enemy patrols each of the first two platforms. Discrete
actions are RUN, HOP and LEAP, each with one distance parameter. Running
into an enemy or landing in a gap or on an enemy ends the episode. Reward
is the forward progress, so a full run sums to about 1.
"""

from typing import Any, Dict, Tuple

import numpy as np

from .base import EnvSpec, HybridEnv

RUN, HOP, LEAP = 0, 1, 2
PLATFORMS = ((0.0, 0.25), (0.35, 0.6), (0.7, 1.0))
ENEMY_SPEED = 0.02
ENEMY_WIDTH = 0.02
# (minimum, maximum) distance covered by each action
RANGES = {RUN: (0.0, 0.05), HOP: (0.05, 0.15), LEAP: (0.1, 0.25)}
FINISH = 0.98


def platform_at(x: float) -> int:
    """Index of the platform under ``x``, or -1 over a gap."""
    for index, (low, high) in enumerate(PLATFORMS):
        if low <= x <= high:
            return index
    return -1


class PlatformEnv(HybridEnv):
    """Three discrete actions with one parameter each."""

    def __init__(self):
        """Build the task."""
        super().__init__(
            EnvSpec(
                env_id="platform",
                obs_dim=4,
                n_discrete=3,
                action_dim=3,
                horizon=30,
                param_slices=((0, 1), (1, 2), (2, 3)),
                success="reach the end of the last platform",
                reward="forward progress",
            )
        )
        self.x = 0.0
        self.enemies = np.zeros(2)
        self.enemy_dirs = np.ones(2)

    def _reset(self) -> np.ndarray:
        self.x = 0.0
        self.enemies = np.array(
            [
                self.np_random.uniform(0.12, PLATFORMS[0][1]),
                self.np_random.uniform(*PLATFORMS[1]),
            ]
        )
        self.enemy_dirs = self.np_random.choice([-1.0, 1.0], size=2)
        return self._observe()

    def _move_enemies(self) -> None:
        for i in range(2):
            low, high = PLATFORMS[i]
            self.enemies[i] += self.enemy_dirs[i] * ENEMY_SPEED
            if not low <= self.enemies[i] <= high:
                self.enemy_dirs[i] *= -1.0
                self.enemies[i] = np.clip(self.enemies[i], low, high)

    def _step(
        self, k: int, params: np.ndarray
    ) -> Tuple[float, bool, bool, Dict[str, Any]]:
        low, high = RANGES[k]
        distance = low + (high - low) * (float(params[0]) + 1.0) / 2.0
        start = self.x
        end = min(start + distance, 1.0)

        failed = False
        if k == RUN:
            if platform_at(end) != platform_at(start):
                failed = True  # ran off the edge
            elif any(
                start < e + ENEMY_WIDTH and e - ENEMY_WIDTH < end for e in self.enemies
            ):
                failed = True
        else:
            if platform_at(end) < 0:
                failed = True
            elif any(abs(end - e) < ENEMY_WIDTH for e in self.enemies):
                failed = True

        self.x = end
        self._move_enemies()
        success = not failed and self.x >= FINISH
        return end - start, success, failed, {"platform": platform_at(end)}

    def _observe(self) -> np.ndarray:
        return np.array(
            [
                self.x,
                self.enemies[0] - self.x,
                self.enemies[1] - self.x,
                platform_at(self.x) / 2.0,
            ]
        )
