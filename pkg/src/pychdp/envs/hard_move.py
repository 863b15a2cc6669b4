"""Hard Move: steer a point mass with n on/off actuators.

Actuator ``j`` pushes along the unit vector at angle 2*pi*j/n (actuator 0
points along +x, indices run counterclockwise). A discrete action is an
n-bit mask (bit j = actuator j); the resulting base direction is the mean of
the selected unit vectors and the scalar parameter c in [-1, 1] scales it::

    position += c * move_scale * base_direction(mask)

Positions are clipped to the arena [-1, 1]^2. Each step pays
-(distance to target) / arena diagonal, plus 10 on success (distance < 0.1).
"""

from typing import Any, Dict, Sequence, Tuple

import numpy as np

from .base import EnvSpec, HybridEnv

ARENA = 1.0
ARENA_DIAGONAL = 2.0 * np.sqrt(2.0) * ARENA
SUCCESS_RADIUS = 0.1
SUCCESS_BONUS = 10.0
SINGLE_STEP_TARGET = (0.0, 0.3)


def actuator_directions(n: int) -> np.ndarray:
    """Unit vectors of the n actuators, shape (n, 2)."""
    angles = 2.0 * np.pi * np.arange(n) / n
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def mask_from_index(k: int, n: int) -> np.ndarray:
    """Bit vector of discrete action ``k`` (bit j switches actuator j)."""
    return np.array([(k >> j) & 1 for j in range(n)], dtype=np.int64)


def index_from_mask(mask: Sequence[int]) -> int:
    """Inverse of mask_from_index."""
    return int(sum(int(bool(b)) << j for j, b in enumerate(mask)))


def hard_move_base_direction(mask: Sequence[int]) -> np.ndarray:
    """Mean of the selected actuator unit vectors; (0, 0) for the empty mask."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.zeros(2)
    return actuator_directions(mask.shape[0])[mask].mean(axis=0)


class HardMoveEnv(HybridEnv):
    """Hard Move with n actuators (K = 2^n discrete actions, one parameter)."""

    def __init__(self, n: int, single_step: bool = False):
        """Build the task.

        Args:
        ----
            n: Number of actuators.
            single_step: Use the one-decision analysis variant: start at the
                origin, target at (0, 0.3), horizon 1, move_scale 0.4.

        """
        if n < 1:
            raise ValueError(f"Hard Move needs at least one actuator, got {n}")
        self.n = n
        self.single_step = single_step
        self.move_scale = 0.4 if single_step else 0.2
        suffix = "_single_step" if single_step else ""
        super().__init__(
            EnvSpec(
                env_id=f"hard_move_n{n}{suffix}",
                obs_dim=4,
                n_discrete=2**n,
                action_dim=1,
                horizon=1 if single_step else 25,
                param_slices=tuple((0, 1) for _ in range(2**n)),
                success="distance to target < 0.1",
                reward="-distance/arena diagonal per step, +10 on success",
            )
        )
        self._directions = np.stack(
            [hard_move_base_direction(mask_from_index(k, n)) for k in range(2**n)]
        )
        self.agent_pos = np.zeros(2)
        self.target_pos = np.array(SINGLE_STEP_TARGET)

    def base_direction(self, k: int) -> np.ndarray:
        """Base direction of discrete action ``k``."""
        return self._directions[k]

    def _reset(self) -> np.ndarray:
        if self.single_step:
            self.agent_pos = np.zeros(2)
            self.target_pos = np.array(SINGLE_STEP_TARGET)
        else:
            self.agent_pos = self.np_random.uniform(-0.9, 0.9, size=2)
            self.target_pos = self.np_random.uniform(-0.9, 0.9, size=2)
            while np.linalg.norm(self.target_pos - self.agent_pos) < 3 * SUCCESS_RADIUS:
                self.target_pos = self.np_random.uniform(-0.9, 0.9, size=2)
        return self._observe()

    def _step(
        self, k: int, params: np.ndarray
    ) -> Tuple[float, bool, bool, Dict[str, Any]]:
        displacement = float(params[0]) * self.move_scale * self._directions[k]
        self.agent_pos = np.clip(self.agent_pos + displacement, -ARENA, ARENA)
        distance = float(np.linalg.norm(self.target_pos - self.agent_pos))
        success = distance < SUCCESS_RADIUS
        reward = -distance / ARENA_DIAGONAL + (SUCCESS_BONUS if success else 0.0)
        return reward, success, False, {"distance": distance}

    def _observe(self) -> np.ndarray:
        return np.concatenate([self.agent_pos, self.target_pos])
