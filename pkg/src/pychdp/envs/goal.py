"""Goal and Hard Goal: dribble toward the goal and beat the keeper.

Simplified soccer in a unit field. The ball (with the player) starts in the
middle third; the goal mouth spans y in [-0.2, 0.2] on the line x = 1; the
keeper stands on the goal line and drifts toward the ball's y by at most 0.1
per step. KICK_TO moves the ball at most 0.3 toward a point in the field.
A shot scores when the ball is within shooting range (0.5 of the goal line)
and the aim point is farther from the keeper than the keeper can reach,
which grows with the shot distance. Missed or saved shots end the episode.

Goal has two shot actions (left and right half of the mouth); Hard Goal
splits the mouth into ten segments, one shot action each.
"""

from typing import Any, Dict, Tuple

import numpy as np

from .base import EnvSpec, HybridEnv

KICK_TO = 0
MOUTH_HALF_WIDTH = 0.2
KICK_RANGE = 0.3
SHOT_RANGE = 0.5
KEEPER_SPEED = 0.1
KEEPER_BASE_REACH = 0.05
KEEPER_REACH_PER_DISTANCE = 0.2
GOAL_BONUS = 10.0
PROGRESS_WEIGHT = 2.0


class GoalEnv(HybridEnv):
    """Goal-scoring task with ``n_segments`` shot actions plus KICK_TO."""

    def __init__(self, n_segments: int = 2):
        """Build the task.

        Args:
        ----
            n_segments: Number of equal slices of the goal mouth, one shot
                action per slice. 2 gives Goal, 10 gives Hard Goal.

        """
        if n_segments < 1:
            raise ValueError("Goal needs at least one shot segment")
        self.n_segments = n_segments
        env_id = {2: "goal", 10: "hard_goal"}.get(n_segments, f"goal_s{n_segments}")
        # KICK_TO reads (x, y); shot j reads one aim parameter.
        slices = ((0, 2),) + tuple((2 + j, 3 + j) for j in range(n_segments))
        super().__init__(
            EnvSpec(
                env_id=env_id,
                obs_dim=5,
                n_discrete=1 + n_segments,
                action_dim=2 + n_segments,
                horizon=10,
                param_slices=slices,
                success="shot beats the keeper",
                reward="2 x progress toward the goal line per kick, +10 on a goal",
            )
        )
        edges = np.linspace(-MOUTH_HALF_WIDTH, MOUTH_HALF_WIDTH, n_segments + 1)
        self.segments = np.stack([edges[:-1], edges[1:]], axis=1)
        self.ball = np.zeros(2)
        self.keeper_y = 0.0

    def aim_point(self, segment: int, param: float) -> float:
        """Map a shot parameter in [-1, 1] to a y inside its mouth segment."""
        low, high = self.segments[segment]
        return float(low + (high - low) * (param + 1.0) / 2.0)

    def keeper_reach(self) -> float:
        """How far from its position the keeper can still save a shot."""
        return KEEPER_BASE_REACH + KEEPER_REACH_PER_DISTANCE * (1.0 - self.ball[0])

    def _reset(self) -> np.ndarray:
        self.ball = np.array(
            [self.np_random.uniform(0.2, 0.5), self.np_random.uniform(-0.3, 0.3)]
        )
        self.keeper_y = 0.0
        return self._observe()

    def _step(
        self, k: int, params: np.ndarray
    ) -> Tuple[float, bool, bool, Dict[str, Any]]:
        if k == KICK_TO:
            # params in [-1, 1]^2 map to x in [0, 1], y in [-0.5, 0.5]
            target = np.array([(params[0] + 1.0) / 2.0, params[1] / 2.0])
            delta = target - self.ball
            length = float(np.linalg.norm(delta))
            if length > KICK_RANGE:
                delta *= KICK_RANGE / length
            before = 1.0 - self.ball[0]
            self.ball = np.clip(self.ball + delta, [0.0, -0.5], [1.0, 0.5])
            self.keeper_y += float(
                np.clip(
                    np.clip(self.ball[1], -MOUTH_HALF_WIDTH, MOUTH_HALF_WIDTH)
                    - self.keeper_y,
                    -KEEPER_SPEED,
                    KEEPER_SPEED,
                )
            )
            progress = before - (1.0 - self.ball[0])
            return PROGRESS_WEIGHT * progress, False, False, {"kind": "kick"}

        aim = self.aim_point(k - 1, float(params[0]))
        in_range = 1.0 - self.ball[0] <= SHOT_RANGE
        beaten = abs(aim - self.keeper_y) > self.keeper_reach()
        scored = bool(in_range and beaten)
        reward = GOAL_BONUS if scored else 0.0
        return reward, scored, not scored, {"kind": "shot", "aim": aim}

    def _observe(self) -> np.ndarray:
        return np.array(
            [
                self.ball[0],
                self.ball[1],
                self.keeper_y,
                1.0 - self.ball[0],
                self.keeper_reach(),
            ]
        )
