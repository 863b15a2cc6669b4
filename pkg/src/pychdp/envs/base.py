"""Hybrid-action stepping contract shared by every environment."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from gymnasium import spaces
from gymnasium.utils import seeding

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HybridAction:
    """A discrete index paired with a fixed-width parameter vector."""

    k: int
    a_c: np.ndarray


@dataclass(frozen=True)
class EnvSpec:
    """Static description of an environment.

    ``param_slices[k]`` is the (start, stop) range of ``a_c`` that discrete
    action ``k`` reads; the remaining entries are ignored.
    """

    env_id: str
    obs_dim: int
    n_discrete: int
    action_dim: int
    horizon: int
    param_slices: Tuple[Tuple[int, int], ...]
    success: str = ""
    reward: str = ""

    def __post_init__(self):
        """Validate the sizes."""
        if self.n_discrete < 1:
            raise ValueError(f"{self.env_id}: K must be >= 1")
        if self.horizon < 1:
            raise ValueError(f"{self.env_id}: horizon must be >= 1")
        if len(self.param_slices) != self.n_discrete:
            raise ValueError(f"{self.env_id}: need one parameter slice per action")
        for start, stop in self.param_slices:
            if not 0 <= start <= stop <= self.action_dim:
                raise ValueError(f"{self.env_id}: bad parameter slice {start}:{stop}")

    @property
    def single_step(self) -> bool:
        """True for the one-decision analysis variants."""
        return self.horizon == 1


@dataclass
class StepResult:
    """Outcome of one environment step."""

    s_next: np.ndarray
    reward: float
    done: bool
    success: bool
    info: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Success always ends the episode."""
        if self.success and not self.done:
            raise ValueError("A successful step must end the episode")


class HybridEnv(ABC):
    """Base class for parameterized-action environments.

    Subclasses implement ``_reset`` and ``_step``; this class owns seeding,
    the time limit, action validation and the done/success bookkeeping.
    """

    spec: EnvSpec

    def __init__(self, spec: EnvSpec):
        """Initialize spaces from the environment description."""
        self.spec = spec
        self.observation_space = spaces.Box(
            low=-np.inf, high=np.inf, shape=(spec.obs_dim,), dtype=np.float32
        )
        self.action_space = spaces.Tuple(
            (
                spaces.Discrete(spec.n_discrete),
                spaces.Box(
                    low=-1.0, high=1.0, shape=(spec.action_dim,), dtype=np.float32
                ),
            )
        )
        self.np_random, _ = seeding.np_random(None)
        self.t = 0
        self.done = True

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        """Start a new episode; the same seed always yields the same state."""
        self.np_random, _ = seeding.np_random(seed)
        self.t = 0
        self.done = False
        return self._reset().astype(np.float32)

    def step(self, action: HybridAction) -> StepResult:
        """Apply one hybrid action."""
        if self.done:
            raise RuntimeError(f"{self.spec.env_id}: episode is finished, call reset()")
        k = int(action.k)
        if not 0 <= k < self.spec.n_discrete:
            raise ValueError(
                f"{self.spec.env_id}: discrete action {k} outside "
                f"[0, {self.spec.n_discrete})"
            )
        a_c = np.clip(np.asarray(action.a_c, dtype=np.float64), -1.0, 1.0)
        if a_c.shape != (self.spec.action_dim,):
            raise ValueError(
                f"{self.spec.env_id}: expected {self.spec.action_dim} parameters, "
                f"got shape {a_c.shape}"
            )

        start, stop = self.spec.param_slices[k]
        reward, success, failed, info = self._step(k, a_c[start:stop])
        self.t += 1
        truncated = self.t >= self.spec.horizon and not (success or failed)
        self.done = success or failed or truncated
        info = dict(info, t=self.t, truncated=truncated)
        return StepResult(
            s_next=self._observe().astype(np.float32),
            reward=float(reward),
            done=self.done,
            success=bool(success),
            info=info,
        )

    @abstractmethod
    def _reset(self) -> np.ndarray:
        """Draw the initial state from ``self.np_random`` and observe it."""

    @abstractmethod
    def _step(
        self, k: int, params: np.ndarray
    ) -> Tuple[float, bool, bool, Dict[str, Any]]:
        """Advance the dynamics; return (reward, success, failed, info)."""

    @abstractmethod
    def _observe(self) -> np.ndarray:
        """Current observation vector."""
