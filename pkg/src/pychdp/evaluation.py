"""Success-rate evaluation, baseline agents and episode traces."""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch

from .envs.base import EnvSpec, HybridAction, HybridEnv
from .envs.hard_move import HardMoveEnv
from .metrics import read_metrics
from .trainer import CHDPAgent

logger = logging.getLogger(__name__)

FINAL_WINDOW = 5


class Agent(Protocol):
    """Anything that maps an observation to a hybrid action."""

    def act(self, state: np.ndarray) -> HybridAction:
        """Choose an action."""
        ...


class PolicyAgent:
    """Frozen CHDP agent with its own sampling generator."""

    def __init__(self, agent: CHDPAgent, seed: int = 0):
        """Wrap ``agent``; noise comes from a generator seeded with ``seed``."""
        self.agent = agent
        self.generator = torch.Generator().manual_seed(seed)

    def act(self, state: np.ndarray) -> HybridAction:
        """Sample (k, a_c) for one state."""
        with torch.no_grad():
            _, k, a_c = self.agent.act(
                torch.as_tensor(state, dtype=torch.float32), self.generator
            )
        return HybridAction(k=int(k), a_c=a_c.numpy().astype(np.float64))


class RandomAgent:
    """Uniform discrete index and uniform parameters."""

    def __init__(self, spec: EnvSpec, seed: int = 0):
        """Initialize with its own numpy generator."""
        self.spec = spec
        self.rng = np.random.default_rng(seed)

    def act(self, state: np.ndarray) -> HybridAction:
        """Draw a random hybrid action."""
        k = int(self.rng.integers(self.spec.n_discrete))
        a_c = self.rng.uniform(-1.0, 1.0, size=self.spec.action_dim)
        return HybridAction(k=k, a_c=a_c)


class ScriptedHardMoveAgent:
    """Geometric oracle for Hard Move.

    For every mask it projects the offset to the target onto the mask's base
    direction, clips the magnitude to [-1, 1] and keeps the mask whose step
    lands closest to the target (lowest index on ties).
    """

    def __init__(self, env: HardMoveEnv):
        """Bind to ``env`` for its directions and move scale."""
        if not isinstance(env, HardMoveEnv):
            raise ValueError("The scripted agent only drives Hard Move")
        self.env = env
        self.directions = np.stack(
            [env.base_direction(k) for k in range(env.spec.n_discrete)]
        )

    def act(self, state: np.ndarray) -> HybridAction:
        """Pick the best-aligned mask and the magnitude that lands on target."""
        state = np.asarray(state, dtype=np.float64)
        offset = state[2:4] - state[0:2]
        norms = np.einsum("ij,ij->i", self.directions, self.directions)
        safe = np.where(norms > 0, norms, 1.0)
        projected = self.directions @ offset / (safe * self.env.move_scale)
        c = np.where(norms > 0, projected, 0.0)
        c = np.clip(c, -1.0, 1.0)
        landing = c[:, None] * self.env.move_scale * self.directions
        k = int(np.argmin(np.linalg.norm(offset[None, :] - landing, axis=1)))
        return HybridAction(k=k, a_c=np.array([c[k]]))


class TraceWriter:
    """JSON-lines episode trace, one object per environment step."""

    def __init__(self, path: Union[str, Path]):
        """Create (truncate) the trace file."""
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file: IO[str] = open(self.path, "w", encoding="utf-8")

    def write(
        self, episode: int, t: int, state, action: HybridAction, reward, success
    ) -> None:
        """Append one step."""
        record = {
            "episode": episode,
            "t": t,
            "state": np.asarray(state, dtype=np.float64).round(6).tolist(),
            "k": action.k,
            "a_c": np.asarray(action.a_c, dtype=np.float64).round(6).tolist(),
            "reward": round(float(reward), 6),
            "success": bool(success),
        }
        self._file.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self) -> None:
        """Flush and close."""
        self._file.close()


@dataclass
class EvalResult:
    """Outcome of one evaluation round."""

    episodes: int
    success_rate: float
    mean_return: float
    std_return: float
    mean_length: float
    returns: List[float] = field(default_factory=list, repr=False)

    def as_metrics(self) -> dict:
        """Fields recorded in the metrics log."""
        values = asdict(self)
        values.pop("returns")
        return values


def evaluate(
    env: HybridEnv,
    agent: Agent,
    episodes: int,
    seed: int = 0,
    trace: Optional[TraceWriter] = None,
) -> EvalResult:
    """Run ``episodes`` episodes with seeds ``seed``, ``seed + 1``, ..."""
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    successes, returns, lengths = 0, [], []
    for episode in range(episodes):
        state = env.reset(seed=seed + episode)
        total, done, success = 0.0, False, False
        while not done:
            action = agent.act(state)
            result = env.step(action)
            if trace is not None:
                trace.write(
                    episode, env.t, state, action, result.reward, result.success
                )
            total += result.reward
            done, success, state = result.done, result.success, result.s_next
        successes += int(success)
        returns.append(total)
        lengths.append(env.t)
    result = EvalResult(
        episodes=episodes,
        success_rate=successes / episodes,
        mean_return=float(np.mean(returns)),
        std_return=float(np.std(returns)),
        mean_length=float(np.mean(lengths)),
        returns=returns,
    )
    logger.debug("Evaluated %d episodes: success %.3f", episodes, result.success_rate)
    return result


@dataclass
class EvalReport:
    """Success rates of one run over its evaluation checkpoints."""

    steps: List[int]
    success_rates: List[float]
    mean_returns: List[float] = field(default_factory=list)

    def __post_init__(self):
        """Validate the rates."""
        if len(self.steps) != len(self.success_rates):
            raise ValueError("steps and success_rates differ in length")
        if any(not 0.0 <= r <= 1.0 for r in self.success_rates):
            raise ValueError("success rates must lie in [0, 1]")

    @property
    def final_window(self) -> float:
        """Mean success rate over the last five evaluations."""
        if not self.success_rates:
            raise ValueError("EvalReport has no evaluations")
        return float(np.mean(self.success_rates[-FINAL_WINDOW:]))

    @classmethod
    def from_metrics(cls, path: Union[str, Path]) -> "EvalReport":
        """Collect the eval events of a metrics file."""
        records = read_metrics(path, event="eval")
        return cls(
            steps=[r["step"] for r in records],
            success_rates=[r["success_rate"] for r in records],
            mean_returns=[r["mean_return"] for r in records],
        )

    def to_frame(self) -> pd.DataFrame:
        """One row per evaluation."""
        frame = pd.DataFrame({"step": self.steps, "success_rate": self.success_rates})
        if self.mean_returns:
            frame["mean_return"] = self.mean_returns
        return frame

    def to_csv(self, path: Union[str, Path]) -> None:
        """Export as CSV."""
        self.to_frame().to_csv(path, index=False)


def aggregate_trials(reports: Sequence[EvalReport]) -> Tuple[List[float], float, float]:
    """Per-trial final-window scores, then their mean and (population) std."""
    if not reports:
        raise ValueError("No runs to aggregate")
    scores = [report.final_window for report in reports]
    return scores, float(np.mean(scores)), float(np.std(scores))
