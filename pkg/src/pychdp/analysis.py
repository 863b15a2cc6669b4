"""Mode analysis for single-step Hard Move."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd
import torch.nn as nn

from .envs.base import HybridEnv
from .envs.hard_move import HardMoveEnv
from .evaluation import Agent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModeRow:
    """One discrete action and how it was used."""

    k: int
    base_direction: Tuple[float, float]
    frequency: float
    count: int
    action_mean: float
    action_std: float


@dataclass
class ModeReport:
    """Distribution of chosen modes over repeated single-step trials."""

    env_id: str
    trials: int
    rows: List[ModeRow]

    def __post_init__(self):
        """Validate frequencies and ordering."""
        total = sum(row.frequency for row in self.rows)
        if self.rows and abs(total - 1.0) > 1e-9:
            raise ValueError(f"Mode frequencies sum to {total}, not 1")
        freqs = [row.frequency for row in self.rows]
        if freqs != sorted(freqs, reverse=True):
            raise ValueError("Mode rows must be sorted by frequency, descending")

    def modes_above(self, threshold: float) -> List[ModeRow]:
        """Rows chosen at least ``threshold`` of the time."""
        return [row for row in self.rows if row.frequency >= threshold]

    def to_frame(self) -> pd.DataFrame:
        """One row per mode."""
        return pd.DataFrame(
            [
                {
                    "k": row.k,
                    "base_direction_x": row.base_direction[0],
                    "base_direction_y": row.base_direction[1],
                    "frequency": row.frequency,
                    "count": row.count,
                    "action_mean": row.action_mean,
                    "action_std": row.action_std,
                }
                for row in self.rows
            ]
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        """Export as CSV."""
        self.to_frame().to_csv(path, index=False)

    def to_markdown(self) -> str:
        """Table in the usual 'direction / frequency / mean ± std' layout."""
        table = pd.DataFrame(
            {
                "Base Direction": [
                    f"({row.base_direction[0]:.3f}, {row.base_direction[1]:.3f})"
                    for row in self.rows
                ],
                "Frequency": [f"{100 * row.frequency:.2f}%" for row in self.rows],
                "Continuous Action": [
                    f"{row.action_mean:.3f} ± {row.action_std:.3f}"
                    for row in self.rows
                ],
            }
        )
        return table.to_markdown(index=False)


def analyze_modes(
    env: HybridEnv, agent: Agent, trials: int = 100, seed: int = 0
) -> ModeReport:
    """Act ``trials`` times from the fixed start and group by chosen mask."""
    if not isinstance(env, HardMoveEnv) or not env.spec.single_step:
        raise ValueError(
            f"Mode analysis needs a single-step Hard Move env, got {env.spec.env_id!r}"
        )
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")

    chosen = []
    for trial in range(trials):
        state = env.reset(seed=seed + trial)
        action = agent.act(state)
        env.step(action)
        chosen.append({"k": action.k, "c": float(np.clip(action.a_c[0], -1.0, 1.0))})

    frame = pd.DataFrame(chosen)
    grouped = frame.groupby("k")["c"].agg(["count", "mean", lambda c: c.std(ddof=0)])
    grouped.columns = ["n", "c_mean", "c_std"]
    grouped = grouped.reset_index().sort_values(["n", "k"], ascending=[False, True])

    rows = []
    for record in grouped.itertuples(index=False):
        direction = env.base_direction(int(record.k))
        rows.append(
            ModeRow(
                k=int(record.k),
                base_direction=(float(direction[0]), float(direction[1])),
                frequency=record.n / trials,
                count=int(record.n),
                action_mean=float(record.c_mean),
                action_std=float(record.c_std),
            )
        )
    logger.info("Mode analysis on %s: %d distinct modes", env.spec.env_id, len(rows))
    return ModeReport(env_id=env.spec.env_id, trials=trials, rows=rows)


def choice_frequencies(
    env: HybridEnv, agent: Agent, trials: int = 100, seed: int = 0
) -> pd.Series:
    """Share of first-step decisions per discrete action, indexed by k."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    chosen = []
    for trial in range(trials):
        chosen.append(agent.act(env.reset(seed=seed + trial)).k)
    counts = pd.Series(chosen).value_counts()
    counts = counts.reindex(range(env.spec.n_discrete), fill_value=0)
    return (counts / trials).rename("frequency")


def codebook_frame(head: nn.Module) -> pd.DataFrame:
    """Codebook rows with their selection counts (counts only for argmax heads)."""
    counts = head.selection_counts.cpu().numpy()
    frame = pd.DataFrame({"k": np.arange(len(counts)), "selections": counts})
    weight = getattr(head, "weight", None)
    if weight is not None:
        table = weight.detach().cpu().numpy()
        for j in range(table.shape[1]):
            frame[f"e{j}"] = table[:, j]
    dead = head.dead_codes()
    if dead:
        logger.warning("%d codewords never selected: %s", len(dead), dead[:20])
    return frame
