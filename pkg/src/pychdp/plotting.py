"""Learning-curve plots across seeds and ablations."""

# -*- coding: utf-8 -*-
import json
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

from .metrics import metrics_frame  # noqa: E402

logger = logging.getLogger(__name__)

SMOOTHING_WINDOW = 5
FOOTER = (
    "Curves smoothed with a moving average over {window} evaluations; "
    "bands show ±1 std across seeds."
)


def variant_label(flags: Dict[str, bool]) -> str:
    """Human-readable name of an ablation flag combination."""
    parts = []
    if flags.get("deterministic_policy"):
        parts.append("w/o diffusion")
    if flags.get("no_codebook"):
        parts.append("w/o codebook")
    if flags.get("concurrent_update"):
        parts.append("w/o sequential update")
    return "CHDP" if not parts else "CHDP " + ", ".join(parts)


def _run_label(run_dir: Path) -> str:
    manifest = run_dir / "manifest.json"
    if manifest.exists():
        with open(manifest) as f:
            return variant_label(json.load(f).get("ablation_flags", {}))
    return run_dir.name


def learning_curve_frame(
    run_dirs: Sequence[Union[str, Path]], window: int = SMOOTHING_WINDOW
) -> pd.DataFrame:
    """Smoothed success rate per (variant, step): mean, std and seed count."""
    if not run_dirs:
        raise ValueError("No run directories given")
    frames = []
    for run_dir in map(Path, run_dirs):
        metrics_path = run_dir / "metrics.jsonl"
        if not metrics_path.exists():
            raise ValueError(f"No metrics in {run_dir}")
        frame = metrics_frame(metrics_path, event="eval")
        if frame.empty:
            raise ValueError(f"No evaluation records in {metrics_path}")
        frame = frame.sort_values("step")
        frame["smoothed"] = frame["success_rate"].rolling(window, min_periods=1).mean()
        frame["run"] = str(run_dir)
        frame["label"] = _run_label(run_dir)
        frames.append(frame[["label", "run", "step", "smoothed"]])

    data = pd.concat(frames, ignore_index=True)
    return (
        data.groupby(["label", "step"])["smoothed"]
        .agg(mean="mean", std=lambda s: s.std(ddof=0), seeds="count")
        .reset_index()
    )


def plot_learning_curves(
    run_dirs: Sequence[Union[str, Path]],
    output_path: Union[str, Path],
    window: int = SMOOTHING_WINDOW,
    title: Optional[str] = None,
) -> Path:
    """Plot success rate vs environment steps, one curve per variant.

    Runs sharing a variant are treated as seeds: the curve is their mean and
    the band is ±1 std. Nothing is written if any input lacks metrics.
    """
    curves = learning_curve_frame(run_dirs, window)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)

    sns.set_theme(style="whitegrid")
    fig, ax = plt.subplots(figsize=(8, 5))
    for label, group in curves.groupby("label"):
        ax.plot(group["step"], group["mean"], label=label)
        if group["seeds"].max() > 1:
            ax.fill_between(
                group["step"],
                group["mean"] - group["std"],
                group["mean"] + group["std"],
                alpha=0.2,
            )
    ax.set_xlabel("Environment steps")
    ax.set_ylabel("Success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(title or "Success rate vs environment steps")
    ax.legend()
    fig.text(0.01, 0.01, FOOTER.format(window=window), fontsize=8)
    fig.tight_layout(rect=(0, 0.04, 1, 1))
    fig.savefig(output_path)
    plt.close(fig)
    logger.info("Wrote %s", output_path)
    return output_path
