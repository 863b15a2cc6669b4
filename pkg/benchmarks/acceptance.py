"""Desk-scale acceptance experiments for CHDP.

Trains the single-step Hard Move configurations and compares them with the
random baseline. It also tracks how often a bandit run picks its known best
action, tabulates the chosen modes and checks that identical runs produce
identical metric streams. The algebra and gradient contracts are
covered by the unit suite; this script only runs the long experiments.

Results land in ``benchmarks/results/acceptance.{md,json}``.
"""

# -*- coding: utf-8 -*-
import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import pandas as pd
from tabulate import tabulate

from pychdp.analysis import analyze_modes, choice_frequencies
from pychdp.cadence import CheckpointCadence, StepIntervalCadence
from pychdp.checkpoint import load_checkpoint, restore_trainer
from pychdp.config import RunConfig, load_run_config
from pychdp.envs import registry
from pychdp.evaluation import PolicyAgent, RandomAgent, evaluate
from pychdp.plotting import plot_learning_curves
from pychdp.runner import (
    EVAL_SEED_OFFSET,
    ExperimentRunner,
    RunResult,
    get_system_info,
)

logger = logging.getLogger(__name__)

CONFIG_DIR = Path("configs")
RESULTS_DIR = Path("benchmarks/results")
RUNS_DIR = Path("benchmarks/runs")

FINAL_EPISODES = 100
MODE_TRIALS = 100
MODE_THRESHOLD = 0.05
ALIGNMENT_CHECKPOINTS = 20


def with_train(run_config: RunConfig, **updates: Any) -> RunConfig:
    """Copy of ``run_config`` with some train fields replaced."""
    train = run_config.train.model_copy(update=updates)
    return run_config.model_copy(update={"train": train})


def train(
    run_config: RunConfig, name: str, cadence: Optional[CheckpointCadence] = None
) -> RunResult:
    """Run one configuration under ``RUNS_DIR/name``."""
    print(f"\nTraining {name} ({run_config.train.total_steps} steps)...")
    started = time.perf_counter()
    result = ExperimentRunner(
        run_config, run_dir=str(RUNS_DIR / name), debug_mode=False, cadence=cadence
    ).run()
    print(
        f"  done in {time.perf_counter() - started:.0f}s, "
        f"final-window success {result.report.final_window:.3f}"
    )
    return result


def policy_success(result: RunResult, episodes: int = FINAL_EPISODES) -> float:
    """Success rate of a run's final checkpoint on fresh episodes."""
    trainer = restore_trainer(load_checkpoint(result.final_checkpoint))
    env = registry.make(trainer.run_config.env_id)
    outcome = evaluate(
        env, PolicyAgent(trainer.agent, seed=0), episodes, seed=2 * EVAL_SEED_OFFSET
    )
    return outcome.success_rate


def random_success(env_id: str, episodes: int = 2000) -> float:
    """Success rate of the uniform random agent."""
    env = registry.make(env_id)
    return evaluate(env, RandomAgent(env.spec, seed=0), episodes, seed=0).success_rate


def row(
    criterion: str, measured: str, threshold: str, passed: bool
) -> Dict[str, Any]:
    return {
        "criterion": criterion,
        "measured": measured,
        "threshold": threshold,
        "passed": passed,
    }


def alignment_trend(run_dir: Path, trials: int = 50) -> Dict[str, Any]:
    """Spearman trend of how often each checkpoint picks the best action.

    The run must be on an environment with a known ``best_index``, so the
    designated action is fixed before training rather than read off the
    final checkpoint.
    """
    paths = sorted((run_dir / "checkpoints").glob("step_*.ckpt"))
    if len(paths) < 2:
        raise ValueError(f"Need at least two checkpoints in {run_dir}")
    steps, frequencies = [], []
    best = None
    for path in paths:
        checkpoint = load_checkpoint(path)
        trainer = restore_trainer(checkpoint)
        env = registry.make(trainer.run_config.env_id)
        best = getattr(env, "best_index", None)
        if best is None:
            raise ValueError(f"{env.spec.env_id} has no known best action")
        shares = choice_frequencies(env, PolicyAgent(trainer.agent, seed=0), trials)
        steps.append(checkpoint.step)
        frequencies.append(float(shares[best]))

    frame = pd.DataFrame({"step": steps, "frequency": frequencies})
    rho = frame.corr(method="spearman").loc["step", "frequency"]
    rho = 0.0 if pd.isna(rho) else float(rho)
    return {
        "k": int(best),
        "checkpoints": len(frame),
        "spearman": rho,
        "frequencies": frequencies,
    }


def end_to_end(rows: List[Dict[str, Any]], details: Dict[str, Any]) -> None:
    """Hard Move n=4 single step: learned policy vs random baseline."""
    run_config = load_run_config(str(CONFIG_DIR / "hard_move_n4_single_step.json"))
    result = train(run_config, "n4_chdp")
    success = policy_success(result)
    baseline = random_success(run_config.env_id)
    details["end_to_end"] = {"CHDP": success, "random": baseline}
    rows.append(
        row("hard_move_n4 success", f"{success:.3f}", ">= 0.80", success >= 0.8)
    )
    rows.append(
        row("hard_move_n4 random", f"{baseline:.3f}", "< 0.05", baseline < 0.05)
    )


def alignment(rows: List[Dict[str, Any]], details: Dict[str, Any]) -> None:
    """Codeword bandit: the known best action is chosen more often over time."""
    run_config = load_run_config(str(CONFIG_DIR / "codeword_bandit.json"))
    interval = run_config.train.total_steps // ALIGNMENT_CHECKPOINTS
    result = train(run_config, "bandit_chdp", StepIntervalCadence(interval))

    print("Scoring best-action frequency over checkpoints...")
    trend = alignment_trend(result.run_dir)
    details["alignment"] = trend
    rows.append(
        row(
            f"alignment of k={trend['k']} ({trend['checkpoints']} ckpts)",
            f"{trend['spearman']:.3f}",
            "> 0",
            trend["spearman"] > 0,
        )
    )


def modes_and_ablations(
    rows: List[Dict[str, Any]], details: Dict[str, Any], seeds: int
) -> None:
    """Hard Move n=6 single step: mode tables and the ablation ordering."""
    base = load_run_config(str(CONFIG_DIR / "hard_move_n6_single_step.json"))
    env = registry.make(base.env_id)

    full_runs, no_codebook_runs = [], []
    for seed in range(seeds):
        full_runs.append(train(with_train(base, seed=seed), f"n6_chdp_s{seed}"))
        no_codebook_runs.append(
            train(
                with_train(base, seed=seed, no_codebook=True),
                f"n6_no_codebook_s{seed}",
            )
        )
    deterministic = train(
        with_train(base, deterministic_policy=True), "n6_deterministic_s0"
    )

    tables = {}
    for name, result in (("CHDP", full_runs[0]), ("w/o diffusion", deterministic)):
        trainer = restore_trainer(load_checkpoint(result.final_checkpoint))
        report = analyze_modes(env, PolicyAgent(trainer.agent, seed=0), MODE_TRIALS)
        tables[name] = report
        details.setdefault("modes", {})[name] = report.to_frame().to_dict("records")

    full_modes = len(tables["CHDP"].modes_above(MODE_THRESHOLD))
    rows.append(
        row("hard_move_n6 CHDP modes >= 5%", str(full_modes), ">= 2", full_modes >= 2)
    )
    det = tables["w/o diffusion"]
    det_ok = len(det.rows) == 1 and det.rows[0].action_std < 1e-9
    rows.append(
        row(
            "hard_move_n6 deterministic modes",
            f"{len(det.rows)} (std {det.rows[0].action_std:.3f})",
            "1 (std 0.000)",
            det_ok,
        )
    )

    full = sum(policy_success(r) for r in full_runs) / seeds
    no_codebook = sum(policy_success(r) for r in no_codebook_runs) / seeds
    baseline = random_success(base.env_id)
    details["ablation"] = {
        "CHDP": full,
        "w/o codebook": no_codebook,
        "random": baseline,
    }
    rows.append(
        row(
            f"hard_move_n6 ordering ({seeds} seeds)",
            f"{full:.3f} / {no_codebook:.3f} / {baseline:.3f}",
            "CHDP >= w/o codebook >= random",
            full >= no_codebook >= baseline,
        )
    )

    plot_learning_curves(
        [r.run_dir for r in full_runs + no_codebook_runs + [deterministic]],
        RESULTS_DIR / "hard_move_n6_curves.png",
        title="Hard Move n=6 (single step)",
    )
    details["mode_tables"] = {name: t.to_markdown() for name, t in tables.items()}


def determinism(rows: List[Dict[str, Any]]) -> None:
    """Identical configs and seeds give byte-identical metrics."""
    run_config = load_run_config(str(CONFIG_DIR / "smoke.json"))
    a = train(run_config, "smoke_a")
    b = train(run_config, "smoke_b")
    same = (a.run_dir / "metrics.jsonl").read_bytes() == (
        b.run_dir / "metrics.jsonl"
    ).read_bytes()
    rows.append(
        row(
            "identical metric streams",
            "identical" if same else "different",
            "identical",
            same and a.params_hash == b.params_hash,
        )
    )


def write_report(rows: List[Dict[str, Any]], details: Dict[str, Any]) -> Path:
    """Markdown and JSON summaries under RESULTS_DIR."""
    RESULTS_DIR.mkdir(parents=True, exist_ok=True)
    with open(RESULTS_DIR / "acceptance.json", "w") as f:
        json.dump(
            {"rows": rows, "details": details, "system": get_system_info()},
            f,
            indent=2,
            sort_keys=True,
        )

    table = [
        [r["criterion"], r["measured"], r["threshold"], "✓" if r["passed"] else "✗"]
        for r in rows
    ]
    lines = [
        "# Acceptance Results",
        "",
        tabulate(
            table,
            headers=["Criterion", "Measured", "Threshold", "Pass"],
            tablefmt="pipe",
        ),
        "",
    ]
    for name, markdown in details.get("mode_tables", {}).items():
        lines += [f"## Modes: {name}", "", markdown, ""]
    lines += ["## System", ""]
    lines += [f"- {key}: {value}" for key, value in get_system_info().items()]
    path = RESULTS_DIR / "acceptance.md"
    path.write_text("\n".join(lines) + "\n")
    return path


@click.command()
@click.option(
    "--only",
    type=click.Choice(["all", "n4", "alignment", "n6", "determinism"]),
    default="all",
    show_default=True,
    help="Run a subset of the experiments",
)
@click.option("--seeds", default=3, show_default=True, help="Seeds per n6 variant")
def main(only: str, seeds: int):
    """Run the acceptance experiments and write the report."""
    logging.basicConfig(level=logging.WARNING)
    rows: List[Dict[str, Any]] = []
    details: Dict[str, Any] = {}
    RESULTS_DIR.mkdir(parents=True, exist_ok=True)

    if only in ("all", "determinism"):
        determinism(rows)
    if only in ("all", "n4"):
        end_to_end(rows, details)
    if only in ("all", "alignment"):
        alignment(rows, details)
    if only in ("all", "n6"):
        modes_and_ablations(rows, details, seeds)

    path = write_report(rows, details)
    print("\nAcceptance Results Summary:")
    print("=" * 80)
    print(path.read_text())


if __name__ == "__main__":
    main()
