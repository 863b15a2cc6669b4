"""Training runs: rollout, learning, evaluation, checkpoints and provenance."""

import json
import logging
import platform
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import psutil
import torch

from . import __version__
from .cadence import CheckpointCadence, EvaluationCadence, StepIntervalCadence
from .checkpoint import SCHEMA_VERSION, save_checkpoint
from .config import RunConfig, config, config_hash
from .envs import registry
from .envs.base import HybridAction
from .evaluation import EvalReport, PolicyAgent, evaluate
from .formats import CheckpointFormat, JsonFormat, ProtoFormat
from .metrics import MetricsLog
from .replay import Transition
from .trainer import CHDPTrainer

logger = logging.getLogger(__name__)

EVAL_SEED_OFFSET = 1_000_000


def get_system_info() -> Dict[str, str]:
    """Get system configuration information.

    Returns
    -------
        Dictionary containing system information

    """
    return {
        "OS": platform.system() + " " + platform.release(),
        "Python": platform.python_version(),
        "Processor": platform.processor(),
        "Memory": f"{psutil.virtual_memory().total / (1024**3):.1f} GB",
        "CPU Cores": str(psutil.cpu_count(logical=False)),
        "CPU Threads": str(psutil.cpu_count(logical=True)),
        "torch": torch.__version__,
    }


def default_run_dir(run_config: RunConfig) -> Path:
    """<runs_dir>/<env>_<config hash prefix>_s<seed>."""
    name = (
        f"{run_config.env_id}_{config_hash(run_config)[:8]}_s{run_config.train.seed}"
    )
    return config.get_runs_dir() / name


@dataclass
class RunResult:
    """Where a run landed and how it ended."""

    run_dir: Path
    report: EvalReport
    final_checkpoint: Path
    params_hash: str


class ExperimentRunner:
    """Drive one training run end to end."""

    def __init__(
        self,
        run_config: RunConfig,
        run_dir: Optional[str] = None,
        debug_mode: Optional[bool] = None,
        cadence: Optional[CheckpointCadence] = None,
    ):
        """Initialize the runner.

        Args:
        ----
            run_config: Validated run configuration.
            run_dir: Output directory. Defaults to the config's output_dir,
                then to a directory under the configured runs dir.
            debug_mode: Write JSON checkpoints instead of protobuf. If None,
                uses the configured debug mode.
            cadence: When to checkpoint. Defaults to the config's
                checkpoint_interval, else after every evaluation.

        """
        self.run_config = run_config
        if run_dir is not None:
            self.run_dir = Path(run_dir)
        elif run_config.output_dir is not None:
            self.run_dir = Path(run_config.output_dir)
        else:
            self.run_dir = default_run_dir(run_config)
        debug_mode = config.get_debug_mode() if debug_mode is None else debug_mode
        self.format: CheckpointFormat = JsonFormat() if debug_mode else ProtoFormat()
        if cadence is None:
            interval = run_config.checkpoint_interval
            cadence = StepIntervalCadence(interval) if interval else EvaluationCadence()
        self.cadence = cadence

    @property
    def checkpoint_dir(self) -> Path:
        """Directory of periodic checkpoints."""
        return self.run_dir / "checkpoints"

    def _prepare(self) -> None:
        try:
            self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error("Cannot create run directory %s: %s", self.run_dir, e)
            raise ValueError(
                f"Unwritable output directory {self.run_dir}: {e}"
            ) from e
        with open(self.run_dir / "config.json", "w") as f:
            json.dump(
                self.run_config.model_dump(mode="json"), f, indent=2, sort_keys=True
            )
        (self.run_dir / "metrics.jsonl").unlink(missing_ok=True)
        self._write_manifest({})

    def _write_manifest(self, extra: Dict[str, Any]) -> None:
        train = self.run_config.train
        manifest = {
            "pychdp_version": __version__,
            "schema_version": SCHEMA_VERSION,
            "env_id": self.run_config.env_id,
            "seed": train.seed,
            "config_hash": config_hash(self.run_config),
            "ablation_flags": train.ablation_flags,
            "checkpoint_format": self.format.__class__.__name__,
            "system": get_system_info(),
            **extra,
        }
        with open(self.run_dir / "manifest.json", "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)

    def _checkpoint(self, trainer: CHDPTrainer, step: int) -> str:
        path = self.checkpoint_dir / f"step_{step:08d}.ckpt"
        return save_checkpoint(path, trainer, step, self.format)

    def run(self) -> RunResult:
        """Train, evaluate and checkpoint; return the final report."""
        run_config = self.run_config
        if run_config.num_threads is not None:
            torch.set_num_threads(run_config.num_threads)
        self._prepare()
        train = run_config.train
        env = registry.make(run_config.env_id)
        eval_env = registry.make(run_config.env_id)
        trainer = CHDPTrainer(env.spec, run_config)
        logger.info(
            "Training %s for %d steps (flags %s) in %s",
            run_config.env_id,
            train.total_steps,
            train.ablation_flags,
            self.run_dir,
        )

        started = time.perf_counter()
        episode = 0
        state = env.reset(seed=train.seed)
        last_checkpoint: Optional[int] = None
        params_hash = ""

        with MetricsLog(self.run_dir / "metrics.jsonl") as log:
            for step in range(1, train.total_steps + 1):
                e, k, a_c = trainer.select_action(state, step - 1)
                result = env.step(HybridAction(k=k, a_c=a_c))
                trainer.observe(
                    Transition(
                        s=state,
                        e=e,
                        k=k,
                        a_c=a_c,
                        r=result.reward,
                        s_next=result.s_next,
                        done=result.done,
                    )
                )
                if result.done:
                    episode += 1
                    state = env.reset(seed=train.seed + episode)
                else:
                    state = result.s_next

                if step == train.warmup_steps:
                    logger.info("Warmup finished at step %d", step)
                ready = len(trainer.buffer) >= train.batch_size
                if step > train.warmup_steps and ready:
                    metrics = trainer.train_iteration()
                    iteration = trainer.iterations
                    if iteration % run_config.metrics_interval == 0:
                        log.write("train", step, iteration=iteration, **metrics)

                evaluated = False
                if step % run_config.eval_interval == 0 or step == train.total_steps:
                    outcome = evaluate(
                        eval_env,
                        PolicyAgent(trainer.agent, seed=step),
                        run_config.eval_episodes,
                        seed=EVAL_SEED_OFFSET + step,
                    )
                    log.write(
                        "eval", step, episodes_seen=episode, **outcome.as_metrics()
                    )
                    logger.info(
                        "Step %d: success rate %.3f, return %.3f",
                        step,
                        outcome.success_rate,
                        outcome.mean_return,
                    )
                    evaluated = True

                if self.cadence.should_checkpoint(step, last_checkpoint, evaluated):
                    params_hash = self._checkpoint(trainer, step)
                    last_checkpoint = step

            if last_checkpoint != train.total_steps:
                params_hash = self._checkpoint(trainer, train.total_steps)

        final = self.checkpoint_dir / f"step_{train.total_steps:08d}.ckpt"
        report = EvalReport.from_metrics(self.run_dir / "metrics.jsonl")
        report.to_csv(self.run_dir / "eval_report.csv")
        with open(self.run_dir / "eval_report.json", "w") as f:
            json.dump(
                {
                    "steps": report.steps,
                    "success_rates": report.success_rates,
                    "mean_returns": report.mean_returns,
                    "final_window": report.final_window,
                },
                f,
                indent=2,
                sort_keys=True,
            )
        self._write_manifest(
            {
                "final_step": train.total_steps,
                "final_checkpoint": str(final.relative_to(self.run_dir)),
                "params_hash": params_hash,
            }
        )
        dead = trainer.agent.head.dead_codes()
        if dead:
            logger.warning("%d codewords never selected during training", len(dead))
        logger.info(
            "Finished %s in %.1fs: final-window success %.3f",
            self.run_dir,
            time.perf_counter() - started,
            report.final_window,
        )
        return RunResult(
            run_dir=self.run_dir,
            report=report,
            final_checkpoint=final,
            params_hash=params_hash,
        )
