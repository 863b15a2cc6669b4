"""Command-line interface for pychdp.

Train runs from a config file, evaluate checkpoints or baseline agents,
analyze the modes of single-step Hard Move policies and plot learning
curves.
"""

import json
import logging
import sys
from importlib import metadata
from pathlib import Path
from typing import NoReturn, Optional, Sequence

import click

from pychdp.analysis import analyze_modes, codebook_frame
from pychdp.checkpoint import load_checkpoint, restore_trainer
from pychdp.config import config as chdp_config
from pychdp.config import load_run_config
from pychdp.envs import registry
from pychdp.evaluation import (
    EvalReport,
    PolicyAgent,
    RandomAgent,
    ScriptedHardMoveAgent,
    TraceWriter,
    aggregate_trials,
    evaluate,
)
from pychdp.plotting import SMOOTHING_WINDOW, plot_learning_curves
from pychdp.runner import ExperimentRunner, default_run_dir

logger = logging.getLogger(__name__)

# Version compatibility check
try:
    cli_version = metadata.version("pychdp-cli")
    core_version = metadata.version("pychdp")
    if cli_version != core_version:
        click.echo(
            click.style(
                f"Warning: CLI version ({cli_version}) differs from "
                f"core version ({core_version})",
                fg="yellow",
            )
        )
except metadata.PackageNotFoundError:
    pass  # Skip version check if not installed as package


def _fail(error: Exception) -> NoReturn:
    click.echo(click.style(f"✗ Error: {error}", fg="red"), err=True)
    sys.exit(1)


class ChdpCLI:
    """Command-line front end for training and analysis.

    Each method performs one command and reports the outcome in color;
    failures exit with status 1.
    """

    def __init__(
        self, runs_dir: Optional[str] = None, debug_mode: Optional[bool] = None
    ):
        """Initialize the CLI.

        Args:
        ----
            runs_dir: Directory under which runs without an explicit output
                directory are created
            debug_mode: Whether to write human-readable checkpoints

        """
        self.runs_dir = chdp_config.get_runs_dir(runs_dir)
        self.debug_mode = (
            debug_mode if debug_mode is not None else chdp_config.get_debug_mode()
        )

    def train(
        self,
        config_path: str,
        run_dir: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> None:
        """Run one training job, optionally overriding the seed."""
        try:
            run_config = load_run_config(config_path)
            if seed is not None:
                train = run_config.train.model_copy(update={"seed": seed})
                run_config = run_config.model_copy(update={"train": train})
            if run_dir is None and run_config.output_dir is None:
                run_dir = str(self.runs_dir / default_run_dir(run_config).name)
            runner = ExperimentRunner(
                run_config, run_dir=run_dir, debug_mode=self.debug_mode
            )
            click.echo(click.style(f"Training on {run_config.env_id}...", fg="blue"))
            result = runner.run()
            click.echo(click.style(f"✓ Run finished: {result.run_dir}", fg="green"))
            click.echo(f"  Final-window success rate: {result.report.final_window:.3f}")
            click.echo(f"  Final checkpoint: {result.final_checkpoint}")
            click.echo(f"  Parameters hash: {result.params_hash}")
        except Exception as e:
            _fail(e)

    def evaluate(
        self,
        checkpoint: Optional[str],
        episodes: int,
        seed: int,
        agent_kind: str,
        env_id: Optional[str],
        trace: Optional[str],
        csv_path: Optional[str],
    ) -> None:
        """Evaluate a checkpoint or a baseline agent."""
        try:
            if episodes < 1:
                raise ValueError(f"episodes must be >= 1, got {episodes}")
            if agent_kind == "policy":
                if checkpoint is None:
                    raise ValueError("A checkpoint is required for --agent policy")
                trainer = restore_trainer(load_checkpoint(checkpoint), env_id)
                env = registry.make(trainer.run_config.env_id)
                agent = PolicyAgent(trainer.agent, seed=seed)
            else:
                if env_id is None:
                    raise ValueError(f"--env is required for --agent {agent_kind}")
                env = registry.make(env_id)
                if agent_kind == "scripted":
                    agent = ScriptedHardMoveAgent(env)
                else:
                    agent = RandomAgent(env.spec, seed=seed)

            writer = TraceWriter(trace) if trace else None
            try:
                result = evaluate(env, agent, episodes, seed=seed, trace=writer)
            finally:
                if writer is not None:
                    writer.close()

            click.echo(click.style(f"✓ Evaluated {episodes} episodes", fg="green"))
            click.echo(f"  Env: {env.spec.env_id}")
            click.echo(f"  Success rate: {result.success_rate:.3f}")
            click.echo(
                f"  Mean return: {result.mean_return:.3f} ± {result.std_return:.3f}"
            )
            if csv_path:
                report = EvalReport(steps=[0], success_rates=[result.success_rate])
                report.to_csv(csv_path)
        except Exception as e:
            _fail(e)

    def aggregate(self, run_dirs: Sequence[str]) -> None:
        """Final-five-evaluation score per run, then mean ± std across runs."""
        try:
            reports = [
                EvalReport.from_metrics(Path(d) / "metrics.jsonl") for d in run_dirs
            ]
            scores, mean, std = aggregate_trials(reports)
            click.echo(click.style("Per-trial final-window success rates:", fg="blue"))
            for run_dir, score in zip(run_dirs, scores):
                click.echo(f"  • {run_dir}: {score:.3f}")
            click.echo(click.style(f"✓ {mean:.3f} ± {std:.3f}", fg="green"))
        except Exception as e:
            _fail(e)

    def analyze(
        self,
        checkpoint: str,
        trials: int,
        seed: int,
        csv_path: Optional[str],
        codebook_csv: Optional[str],
    ) -> None:
        """Mode analysis of a single-step Hard Move checkpoint."""
        try:
            trainer = restore_trainer(load_checkpoint(checkpoint))
            env = registry.make(trainer.run_config.env_id)
            agent = PolicyAgent(trainer.agent, seed=seed)
            report = analyze_modes(env, agent, trials, seed)
            click.echo(click.style(f"Modes over {trials} trials:", fg="blue"))
            click.echo(report.to_markdown())
            if csv_path:
                report.to_csv(csv_path)
                click.echo(click.style(f"✓ Wrote {csv_path}", fg="green"))
            if codebook_csv:
                codebook_frame(trainer.agent.head).to_csv(codebook_csv, index=False)
                click.echo(click.style(f"✓ Wrote {codebook_csv}", fg="green"))
        except Exception as e:
            _fail(e)

    def plot(self, run_dirs: Sequence[str], output: str, window: int) -> None:
        """Plot learning curves."""
        try:
            path = plot_learning_curves(run_dirs, output, window)
            click.echo(click.style(f"✓ Wrote {path}", fg="green"))
        except Exception as e:
            _fail(e)


@click.group()
@click.option("--runs-dir", help="Directory for run outputs")
@click.option(
    "--debug", is_flag=True, default=None, help="Write human-readable checkpoints"
)
@click.option("-v", "--verbose", is_flag=True, help="Log debug messages")
@click.pass_context
def cli(ctx, runs_dir, debug, verbose):
    """CHDP CLI - train and analyze cooperative hybrid diffusion policies."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = ChdpCLI(runs_dir, debug_mode=debug)


@cli.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--run-dir", help="Output directory for this run")
@click.option("--seed", type=int, help="Override train.seed from the config")
@click.pass_obj
def train(cli: ChdpCLI, config_path: str, run_dir: Optional[str], seed):
    """Train from a JSON run configuration."""
    cli.train(config_path, run_dir, seed)


@cli.command(name="eval")
@click.argument("checkpoint", required=False)
@click.option("--episodes", default=50, show_default=True, help="Episodes to run")
@click.option("--seed", default=0, show_default=True, help="Seed of the first episode")
@click.option(
    "--agent",
    "agent_kind",
    type=click.Choice(["policy", "scripted", "random"]),
    default="policy",
    show_default=True,
)
@click.option("--env", "env_id", help="Environment id (required for baselines)")
@click.option("--trace", help="Write a JSON-lines step trace here")
@click.option("--csv", "csv_path", help="Write the result as CSV")
@click.option(
    "--run-dir",
    "run_dirs",
    multiple=True,
    help="Aggregate final-window scores over these runs instead",
)
@click.pass_obj
def eval_command(
    cli: ChdpCLI,
    checkpoint,
    episodes,
    seed,
    agent_kind,
    env_id,
    trace,
    csv_path,
    run_dirs,
):
    """Evaluate a checkpoint or baseline, or aggregate finished runs."""
    if run_dirs:
        cli.aggregate(run_dirs)
    else:
        cli.evaluate(checkpoint, episodes, seed, agent_kind, env_id, trace, csv_path)


@cli.command(name="analyze-modes")
@click.argument("checkpoint")
@click.option("--trials", default=100, show_default=True, help="Number of trials")
@click.option("--seed", default=0, show_default=True, help="Sampling seed")
@click.option("--csv", "csv_path", help="Write the mode table as CSV")
@click.option("--codebook-csv", help="Write codewords and selection counts as CSV")
@click.pass_obj
def analyze_modes_command(
    cli: ChdpCLI, checkpoint, trials, seed, csv_path, codebook_csv
):
    """Tabulate chosen modes on a single-step Hard Move task."""
    cli.analyze(checkpoint, trials, seed, csv_path, codebook_csv)


@cli.command()
@click.argument("run_dirs", nargs=-1)
@click.option("--output", "-o", default="learning_curves.png", show_default=True)
@click.option(
    "--window", default=SMOOTHING_WINDOW, show_default=True, help="Smoothing window"
)
@click.pass_obj
def plot(cli: ChdpCLI, run_dirs, output, window):
    """Plot success rate vs environment steps."""
    cli.plot(run_dirs, output, window)


@cli.group()
def config():
    """Manage user configuration settings."""
    pass


@config.command()
def view():
    """View current configuration."""
    click.echo(click.style("Current configuration:", fg="blue"))
    click.echo(f"  • Config file: {chdp_config.config_file}")
    click.echo(f"  • Runs dir: {chdp_config.get_runs_dir()}")
    click.echo(f"  • Debug mode: {chdp_config.get_debug_mode()}")


@config.command(name="set-runs-dir")
@click.argument("runs_dir")
def set_runs_dir(runs_dir: str):
    """Set the default runs directory."""
    chdp_config.set_runs_dir(runs_dir)
    click.echo(click.style(f"✓ Runs dir set to {runs_dir}", fg="green"))


@config.command()
def reset():
    """Reset all configuration settings to defaults."""
    try:
        chdp_config.reset()
        click.echo(click.style("✓ Configuration reset to defaults", fg="green"))
    except Exception as e:
        _fail(e)


@config.command(name="dump")
@click.argument("config_path")
def dump(config_path: str):
    """Validate a run configuration and print it with defaults filled in."""
    try:
        run_config = load_run_config(config_path)
        dumped = run_config.model_dump(mode="json")
        click.echo(json.dumps(dumped, indent=2, sort_keys=True))
    except Exception as e:
        _fail(e)


if __name__ == "__main__":
    cli()
