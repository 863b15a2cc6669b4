"""End-to-end tests for training runs and learning-curve plots."""

# -*- coding: utf-8 -*-
import json
import logging
import shutil
import tempfile
import unittest
from pathlib import Path

from pychdp.cadence import StepIntervalCadence
from pychdp.checkpoint import load_checkpoint, restore_trainer
from pychdp.config import PolicyNetworkConfig, RunConfig, TrainConfig
from pychdp.metrics import MetricsLog, read_metrics
from pychdp.plotting import learning_curve_frame, plot_learning_curves, variant_label
from pychdp.runner import ExperimentRunner

logging.disable(logging.CRITICAL)


def tiny_config(**train_overrides) -> RunConfig:
    """A run that finishes in a few seconds."""
    train = dict(
        batch_size=8,
        buffer_capacity=100,
        total_steps=40,
        warmup_steps=10,
        diffusion_steps=3,
        latent_dim=2,
        critic_widths=(8,),
        seed=0,
    )
    train.update(train_overrides)
    return RunConfig(
        env_id="hard_move_n4_single_step",
        train=TrainConfig(**train),
        network=PolicyNetworkConfig(hidden_widths=(8,)),
        eval_interval=20,
        eval_episodes=2,
    )


class TestExperimentRunner(unittest.TestCase):
    """Outputs, checkpoints and reproducibility of a run."""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp(prefix="chdp-runner-test-"))

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_run_outputs(self):
        """Test the files and report of one run."""
        run_dir = self.test_dir / "run"
        result = ExperimentRunner(
            tiny_config(), run_dir=str(run_dir), debug_mode=False
        ).run()

        self.assertEqual(result.run_dir, run_dir)
        outputs = (
            "config.json",
            "manifest.json",
            "metrics.jsonl",
            "eval_report.csv",
            "eval_report.json",
        )
        for name in outputs:
            self.assertTrue((run_dir / name).exists(), name)
        self.assertEqual(result.report.steps, [20, 40])

        train_records = read_metrics(run_dir / "metrics.jsonl", event="train")
        # one update per step after warmup
        self.assertEqual(len(train_records), 30)
        self.assertEqual(train_records[0]["step"], 11)

        checkpoints = sorted(p.name for p in (run_dir / "checkpoints").iterdir())
        self.assertEqual(checkpoints, ["step_00000020.ckpt", "step_00000040.ckpt"])
        self.assertEqual(
            result.final_checkpoint, run_dir / "checkpoints" / "step_00000040.ckpt"
        )

        manifest = json.loads((run_dir / "manifest.json").read_text())
        self.assertEqual(manifest["final_step"], 40)
        self.assertEqual(manifest["params_hash"], result.params_hash)
        self.assertEqual(manifest["checkpoint_format"], "ProtoFormat")
        self.assertEqual(manifest["ablation_flags"]["no_codebook"], False)
        self.assertIn("torch", manifest["system"])

        checkpoint = load_checkpoint(result.final_checkpoint)
        self.assertEqual(checkpoint.step, 40)
        self.assertEqual(restore_trainer(checkpoint).iterations, 30)

    def test_identical_runs_match(self):
        """Test that identical runs write identical metrics."""
        a = ExperimentRunner(tiny_config(), run_dir=str(self.test_dir / "a")).run()
        b = ExperimentRunner(tiny_config(), run_dir=str(self.test_dir / "b")).run()
        self.assertEqual(a.params_hash, b.params_hash)
        self.assertEqual(
            (a.run_dir / "metrics.jsonl").read_bytes(),
            (b.run_dir / "metrics.jsonl").read_bytes(),
        )

    def test_rerun_replaces_metrics(self):
        """Test that rerunning replaces the metrics file."""
        run_dir = str(self.test_dir / "again")
        ExperimentRunner(tiny_config(), run_dir=run_dir).run()
        result = ExperimentRunner(tiny_config(), run_dir=run_dir).run()
        self.assertEqual(result.report.steps, [20, 40])

    def test_interval_cadence_and_debug_format(self):
        """Test interval checkpoints in the debug format."""
        run_dir = self.test_dir / "interval"
        result = ExperimentRunner(
            tiny_config(
                no_codebook=True, deterministic_policy=True, concurrent_update=True
            ),
            run_dir=str(run_dir),
            debug_mode=True,
            cadence=StepIntervalCadence(15),
        ).run()
        checkpoints = sorted(p.name for p in (run_dir / "checkpoints").iterdir())
        self.assertEqual(
            checkpoints,
            ["step_00000015.ckpt", "step_00000030.ckpt", "step_00000040.ckpt"],
        )
        self.assertEqual(result.final_checkpoint.read_bytes()[:1], b"\x02")

    def test_unwritable_run_dir(self):
        """Test that an unwritable run directory raises."""
        blocker = self.test_dir / "file"
        blocker.write_text("not a directory")
        with self.assertRaises(ValueError):
            ExperimentRunner(tiny_config(), run_dir=str(blocker / "run")).run()


class TestPlotting(unittest.TestCase):
    """Learning curves from metrics files."""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp(prefix="chdp-plot-test-"))

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def make_run(self, name, rates, flags=None):
        run_dir = self.test_dir / name
        run_dir.mkdir()
        with MetricsLog(run_dir / "metrics.jsonl") as log:
            for i, rate in enumerate(rates, start=1):
                log.write("eval", 100 * i, success_rate=rate, mean_return=0.0)
        manifest = {"ablation_flags": flags or {}}
        (run_dir / "manifest.json").write_text(json.dumps(manifest))
        return run_dir

    def test_variant_labels(self):
        """Test plot labels of the ablation variants."""
        self.assertEqual(variant_label({}), "CHDP")
        self.assertEqual(variant_label({"no_codebook": True}), "CHDP w/o codebook")

    def test_seeds_are_averaged(self):
        """Test that seeds of a variant are averaged."""
        runs = [
            self.make_run("s0", [0.0, 0.2]),
            self.make_run("s1", [0.2, 0.4]),
            self.make_run("ablation", [0.0, 0.0], {"deterministic_policy": True}),
        ]
        frame = learning_curve_frame(runs, window=1)
        chdp = frame[frame["label"] == "CHDP"]
        self.assertEqual(list(chdp["step"]), [100, 200])
        self.assertEqual(list(chdp["seeds"]), [2, 2])
        self.assertAlmostEqual(float(chdp["mean"].iloc[1]), 0.3)
        self.assertAlmostEqual(float(chdp["std"].iloc[1]), 0.1)
        self.assertEqual(set(frame["label"]), {"CHDP", "CHDP w/o diffusion"})

    def test_smoothing(self):
        """Test the rolling-window smoothing."""
        frame = learning_curve_frame([self.make_run("s", [0.0, 1.0, 0.5])], window=2)
        self.assertEqual(list(frame["mean"]), [0.0, 0.5, 0.75])

    def test_plot_written(self):
        """Test that the plot file is written."""
        runs = [self.make_run("s0", [0.0, 0.5]), self.make_run("s1", [0.5, 1.0])]
        output = plot_learning_curves(runs, self.test_dir / "out" / "curves.png")
        self.assertTrue(output.exists())
        self.assertGreater(output.stat().st_size, 0)

    def test_missing_metrics(self):
        """Test a run without a metrics file."""
        empty = self.test_dir / "empty"
        empty.mkdir()
        output = self.test_dir / "curves.png"
        with self.assertRaises(ValueError):
            plot_learning_curves([empty], output)
        self.assertFalse(output.exists())
        with self.assertRaises(ValueError):
            plot_learning_curves([], output)

    def test_no_evaluations(self):
        """Test a run without evaluation records."""
        run_dir = self.test_dir / "train_only"
        with MetricsLog(run_dir / "metrics.jsonl") as log:
            log.write("train", 1, critic_loss=1.0)
        with self.assertRaises(ValueError):
            learning_curve_frame([run_dir])


if __name__ == "__main__":
    unittest.main()
