"""Unit tests for user settings and run configuration."""

# -*- coding: utf-8 -*-
import json
import logging
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from pychdp.config import (
    ChdpConfig,
    RunConfig,
    ScheduleConfig,
    TrainConfig,
    config_hash,
    load_run_config,
)

logging.disable(logging.CRITICAL)


class TestChdpConfig(unittest.TestCase):
    """User-level settings persisted as JSON."""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp(prefix="chdp-config-test-"))
        self.home = mock.patch.object(Path, "home", return_value=self.test_dir)
        self.home.start()
        self.system = mock.patch("platform.system", return_value="Linux")
        self.system.start()

    def tearDown(self):
        self.system.stop()
        self.home.stop()
        shutil.rmtree(self.test_dir)

    def test_defaults(self):
        """Test the platform default settings."""
        cfg = ChdpConfig()
        self.assertEqual(
            cfg.config_file, self.test_dir / ".config" / "pychdp" / "config.json"
        )
        self.assertEqual(
            cfg.get_runs_dir(), self.test_dir / ".local" / "share" / "pychdp" / "runs"
        )
        self.assertFalse(cfg.get_debug_mode())
        self.assertFalse(cfg.config_file.exists())

    def test_override(self):
        """Test that a command-line directory wins over settings."""
        self.assertEqual(
            ChdpConfig().get_runs_dir("/tmp/elsewhere"), Path("/tmp/elsewhere")
        )

    def test_settings_persist(self):
        """Test that settings survive a reload."""
        cfg = ChdpConfig()
        cfg.set_runs_dir(str(self.test_dir / "runs"))
        cfg.set_debug_mode(True)
        reloaded = ChdpConfig()
        self.assertEqual(reloaded.get_runs_dir(), self.test_dir / "runs")
        self.assertTrue(reloaded.get_debug_mode())

        reloaded.reset()
        self.assertFalse(ChdpConfig().get_debug_mode())

    def test_corrupt_file_falls_back_to_defaults(self):
        """Test recovery from an unreadable settings file."""
        cfg = ChdpConfig()
        cfg.config_dir.mkdir(parents=True)
        cfg.config_file.write_text("{broken")
        self.assertFalse(ChdpConfig().get_debug_mode())


class TestRunConfig(unittest.TestCase):
    """Validated experiment configuration."""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp(prefix="chdp-runconfig-test-"))

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def write(self, payload) -> str:
        path = self.test_dir / "run.json"
        path.write_text(json.dumps(payload))
        return str(path)

    def test_defaults(self):
        """Test the default hyperparameters."""
        config = RunConfig(env_id="hard_move_n4")
        self.assertEqual(config.train.gamma, 0.99)
        self.assertEqual(config.train.eta, 5.0)
        self.assertEqual(config.train.diffusion_steps, 15)
        self.assertEqual(config.schedule.kind, "variance_preserving")
        self.assertTrue(config.schedule.clip_denoised)
        self.assertIsNone(config.num_threads)
        self.assertEqual(
            config.train.ablation_flags,
            {
                "deterministic_policy": False,
                "no_codebook": False,
                "concurrent_update": False,
            },
        )

    def test_load(self):
        """Test loading a run config from JSON."""
        path = self.write(
            {"env_id": "platform", "train": {"seed": 3, "critic_widths": [32, 32]}}
        )
        config = load_run_config(path)
        self.assertEqual(config.env_id, "platform")
        self.assertEqual(config.train.seed, 3)
        self.assertEqual(config.train.critic_widths, (32, 32))

    def test_invalid_files(self):
        """Test missing, malformed and unknown-env configs."""
        with self.assertRaises(ValueError):
            load_run_config(str(self.test_dir / "missing.json"))
        with self.assertRaises(ValueError):
            load_run_config(self.write({"env_id": "chess"}))
        with self.assertRaises(ValueError):
            load_run_config(
                self.write({"env_id": "goal", "train": {"learning_rate": 1}})
            )
        with self.assertRaises(ValueError):
            load_run_config(self.write({"env_id": "goal", "train": {"tau": 0}}))
        with self.assertRaises(ValueError):
            load_run_config(self.write({"env_id": "goal", "train": {"lr_critic": -1}}))
        (self.test_dir / "bad.json").write_text("{")
        with self.assertRaises(ValueError):
            load_run_config(str(self.test_dir / "bad.json"))

    def test_cross_field_checks(self):
        """Test constraints between fields."""
        with self.assertRaises(ValueError):
            TrainConfig(total_steps=10, warmup_steps=20)
        with self.assertRaises(ValueError):
            TrainConfig(batch_size=64, buffer_capacity=32)
        with self.assertRaises(ValueError):
            ScheduleConfig(kind="linear", beta_start=0.1, beta_end=10.0)
        with self.assertRaises(ValueError):
            ScheduleConfig(beta_start=5.0, beta_end=1.0)

    def test_config_is_frozen(self):
        """Test that run configs are immutable."""
        config = RunConfig(env_id="goal")
        with self.assertRaises(ValueError):
            config.env_id = "platform"

    def test_config_hash(self):
        """Test that the config hash tracks content, not key order."""
        a = RunConfig(env_id="goal", train=TrainConfig(seed=1))
        b = RunConfig.model_validate_json(a.model_dump_json())
        c = RunConfig(env_id="goal", train=TrainConfig(seed=2))
        self.assertEqual(config_hash(a), config_hash(b))
        self.assertNotEqual(config_hash(a), config_hash(c))
        self.assertEqual(len(config_hash(a)), 64)

    def test_shipped_configs_load(self):
        """Test that every config under configs/ validates."""
        config_dir = Path(__file__).resolve().parents[1] / "configs"
        paths = sorted(config_dir.glob("*.json"))
        self.assertGreater(len(paths), 0)
        for path in paths:
            with self.subTest(config=path.name):
                config = load_run_config(str(path))
                self.assertLessEqual(
                    config.train.warmup_steps, config.train.total_steps
                )


if __name__ == "__main__":
    unittest.main()
