"""Configuration management for pychdp.

Two layers live here: user-level settings persisted as JSON in a
platform-specific directory, and the per-run experiment configuration that
is loaded from a single JSON file and validated with pydantic.
"""

import hashlib
import json
import logging
import os
import platform
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .envs import registry

logger = logging.getLogger(__name__)


class ChdpConfig:
    """User-level settings for pychdp."""

    def __init__(self):
        """Initialize the configuration manager."""
        self.system = platform.system().lower()
        self.config_data: Dict[str, Any] = {}
        self._load_config()

    @property
    def default_runs_dir(self) -> Path:
        """Get the platform-specific default directory for run outputs."""
        if self.system == "darwin":  # macOS
            return Path.home() / "Library" / "Application Support" / "pychdp" / "runs"
        elif self.system == "linux":
            return Path.home() / ".local" / "share" / "pychdp" / "runs"
        elif self.system == "windows":
            return Path(os.environ.get("LOCALAPPDATA", "C:\\ProgramData")) / "pychdp"
        else:
            return Path.home() / ".pychdp" / "runs"

    @property
    def config_dir(self) -> Path:
        """Get the platform-specific configuration directory."""
        if self.system == "darwin":  # macOS
            return Path.home() / "Library" / "Preferences" / "pychdp"
        elif self.system == "linux":
            return Path.home() / ".config" / "pychdp"
        elif self.system == "windows":
            return Path(os.environ.get("APPDATA", "")) / "pychdp"
        else:
            return Path.home() / ".pychdp"

    @property
    def config_file(self) -> Path:
        """Get the path to the configuration file."""
        return self.config_dir / "config.json"

    def _defaults(self) -> Dict[str, Any]:
        return {
            "runs_dir": str(self.default_runs_dir),
            "debug_mode": False,
        }

    def _load_config(self) -> None:
        """Load configuration from file."""
        try:
            if self.config_file.exists():
                with open(self.config_file) as f:
                    self.config_data = json.load(f)
            else:
                self.config_data = self._defaults()
        except Exception as e:
            logger.warning("Could not load config file: %s", e)
            self.config_data = self._defaults()

    def _save_config(self) -> None:
        """Save configuration to file."""
        try:
            self.config_dir.mkdir(parents=True, exist_ok=True)
            with open(self.config_file, "w") as f:
                json.dump(self.config_data, f, indent=2)
        except Exception as e:
            logger.warning("Could not save config file: %s", e)

    def get_runs_dir(self, override_dir: Optional[str] = None) -> Path:
        """Get the directory that holds run outputs.

        Args:
        ----
            override_dir: Optional override directory from command line

        Returns:
        -------
            Path object for the runs directory

        """
        if override_dir:
            return Path(override_dir)
        return Path(self.config_data.get("runs_dir", self.default_runs_dir))

    def get_debug_mode(self) -> bool:
        """Whether checkpoints are written in the human-readable format."""
        return self.config_data.get("debug_mode", False)

    def set_runs_dir(self, runs_dir: str) -> None:
        """Set the runs directory in configuration."""
        self.config_data["runs_dir"] = runs_dir
        self._save_config()

    def set_debug_mode(self, debug_mode: bool) -> None:
        """Set the debug mode in configuration."""
        self.config_data["debug_mode"] = debug_mode
        self._save_config()

    def reset(self) -> None:
        """Restore defaults and persist them."""
        self.config_data = self._defaults()
        self._save_config()


# Global configuration instance
config = ChdpConfig()


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScheduleConfig(_Model):
    """Noise schedule shape and endpoints (N lives in TrainConfig).

    ``clip_denoised`` clips the x0 estimate to [-1, 1] at every reverse step.
    """

    kind: str = "variance_preserving"
    beta_start: float = Field(default=0.1, gt=0)
    beta_end: float = Field(default=10.0, gt=0)
    clip_denoised: bool = True

    @model_validator(mode="after")
    def _check(self) -> "ScheduleConfig":
        if self.kind not in ("linear", "variance_preserving"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.beta_start > self.beta_end:
            raise ValueError("beta_start must not exceed beta_end")
        if self.kind == "linear" and self.beta_end >= 1:
            raise ValueError("linear schedule endpoints must lie in (0, 1)")
        return self


class PolicyNetworkConfig(_Model):
    """Shape of the noise-prediction (and deterministic ablation) networks."""

    hidden_widths: Tuple[int, ...] = (256, 256)
    time_embed_dim: int = Field(default=16, ge=2)
    activation: str = "mish"

    @model_validator(mode="after")
    def _check(self) -> "PolicyNetworkConfig":
        if not self.hidden_widths:
            raise ValueError("hidden_widths must be nonempty")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be positive")
        if self.activation not in ("mish", "relu", "tanh", "silu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        return self


class TrainConfig(_Model):
    """Hyperparameters of the sequential update scheme.

    A learning rate of 0 freezes the corresponding component.
    """

    gamma: float = Field(default=0.99, ge=0, lt=1)
    eta: float = Field(default=5.0, gt=0)
    batch_size: int = Field(default=256, ge=1)
    buffer_capacity: int = Field(default=1_000_000, ge=1)
    lr_discrete: float = Field(default=3e-4, ge=0)
    lr_continuous: float = Field(default=3e-4, ge=0)
    lr_codebook: float = Field(default=3e-4, ge=0)
    lr_critic: float = Field(default=3e-4, ge=0)
    tau: float = Field(default=0.005, gt=0, le=1)
    diffusion_steps: int = Field(default=15, ge=1)
    latent_dim: int = Field(default=8, ge=1)
    critic_widths: Tuple[int, ...] = (256, 256)
    total_steps: int = Field(default=50_000, ge=1)
    warmup_steps: int = Field(default=2_000, ge=0)
    exploration_noise: float = Field(default=0.0, ge=0)
    deterministic_policy: bool = False
    no_codebook: bool = False
    concurrent_update: bool = False
    seed: int = 0

    @model_validator(mode="after")
    def _check(self) -> "TrainConfig":
        if self.warmup_steps > self.total_steps:
            raise ValueError("warmup_steps must not exceed total_steps")
        if self.buffer_capacity < self.batch_size:
            raise ValueError("buffer_capacity must hold at least one batch")
        if not self.critic_widths:
            raise ValueError("critic_widths must be nonempty")
        return self

    @property
    def ablation_flags(self) -> Dict[str, bool]:
        """The ablation switches, as recorded in run manifests."""
        return {
            "deterministic_policy": self.deterministic_policy,
            "no_codebook": self.no_codebook,
            "concurrent_update": self.concurrent_update,
        }


class RunConfig(_Model):
    """Everything needed to reproduce one training run.

    ``num_threads`` caps torch's intra-op threads; unset keeps torch's default.
    """

    env_id: str
    train: TrainConfig = TrainConfig()
    network: PolicyNetworkConfig = PolicyNetworkConfig()
    schedule: ScheduleConfig = ScheduleConfig()
    eval_episodes: int = Field(default=50, ge=1)
    eval_interval: int = Field(default=5_000, ge=1)
    checkpoint_interval: Optional[int] = Field(default=None, ge=1)
    metrics_interval: int = Field(default=1, ge=1)
    num_threads: Optional[int] = Field(default=None, ge=1)
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.env_id not in registry.available():
            raise ValueError(
                f"unknown env id {self.env_id!r}; "
                f"available: {', '.join(registry.available())}"
            )
        return self


def load_run_config(path: str) -> RunConfig:
    """Load and validate a run configuration file."""
    config_path = Path(path)
    if not config_path.exists():
        raise ValueError(f"Config file not found: {config_path}")
    try:
        return RunConfig.model_validate_json(config_path.read_text())
    except ValidationError as err:
        raise ValueError(f"Invalid config {config_path}: {err}") from err


def config_hash(run_config: RunConfig) -> str:
    """Sha256 of the canonical JSON form of a run configuration."""
    canonical = json.dumps(run_config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
