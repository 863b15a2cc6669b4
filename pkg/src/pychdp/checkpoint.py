"""Saving and restoring trainer state."""

import hashlib
import io
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

import torch
import torch.nn as nn

from .config import RunConfig, config_hash
from .envs import registry
from .formats import (
    CheckpointEnvelope,
    CheckpointFormat,
    ProtoFormat,
    get_format_by_identifier,
)
from .trainer import CHDPTrainer

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def parameters_hash(module: Union[nn.Module, Dict[str, torch.Tensor]]) -> str:
    """Git-style blob hash of every tensor in state-dict order."""
    state = module.state_dict() if isinstance(module, nn.Module) else module
    content = b"".join(
        tensor.detach().cpu().contiguous().numpy().tobytes()
        for tensor in state.values()
    )
    header = f"blob {len(content)}\0".encode("ascii")
    return hashlib.sha1(header + content).hexdigest()


@dataclass
class CheckpointData:
    """A decoded checkpoint."""

    run_config: RunConfig
    step: int
    config_hash: str
    params_hash: str
    state: Dict[str, Any]
    format_name: str


def save_checkpoint(
    path: Union[str, Path],
    trainer: CHDPTrainer,
    step: int,
    fmt: Optional[CheckpointFormat] = None,
) -> str:
    """Write ``trainer`` to ``path`` and return its parameters hash."""
    fmt = fmt or ProtoFormat()
    path = Path(path)
    buffer = io.BytesIO()
    torch.save(trainer.state_dict(), buffer)
    run_config = trainer.run_config
    params_hash = parameters_hash(trainer.agent)
    envelope = CheckpointEnvelope(
        schema_version=SCHEMA_VERSION,
        step=step,
        env_id=run_config.env_id,
        config_json=json.dumps(run_config.model_dump(mode="json"), sort_keys=True),
        config_hash=config_hash(run_config),
        params_hash=params_hash,
        payload=buffer.getvalue(),
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    with open(tmp_path, "wb") as f:
        f.write(fmt.get_format_identifier())
        f.write(fmt.encode(envelope))
        f.flush()
    os.replace(tmp_path, path)
    logger.info(
        "Wrote checkpoint %s (step %d, params %s)", path, step, params_hash[:10]
    )
    return params_hash


def load_checkpoint(path: Union[str, Path]) -> CheckpointData:
    """Read and validate a checkpoint file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as err:
        raise ValueError(f"Failed to read checkpoint {path}: {err}") from err
    if not data:
        raise ValueError(f"Empty checkpoint file {path}")

    fmt = get_format_by_identifier(data[:1])
    envelope = fmt.decode(data[1:])
    if envelope.schema_version != SCHEMA_VERSION:
        raise ValueError(
            f"Checkpoint schema version {envelope.schema_version}, "
            f"expected {SCHEMA_VERSION}"
        )
    try:
        run_config = RunConfig.model_validate_json(envelope.config_json)
        state = torch.load(io.BytesIO(envelope.payload), weights_only=False)
    except Exception as err:
        raise ValueError(f"Failed to decode checkpoint {path}: {err}") from err
    if config_hash(run_config) != envelope.config_hash:
        raise ValueError(f"Config hash mismatch in checkpoint {path}")
    logger.debug("Loaded checkpoint %s (%s)", path, fmt.__class__.__name__)
    return CheckpointData(
        run_config=run_config,
        step=envelope.step,
        config_hash=envelope.config_hash,
        params_hash=envelope.params_hash,
        state=state,
        format_name=fmt.__class__.__name__,
    )


def restore_trainer(
    checkpoint: CheckpointData, env_id: Optional[str] = None
) -> CHDPTrainer:
    """Rebuild a trainer from a checkpoint.

    ``env_id``, when given, must match the environment the checkpoint was
    trained on.
    """
    run_config = checkpoint.run_config
    if env_id is not None and env_id != run_config.env_id:
        raise ValueError(
            f"Checkpoint was trained on {run_config.env_id!r}, not {env_id!r}"
        )
    env = registry.make(run_config.env_id)
    trainer = CHDPTrainer(env.spec, run_config)
    trainer.load_state_dict(checkpoint.state)
    if parameters_hash(trainer.agent) != checkpoint.params_hash:
        raise ValueError("Parameters hash mismatch after restoring checkpoint")
    return trainer
