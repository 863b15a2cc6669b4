"""Checkpoint file formats."""

import base64
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

from pychdp.proto import Checkpoint


@dataclass(frozen=True)
class CheckpointEnvelope:
    """Everything a checkpoint file carries, independent of encoding."""

    schema_version: int
    step: int
    env_id: str
    config_json: str
    config_hash: str
    params_hash: str
    payload: bytes


class CheckpointFormat(ABC):
    """Abstract base class for checkpoint encodings."""

    # Format identifiers (1 byte, first byte of every checkpoint file)
    FORMAT_PROTO = b"\x01"  # Default format
    FORMAT_JSON = b"\x02"  # Human-readable format
    DEFAULT_FORMAT = FORMAT_PROTO

    @abstractmethod
    def get_format_identifier(self) -> bytes:
        """Get the format identifier byte."""
        pass

    @abstractmethod
    def encode(self, envelope: CheckpointEnvelope) -> bytes:
        """Encode an envelope (without the identifier byte)."""
        pass

    @abstractmethod
    def decode(self, data: bytes) -> CheckpointEnvelope:
        """Decode bytes written by ``encode``."""
        pass


class ProtoFormat(CheckpointFormat):
    """Length-prefixed protobuf envelope."""

    def get_format_identifier(self) -> bytes:
        """Get the format identifier byte."""
        return self.FORMAT_PROTO

    def encode(self, envelope: CheckpointEnvelope) -> bytes:
        """Encode into protobuf with a 4-byte big-endian size prefix."""
        message = Checkpoint(
            schema_version=envelope.schema_version,
            step=envelope.step,
            env_id=envelope.env_id,
            config_json=envelope.config_json,
            config_hash=envelope.config_hash,
            params_hash=envelope.params_hash,
            payload=envelope.payload,
        )
        proto_data = message.SerializeToString()
        return len(proto_data).to_bytes(4, byteorder="big") + proto_data

    def decode(self, data: bytes) -> CheckpointEnvelope:
        """Decode a size-prefixed protobuf message."""
        try:
            size = int.from_bytes(data[:4], byteorder="big")
            proto_data = data[4 : 4 + size]
            if len(proto_data) != size:
                raise ValueError(
                    f"truncated message ({len(proto_data)} of {size} bytes)"
                )
            message = Checkpoint()
            message.ParseFromString(proto_data)
            return CheckpointEnvelope(
                schema_version=message.schema_version,
                step=message.step,
                env_id=message.env_id,
                config_json=message.config_json,
                config_hash=message.config_hash,
                params_hash=message.params_hash,
                payload=message.payload,
            )
        except Exception as err:
            raise ValueError(f"Failed to decode protobuf checkpoint: {err}") from err


class JsonFormat(CheckpointFormat):
    """JSON envelope with a base64 payload, for debugging."""

    def get_format_identifier(self) -> bytes:
        """Get the format identifier byte."""
        return self.FORMAT_JSON

    def encode(self, envelope: CheckpointEnvelope) -> bytes:
        """Encode as one JSON object."""
        record = {
            "schema_version": envelope.schema_version,
            "step": envelope.step,
            "env_id": envelope.env_id,
            "config": json.loads(envelope.config_json),
            "config_hash": envelope.config_hash,
            "params_hash": envelope.params_hash,
            "payload": base64.b64encode(envelope.payload).decode("ascii"),
        }
        return (json.dumps(record, indent=2, sort_keys=True) + "\n").encode("utf-8")

    def decode(self, data: bytes) -> CheckpointEnvelope:
        """Decode a JSON envelope."""
        try:
            record = json.loads(data.decode("utf-8"))
            return CheckpointEnvelope(
                schema_version=record["schema_version"],
                step=record["step"],
                env_id=record["env_id"],
                config_json=json.dumps(record["config"], sort_keys=True),
                config_hash=record["config_hash"],
                params_hash=record["params_hash"],
                payload=base64.b64decode(record["payload"]),
            )
        except (json.JSONDecodeError, KeyError, ValueError) as err:
            raise ValueError(f"Failed to decode JSON checkpoint: {err}") from err


def get_format_by_identifier(identifier: Optional[bytes] = None) -> CheckpointFormat:
    """Get the format for an identifier byte.

    Args:
    ----
        identifier: The format identifier byte. If None, returns the default format.

    Returns:
    -------
        A CheckpointFormat instance for the specified format.

    """
    if identifier is None:
        return ProtoFormat()

    format_map = {
        CheckpointFormat.FORMAT_PROTO: ProtoFormat,
        CheckpointFormat.FORMAT_JSON: JsonFormat,
    }
    format_class = format_map.get(identifier)
    if format_class is None:
        raise ValueError(f"Unknown checkpoint format identifier {identifier!r}")
    return format_class()
