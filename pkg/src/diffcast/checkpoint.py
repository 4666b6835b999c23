"""Binary model checkpoints: magic "DSS1", JSON header, float32 tensor payload.

Layout: 4 magic bytes, uint32 little-endian header length, UTF-8 JSON
header (format version, config echo, training metadata, tensor manifest),
then each tensor's raw little-endian float32 data in manifest order.
Parameters are stored once each at 32-bit precision; loading upcasts to
float64, so a load/save/load round trip is bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .models import ModelConfig, model_from_tensors

MAGIC = b"DSS1"
FORMAT_VERSION = 1


@dataclass
class ModelCheckpoint:
    """Named float32 tensors plus the config echo and training metadata."""

    config: dict
    tensors: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        for name, arr in self.tensors.items():
            if arr.dtype != np.float32:
                self.tensors[name] = np.ascontiguousarray(arr, dtype="<f4")

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        names = sorted(self.tensors)
        header = {
            "format_version": self.format_version,
            "config": self.config,
            "metadata": self.metadata,
            "tensors": [{"name": n, "shape": list(self.tensors[n].shape)} for n in names],
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with path.open("wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for n in names:
                fh.write(np.ascontiguousarray(self.tensors[n], dtype="<f4").tobytes())
        return path

    @classmethod
    def load(cls, path: str | Path) -> "ModelCheckpoint":
        path = Path(path)
        raw = path.read_bytes()
        if raw[:4] != MAGIC:
            raise SchemaError(f"{path.name}: not a checkpoint (bad magic bytes)")
        (header_len,) = struct.unpack("<I", raw[4:8])
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise SchemaError(
                f"{path.name}: checkpoint format {header.get('format_version')!r}, "
                f"expected {FORMAT_VERSION}"
            )
        offset = 8 + header_len
        tensors: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
            tensors[entry["name"]] = arr.copy()
            offset += count * 4
        return cls(
            config=header["config"],
            tensors=tensors,
            metadata=header.get("metadata", {}),
            format_version=header["format_version"],
        )

    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.config["model"])


def checkpoint_from_model(model, config_extra: dict | None = None, metadata: dict | None = None) -> ModelCheckpoint:
    config = {"model": model.cfg.to_dict()}
    if config_extra:
        config.update(config_extra)
    tensors = {name: p.data.astype("<f4") for name, p in model.params().items()}
    return ModelCheckpoint(config=config, tensors=tensors, metadata=metadata or {})


def model_from_checkpoint(checkpoint: ModelCheckpoint):
    cfg = checkpoint.model_config()
    tensors = {name: arr.astype(np.float64) for name, arr in checkpoint.tensors.items()}
    return model_from_tensors(cfg, tensors)
