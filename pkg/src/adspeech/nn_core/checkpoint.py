"""Binary model checkpoints with a JSON sidecar.

Layout: 8-byte magic, uint32 length of a UTF-8 JSON config block, the
block itself, then every parameter followed by every buffer in build
order as little-endian float64.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError
from .model import Model, ModelConfig, build_model

MAGIC = b"ADGCNN01"


def save_model(path, model: Model, metadata: dict | None = None) -> Path:
    path = Path(path)
    block = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in model.state_arrays())
    path.write_bytes(MAGIC + struct.pack("<I", len(block)) + block + body)
    sidecar = {"config": model.config.to_dict(), "metadata": metadata or {}}
    side = path.with_suffix(path.suffix + ".json")
    side.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return side


def load_model(path) -> tuple[Model, dict]:
    path = Path(path)
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise DataError(f"{path}: not a model checkpoint")
    (n,) = struct.unpack_from("<I", data, 8)
    cfg_dict = json.loads(data[12 : 12 + n].decode("utf-8"))
    config = ModelConfig(**cfg_dict)
    model = build_model(config, np.random.default_rng(0))
    flat = np.frombuffer(data, dtype="<f8", offset=12 + n)
    arrays = model.state_arrays()
    if flat.size != sum(a.size for a in arrays):
        raise DataError(f"{path}: parameter count does not match its config")
    pos = 0
    for a in arrays:
        a[...] = flat[pos : pos + a.size].reshape(a.shape)
        pos += a.size
    side = path.with_suffix(path.suffix + ".json")
    meta = json.loads(side.read_text())["metadata"] if side.exists() else {}
    return model, meta
