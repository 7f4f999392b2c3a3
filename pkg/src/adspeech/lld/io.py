"""Feature file formats (CSV and little-endian binary)."""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError
from .extract import LLDMatrix, row_names

MAGIC = b"LLDMAT01"
# magic, F, T, set id: 8 + 8 + 8 + 8 = 32 bytes
HEADER = struct.Struct("<8sQQ8s")


def write_lld_binary(path, lld: LLDMatrix) -> None:
    f, t = lld.values.shape
    head = HEADER.pack(MAGIC, f, t, lld.set_id.encode("ascii").ljust(8, b"\0"))
    Path(path).write_bytes(head + np.ascontiguousarray(lld.values, dtype="<f8").tobytes())


def read_lld_binary(path, frame_ms: float = 25.0, hop_ms: float = 10.0) -> LLDMatrix:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise DataError(f"{path}: truncated feature file")
    magic, f, t, sid = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    set_id = sid.rstrip(b"\0").decode("ascii")
    expected = HEADER.size + 8 * f * t
    if len(data) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=HEADER.size).reshape(f, t).astype(np.float64)
    times = frame_ms / 2.0 + hop_ms * np.arange(t)
    return LLDMatrix(values, row_names(set_id), times, set_id)


def write_lld_csv(path, lld: LLDMatrix, utterance_id: str) -> None:
    """Metadata line, a header of feature names, then one line per frame."""
    with Path(path).open("w", newline="") as fh:
        fh.write(f"#set={lld.set_id};frames={lld.n_frames};utterance={utterance_id}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(lld.row_names)
        for col in lld.values.T:
            w.writerow([repr(float(v)) for v in col])


def read_lld_csv(path, frame_ms: float = 25.0, hop_ms: float = 10.0) -> tuple[LLDMatrix, str]:
    with Path(path).open(newline="") as fh:
        meta_line = fh.readline().strip()
        if not meta_line.startswith("#"):
            raise DataError(f"{path}: missing metadata line")
        meta = dict(item.split("=", 1) for item in meta_line[1:].split(";"))
        reader = csv.reader(fh)
        names = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    values = np.asarray(rows, dtype=np.float64).reshape(-1, len(names)).T.copy()
    if values.shape[1] != int(meta["frames"]):
        raise DataError(f"{path}: frame count mismatch")
    times = frame_ms / 2.0 + hop_ms * np.arange(values.shape[1])
    return LLDMatrix(values, names, times, meta["set"]), meta.get("utterance", "")


def write_functionals_csv(path, rows) -> None:
    """``rows`` yields ``(utterance_id, FunctionalVector, label)``."""
    rows = list(rows)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not rows:
            return
        w.writerow(["utterance_id", *rows[0][1].names, "label"])
        for uid, vec, label in rows:
            w.writerow([uid, *(repr(float(v)) for v in vec.values), label])
