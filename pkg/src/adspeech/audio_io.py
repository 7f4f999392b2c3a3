"""WAV reading, loudness normalization and utterance segmentation."""

from __future__ import annotations

import csv
import logging
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CorruptHeader,
    DataError,
    EmptyAudio,
    MalformedBullet,
    SegmentOutOfRange,
    SilentSignal,
    UnsupportedFormat,
)

log = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

LABELS = ("AD", "control")


@dataclass
class AudioClip:
    samples: np.ndarray  # float64 mono
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioClip holds mono samples only")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"bad sample rate {self.sample_rate_hz}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_ms(self) -> float:
        return 1000.0 * len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class UtteranceSegment:
    utterance_id: str
    start_ms: float
    end_ms: float
    speaker: str = "PAR"

    def __post_init__(self):
        if self.start_ms < 0 or self.end_ms <= self.start_ms:
            raise ValueError(
                f"segment {self.utterance_id}: need 0 <= start < end, "
                f"got {self.start_ms}..{self.end_ms}"
            )


@dataclass
class SessionManifest:
    session_id: str
    subject_id: str
    label: str
    wav_path: Path
    segments: list[UtteranceSegment] = field(default_factory=list)

    def __post_init__(self):
        if self.label not in LABELS:
            raise DataError(f"session {self.session_id}: label must be AD or control, got {self.label!r}")
        ids = [s.utterance_id for s in self.segments]
        if len(set(ids)) != len(ids):
            raise DataError(f"session {self.session_id}: duplicate utterance ids")


# --------------------------------------------------------------------------
# WAV container


def _iter_chunks(data: bytes, path):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        yield cid, body
        pos += 8 + size + (size & 1)


def read_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file into a mono float64 clip.

    Integer PCM (8, 16, 32 bit) is scaled to [-1, 1]; 32-bit float is taken
    as is. Multi-channel audio is downmixed by the channel mean.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    for cid, body in _iter_chunks(data, path):
        if cid == b"fmt ":
            if len(body) < 16:
                raise CorruptHeader(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 40:
                    raise CorruptHeader(f"{path}: truncated extensible fmt chunk")
                sub = struct.unpack_from("<H", body, 24)[0]
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            payload = body
    if fmt is None:
        raise CorruptHeader(f"{path}: missing fmt chunk")
    if payload is None:
        raise CorruptHeader(f"{path}: missing data chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if channels < 1 or rate <= 0 or block_align != channels * (bits // 8):
        raise CorruptHeader(f"{path}: inconsistent fmt fields")
    if tag == WAVE_FORMAT_PCM and bits == 8:
        raw = np.frombuffer(payload, dtype=np.uint8, count=len(payload) // block_align * channels)
        x = (raw.astype(np.float64) - 128.0) / 128.0
    elif tag == WAVE_FORMAT_PCM and bits == 16:
        raw = np.frombuffer(payload, dtype="<i2", count=len(payload) // block_align * channels)
        x = raw.astype(np.float64) / 32768.0
    elif tag == WAVE_FORMAT_PCM and bits == 32:
        raw = np.frombuffer(payload, dtype="<i4", count=len(payload) // block_align * channels)
        x = raw.astype(np.float64) / 2147483648.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(payload, dtype="<f4", count=len(payload) // block_align * channels)
        x = raw.astype(np.float64)
    else:
        raise UnsupportedFormat(f"{path}: format tag {tag:#06x} with {bits} bits is not supported")

    if x.size == 0:
        raise EmptyAudio(f"{path}: no samples")
    if channels > 1:
        x = x.reshape(-1, channels).mean(axis=1)
    if not np.all(np.isfinite(x)):
        raise CorruptHeader(f"{path}: non-finite samples")
    return AudioClip(x, int(rate))


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM mono (samples are clamped to [-1, 1])."""
    x = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2")
    body = pcm.tobytes()
    rate = clip.sample_rate_hz
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(body), b"WAVE",
        b"fmt ", 16, WAVE_FORMAT_PCM, 1, rate, rate * 2, 2, 16,
        b"data", len(body),
    )
    Path(path).write_bytes(header + body)


# --------------------------------------------------------------------------
# Loudness


def dbfs(clip: AudioClip) -> float:
    if len(clip) == 0:
        raise EmptyAudio("empty clip")
    rms = math.sqrt(float(np.mean(clip.samples**2)))
    if rms == 0.0:
        raise SilentSignal("dBFS undefined for a silent clip")
    return 20.0 * math.log10(rms)


def normalize_to(clip: AudioClip, target_dbfs: float) -> AudioClip:
    """Scale ``clip`` to ``target_dbfs`` and clamp to full scale."""
    gain = 10.0 ** ((target_dbfs - dbfs(clip)) / 20.0)
    return AudioClip(np.clip(clip.samples * gain, -1.0, 1.0), clip.sample_rate_hz)


def mean_dbfs(clips: Iterable[AudioClip]) -> float:
    """Arithmetic mean of per-clip dBFS, the dataset normalization target."""
    values = [dbfs(c) for c in clips]
    if not values:
        raise EmptyAudio("no clips to average")
    return float(np.mean(values))


# --------------------------------------------------------------------------
# Segmentation


def _ms_to_samples(ms: float, rate: int) -> int:
    return int(math.floor(ms * rate / 1000.0 + 1e-9))


def _fade_envelope(n: int, fade_len: int) -> np.ndarray:
    env = np.ones(n)
    if fade_len <= 0 or n == 0:
        return env
    ramp = np.arange(n) / fade_len
    return np.minimum(env, np.minimum(ramp, ramp[::-1]))


def segment_utterances(
    clip: AudioClip,
    segments: Sequence[UtteranceSegment],
    context_ms: float = 10.0,
    fade_ms: float = 15.0,
) -> list[AudioClip]:
    """Cut utterances out of a session recording.

    Each segment is widened by ``context_ms`` of real audio on both sides
    (clipped to the file) and then given linear fades over ``fade_ms`` at
    the widened edges.
    """
    if context_ms < 0 or fade_ms < 0:
        raise ValueError("context and fade must be non-negative")
    rate = clip.sample_rate_hz
    n = len(clip)
    fade_len = _ms_to_samples(fade_ms, rate)
    out = []
    for seg in segments:
        if _ms_to_samples(seg.start_ms, rate) >= n:
            raise SegmentOutOfRange(
                f"{seg.utterance_id}: start {seg.start_ms} ms beyond file end ({clip.duration_ms:.1f} ms)"
            )
        length = _ms_to_samples(seg.end_ms - seg.start_ms + 2 * context_ms, rate)
        first = int(round((seg.start_ms - context_ms) * rate / 1000.0))
        lo = max(0, first)
        hi = min(n, first + length)
        piece = clip.samples[lo:hi] * _fade_envelope(hi - lo, fade_len)
        out.append(AudioClip(piece, rate))
    return out


def segment_fixed(clip: AudioClip, length_ms: float) -> list[AudioClip]:
    """Non-overlapping fixed-length windows; the last one is zero-padded."""
    if length_ms <= 0:
        raise ValueError("length_ms must be positive")
    rate = clip.sample_rate_hz
    step = max(1, int(round(length_ms * rate / 1000.0)))
    out = []
    for start in range(0, len(clip), step):
        piece = clip.samples[start : start + step]
        if len(piece) < step:
            piece = np.concatenate([piece, np.zeros(step - len(piece))])
        out.append(AudioClip(piece, rate))
    return out


# --------------------------------------------------------------------------
# CHAT transcripts and manifests

_TIER = re.compile(r"^\*([^:\s]+):")
_BULLET = re.compile("\x15([^\x15]*)\x15\\s*$")


def parse_chat_timing(text: str) -> list[UtteranceSegment]:
    """Extract time-bulleted speaker tiers from a CHAT transcript.

    Only main tiers (``*SPK:``) are considered; tab-indented continuation
    lines are joined to their tier first. Tiers without a trailing
    ``\\x15start_end\\x15`` bullet are skipped.
    """
    tiers: list[str] = []
    for line in text.splitlines():
        if line.startswith("\t") and tiers:
            tiers[-1] += " " + line.strip()
        elif line.startswith("*"):
            tiers.append(line.rstrip())
        else:
            # headers, dependent tiers and blank lines end continuation
            tiers.append("")
    segments = []
    for tier in tiers:
        m = _TIER.match(tier)
        if not m:
            continue
        b = _BULLET.search(tier)
        if not b:
            continue
        parts = b.group(1).split("_")
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise MalformedBullet(f"bad time bullet {b.group(1)!r}")
        start, end = int(parts[0]), int(parts[1])
        if end <= start:
            raise MalformedBullet(f"bullet end {end} <= start {start}")
        uid = f"u{len(segments):04d}"
        segments.append(UtteranceSegment(uid, float(start), float(end), m.group(1)))
    return segments


def read_segments(path, speakers: Sequence[str] | None = None) -> list[UtteranceSegment]:
    """Load segments from a CSV file or a ``.cha`` transcript.

    For transcripts, ``speakers`` defaults to the participant tier only.
    """
    path = Path(path)
    if path.suffix.lower() == ".cha":
        segs = parse_chat_timing(path.read_text(encoding="utf-8", errors="replace"))
        keep = set(speakers or ("PAR",))
        return [s for s in segs if s.speaker in keep]
    segs = []
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                segs.append(
                    UtteranceSegment(
                        row["utterance_id"], float(row["start_ms"]), float(row["end_ms"]), row.get("speaker") or "PAR"
                    )
                )
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}: bad segment row {row}: {exc}") from exc
    if speakers:
        segs = [s for s in segs if s.speaker in speakers]
    return segs


def write_segments(path, segments: Sequence[UtteranceSegment]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["utterance_id", "start_ms", "end_ms", "speaker"])
        for s in segments:
            w.writerow([s.utterance_id, f"{s.start_ms:g}", f"{s.end_ms:g}", s.speaker])


MANIFEST_FIELDS = ["session_id", "subject_id", "label", "wav_path", "segments_path"]


def read_manifest(path) -> list[SessionManifest]:
    """Parse a session manifest CSV; relative paths resolve against its folder."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    base = path.parent
    sessions = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            wav = base / row["wav_path"]
            seg_path = base / row["segments_path"]
            if not wav.is_file():
                raise DataError(f"{path}: wav file not found: {wav}")
            if not seg_path.is_file():
                raise DataError(f"{path}: segments file not found: {seg_path}")
            sessions.append(
                SessionManifest(row["session_id"], row["subject_id"], row["label"], wav, read_segments(seg_path))
            )
    ids = [s.session_id for s in sessions]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate session ids")
    return sessions


def write_manifest(path, rows: Sequence[dict]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
