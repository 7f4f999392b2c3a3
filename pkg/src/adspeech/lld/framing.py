"""Frame slicing, pre-emphasis and windowing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio_io import AudioClip
from ..errors import ClipTooShort


@dataclass(frozen=True)
class FrameConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    window: str = "hamming"
    preemphasis: float = 0.97
    # F0, voicing and period marks use a longer window centred on each frame
    pitch_frame_ms: float = 60.0

    def __post_init__(self):
        if not (self.frame_ms >= self.hop_ms > 0):
            raise ValueError("need frame_ms >= hop_ms > 0")
        if not (0.0 <= self.preemphasis < 1.0):
            raise ValueError("preemphasis must be in [0, 1)")
        if self.window not in ("hamming", "hann"):
            raise ValueError(f"unknown window {self.window!r}")
        if self.pitch_frame_ms < self.frame_ms:
            raise ValueError("pitch_frame_ms must be >= frame_ms")

    def frame_len(self, rate: int) -> int:
        return int(round(self.frame_ms * rate / 1000.0))

    def hop_len(self, rate: int) -> int:
        return int(round(self.hop_ms * rate / 1000.0))

    def pitch_len(self, rate: int) -> int:
        return int(round(self.pitch_frame_ms * rate / 1000.0))


def window_coefficients(name: str, n: int) -> np.ndarray:
    # symmetric windows (same as np.hamming / np.hanning)
    if name == "hamming":
        return np.hamming(n)
    if name == "hann":
        return np.hanning(n)
    raise ValueError(f"unknown window {name!r}")


def frame_count(n_samples: int, frame_len: int, hop: int) -> int:
    if n_samples < frame_len:
        return 0
    return (n_samples - frame_len) // hop + 1


def slice_frames(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Strided (T, frame_len) copy of ``x``; no windowing."""
    t = frame_count(len(x), frame_len, hop)
    if t == 0:
        raise ClipTooShort(f"{len(x)} samples is shorter than one frame ({frame_len})")
    idx = np.arange(frame_len)[None, :] + hop * np.arange(t)[:, None]
    return x[idx]


def preemphasize(frames: np.ndarray, k: float) -> np.ndarray:
    """Per-frame first-order pre-emphasis ``y[n] = x[n] - k x[n-1]``."""
    if k == 0.0:
        return frames.copy()
    out = frames.copy()
    out[:, 1:] -= k * frames[:, :-1]
    out[:, 0] *= 1.0 - k
    return out


def frame_signal(clip: AudioClip, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Pre-emphasized, windowed frames of shape (T, frame_len)."""
    rate = clip.sample_rate_hz
    flen = cfg.frame_len(rate)
    frames = slice_frames(clip.samples, flen, cfg.hop_len(rate))
    return preemphasize(frames, cfg.preemphasis) * window_coefficients(cfg.window, flen)


def pitch_frames(clip: AudioClip, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Long windowed frames centred on the short-frame centres.

    The clip is zero-padded symmetrically so the frame count matches
    :func:`frame_signal`. No pre-emphasis is applied.
    """
    rate = clip.sample_rate_hz
    flen, hop, plen = cfg.frame_len(rate), cfg.hop_len(rate), cfg.pitch_len(rate)
    t = frame_count(len(clip), flen, hop)
    if t == 0:
        raise ClipTooShort(f"{len(clip)} samples is shorter than one frame ({flen})")
    left = (plen - flen) // 2
    padded = np.concatenate([np.zeros(left), clip.samples, np.zeros(plen)])
    idx = np.arange(plen)[None, :] + hop * np.arange(t)[:, None]
    return padded[idx] * window_coefficients(cfg.window, plen)
