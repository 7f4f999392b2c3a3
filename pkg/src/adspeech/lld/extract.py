"""IS09- and IS10-style frame-level descriptor sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio_io import AudioClip
from ..errors import ClipTooShort
from . import spectral
from .framing import FrameConfig, frame_count, frame_signal, pitch_frames, slice_frames, window_coefficients
from .functionals import delta
from .lsp import lsp_frames
from .pitch import f0_voicing_frames, hnr_db, median_smooth3
from .voice_quality import jitter_shimmer

FEATURE_SETS = ("IS09", "IS10")

IS09_BASE = ["zcr", "rms_energy", "f0", "hnr"] + [f"mfcc_{i}" for i in range(1, 13)]
IS10_BASE = (
    ["loudness"]
    + [f"mfcc_{i}" for i in range(15)]
    + [f"logmel_{i}" for i in range(8)]
    + [f"lsp_{i}" for i in range(8)]
    + ["f0", "f0_env", "voicing_prob", "jitter_local", "jitter_ddp", "shimmer_local"]
)


def row_names(set_id: str) -> list[str]:
    base = {"IS09": IS09_BASE, "IS10": IS10_BASE}[set_id]
    return base + [f"{n}_de" for n in base]


@dataclass
class LLDMatrix:
    values: np.ndarray  # (F, T)
    row_names: list[str]
    frame_times_ms: np.ndarray
    set_id: str

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    @property
    def n_features(self) -> int:
        return self.values.shape[0]


def _pitch_track(clip: AudioClip, cfg: FrameConfig):
    plen = cfg.pitch_len(clip.sample_rate_hz)
    frames = pitch_frames(clip, cfg)
    return f0_voicing_frames(frames, clip.sample_rate_hz, window_coefficients(cfg.window, plen))


def extract_lld(clip: AudioClip, set_id: str = "IS09", cfg: FrameConfig = FrameConfig()) -> LLDMatrix:
    """Frame-level descriptors plus their deltas as an (F, T) matrix."""
    if set_id not in FEATURE_SETS:
        raise ValueError(f"unknown feature set {set_id!r}")
    rate = clip.sample_rate_hz
    flen, hop = cfg.frame_len(rate), cfg.hop_len(rate)
    if len(clip) == 0 or frame_count(len(clip), flen, hop) == 0:
        raise ClipTooShort(f"clip of {len(clip)} samples yields no {cfg.frame_ms} ms frame")

    spec_frames = frame_signal(clip, cfg)
    f0, voicing, peak = _pitch_track(clip, cfg)

    if set_id == "IS09":
        raw = slice_frames(clip.samples, flen, hop)
        base = np.vstack(
            [
                spectral.zero_crossing_rate(raw),
                spectral.rms_energy(raw),
                f0,
                hnr_db(peak),
                spectral.mfcc_frames(spec_frames, rate, 1, 12).T,
            ]
        )
    else:
        lsp, _ = lsp_frames(spec_frames, 8)
        base = np.vstack(
            [
                spectral.loudness(spec_frames, rate),
                spectral.mfcc_frames(spec_frames, rate, 0, 14).T,
                spectral.log_mel_bands(spec_frames, rate).T,
                lsp.T,
                f0,
                median_smooth3(f0),
                voicing,
                jitter_shimmer(clip, f0, cfg).T,
            ]
        )
    values = np.vstack([base, delta(base)])
    values = np.nan_to_num(values, nan=0.0, posinf=0.0, neginf=0.0)
    times = (np.arange(values.shape[1]) * hop + flen / 2.0) * 1000.0 / rate
    return LLDMatrix(values, row_names(set_id), times, set_id)
