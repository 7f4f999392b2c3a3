"""Cycle-to-cycle perturbation measures: local jitter, DDP jitter, local shimmer.

Period marks are found by waveform peak picking inside voiced stretches,
guided by the frame-level F0 track; each mark is refined with a parabola
through its neighbours.
"""

from __future__ import annotations

import numpy as np

from ..audio_io import AudioClip
from .framing import FrameConfig

SEARCH_LO = 0.8
SEARCH_HI = 1.25


def _parabolic(x: np.ndarray, i: int) -> tuple[float, float]:
    if 0 < i < len(x) - 1:
        y0, y1, y2 = x[i - 1], x[i], x[i + 1]
        d = y0 - 2.0 * y1 + y2
        if d < 0:
            off = 0.5 * (y0 - y2) / d
            if abs(off) <= 0.5:
                return i + off, y1 - 0.25 * (y0 - y2) * off
    return float(i), float(x[i])


def period_marks(x: np.ndarray, rate: int, start: int, stop: int, f0_at) -> tuple[np.ndarray, np.ndarray]:
    """Peak positions (fractional samples) and heights within ``x[start:stop]``.

    ``f0_at(sample_index)`` gives the local F0 estimate in Hz.
    """
    pos, amp = [], []
    t0 = rate / f0_at(start)
    first_hi = min(stop, start + int(np.ceil(1.2 * t0)) + 1)
    if first_hi - start < 3:
        return np.array(pos), np.array(amp)
    i = start + int(np.argmax(x[start:first_hi]))
    while True:
        p, a = _parabolic(x, i)
        pos.append(p)
        amp.append(a)
        t0 = rate / f0_at(i)
        lo = i + int(np.floor(SEARCH_LO * t0))
        hi = i + int(np.ceil(SEARCH_HI * t0)) + 1
        if hi > stop:
            break
        i = lo + int(np.argmax(x[lo:hi]))
    return np.asarray(pos), np.asarray(amp)


def _perturbation(periods: np.ndarray, amps: np.ndarray) -> tuple[float, float, float]:
    jit = ddp = shim = 0.0
    if len(periods) >= 2:
        jit = float(np.mean(np.abs(np.diff(periods))) / np.mean(periods))
    if len(periods) >= 3:
        ddp = float(np.mean(np.abs(np.diff(periods, 2))) / np.mean(periods))
    if len(amps) >= 2 and np.mean(np.abs(amps)) > 0:
        shim = float(np.mean(np.abs(np.diff(amps))) / np.mean(np.abs(amps)))
    return jit, ddp, shim


def jitter_shimmer(clip: AudioClip, f0_track: np.ndarray, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Per-frame ``(jitter_local, jitter_ddp, shimmer_local)``, shape (T, 3).

    Frame ``j`` uses the marks inside the pitch window centred on it.
    Unvoiced frames (F0 = 0) and frames with too few marks give 0.
    """
    f0_track = np.asarray(f0_track, dtype=np.float64)
    rate = clip.sample_rate_hz
    x = clip.samples
    flen, hop, plen = cfg.frame_len(rate), cfg.hop_len(rate), cfg.pitch_len(rate)
    t = len(f0_track)
    out = np.zeros((t, 3))
    centres = hop * np.arange(t) + flen / 2.0
    voiced = f0_track > 0
    if not voiced.any():
        return out

    def f0_at(idx):
        j = int(np.clip(np.round((idx - flen / 2.0) / hop), 0, t - 1))
        f = f0_track[j]
        if f <= 0:
            # nearest voiced frame
            v = np.flatnonzero(voiced)
            f = f0_track[v[np.argmin(np.abs(v - j))]]
        return f

    # contiguous voiced runs -> sample ranges
    edges = np.diff(np.concatenate([[0], voiced.astype(np.int8), [0]]))
    run_starts = np.flatnonzero(edges == 1)
    run_stops = np.flatnonzero(edges == -1)
    all_pos, all_amp = [], []
    for a, b in zip(run_starts, run_stops):
        s0 = int(max(0, np.floor(centres[a] - hop / 2.0)))
        s1 = int(min(len(x), np.ceil(centres[b - 1] + hop / 2.0)))
        pos, amp = period_marks(x, rate, s0, s1, f0_at)
        all_pos.append(pos)
        all_amp.append(amp)
    half = plen / 2.0
    for (a, b), pos, amp in zip(zip(run_starts, run_stops), all_pos, all_amp):
        if len(pos) < 2:
            continue
        for j in range(a, b):
            lo = np.searchsorted(pos, centres[j] - half)
            hi = np.searchsorted(pos, centres[j] + half, side="right")
            p = pos[lo:hi]
            if len(p) >= 3:
                out[j] = _perturbation(np.diff(p), amp[lo:hi])
    return out
