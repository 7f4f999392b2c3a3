"""Autocorrelation pitch tracking, voicing probability and HNR."""

from __future__ import annotations

import numpy as np

F0_MIN_HZ = 55.0
F0_MAX_HZ = 500.0
VOICING_THRESHOLD = 0.3
# smallest-lag peak within this fraction of the best one wins (octave guard)
OCTAVE_TOLERANCE = 0.95
HNR_LIMIT_DB = 100.0


def _acf(frames: np.ndarray) -> np.ndarray:
    n = frames.shape[-1]
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(frames, nfft, axis=-1)
    return np.fft.irfft(spec.real**2 + spec.imag**2, nfft, axis=-1)[..., :n]


def normalized_autocorrelation(frames: np.ndarray, window: np.ndarray | None = None) -> np.ndarray:
    """Window-corrected normalized autocorrelation, one row per frame.

    Dividing by the window's own normalized autocorrelation removes the
    taper bias, so a windowed pure tone peaks near 1 at its period.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    n = frames.shape[1]
    w = np.ones(n) if window is None else np.asarray(window, dtype=np.float64)
    rx = _acf(frames)
    rw = _acf(w[None, :])[0]
    rw = rw / rw[0]
    energy = rx[:, :1]
    safe = np.where(energy > 1e-20, energy, 1.0)
    r = rx / safe
    r[energy[:, 0] <= 1e-20] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(rw > 1e-6, r / rw, 0.0)
    return r


def lag_band(rate: int, n: int) -> tuple[int, int]:
    lo = max(2, int(np.floor(rate / F0_MAX_HZ)))
    hi = min(int(np.ceil(rate / F0_MIN_HZ)), n // 2)
    return lo, hi


def f0_voicing_frames(frames: np.ndarray, rate: int, window: np.ndarray | None = None):
    """Vectorized F0 (Hz) and voicing probability for a (T, n) frame array.

    Returns ``(f0, voicing, peak)`` where ``peak`` is the unclipped
    normalized autocorrelation at the chosen lag (used for HNR).
    """
    frames = np.atleast_2d(frames)
    t, n = frames.shape
    r = normalized_autocorrelation(frames, window)
    lo, hi = lag_band(rate, n)
    f0 = np.zeros(t)
    voicing = np.zeros(t)
    peak = np.zeros(t)
    if hi <= lo + 1 or t == 0:
        return f0, voicing, peak
    band = r[:, lo - 1 : hi + 2]  # one guard sample each side
    mid = band[:, 1:-1]
    is_peak = (mid >= band[:, :-2]) & (mid > band[:, 2:])
    masked = np.where(is_peak, mid, -np.inf)
    best = masked.max(axis=1)
    has_peak = np.isfinite(best) & (best > 0)
    cand = is_peak & (mid >= OCTAVE_TOLERANCE * best[:, None])
    first = np.argmax(cand, axis=1)
    rows = np.arange(t)
    y0 = band[rows, first]
    ym = band[rows, first + 1]
    yp = band[rows, first + 2]
    denom = y0 - 2.0 * ym + yp
    with np.errstate(divide="ignore", invalid="ignore"):
        shift = np.where(np.abs(denom) > 1e-12, 0.5 * (y0 - yp) / denom, 0.0)
    shift = np.clip(shift, -0.5, 0.5)
    lag = lo + first + shift
    peak = np.where(has_peak, ym, 0.0)
    voicing = np.clip(peak, 0.0, 1.0)
    voiced = has_peak & (voicing >= VOICING_THRESHOLD)
    f0 = np.where(voiced, rate / lag, 0.0)
    return f0, voicing, peak


def f0_and_voicing(frame: np.ndarray, rate: int, window: np.ndarray | None = None) -> tuple[float, float]:
    """F0 in Hz (0 when unvoiced) and voicing probability of one frame.

    ``window`` is the taper already applied to ``frame``; pass it so the
    autocorrelation can be corrected for it.
    """
    f0, voicing, _ = f0_voicing_frames(np.asarray(frame, dtype=np.float64)[None, :], rate, window)
    return float(f0[0]), float(voicing[0])


def hnr_db(peak: np.ndarray) -> np.ndarray:
    """Harmonics-to-noise ratio ``10 log10(r / (1 - r))`` with clamping."""
    r = np.asarray(peak, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = 10.0 * np.log10(r / (1.0 - r))
    h = np.where(r >= 1.0, HNR_LIMIT_DB, h)
    h = np.where(r <= 0.0, -HNR_LIMIT_DB, h)
    return np.clip(h, -HNR_LIMIT_DB, HNR_LIMIT_DB)


def median_smooth3(x: np.ndarray) -> np.ndarray:
    """Three-point running median with edge replication."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 3:
        return x.copy()
    p = np.concatenate([x[:1], x, x[-1:]])
    return np.median(np.stack([p[:-2], p[1:-1], p[2:]]), axis=0)
