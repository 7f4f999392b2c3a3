"""Power spectra, mel filterbanks, MFCC and log-mel band energies."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft

LOG_FLOOR = 1e-10
N_MEL_FILTERS = 26


def nfft_for(frame_len: int) -> int:
    return 1 << int(np.ceil(np.log2(max(frame_len, 1))))


def power_spectrum(frames: np.ndarray, nfft: int | None = None) -> np.ndarray:
    frames = np.atleast_2d(frames)
    nfft = nfft or nfft_for(frames.shape[1])
    spec = np.fft.rfft(frames, nfft, axis=-1)
    return spec.real**2 + spec.imag**2


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=32)
def _filterbank(n_filters: int, nfft: int, rate: int, fmin: float, fmax: float) -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    freqs = np.arange(nfft // 2 + 1) * rate / nfft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def mel_filterbank(n_filters: int, nfft: int, rate: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape (n_filters, nfft//2 + 1).

    Weights are evaluated at each bin's exact frequency, so narrow filters
    never collapse to zero.
    """
    fmax = rate / 2.0 if fmax is None else min(fmax, rate / 2.0)
    return _filterbank(n_filters, nfft, rate, float(fmin), float(fmax))


def mel_energies(frames: np.ndarray, rate: int, n_filters: int = N_MEL_FILTERS, fmin: float = 0.0, fmax=None):
    frames = np.atleast_2d(frames)
    nfft = nfft_for(frames.shape[1])
    return power_spectrum(frames, nfft) @ mel_filterbank(n_filters, nfft, rate, fmin, fmax).T


def mfcc_frames(frames: np.ndarray, rate: int, n_low: int, n_high: int) -> np.ndarray:
    """Cepstral coefficients ``n_low..n_high`` (inclusive) for each frame."""
    if not 0 <= n_low <= n_high < N_MEL_FILTERS:
        raise ValueError(f"coefficient range {n_low}..{n_high} outside 0..{N_MEL_FILTERS - 1}")
    logmel = np.log(np.maximum(mel_energies(frames, rate), LOG_FLOOR))
    cep = scipy.fft.dct(logmel, type=2, norm="ortho", axis=-1)
    return cep[:, n_low : n_high + 1]


def mfcc(frame: np.ndarray, rate: int, n_low: int = 1, n_high: int = 12) -> np.ndarray:
    return mfcc_frames(np.asarray(frame, dtype=np.float64)[None, :], rate, n_low, n_high)[0]


def log_mel_bands(frames: np.ndarray, rate: int, n_bands: int = 8, fmin: float = 20.0, fmax: float = 6500.0):
    return np.log(np.maximum(mel_energies(frames, rate, n_bands, fmin, fmax), LOG_FLOOR))


def loudness(frames: np.ndarray, rate: int) -> np.ndarray:
    """Log of the total energy collected by the 26-band auditory filterbank."""
    return np.log(np.maximum(mel_energies(frames, rate).sum(axis=1), LOG_FLOOR))


def zero_crossing_rate(frames: np.ndarray) -> np.ndarray:
    s = np.signbit(np.atleast_2d(frames))
    return np.count_nonzero(s[:, 1:] != s[:, :-1], axis=1) / frames.shape[-1]


def rms_energy(frames: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean(np.atleast_2d(frames) ** 2, axis=1))
