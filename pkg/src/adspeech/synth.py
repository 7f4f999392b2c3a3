"""Deterministic synthetic two-class speech-like cohorts.

Each utterance is a harmonic source with a slowly wandering F0, broken
into syllable-like voiced bursts separated by short gaps and occasional
longer pauses, plus a low noise floor. The AD-like class differs from the
control class by an effect size ``delta`` in [0, 1]:

* F0 standard deviation is scaled by ``1 - 0.5 delta``
* the pause rate is scaled by ``1 + 2 delta``
* per-cycle amplitude perturbation is scaled by ``1 + delta``
* the syllable rate is scaled by ``1 - 0.3 delta``

With ``delta = 0`` both classes use the same generator.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Mapping

import numpy as np

from .audio_io import AudioClip, UtteranceSegment, write_manifest, write_segments, write_wav
from .errors import InvalidSpec

PEAK_LIMIT = 0.9

# control-class generator parameters
F0_STD_HZ = 24.0
PAUSE_RATE_HZ = 0.35
PAUSE_MS = (180.0, 420.0)
SHIMMER_STD = 0.06
SYLLABLE_RATE_HZ = 4.5
JITTER_STD = 0.005
NOISE_LEVEL = 0.003
BREATH_NOISE = 0.01


@dataclass(frozen=True)
class CohortSpec:
    n_subjects: int = 60  # per class
    utterances_per_subject: tuple[int, int] = (2, 4)
    utterance_ms: tuple[float, float] = (800.0, 1600.0)
    effect_size: float = 1.0
    seed: int = 0
    sample_rate_hz: int = 16000
    sessions_per_subject: tuple[int, int] = (1, 1)

    def __post_init__(self):
        lo, hi = self.utterances_per_subject
        if self.n_subjects < 1:
            raise InvalidSpec("n_subjects must be >= 1")
        if not 1 <= lo <= hi:
            raise InvalidSpec("utterances_per_subject must satisfy 1 <= lo <= hi")
        a, b = self.utterance_ms
        if not 100.0 <= a <= b:
            raise InvalidSpec("utterance_ms must satisfy 100 <= lo <= hi")
        if not 0.0 <= self.effect_size <= 1.0:
            raise InvalidSpec("effect_size must lie in [0, 1]")
        if self.sample_rate_hz < 8000:
            raise InvalidSpec("sample_rate_hz must be >= 8000")
        s0, s1 = self.sessions_per_subject
        if not 1 <= s0 <= s1:
            raise InvalidSpec("sessions_per_subject must satisfy 1 <= lo <= hi")
        if self.seed < 0:
            raise InvalidSpec("seed must be non-negative")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "CohortSpec":
        """Build from string key/values such as an INI section (ranges as ``lo,hi``)."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise InvalidSpec(f"unknown cohort key {key!r}")
            try:
                if key in ("utterances_per_subject", "sessions_per_subject"):
                    kwargs[key] = tuple(int(v) for v in str(raw).split(","))
                elif key == "utterance_ms":
                    kwargs[key] = tuple(float(v) for v in str(raw).split(","))
                elif key == "effect_size":
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = int(raw)
            except ValueError as exc:
                raise InvalidSpec(f"bad value for {key}: {raw!r}") from exc
            if isinstance(kwargs[key], tuple) and len(kwargs[key]) != 2:
                raise InvalidSpec(f"{key} must be a 'lo,hi' pair")
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ClassParams:
    f0_std_hz: float
    pause_rate_hz: float
    shimmer_std: float
    syllable_rate_hz: float

    @classmethod
    def for_label(cls, label: str, delta: float) -> "ClassParams":
        d = delta if label == "AD" else 0.0
        return cls(
            F0_STD_HZ * (1.0 - 0.5 * d),
            PAUSE_RATE_HZ * (1.0 + 2.0 * d),
            SHIMMER_STD * (1.0 + d),
            SYLLABLE_RATE_HZ * (1.0 - 0.3 * d),
        )


def _smooth_unit_process(n: int, rate: int, rng, corner_hz: float = 3.0) -> np.ndarray:
    """Zero-mean, unit-variance low-pass noise of length ``n``."""
    # a few random sinusoids below the corner frequency
    k = 6
    t = np.arange(n) / rate
    freqs = rng.uniform(0.3, corner_hz, k)
    phases = rng.uniform(0, 2 * np.pi, k)
    amps = rng.rayleigh(1.0, k)
    s = (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None])).sum(axis=0)
    s -= s.mean()
    sd = s.std()
    return s / sd if sd > 0 else s


def _voicing_mask(n: int, rate: int, params: ClassParams, rng) -> np.ndarray:
    """Smooth 0..1 envelope of syllable bursts, short gaps and long pauses."""
    env = np.zeros(n)
    pos = int(rng.uniform(0.01, 0.04) * rate)
    ramp = int(0.015 * rate)
    while pos < n:
        syl = int(rng.uniform(0.7, 1.3) / params.syllable_rate_hz * rate)
        voiced = int(0.75 * syl)
        end = min(n, pos + voiced)
        seg = np.ones(end - pos)
        r = min(ramp, len(seg) // 2)
        if r > 0:
            w = 0.5 - 0.5 * np.cos(np.pi * np.arange(r) / r)
            seg[:r] *= w
            seg[-r:] *= w[::-1]
        env[pos:end] = seg
        pos += syl
        if rng.random() < params.pause_rate_hz / params.syllable_rate_hz:
            pos += int(rng.uniform(*PAUSE_MS) / 1000.0 * rate)
    return env


def synth_utterance(n: int, rate: int, base_f0: float, params: ClassParams, rng) -> np.ndarray:
    """One voiced utterance of ``n`` samples (unnormalized)."""
    f0 = base_f0 + params.f0_std_hz * _smooth_unit_process(n, rate, rng)
    f0 = np.clip(f0, 70.0, 400.0)
    wobble = np.convolve(rng.standard_normal(n), np.ones(80) / 80.0, mode="same")
    f0 *= 1.0 + JITTER_STD * wobble / max(wobble.std(), 1e-12)
    phase = 2 * np.pi * np.cumsum(f0) / rate
    cycles = (phase // (2 * np.pi)).astype(int)
    per_cycle = 1.0 + params.shimmer_std * rng.standard_normal(cycles[-1] + 1)
    amp = np.clip(per_cycle, 0.2, None)[cycles]
    n_harm = int(min(3800.0, 0.45 * rate) // base_f0)
    src = np.zeros(n)
    for k in range(1, n_harm + 1):
        h = np.sin(k * phase) / k
        # drop harmonics above the band limit where F0 peaks
        h[k * f0 > 0.45 * rate] = 0.0
        src += h
    env = _voicing_mask(n, rate, params, rng)
    voiced = amp * src * env
    breath = BREATH_NOISE * rng.standard_normal(n) * env
    return voiced + breath


def _draw_sessions(spec: CohortSpec, label: str, index: int, rng):
    params = ClassParams.for_label(label, spec.effect_size)
    base_f0 = rng.uniform(100.0, 220.0)
    gain = rng.uniform(0.25, 0.6)
    rate = spec.sample_rate_hz
    n_sessions = int(rng.integers(spec.sessions_per_subject[0], spec.sessions_per_subject[1] + 1))
    out = []
    for s in range(n_sessions):
        n_utt = int(rng.integers(spec.utterances_per_subject[0], spec.utterances_per_subject[1] + 1))
        pieces, segments = [], []
        t = int(rng.uniform(0.2, 0.4) * rate)
        pieces.append(np.zeros(t))
        for u in range(n_utt):
            dur_ms = rng.uniform(*spec.utterance_ms)
            n = int(round(dur_ms * rate / 1000.0))
            start_ms = 1000.0 * t / rate
            segments.append(UtteranceSegment(f"u{u:04d}", round(start_ms, 3), round(start_ms + 1000.0 * n / rate, 3)))
            pieces.append(synth_utterance(n, rate, base_f0, params, rng))
            gap = int(rng.uniform(0.3, 0.6) * rate)
            pieces.append(np.zeros(gap))
            t += n + gap
        x = np.concatenate(pieces)
        x *= gain / max(np.max(np.abs(x)), 1e-12)
        x += NOISE_LEVEL * gain * rng.standard_normal(len(x))
        peak = np.max(np.abs(x))
        if peak > PEAK_LIMIT * 0.98:
            x *= PEAK_LIMIT * 0.98 / peak
        out.append((s, AudioClip(x, rate), segments))
    return out


def subject_seed(spec: CohortSpec, class_index: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([spec.seed, class_index, index])


def generate_cohort(spec: CohortSpec, out_dir) -> Path:
    """Write ``wav/``, ``segments/`` and ``manifest.csv`` under ``out_dir``.

    Returns the manifest path. Subject ids are ``ad000``..., ``ct000``...
    and every subject draws from its own RNG stream, so output for a
    given subject does not depend on how many others are generated.
    """
    out = Path(out_dir)
    (out / "wav").mkdir(parents=True, exist_ok=True)
    (out / "segments").mkdir(parents=True, exist_ok=True)
    rows = []
    for ci, (label, prefix) in enumerate((("AD", "ad"), ("control", "ct"))):
        for i in range(spec.n_subjects):
            rng = np.random.default_rng(subject_seed(spec, ci, i))
            subject = f"{prefix}{i:03d}"
            for s, clip, segments in _draw_sessions(spec, label, i, rng):
                session = f"{subject}-{s}"
                wav_rel = f"wav/{session}.wav"
                seg_rel = f"segments/{session}.csv"
                write_wav(out / wav_rel, clip)
                write_segments(out / seg_rel, segments)
                rows.append(
                    {
                        "session_id": session,
                        "subject_id": subject,
                        "label": label,
                        "wav_path": wav_rel,
                        "segments_path": seg_rel,
                    }
                )
    manifest = out / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest
