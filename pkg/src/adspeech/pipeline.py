"""Manifest to utterance examples: loudness normalization, segmentation, LLDs, caching."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .audio_io import (
    SessionManifest,
    dbfs,
    normalize_to,
    read_manifest,
    read_wav,
    segment_fixed,
    segment_utterances,
)
from .errors import ClipTooShort, EmptyDataset, SilentSignal
from .lld import extract_lld
from .train import LABEL_CODES, UtteranceExample

log = logging.getLogger(__name__)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def dataset_target_dbfs(sessions: Sequence[SessionManifest]) -> float:
    """Mean of per-file dBFS over the non-silent session files."""
    levels = []
    for s in sessions:
        try:
            levels.append(dbfs(read_wav(s.wav_path)))
        except SilentSignal:
            log.warning("silent session file skipped for the loudness target: %s", s.wav_path)
    if not levels:
        raise EmptyDataset("every session file is silent")
    return float(np.mean(levels))


def session_clips(session: SessionManifest, target_dbfs: float, length_ms: float | None):
    """(utterance ids, clips) for one session after normalization and segmentation."""
    clip = read_wav(session.wav_path)
    try:
        clip = normalize_to(clip, target_dbfs)
    except SilentSignal:
        log.warning("session %s is silent; left unnormalized", session.session_id)
    if length_ms is None:
        clips = segment_utterances(clip, session.segments)
        ids = [seg.utterance_id for seg in session.segments]
    else:
        clips = segment_fixed(clip, length_ms)
        ids = [f"w{i:04d}" for i in range(len(clips))]
    return ids, clips


def _extract_session(args):
    session, target, length_ms, set_id = args
    ids, clips = session_clips(session, target, length_ms)
    out_ids, feats = [], []
    for uid, c in zip(ids, clips):
        try:
            m = extract_lld(c, set_id)
        except ClipTooShort:
            log.warning("%s/%s shorter than one frame; skipped", session.session_id, uid)
            continue
        out_ids.append(uid)
        feats.append(m.values)
    return out_ids, feats


def _cache_key(session: SessionManifest, target: float, length_ms, set_id: str) -> str:
    payload = {
        "wav": file_sha256(session.wav_path),
        "segments": [[s.utterance_id, s.start_ms, s.end_ms, s.speaker] for s in session.segments],
        "target_dbfs": repr(float(target)),
        "length_ms": length_ms,
        "set": set_id,
        "version": __version__,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:32]


def _load_cached(path: Path):
    with np.load(path, allow_pickle=False) as z:
        ids = [str(v) for v in z["ids"]]
        return ids, [z[f"f{i}"] for i in range(len(ids))]


def _save_cached(path: Path, ids, feats) -> None:
    arrays = {f"f{i}": f for i, f in enumerate(feats)}
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, ids=np.array(ids, dtype=str), **arrays)
    tmp.replace(path)


def build_examples(
    manifest,
    set_id: str = "IS09",
    length_ms: float | None = None,
    cache_dir=None,
    threads: int = 1,
) -> list[UtteranceExample]:
    """Utterance examples for every session in ``manifest``.

    ``length_ms=None`` uses the transcript segments; otherwise every session
    file is cut into fixed windows of that length regardless of speaker.
    Per-session feature matrices are cached under ``cache_dir`` keyed by the
    audio content, segmentation and feature set.
    """
    sessions = manifest if isinstance(manifest, list) else read_manifest(manifest)
    if not sessions:
        raise EmptyDataset("manifest lists no sessions")
    target = dataset_target_dbfs(sessions)
    cache = Path(cache_dir) if cache_dir else None
    if cache:
        cache.mkdir(parents=True, exist_ok=True)

    results: list = [None] * len(sessions)
    todo = []
    keys = {}
    for i, s in enumerate(sessions):
        if cache:
            keys[i] = cache / f"{_cache_key(s, target, length_ms, set_id)}.npz"
            if keys[i].is_file():
                results[i] = _load_cached(keys[i])
                continue
        todo.append(i)
    jobs = [(sessions[i], target, length_ms, set_id) for i in todo]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(_extract_session, jobs))
    else:
        done = [_extract_session(j) for j in jobs]
    for i, r in zip(todo, done):
        results[i] = r
        if cache:
            _save_cached(keys[i], *r)

    examples = []
    for s, (ids, feats) in zip(sessions, results):
        for uid, f in zip(ids, feats):
            examples.append(UtteranceExample(f, LABEL_CODES[s.label], s.subject_id, f"{s.session_id}/{uid}", s.session_id))
    if not examples:
        raise EmptyDataset("no utterances could be extracted")
    return examples


def dataset_hash(manifest) -> str:
    """Content hash over the manifest rows, audio files and segment lists."""
    sessions = read_manifest(manifest)
    h = hashlib.sha256()
    for s in sessions:
        h.update(f"{s.session_id}|{s.subject_id}|{s.label}|{file_sha256(s.wav_path)}|".encode())
        for seg in s.segments:
            h.update(f"{seg.utterance_id},{seg.start_ms!r},{seg.end_ms!r},{seg.speaker};".encode())
    return h.hexdigest()
