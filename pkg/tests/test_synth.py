import numpy as np
import pytest
from scipy import stats

from adspeech.audio_io import read_manifest, read_wav
from adspeech.errors import InvalidSpec
from adspeech.pipeline import build_examples
from adspeech.synth import PEAK_LIMIT, ClassParams, CohortSpec, generate_cohort

F0_ROW = 2  # position of f0 in the IS09 roster


def per_utterance_f0_std(examples):
    out = {0: [], 1: []}
    for e in examples:
        v = e.features[F0_ROW]
        v = v[v > 0]
        if len(v) > 5:
            out[e.label].append((e.subject_id, v.std()))
    return out


def per_subject(values):
    groups = {}
    for s, v in values:
        groups.setdefault(s, []).append(v)
    return np.array([np.mean(v) for v in groups.values()])


@pytest.fixture(scope="module")
def cohorts(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    return {d: generate_cohort(CohortSpec(n_subjects=40, effect_size=d, seed=0), root / f"d{d}") for d in (0.0, 1.0)}


def test_identical_bytes_for_identical_spec(tmp_path):
    spec = CohortSpec(n_subjects=3, seed=11)
    a = generate_cohort(spec, tmp_path / "a")
    b = generate_cohort(spec, tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()
    for f in sorted((tmp_path / "a").rglob("*.*")):
        assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_subject_streams_are_independent_of_cohort_size(tmp_path):
    small = generate_cohort(CohortSpec(n_subjects=2, seed=5), tmp_path / "s")
    large = generate_cohort(CohortSpec(n_subjects=4, seed=5), tmp_path / "l")
    assert (small.parent / "wav/ct001-0.wav").read_bytes() == (large.parent / "wav/ct001-0.wav").read_bytes()


def test_manifest_is_complete_and_within_peak(tmp_path):
    spec = CohortSpec(n_subjects=4, utterances_per_subject=(2, 3), sessions_per_subject=(1, 2), seed=2)
    sessions = read_manifest(generate_cohort(spec, tmp_path))
    subjects = {s.subject_id for s in sessions}
    assert subjects == {f"ad{i:03d}" for i in range(4)} | {f"ct{i:03d}" for i in range(4)}
    for s in sessions:
        assert s.label == ("AD" if s.subject_id.startswith("ad") else "control")
        clip = read_wav(s.wav_path)
        assert clip.sample_rate_hz == 16000
        assert np.max(np.abs(clip.samples)) <= PEAK_LIMIT
        assert 2 <= len(s.segments) <= 3
        for seg in s.segments:
            assert 800 <= seg.end_ms - seg.start_ms <= 1600
            assert seg.end_ms <= 1000 * len(clip.samples) / clip.sample_rate_hz


def test_class_params_scale_with_effect_size():
    ad, ct = ClassParams.for_label("AD", 1.0), ClassParams.for_label("control", 1.0)
    assert ad.f0_std_hz == pytest.approx(0.5 * ct.f0_std_hz)
    assert ad.pause_rate_hz == pytest.approx(3.0 * ct.pause_rate_hz)
    assert ad.shimmer_std == pytest.approx(2.0 * ct.shimmer_std)
    assert ClassParams.for_label("AD", 0.0) == ct


def test_effect_size_one_halves_tracked_f0_spread(cohorts):
    sd = per_utterance_f0_std(build_examples(cohorts[1.0], "IS09"))
    ratio = np.mean([v for _, v in sd[1]]) / np.mean([v for _, v in sd[0]])
    assert ratio == pytest.approx(0.5, rel=0.1)


def test_effect_size_zero_is_indistinguishable(cohorts):
    sd = per_utterance_f0_std(build_examples(cohorts[0.0], "IS09"))
    p = stats.mannwhitneyu(per_subject(sd[1]), per_subject(sd[0])).pvalue
    assert p > 0.01


@pytest.mark.parametrize(
    "kw",
    [dict(n_subjects=0), dict(effect_size=-0.1), dict(utterances_per_subject=(3, 2)), dict(utterance_ms=(0, 100)),
     dict(sample_rate_hz=4000), dict(sessions_per_subject=(0, 1))],
)
def test_invalid_spec(kw):
    with pytest.raises(InvalidSpec):
        CohortSpec(**kw)


def test_spec_from_mapping():
    spec = CohortSpec.from_mapping({"n_subjects": "5", "utterance_ms": "500,900", "effect_size": "0.5"})
    assert spec.n_subjects == 5 and spec.utterance_ms == (500.0, 900.0) and spec.effect_size == 0.5
    with pytest.raises(InvalidSpec):
        CohortSpec.from_mapping({"colour": "red"})
