import math

import numpy as np
import pytest

from adspeech.errors import EmptyDataset, InvalidConfig, SingleClassData
from adspeech.nn_core import ModelConfig
from adspeech.train import (
    FeatureScaler,
    TrainConfig,
    UtteranceExample,
    make_batches,
    pad_to_length,
    stack_padded,
    subject_split,
    train_model,
    write_history,
)

SMALL = dict(kernels=4, hidden=8, dropout=0.0)


def random_examples(n, f=8, t=(10, 20), seed=0, n_subjects=None):
    rng = np.random.default_rng(seed)
    n_subjects = n_subjects or n
    out = []
    for i in range(n):
        s = i % n_subjects
        out.append(UtteranceExample(rng.normal(size=(f, int(rng.integers(*t)))), s % 2, f"s{s:02d}", f"s{s:02d}-1/u{i}"))
    return out


def test_pad_and_truncate():
    v = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(pad_to_length(v, 5), [[0, 1, 2, 0, 0], [3, 4, 5, 0, 0]])
    np.testing.assert_array_equal(pad_to_length(v, 2), [[0, 1], [3, 4]])


def test_stack_padded_counts_truncations():
    ex = random_examples(4, t=(5, 30))
    x, truncated = stack_padded(ex, 12, FeatureScaler.identity(8))
    assert x.shape == (4, 8, 12)
    assert truncated == sum(e.n_frames > 12 for e in ex)


def test_scaler_ignores_padding():
    ex = [UtteranceExample(np.array([[1.0, 3.0]]), 0, "a", "a/1"), UtteranceExample(np.array([[5.0]]), 1, "b", "b/1")]
    sc = FeatureScaler.fit(ex)
    assert sc.mean[0] == pytest.approx(3.0)
    assert sc.std[0] == pytest.approx(np.std([1.0, 3.0, 5.0]))
    const = FeatureScaler.fit([UtteranceExample(np.ones((1, 4)), 0, "a", "a/1")])
    assert const.std[0] == 1.0


@pytest.mark.parametrize("n,bs,sizes", [(10, 4, [4, 4, 2]), (9, 4, [4, 5]), (1, 4, [1]), (5, 5, [5])])
def test_make_batches_never_leaves_a_singleton(n, bs, sizes):
    batches = make_batches(np.arange(n), bs)
    assert [len(b) for b in batches] == sizes
    np.testing.assert_array_equal(np.concatenate(batches), np.arange(n))


def test_subject_split_is_disjoint():
    ex = random_examples(40, n_subjects=20)
    train, val = subject_split(ex, 0.1, np.random.default_rng(0))
    assert len({e.subject_id for e in val}) == 2
    assert not ({e.subject_id for e in train} & {e.subject_id for e in val})
    assert len(train) + len(val) == len(ex)


def test_train_config_validation():
    for bad in [dict(batch_size=1), dict(validation_fraction=0.5), dict(max_epochs=0), dict(early_stop_patience=0)]:
        with pytest.raises(InvalidConfig):
            TrainConfig(**bad)


def test_training_rejects_degenerate_data():
    with pytest.raises(EmptyDataset):
        train_model([], ModelConfig())
    one_class = [e for e in random_examples(6) if e.label == 0]
    with pytest.raises(SingleClassData):
        train_model(one_class, ModelConfig(**SMALL), TrainConfig(max_epochs=1))


def test_first_epoch_loss_near_chance():
    ex = random_examples(32, seed=3)
    _, hist = train_model(ex, ModelConfig(arch="gcnn", depth=1, **SMALL), TrainConfig(max_epochs=1, batch_size=8))
    assert abs(hist[0]["train_loss"] - math.log(2.0)) < 0.2


@pytest.mark.parametrize("arch", ["cnn", "gcnn"])
def test_training_is_deterministic(arch):
    ex = random_examples(12, seed=4)
    cfg = ModelConfig(arch=arch, depth=2, kernels=4, hidden=8)
    tc = TrainConfig(max_epochs=3, batch_size=4, seed=7)
    a, ha = train_model(ex, cfg, tc)
    b, hb = train_model(ex, cfg, tc)
    assert ha == hb
    np.testing.assert_array_equal(a.predict_proba(ex), b.predict_proba(ex))


def test_early_stopping_restores_best_state():
    ex = random_examples(40, n_subjects=20, seed=5)
    tc = TrainConfig(max_epochs=30, batch_size=8, early_stop_patience=2, validation_fraction=0.2)
    trained, hist = train_model(ex, ModelConfig(arch="gcnn", depth=1, **SMALL), tc)
    assert len(hist) < 30 or all(np.isfinite(h["val_loss"]) for h in hist)
    best = min(h["val_loss"] for h in hist)
    assert hist[-1]["val_loss"] >= best
    assert trained.metadata()["epochs"] == len(hist)


def test_learns_a_separable_signal():
    rng = np.random.default_rng(8)
    ex = []
    for i in range(24):
        lab = i % 2
        v = rng.normal(size=(4, 12)) + (1.5 if lab else -1.5) * np.array([[1.0], [0.0], [0.0], [0.0]])
        ex.append(UtteranceExample(v, lab, f"s{i}", f"s{i}/u"))
    trained, hist = train_model(ex, ModelConfig(arch="cnn", depth=1, **SMALL), TrainConfig(max_epochs=40, batch_size=8))
    assert hist[-1]["train_acc"] == 1.0
    assert np.mean((trained.predict_proba(ex) > 0.5) == np.array([e.label for e in ex])) == 1.0


def test_write_history(tmp_path):
    hist = [{"epoch": 1, "train_loss": 0.5, "train_acc": 0.75, "val_loss": math.nan, "val_acc": math.nan}]
    write_history(tmp_path / "h.csv", hist)
    assert (tmp_path / "h.csv").read_text() == "epoch,train_loss,train_acc,val_loss,val_acc\n1,0.500000,0.750000,nan,nan\n"


def test_example_rejects_bad_label():
    with pytest.raises(ValueError):
        UtteranceExample(np.zeros((2, 2)), 2, "a", "a/1")
