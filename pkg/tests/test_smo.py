import numpy as np
import pytest

from adspeech.errors import DimensionMismatch, EmptyInput, SingleClassData
from adspeech.smo import (
    SmoPredictor,
    Standardizer,
    SvmModel,
    dual_objective,
    kkt_residuals,
    load_svm,
    save_svm,
    smo_train,
    svm_predict,
)
from adspeech.train import UtteranceExample
from oracles import battery, brute_force_dual


def test_dual_objective_matches_brute_force_oracle():
    worst = 0.0
    for x, y, C in battery():
        model = smo_train(x, y, C=C, tol=1e-3, standardize=False)
        worst = max(worst, abs(dual_objective(model.alpha, x, y) - brute_force_dual(x, y, C)))
        assert abs(model.alpha @ y) < 1e-9
        assert np.all(model.alpha >= 0) and np.all(model.alpha <= C)
    assert worst < 1e-3


def test_kkt_residuals_within_tolerance():
    for x, y, C in battery(60, seed=1):
        model = smo_train(x, y, C=C, tol=1e-3, standardize=False)
        assert kkt_residuals(model, x, y).max() < 1e-3


def test_weight_vector_is_dual_combination():
    x, y, C = next(battery(1, seed=2))
    model = smo_train(x, y, C=C, standardize=False)
    np.testing.assert_allclose(model.w, (model.alpha * y) @ x, atol=1e-12)


def test_two_point_boundary():
    x = np.array([[0.0], [2.0]])
    y = np.array([-1.0, 1.0])
    model = smo_train(x, y, C=10.0, standardize=False)
    assert -model.b / model.w[0] == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(model.alpha, [0.5, 0.5], atol=1e-9)


def test_duplicated_data_matches_doubled_C():
    x, y, _ = next(battery(1, seed=3))
    a = smo_train(x, y, C=2.0, tol=1e-8, standardize=False)
    b = smo_train(np.vstack([x, x]), np.concatenate([y, y]), C=1.0, tol=1e-8, standardize=False)
    np.testing.assert_allclose(a.w, b.w, atol=1e-5)
    assert a.b == pytest.approx(b.b, abs=1e-5)


def test_separable_blobs_and_prediction_rule():
    rng = np.random.default_rng(4)
    x = np.vstack([rng.normal(-3, 1, size=(30, 5)), rng.normal(3, 1, size=(30, 5))])
    y = np.repeat([-1.0, 1.0], 30)
    model = smo_train(x, y)
    np.testing.assert_array_equal(svm_predict(model, x), (y > 0).astype(int))
    zero = SvmModel(np.array([1.0]), 0.0, np.zeros(0), 1.0)
    np.testing.assert_array_equal(svm_predict(zero, [[0.0], [1e-9], [-1.0]]), [0, 1, 0])


def test_input_errors():
    with pytest.raises(EmptyInput):
        smo_train(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(SingleClassData):
        smo_train(np.ones((3, 2)), np.ones(3))
    with pytest.raises(ValueError):
        smo_train(np.ones((2, 2)), np.array([0.0, 1.0]))
    with pytest.raises(DimensionMismatch):
        smo_train(np.ones((2, 2)), np.array([1.0, -1.0, 1.0]))
    model = smo_train(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, -1.0]))
    with pytest.raises(DimensionMismatch):
        model.decision_function(np.ones((1, 3)))


def test_standardizer_handles_constant_columns():
    s = Standardizer.fit(np.array([[1.0, 5.0], [3.0, 5.0]]))
    np.testing.assert_allclose(s.apply([[2.0, 5.0]]), [[0.0, 0.0]])
    with pytest.raises(EmptyInput):
        Standardizer.fit(np.ones((1, 2)))


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    x = rng.normal(size=(20, 4)) * [1, 10, 100, 0.1]
    y = np.where(x[:, 0] > 0, 1.0, -1.0)
    y[:2] = [1.0, -1.0]
    model = smo_train(x, y)
    save_svm(tmp_path / "svm.csv", model)
    loaded = load_svm(tmp_path / "svm.csv")
    np.testing.assert_array_equal(loaded.decision_function(x), model.decision_function(x))
    assert loaded.C == model.C


def _lld_examples(n_subjects=8, per=3, seed=6):
    rng = np.random.default_rng(seed)
    out = []
    for s in range(n_subjects):
        lab = s % 2
        for u in range(per):
            out.append(UtteranceExample(rng.normal(size=(3, 12)) + 2.0 * lab, lab, f"s{s}", f"s{s}/u{u}"))
    return out


@pytest.mark.parametrize("mode", ["utterance", "subject"])
def test_predictor_modes(mode):
    ex = _lld_examples()
    train, test = ex[:18], ex[18:]
    pred = SmoPredictor(mode)
    out = pred(train, test)
    assert out.shape == (len(test),)
    np.testing.assert_array_equal(out, [float(e.label) for e in test])
    assert pred.subject_level == (mode == "subject")
    if mode == "subject":
        by_subject = {}
        for e, p in zip(test, out):
            by_subject.setdefault(e.subject_id, set()).add(p)
        assert all(len(v) == 1 for v in by_subject.values())


def test_predictor_rejects_unknown_mode():
    with pytest.raises(ValueError):
        SmoPredictor("frame")
