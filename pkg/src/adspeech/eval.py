"""Subject-disjoint cross-validation, majority voting and experiment sweeps."""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import AdSpeechError, EmptyInput, EmptySweep, NoUtterances, TooFewSubjects
from .nn_core import SWEEP_DEPTHS, ModelConfig
from .train import AD, CONTROL, TrainConfig, UtteranceExample, train_model

log = logging.getLogger(__name__)

SWEEP_LENGTHS_MS = (500, 1000, 2000, 4000, 4295)
LENGTH_SWEEP_DEPTHS = (6, 8, 10)

# Reference 10-fold accuracies (%) on the Pitt picture-description sessions
# with IS10 features, for side-by-side comparison in corpus mode.
REFERENCE_DEPTH_TABLE = {
    # depth: (cnn_utterance, cnn_subject, gcnn_utterance, gcnn_subject)
    1: (64.2, 66.0, 62.2, 66.2),
    2: (64.2, 66.6, 62.6, 68.7),
    3: (64.2, 69.2, 61.9, 66.4),
    4: (64.9, 68.7, 63.3, 68.9),
    6: (65.5, 68.6, 65.1, 72.2),
    8: (66.1, 69.0, 66.3, 73.6),
    10: (65.2, 70.4, 65.2, 69.8),
}
REFERENCE_LENGTH_4000 = {6: 69.1, 8: 70.8, 10: 69.8}
REFERENCE_LENGTH_ORACLE = {6: 72.2, 8: 73.6, 10: 69.8}


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6f}"


# --------------------------------------------------------------------------
# folds


@dataclass
class FoldPlan:
    k: int
    folds: list[list[str]]
    seed: int

    def __post_init__(self):
        seen = set()
        for f in self.folds:
            if not f:
                raise ValueError("empty fold")
            if seen & set(f):
                raise ValueError("folds overlap")
            seen |= set(f)

    def fold_of(self) -> dict[str, int]:
        return {s: i for i, fold in enumerate(self.folds) for s in fold}

    @property
    def subjects(self) -> set[str]:
        return {s for f in self.folds for s in f}


def make_folds(subjects: Mapping[str, tuple[int, int]], k: int = 10, seed: int = 0) -> FoldPlan:
    """Label-stratified greedy partition of subjects into ``k`` folds.

    ``subjects`` maps subject id to ``(label, n_sessions)``. Within each
    label, subjects (shuffled by ``seed``, then ordered by decreasing
    session count) go to the fold with the fewest subjects of that label,
    then the fewest sessions, then the fewest subjects.
    """
    if k < 2:
        raise ValueError("need k >= 2 folds")
    if len(subjects) < k:
        raise TooFewSubjects(f"{len(subjects)} subjects cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    ids = sorted(subjects)
    ids = [ids[i] for i in rng.permutation(len(ids))]
    by_label: dict[int, list[str]] = defaultdict(list)
    for s in ids:
        by_label[subjects[s][0]].append(s)
    label_order = sorted(by_label, key=lambda lab: (-len(by_label[lab]), lab))

    folds: list[list[str]] = [[] for _ in range(k)]
    label_count = np.zeros((k, len(label_order)), dtype=int)
    sessions = np.zeros(k, dtype=int)
    for li, lab in enumerate(label_order):
        group = sorted(by_label[lab], key=lambda s: -subjects[s][1])  # stable
        for s in group:
            key = [(label_count[f, li], sessions[f], len(folds[f]), f) for f in range(k)]
            f = min(key)[3]
            folds[f].append(s)
            label_count[f, li] += 1
            sessions[f] += subjects[s][1]
    return FoldPlan(k, [sorted(f) for f in folds], seed)


def subject_table(examples: Iterable[UtteranceExample]) -> dict[str, tuple[int, int]]:
    """Subject id -> (label, number of distinct sessions)."""
    labels: dict[str, int] = {}
    sessions: dict[str, set] = defaultdict(set)
    for ex in examples:
        if labels.setdefault(ex.subject_id, ex.label) != ex.label:
            raise ValueError(f"subject {ex.subject_id} has mixed labels")
        sessions[ex.subject_id].add(ex.session_id or ex.utterance_id.split("/")[0])
    return {s: (labels[s], len(sessions[s])) for s in labels}


# --------------------------------------------------------------------------
# voting and metrics


@dataclass(frozen=True)
class SubjectPrediction:
    subject_id: str
    ad_fraction: float
    predicted: int
    true_label: int | None = None


def vote_subject(probabilities: Sequence[float], subject_id: str = "", true_label: int | None = None) -> SubjectPrediction:
    """Majority vote: AD iff strictly more than half the utterances are AD (p > 0.5)."""
    p = np.asarray(probabilities, dtype=np.float64)
    if p.size == 0:
        raise NoUtterances(f"subject {subject_id!r} has no utterance predictions")
    frac = float(np.count_nonzero(p > 0.5)) / p.size
    return SubjectPrediction(subject_id, frac, AD if frac > 0.5 else CONTROL, true_label)


def accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    preds, labels = np.asarray(preds), np.asarray(labels)
    if preds.size == 0:
        raise EmptyInput("accuracy of an empty set")
    if preds.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    return 100.0 * float(np.count_nonzero(preds == labels)) / preds.size


def vote_all(examples: Sequence[UtteranceExample], probs: np.ndarray) -> list[SubjectPrediction]:
    grouped: dict[str, list[float]] = defaultdict(list)
    labels = {}
    for ex, p in zip(examples, probs):
        grouped[ex.subject_id].append(float(p))
        labels[ex.subject_id] = ex.label
    return [vote_subject(grouped[s], s, labels[s]) for s in sorted(grouped)]


# --------------------------------------------------------------------------
# cross-validation

# fit on the first list, return P(AD) for each element of the second
Predictor = Callable[[Sequence[UtteranceExample], Sequence[UtteranceExample], int], np.ndarray]


def fold_seed(base: int, fold: int) -> int:
    return int(np.random.SeedSequence([int(base), int(fold)]).generate_state(1)[0])


class NetworkPredictor:
    """Train a fresh network per fold with a fold-specific seed."""

    subject_level = False

    def __init__(self, model_config: ModelConfig, train_config: TrainConfig):
        self.model_config, self.train_config = model_config, train_config

    def seed_for(self, fold: int) -> int:
        return fold_seed(self.train_config.seed, fold)

    def __call__(self, train, test, fold):
        cfg = replace(self.train_config, seed=self.seed_for(fold))
        trained, _ = train_model(train, self.model_config, cfg)
        return trained.predict_proba(test)


def network_predictor(model_config: ModelConfig, train_config: TrainConfig) -> Predictor:
    return NetworkPredictor(model_config, train_config)


def _run_fold(predictor, train, test, k):
    try:
        return np.asarray(predictor(train, test, k), dtype=np.float64)
    except AdSpeechError as exc:
        raise type(exc)(f"fold {k}: {exc}") from exc


@dataclass
class FoldResult:
    sweep_value: str
    fold: int
    utterance_acc: float
    subject_acc: float
    n_train: int
    n_test: int
    seed: int | None = None
    subjects: list[SubjectPrediction] = field(default_factory=list)


@dataclass
class ExperimentReport:
    folds: list[FoldResult] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    sweep_name: str = "sweep_value"

    def rows(self) -> list[tuple[str, float, float]]:
        """``(sweep_value, mean utterance acc, mean subject acc)`` in first-seen order."""
        order, grouped = [], defaultdict(list)
        for f in self.folds:
            if f.sweep_value not in grouped:
                order.append(f.sweep_value)
            grouped[f.sweep_value].append(f)
        out = []
        for v in order:
            fs = grouped[v]
            out.append((v, float(np.mean([f.utterance_acc for f in fs])), float(np.mean([f.subject_acc for f in fs]))))
        return out

    def row(self, sweep_value) -> tuple[float, float]:
        for v, u, s in self.rows():
            if v == str(sweep_value):
                return u, s
        raise KeyError(sweep_value)

    @property
    def subject_accuracy(self) -> float:
        return float(np.mean([f.subject_acc for f in self.folds]))

    @property
    def utterance_accuracy(self) -> float:
        return float(np.mean([f.utterance_acc for f in self.folds]))

    def extend(self, other: "ExperimentReport") -> None:
        self.folds.extend(other.folds)

    def write_folds_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sweep_value", "fold", "utterance_acc", "subject_acc"])
            for f in self.folds:
                w.writerow([f.sweep_value, f.fold, fmt(f.utterance_acc), fmt(f.subject_acc)])

    def write_summary_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([self.sweep_name, "utterance_acc", "subject_acc"])
            for v, u, s in self.rows():
                w.writerow([v, fmt(u), fmt(s)])

    def write_subjects_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sweep_value", "fold", "subject_id", "ad_fraction", "predicted", "true_label"])
            for f in self.folds:
                for sp in f.subjects:
                    w.writerow([f.sweep_value, f.fold, sp.subject_id, fmt(sp.ad_fraction), sp.predicted, sp.true_label])


def cross_validate(
    dataset: Sequence[UtteranceExample],
    model_config: ModelConfig | None = None,
    train_config: TrainConfig | None = None,
    fold_plan: FoldPlan | None = None,
    predictor: Predictor | None = None,
    sweep_value="",
    workers: int = 1,
) -> ExperimentReport:
    """Train on k-1 folds, test on the held-out fold, for every fold.

    Utterance accuracy thresholds P(AD) at 0.5; subject accuracy applies
    :func:`vote_subject` to each held-out subject. Both are averaged over
    folds.
    """
    dataset = list(dataset)
    if fold_plan is None:
        fold_plan = make_folds(subject_table(dataset))
    if predictor is None:
        predictor = network_predictor(model_config or ModelConfig(), train_config or TrainConfig())
    subjects = {ex.subject_id for ex in dataset}
    if subjects != fold_plan.subjects:
        raise ValueError("fold plan does not cover exactly the dataset's subjects")
    fold_of = fold_plan.fold_of()
    report = ExperimentReport(config={"model": model_config.to_dict() if model_config else None})
    subject_level = getattr(predictor, "subject_level", False)
    splits = []
    for k in range(fold_plan.k):
        test = [ex for ex in dataset if fold_of[ex.subject_id] == k]
        train = [ex for ex in dataset if fold_of[ex.subject_id] != k]
        overlap = {e.subject_id for e in train} & {e.subject_id for e in test}
        if overlap:
            raise AssertionError(f"fold {k}: subjects in both train and test: {sorted(overlap)}")
        splits.append((train, test))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_fold, predictor, tr, te, k) for k, (tr, te) in enumerate(splits)]
            outputs = [f.result() for f in futures]
    else:
        outputs = [_run_fold(predictor, tr, te, k) for k, (tr, te) in enumerate(splits)]
    for k, ((train, test), probs) in enumerate(zip(splits, outputs)):
        labels = np.array([ex.label for ex in test])
        utt_acc = math.nan if subject_level else accuracy((probs > 0.5).astype(int), labels)
        votes = vote_all(test, probs)
        subj_acc = accuracy([v.predicted for v in votes], [v.true_label for v in votes])
        seed = predictor.seed_for(k) if hasattr(predictor, "seed_for") else None
        report.folds.append(FoldResult(str(sweep_value), k, utt_acc, subj_acc, len(train), len(test), seed, votes))
        log.info("fold %d: utterance %.1f%% subject %.1f%%", k, utt_acc, subj_acc)
    return report


# --------------------------------------------------------------------------
# sweeps


@dataclass
class DepthSweepReport:
    per_arch: dict[str, ExperimentReport]
    depths: tuple[int, ...]

    def table(self) -> list[tuple]:
        rows = []
        for d in self.depths:
            row = [d]
            for arch in ("cnn", "gcnn"):
                rep = self.per_arch.get(arch)
                row.extend(rep.row(d) if rep else (math.nan, math.nan))
            rows.append(tuple(row))
        return rows

    def write_table_csv(self, path, with_reference: bool = False) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["depth", "cnn_utterance", "cnn_subject", "gcnn_utterance", "gcnn_subject"]
            if with_reference:
                head += ["ref_cnn_utterance", "ref_cnn_subject", "ref_gcnn_utterance", "ref_gcnn_subject"]
            w.writerow(head)
            for row in self.table():
                out = [row[0], *(fmt(v) for v in row[1:])]
                if with_reference:
                    out += [fmt(v) for v in REFERENCE_DEPTH_TABLE.get(row[0], (math.nan,) * 4)]
                w.writerow(out)


def depth_sweep(
    dataset: Sequence[UtteranceExample],
    archs: Sequence[str] = ("cnn", "gcnn"),
    depths: Sequence[int] = SWEEP_DEPTHS,
    model_config: ModelConfig | None = None,
    train_config: TrainConfig | None = None,
    fold_plan: FoldPlan | None = None,
    workers: int = 1,
) -> DepthSweepReport:
    depths = tuple(depths)
    if not depths or not archs:
        raise EmptySweep("depth sweep needs at least one depth and one architecture")
    base = model_config or ModelConfig()
    train_config = train_config or TrainConfig()
    fold_plan = fold_plan or make_folds(subject_table(dataset))
    per_arch = {}
    for arch in archs:
        rep = ExperimentReport(sweep_name="depth")
        for d in depths:
            cfg = replace(base, arch=arch, depth=int(d), window=None)
            rep.extend(cross_validate(dataset, cfg, train_config, fold_plan, sweep_value=d, workers=workers))
        rep.config = {"arch": arch, "model": replace(base, arch=arch, window=None).to_dict()}
        per_arch[arch] = rep
    return DepthSweepReport(per_arch, depths)


def length_sweep(
    build_dataset: Callable[[float], Sequence[UtteranceExample]],
    lengths_ms: Sequence[float] = SWEEP_LENGTHS_MS,
    depths: Sequence[int] = LENGTH_SWEEP_DEPTHS,
    model_config: ModelConfig | None = None,
    train_config: TrainConfig | None = None,
    fold_seed_value: int = 0,
    k: int = 10,
    workers: int = 1,
) -> ExperimentReport:
    """Re-segment with fixed windows of each length, re-extract and cross-validate.

    ``build_dataset(length_ms)`` returns the utterance examples for that
    segmentation. Sweep values are ``"<length>:<depth>"``.
    """
    if not lengths_ms or not depths:
        raise EmptySweep("length sweep needs lengths and depths")
    base = replace(model_config or ModelConfig(), arch="gcnn", window=None)
    report = ExperimentReport(sweep_name="length_ms:depth")
    plan = None
    for length in lengths_ms:
        data = build_dataset(length)
        plan = plan or make_folds(subject_table(data), k, fold_seed_value)
        for d in depths:
            cfg = replace(base, depth=int(d))
            report.extend(cross_validate(data, cfg, train_config, plan, sweep_value=f"{length:g}:{d}", workers=workers))
    return report


def feature_sweep(
    build_dataset: Callable[[str], Sequence[UtteranceExample]],
    feature_sets: Sequence[str] = ("IS09", "IS10"),
    depths: Sequence[int] = SWEEP_DEPTHS,
    model_config: ModelConfig | None = None,
    train_config: TrainConfig | None = None,
    fold_seed_value: int = 0,
    k: int = 10,
    smo_predictor: Predictor | None = None,
    workers: int = 1,
) -> ExperimentReport:
    """Standard CNN over depths for each feature set, plus the SMO baseline."""
    if not feature_sets or not depths:
        raise EmptySweep("feature sweep needs feature sets and depths")
    base = replace(model_config or ModelConfig(), arch="cnn", window=None)
    report = ExperimentReport(sweep_name="feature_set:model")
    plan = None
    for fs in feature_sets:
        data = build_dataset(fs)
        plan = plan or make_folds(subject_table(data), k, fold_seed_value)
        for d in depths:
            report.extend(cross_validate(data, replace(base, depth=int(d)), train_config, plan, sweep_value=f"{fs}:cnn{d}", workers=workers))
        if smo_predictor is not None:
            report.extend(cross_validate(data, None, None, plan, predictor=smo_predictor, sweep_value=f"{fs}:smo", workers=workers))
    return report


def qualitative_orderings(depth_report: DepthSweepReport | None = None, length_report: ExperimentReport | None = None):
    """Observed vs reference orderings, as ``(claim, observed, reference)``."""
    out = []
    if depth_report is not None and {"cnn", "gcnn"} <= set(depth_report.per_arch):
        best = {a: max(s for _, _, s in depth_report.per_arch[a].rows()) for a in ("cnn", "gcnn")}
        out.append(("best gcnn subject accuracy > best cnn subject accuracy", best["gcnn"] > best["cnn"], True))
    if length_report is not None:
        acc = defaultdict(list)
        for v, _, s in length_report.rows():
            length, _ = v.split(":")
            acc[float(length)].append(s)
        if 500.0 in acc and 4000.0 in acc:
            out.append(("mean subject accuracy at 500 ms < at 4000 ms", np.mean(acc[500.0]) < np.mean(acc[4000.0]), True))
    return out


def write_orderings_csv(path, orderings) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["claim", "observed", "reference"])
        for claim, obs, pub in orderings:
            w.writerow([claim, str(bool(obs)).lower(), str(bool(pub)).lower()])
