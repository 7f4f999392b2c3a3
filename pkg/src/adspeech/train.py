"""Padded batch assembly and the supervised training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import EmptyDataset, InvalidConfig, NumericalFailure, SingleClassData
from .nn_core import TRAIN, Adam, Model, ModelConfig, batch_loss, build_model, model_backward, model_forward

log = logging.getLogger(__name__)

AD, CONTROL = 1, 0
LABEL_CODES = {"AD": AD, "control": CONTROL}


@dataclass
class TrainConfig:
    max_epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    early_stop_patience: int | None = None  # None: off
    validation_fraction: float = 0.1
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if self.batch_size < 2:
            raise InvalidConfig("batch_size must be >= 2 (batch normalization)")
        if not 0.0 <= self.validation_fraction < 0.5:
            raise InvalidConfig("validation_fraction must be in [0, 0.5)")
        if self.max_epochs < 1:
            raise InvalidConfig("max_epochs must be >= 1")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise InvalidConfig("early_stop_patience must be >= 1 or None")


@dataclass
class UtteranceExample:
    features: np.ndarray  # (F, T)
    label: int  # AD = 1, control = 0
    subject_id: str
    utterance_id: str
    session_id: str = ""

    def __post_init__(self):
        if self.label not in (AD, CONTROL):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        self.features = np.asarray(getattr(self.features, "values", self.features), dtype=np.float64)

    @property
    def n_frames(self) -> int:
        return self.features.shape[1]


def pad_to_length(values: np.ndarray, t_max: int) -> np.ndarray:
    """Zero-pad (or truncate, with a warning) an (F, T) matrix to ``t_max`` frames."""
    values = np.asarray(values, dtype=np.float64)
    f, t = values.shape
    if t > t_max:
        log.debug("truncating %d frames to %d", t, t_max)
        return values[:, :t_max].copy()
    out = np.zeros((f, t_max))
    out[:, :t] = values
    return out


def max_frames(examples: Sequence[UtteranceExample]) -> int:
    return max(ex.n_frames for ex in examples)


@dataclass
class FeatureScaler:
    """Per-row standardization fitted on unpadded training frames."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, examples: Sequence[UtteranceExample]) -> "FeatureScaler":
        allf = np.concatenate([ex.features for ex in examples], axis=1)
        mean = allf.mean(axis=1)
        std = allf.std(axis=1)
        return cls(mean, np.where(std > 1e-12, std, 1.0))

    @classmethod
    def identity(cls, n_features: int) -> "FeatureScaler":
        return cls(np.zeros(n_features), np.ones(n_features))

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean[:, None]) / self.std[:, None]


def stack_padded(examples, t_max: int, scaler: FeatureScaler) -> tuple[np.ndarray, int]:
    """(B, F, t_max) batch of standardized, zero-padded inputs and the truncation count."""
    x = np.zeros((len(examples), len(scaler.mean), t_max))
    truncated = 0
    for i, ex in enumerate(examples):
        v = scaler.apply(ex.features)
        if v.shape[1] > t_max:
            truncated += 1
        x[i] = pad_to_length(v, t_max)
    if truncated:
        log.warning("%d of %d inputs were longer than %d frames", truncated, len(examples), t_max)
    return x, truncated


@dataclass
class TrainedModel:
    model: Model
    scaler: FeatureScaler
    t_max: int
    history: list[dict] = field(default_factory=list)

    def predict_proba(self, examples: Sequence[UtteranceExample]) -> np.ndarray:
        if not examples:
            return np.zeros(0)
        x, _ = stack_padded(examples, self.t_max, self.scaler)
        return self.model.predict_proba(x)

    def metadata(self) -> dict:
        return {
            "t_max": self.t_max,
            "scaler_mean": self.scaler.mean.tolist(),
            "scaler_std": self.scaler.std.tolist(),
            "epochs": len(self.history),
        }


def make_batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    """Split a permutation into batches; a trailing singleton joins the previous batch."""
    batches = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def subject_split(examples, fraction: float, rng: np.random.Generator):
    """Hold out whole subjects until ``fraction`` of the subjects are in validation."""
    subjects = sorted({ex.subject_id for ex in examples})
    n_val = max(1, int(math.ceil(fraction * len(subjects))))
    chosen = set(rng.permutation(subjects)[:n_val].tolist())
    train = [ex for ex in examples if ex.subject_id not in chosen]
    val = [ex for ex in examples if ex.subject_id in chosen]
    assert not ({e.subject_id for e in train} & {e.subject_id for e in val})
    return train, val


def _evaluate(model: Model, x, y, batch_size=64) -> tuple[float, float]:
    p = model.predict_proba(x, batch_size)
    return batch_loss(p, y), float(np.mean((p > 0.5) == (y > 0.5)))


def train_model(
    examples: Sequence[UtteranceExample],
    model_config: ModelConfig,
    train_config: TrainConfig = TrainConfig(),
    t_max: int | None = None,
) -> tuple[TrainedModel, list[dict]]:
    """Fit a freshly initialised network on ``examples``.

    ``t_max`` defaults to the longest training utterance. Returns the
    trained model (with its scaler and input length) and the per-epoch
    history.
    """
    examples = list(examples)
    if not examples:
        raise EmptyDataset("no training examples")
    if len(examples) < 2:
        raise EmptyDataset("need at least two training examples")
    if len({ex.label for ex in examples}) < 2:
        raise SingleClassData("training data contains a single class")

    rng = np.random.default_rng(train_config.seed)
    val: list[UtteranceExample] = []
    train = examples
    if train_config.early_stop_patience is not None and train_config.validation_fraction > 0:
        train, val = subject_split(examples, train_config.validation_fraction, rng)
        if len({ex.label for ex in train}) < 2 or len(train) < 2:
            raise SingleClassData("validation split left a single class for training")

    t_max = t_max or max_frames(train)
    n_features = train[0].features.shape[0]
    scaler = FeatureScaler.fit(train) if train_config.standardize else FeatureScaler.identity(n_features)
    x_train, _ = stack_padded(train, t_max, scaler)
    y_train = np.array([ex.label for ex in train], dtype=np.float64)
    if val:
        x_val, _ = stack_padded(val, t_max, scaler)
        y_val = np.array([ex.label for ex in val], dtype=np.float64)

    config = replace(model_config, input_dims=(n_features, t_max))
    model = build_model(config, rng)
    params = model.parameters()
    opt = Adam(params, lr=train_config.learning_rate)

    history = []
    best_loss, best_state, stale = math.inf, None, 0
    for epoch in range(1, train_config.max_epochs + 1):
        order = rng.permutation(len(train))
        total_loss, correct = 0.0, 0
        for bi, idx in enumerate(make_batches(order, train_config.batch_size)):
            p, caches = model_forward(x_train[idx], model, TRAIN, rng)
            try:
                loss = batch_loss(p, y_train[idx])
            except NumericalFailure as exc:
                raise NumericalFailure(f"non-finite loss at epoch {epoch}, batch {bi}") from exc
            grads = model_backward(model, caches, p, y_train[idx])
            if not all(np.all(np.isfinite(g)) for g in grads):
                raise NumericalFailure(f"non-finite gradient at epoch {epoch}, batch {bi}")
            opt.step(grads)
            total_loss += loss * len(idx)
            correct += int(np.sum((p > 0.5) == (y_train[idx] > 0.5)))
        row = {
            "epoch": epoch,
            "train_loss": total_loss / len(train),
            "train_acc": correct / len(train),
            "val_loss": math.nan,
            "val_acc": math.nan,
        }
        if val:
            row["val_loss"], row["val_acc"] = _evaluate(model, x_val, y_val)
            if row["val_loss"] < best_loss:
                best_loss, best_state, stale = row["val_loss"], model.copy_state(), 0
            else:
                stale += 1
        history.append(row)
        log.debug("epoch %d loss %.4f acc %.3f", epoch, row["train_loss"], row["train_acc"])
        if val and stale >= train_config.early_stop_patience:
            break
    if best_state is not None:
        model.load_state(best_state)
    trained = TrainedModel(model, scaler, t_max, history)
    return trained, history


def write_history(path, history: Sequence[dict]) -> None:
    from .eval import fmt

    with open(path, "w") as fh:
        fh.write("epoch,train_loss,train_acc,val_loss,val_acc\n")
        for r in history:
            fh.write(
                f"{r['epoch']},{fmt(r['train_loss'])},{fmt(r['train_acc'])},{fmt(r['val_loss'])},{fmt(r['val_acc'])}\n"
            )


def train_config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
