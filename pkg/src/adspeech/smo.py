"""Linear support vector machine trained with Platt's SMO.

Used as the functional-vector baseline. Labels are +1 (AD) and -1
(control). The optimizer keeps the full error vector ``f(x_i) - y_i``
up to date after every pair update, which is cheap for a linear kernel
because ``w`` is maintained explicitly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyInput, NoConvergence, SingleClassData

MAX_PAIR_UPDATES = 10**6
BOUND_RTOL = 1e-8  # multipliers this close (relative to C) to 0 or C count as bound


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # 1.0 where the training column was constant

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise EmptyInput("standardization needs at least two rows")
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        return cls(mean, np.where(std > 1e-12, std, 1.0))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


def standardize_fit(x):
    s = Standardizer.fit(x)
    return s.apply(x), s


def standardize_apply(x, stats: Standardizer):
    return stats.apply(x)


@dataclass
class SvmModel:
    w: np.ndarray
    b: float
    alpha: np.ndarray
    C: float
    scaler: Standardizer | None = None
    n_updates: int = 0

    def decision_function(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != len(self.w):
            raise DimensionMismatch(f"expected {len(self.w)} features, got {x.shape[1]}")
        if self.scaler is not None:
            x = self.scaler.apply(x)
        return x @ self.w + self.b


def dual_objective(alpha, x, y) -> float:
    """``sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j <x_i, x_j>``."""
    v = (alpha * y) @ x
    return float(alpha.sum() - 0.5 * v @ v)


class _Smo:
    def __init__(self, x, y, C, tol, eps):
        self.x, self.y, self.C, self.tol, self.eps = x, y, C, tol, eps
        n, d = x.shape
        self.alpha = np.zeros(n)
        self.w = np.zeros(d)
        self.b = 0.0
        self.err = -y.astype(np.float64)  # f = 0 initially
        self.sq = np.einsum("ij,ij->i", x, x)
        self.updates = 0

    def take_step(self, i1, i2) -> bool:
        if i1 == i2:
            return False
        x, y, C, a = self.x, self.y, self.C, self.alpha
        a1, a2 = a[i1], a[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = self.err[i1], self.err[i2]
        s = y1 * y2
        if y1 != y2:
            lo, hi = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            lo, hi = max(0.0, a2 + a1 - C), min(C, a2 + a1)
        if hi - lo < 1e-15:
            return False
        k12 = float(x[i1] @ x[i2])
        eta = self.sq[i1] + self.sq[i2] - 2.0 * k12
        if eta > 1e-15:
            a2n = min(hi, max(lo, a2 + y2 * (e1 - e2) / eta))
        else:
            # objective is linear along the constraint line: pick the better end
            f1 = y1 * (e1 + self.b) - a1 * self.sq[i1] - s * a2 * k12
            f2 = y2 * (e2 + self.b) - s * a1 * k12 - a2 * self.sq[i2]
            l1 = a1 + s * (a2 - lo)
            h1 = a1 + s * (a2 - hi)
            obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * self.sq[i1] + 0.5 * lo * lo * self.sq[i2] + s * lo * l1 * k12
            obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * self.sq[i1] + 0.5 * hi * hi * self.sq[i2] + s * hi * h1 * k12
            if obj_lo < obj_hi - self.eps:
                a2n = lo
            elif obj_lo > obj_hi + self.eps:
                a2n = hi
            else:
                return False
        if abs(a2n - a2) < self.eps * (a2n + a2 + self.eps):
            return False
        a1n = a1 + s * (a2 - a2n)
        if a1n < 0.0:
            a2n += s * a1n
            a1n = 0.0
        elif a1n > C:
            a2n += s * (a1n - C)
            a1n = C
        # threshold update
        b1 = e1 + y1 * (a1n - a1) * self.sq[i1] + y2 * (a2n - a2) * k12 + self.b
        b2 = e2 + y1 * (a1n - a1) * k12 + y2 * (a2n - a2) * self.sq[i2] + self.b
        if 0.0 < a1n < C:
            bn = b1
        elif 0.0 < a2n < C:
            bn = b2
        else:
            bn = 0.5 * (b1 + b2)
        # f = w.x - b convention internally
        dw = y1 * (a1n - a1) * x[i1] + y2 * (a2n - a2) * x[i2]
        self.w += dw
        self.err += x @ dw - (bn - self.b)
        self.b = bn
        a[i1], a[i2] = a1n, a2n
        self.updates += 1
        if self.updates > MAX_PAIR_UPDATES:
            raise NoConvergence(f"SMO exceeded {MAX_PAIR_UPDATES} pair updates")
        return True

    def violates(self, i) -> bool:
        r = self.err[i] * self.y[i]
        a = self.alpha[i]
        return (r < -self.tol and a < self.C) or (r > self.tol and a > 0)

    def examine(self, i2, rng) -> bool:
        if not self.violates(i2):
            return False
        a = self.alpha
        bound = (a > 0) & (a < self.C)
        nb = np.flatnonzero(bound)
        if len(nb) > 1:
            e2 = self.err[i2]
            i1 = int(nb[np.argmax(np.abs(self.err[nb] - e2))])
            if self.take_step(i1, i2):
                return True
        n = len(a)
        if len(nb):
            start = int(rng.integers(len(nb)))
            for i1 in np.roll(nb, -start):
                if self.take_step(int(i1), i2):
                    return True
        start = int(rng.integers(n))
        for i1 in np.roll(np.arange(n), -start):
            if self.take_step(int(i1), i2):
                return True
        return False

    def run(self, seed=0):
        rng = np.random.default_rng(seed)
        n = len(self.y)
        examine_all = True
        changed = 0
        while changed > 0 or examine_all:
            changed = 0
            if examine_all:
                idx = range(n)
            else:
                idx = np.flatnonzero((self.alpha > 0) & (self.alpha < self.C))
            for i in idx:
                changed += self.examine(int(i), rng)
            if examine_all:
                examine_all = False
            elif changed == 0:
                examine_all = True


def smo_train(x, y, C: float = 1.0, tol: float = 1e-3, standardize: bool = True, eps: float = 1e-12, seed: int = 0):
    """Train a linear SVM; ``y`` holds +1 / -1 labels."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise EmptyInput("SMO needs a non-empty 2-D feature matrix")
    if len(y) != len(x):
        raise DimensionMismatch("labels and rows differ in length")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be +1 / -1")
    if len(np.unique(y)) < 2:
        raise SingleClassData("SMO needs both classes")
    scaler = Standardizer.fit(x) if standardize else None
    xs = scaler.apply(x) if scaler else x
    solver = _Smo(xs, y, float(C), float(tol), eps)
    solver.run(seed)
    intercept = _final_intercept(xs, y, solver.alpha, solver.w, float(C))
    return SvmModel(solver.w.copy(), intercept, solver.alpha.copy(), float(C), scaler, solver.updates)


def _bound_masks(alpha, C):
    return alpha <= BOUND_RTOL * C, alpha >= C * (1.0 - BOUND_RTOL)


def _final_intercept(x, y, alpha, w, C) -> float:
    """Intercept consistent with the KKT conditions of the final multipliers.

    Free support vectors pin it (their mean is used); when every multiplier
    sits at a bound, the middle of the feasible interval is taken.
    """
    r = y - x @ w
    at0, atc = _bound_masks(alpha, C)
    free = ~(at0 | atc)
    if free.any():
        return float(r[free].mean())
    lower_side = (at0 & (y > 0)) | (atc & (y < 0))
    lo = r[lower_side].max() if lower_side.any() else None
    hi = r[~lower_side].min() if (~lower_side).any() else None
    if lo is None:
        return float(hi)
    if hi is None:
        return float(lo)
    return float(0.5 * (lo + hi))


def kkt_residuals(model: SvmModel, x, y) -> np.ndarray:
    """Per-point margin violation of the KKT conditions (0 when satisfied)."""
    m = y * model.decision_function(x)
    a, C = model.alpha, model.C
    res = np.zeros(len(y))
    at0, atc = _bound_masks(a, C)
    free = ~(at0 | atc)
    res[at0] = np.maximum(0.0, 1.0 - m[at0])
    res[atc] = np.maximum(0.0, m[atc] - 1.0)
    res[free] = np.abs(m[free] - 1.0)
    return res


def svm_predict(model: SvmModel, x) -> np.ndarray:
    """1 for AD, 0 for control; a zero decision value counts as control."""
    return (model.decision_function(x) > 0).astype(int)


def save_svm(path, model: SvmModel) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dimension", "weight", "mean", "std"])
        mean = model.scaler.mean if model.scaler else np.zeros(len(model.w))
        std = model.scaler.std if model.scaler else np.ones(len(model.w))
        for i, (wi, mi, si) in enumerate(zip(model.w, mean, std)):
            w.writerow([i, repr(float(wi)), repr(float(mi)), repr(float(si))])
        w.writerow(["bias", repr(float(model.b)), "", ""])
        w.writerow(["C", repr(model.C), "", ""])


def load_svm(path) -> SvmModel:
    ws, means, stds = [], [], []
    b, C = 0.0, 1.0
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            if row["dimension"] == "bias":
                b = float(row["weight"])
            elif row["dimension"] == "C":
                C = float(row["weight"])
            else:
                ws.append(float(row["weight"]))
                means.append(float(row["mean"]))
                stds.append(float(row["std"]))
    return SvmModel(np.array(ws), b, np.zeros(0), C, Standardizer(np.array(means), np.array(stds)))


class SmoPredictor:
    """Cross-validation predictor: linear SVM on functional vectors.

    ``mode="utterance"`` trains on one functional vector per utterance
    and returns per-utterance decisions, so subjects are voted exactly as
    for the networks. ``mode="subject"`` concatenates each subject's
    utterance LLDs, trains on one vector per subject and broadcasts the
    subject decision to all of its utterances.
    """

    MODES = ("utterance", "subject")

    def __init__(self, mode: str = "utterance", C: float = 1.0, tol: float = 1e-3, seed: int = 0):
        if mode not in self.MODES:
            raise ValueError(f"mode must be one of {self.MODES}")
        self.mode, self.C, self.tol, self.seed = mode, C, tol, seed
        self.subject_level = mode == "subject"
        self._cache: dict[int, tuple] = {}

    def _functionals(self, features: np.ndarray) -> np.ndarray:
        from .lld import functionals_matrix

        return functionals_matrix(features).reshape(-1)

    def _utterance_rows(self, examples) -> np.ndarray:
        rows = []
        for ex in examples:
            hit = self._cache.get(id(ex.features))
            if hit is None or hit[0] is not ex.features:
                hit = (ex.features, self._functionals(ex.features))
                self._cache[id(ex.features)] = hit
            rows.append(hit[1])
        return np.vstack(rows)

    def _subject_rows(self, examples):
        groups: dict[str, list] = {}
        for ex in examples:
            groups.setdefault(ex.subject_id, []).append(ex)
        ids = sorted(groups)
        x = np.vstack([self._functionals(np.concatenate([e.features for e in groups[s]], axis=1)) for s in ids])
        y = np.array([groups[s][0].label for s in ids])
        return ids, x, y

    def __call__(self, train, test, fold: int = 0) -> np.ndarray:
        if self.mode == "utterance":
            x = self._utterance_rows(train)
            y = np.array([ex.label for ex in train])
            model = smo_train(x, 2.0 * y - 1.0, self.C, self.tol, seed=self.seed)
            return svm_predict(model, self._utterance_rows(test)).astype(np.float64)
        _, x, y = self._subject_rows(train)
        model = smo_train(x, 2.0 * y - 1.0, self.C, self.tol, seed=self.seed)
        ids, xt, _ = self._subject_rows(test)
        decided = dict(zip(ids, svm_predict(model, xt)))
        return np.array([float(decided[ex.subject_id]) for ex in test])
