"""Regression deltas and utterance-level functionals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FUNCTIONAL_NAMES = (
    "mean",
    "stddev",
    "skewness",
    "kurtosis",
    "min",
    "max",
    "range",
    "minpos",
    "maxpos",
    "linregc1",
    "linregc2",
    "linregerrQ",
)


def delta(rows: np.ndarray, width: int = 2) -> np.ndarray:
    """Regression deltas along the last axis with replicated edges.

    ``d_t = sum_k k (x_{t+k} - x_{t-k}) / (2 sum_k k^2)`` for ``k = 1..width``.
    Accepts a single row or an (F, T) matrix.
    """
    x = np.asarray(rows, dtype=np.float64)
    if x.shape[-1] < 1:
        raise ValueError("delta of an empty row")
    pad = [(0, 0)] * (x.ndim - 1) + [(width, width)]
    p = np.pad(x, pad, mode="edge")
    t = x.shape[-1]
    num = np.zeros_like(x)
    for k in range(1, width + 1):
        num += k * (p[..., width + k : width + k + t] - p[..., width - k : width - k + t])
    return num / (2.0 * sum(k * k for k in range(1, width + 1)))


@dataclass
class FunctionalVector:
    values: np.ndarray
    names: list[str]

    def __len__(self):
        return len(self.values)


def functionals_matrix(values: np.ndarray) -> np.ndarray:
    """(F, 12) table of the functionals for each row of an (F, T) matrix."""
    x = np.atleast_2d(np.asarray(values, dtype=np.float64))
    f, t = x.shape
    if t < 1:
        raise ValueError("functionals need at least one frame")
    mean = x.mean(axis=1)
    c = x - mean[:, None]
    var = np.mean(c**2, axis=1)
    std = np.sqrt(var)
    m3 = np.mean(c**3, axis=1)
    m4 = np.mean(c**4, axis=1)
    flat = var <= 1e-24 * np.maximum(1.0, mean**2)
    safe_var = np.where(flat, 1.0, var)
    skew = np.where(flat, 0.0, m3 / safe_var**1.5)
    kurt = np.where(flat, 0.0, m4 / safe_var**2 - 3.0)
    lo, hi = x.min(axis=1), x.max(axis=1)
    denom = max(t - 1, 1)
    minpos = np.argmin(x, axis=1) / denom
    maxpos = np.argmax(x, axis=1) / denom
    if t > 1:
        n = np.arange(t, dtype=np.float64)
        nc = n - n.mean()
        slope = c @ nc / np.sum(nc**2)
    else:
        slope = np.zeros(f)
    offset = mean - slope * (t - 1) / 2.0
    fit = offset[:, None] + slope[:, None] * np.arange(t)[None, :]
    err = np.mean((x - fit) ** 2, axis=1)
    return np.stack([mean, std, skew, kurt, lo, hi, hi - lo, minpos, maxpos, slope, offset, err], axis=1)


def apply_functionals(lld) -> FunctionalVector:
    """Collapse an :class:`LLDMatrix` into a fixed-length vector (row-major)."""
    table = functionals_matrix(lld.values)
    names = [f"{row}_{fn}" for row in lld.row_names for fn in FUNCTIONAL_NAMES]
    return FunctionalVector(table.reshape(-1), names)
