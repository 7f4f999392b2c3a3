import numpy as np

P_CLAMP = 1e-12


def bce_loss(p, y):
    """Binary cross-entropy with the probability clamped away from 0 and 1."""
    p = np.clip(np.asarray(p, dtype=np.float64), P_CLAMP, 1.0 - P_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
