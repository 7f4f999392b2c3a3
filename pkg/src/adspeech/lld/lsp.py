"""Linear prediction and line spectral pair frequencies."""

from __future__ import annotations

import numpy as np

from ..errors import UnstableLPC

GRID_STEP_RAD = 0.0005
BISECTION_STEPS = 40

_GRID = np.arange(GRID_STEP_RAD, np.pi, GRID_STEP_RAD)
_GRID_X = np.cos(_GRID)


def autocorrelation(frames: np.ndarray, order: int) -> np.ndarray:
    frames = np.atleast_2d(frames)
    n = frames.shape[1]
    return np.stack([np.einsum("ij,ij->i", frames[:, : n - k], frames[:, k:]) for k in range(order + 1)], axis=1)


def levinson_durbin(r: np.ndarray, order: int):
    """Batched Levinson-Durbin recursion.

    ``r`` has shape (T, order+1). Returns ``(a, err, ok)`` where ``a`` holds
    ``[1, a1, .., a_p]`` per row for ``A(z) = 1 + sum a_k z^-k`` and ``ok``
    flags rows whose recursion stayed positive definite.
    """
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    t = r.shape[0]
    a = np.zeros((t, order + 1))
    a[:, 0] = 1.0
    err = r[:, 0].copy()
    ok = err > 1e-20
    err_safe = np.where(ok, err, 1.0)
    for i in range(1, order + 1):
        acc = r[:, i] + np.einsum("ij,ij->i", a[:, 1:i], r[:, i - 1 : 0 : -1]) if i > 1 else r[:, 1].copy()
        k = -acc / err_safe
        prev = a[:, 1:i].copy()
        a[:, 1:i] = prev + k[:, None] * prev[:, ::-1]
        a[:, i] = k
        err_safe = err_safe * (1.0 - k * k)
        ok &= (np.abs(k) < 1.0) & (err_safe > 0)
        err_safe = np.where(err_safe > 0, err_safe, 1.0)
    return a, err_safe, ok


def _symmetric_halves(a: np.ndarray):
    """Sum/difference polynomials with their trivial roots at z = -1, 1 removed."""
    zero = np.zeros((a.shape[0], 1))
    ext = np.concatenate([a, zero], axis=1)
    rev = np.concatenate([zero, a[:, ::-1]], axis=1)
    p = ext + rev
    q = ext - rev
    m = a.shape[1]  # order + 1
    pp = np.zeros((a.shape[0], m))
    qq = np.zeros((a.shape[0], m))
    pp[:, 0], qq[:, 0] = p[:, 0], q[:, 0]
    for k in range(1, m):
        pp[:, k] = p[:, k] - pp[:, k - 1]  # divide by (1 + z^-1)
        qq[:, k] = q[:, k] + qq[:, k - 1]  # divide by (1 - z^-1)
    return pp, qq


def _chebyshev_coeffs(c: np.ndarray) -> np.ndarray:
    # symmetric degree-2h polynomial -> G(w) = c_h + 2 sum_j c_{h-j} T_j(cos w)
    h = (c.shape[1] - 1) // 2
    out = np.empty((c.shape[0], h + 1))
    out[:, 0] = c[:, h]
    for j in range(1, h + 1):
        out[:, j] = 2.0 * c[:, h - j]
    return out


def _roots_on_grid(cheb: np.ndarray):
    """Brackets of sign changes of each row's G(w) on the fixed grid."""
    t, h1 = cheb.shape
    # T_j(x) for the grid, one row per degree
    tk = np.empty((h1, len(_GRID_X)))
    tk[0] = 1.0
    if h1 > 1:
        tk[1] = _GRID_X
    for j in range(2, h1):
        tk[j] = 2.0 * _GRID_X * tk[j - 1] - tk[j - 2]
    vals = cheb @ tk
    sign_change = np.signbit(vals[:, :-1]) != np.signbit(vals[:, 1:])
    return vals, sign_change


def _eval_cheb(cheb: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.sum(cheb * np.cos(np.arange(cheb.shape[1])[None, :] * w[:, None]), axis=1)


def _refine(cheb_rows: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    flo = _eval_cheb(cheb_rows, lo)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        fm = _eval_cheb(cheb_rows, mid)
        left = np.signbit(fm) == np.signbit(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def fallback_lsp(order: int) -> np.ndarray:
    return np.pi * np.arange(1, order + 1) / (order + 1)


def lpc_to_lsp(a: np.ndarray):
    """LSP frequencies (radians, ascending) for rows of LPC polynomials.

    Returns ``(lsp, ok)``; rows without the expected root count get
    ``ok = False`` and the uniform fallback.
    """
    a = np.atleast_2d(a)
    t, m = a.shape
    order = m - 1
    if order % 2:
        raise ValueError("only even LPC orders are supported")
    out = np.tile(fallback_lsp(order), (t, 1))
    ok = np.ones(t, dtype=bool)
    roots = []
    for poly in _symmetric_halves(a):
        cheb = _chebyshev_coeffs(poly)
        _, change = _roots_on_grid(cheb)
        counts = change.sum(axis=1)
        ok &= counts == order // 2
        roots.append((cheb, change))
    good = np.flatnonzero(ok)
    if good.size:
        freqs = []
        for cheb, change in roots:
            r_idx, g_idx = np.nonzero(change[good])
            lo = _GRID[g_idx]
            hi = _GRID[g_idx + 1]
            w = _refine(cheb[good][r_idx], lo, hi)
            freqs.append(w.reshape(len(good), order // 2))
        merged = np.sort(np.concatenate(freqs, axis=1), axis=1)
        out[good] = merged
    return out, ok


def lsp_frames(frames: np.ndarray, order: int = 8):
    """LSPs for every frame; returns ``(lsp, ok)`` like :func:`lpc_to_lsp`."""
    r = autocorrelation(frames, order)
    a, _, stable = levinson_durbin(r, order)
    lsp, ok = lpc_to_lsp(a)
    bad = ~(stable & ok)
    lsp[bad] = fallback_lsp(order)
    return lsp, ~bad


def lsp_frequencies(frame: np.ndarray, order: int = 8, strict: bool = False) -> np.ndarray:
    """Line spectral pair frequencies of one windowed frame.

    With a singular autocorrelation (e.g. silence) the uniform spacing
    ``pi k / (order + 1)`` is returned, or :class:`UnstableLPC` is raised
    when ``strict`` is set.
    """
    lsp, ok = lsp_frames(np.asarray(frame, dtype=np.float64)[None, :], order)
    if not ok[0] and strict:
        raise UnstableLPC("autocorrelation matrix is singular")
    return lsp[0]
