"""Backward composition of inverse branches along arrays of words."""
from __future__ import annotations

import numpy as np

from .errors import HorizonExhausted


def backward_pass(fiber, start, words, y0, visit=None, tol=1e-12):
    """Apply g_{start}^{w_0} o ... o g_{start+m-1}^{w_{m-1}} to ``y0`` row-wise.

    ``words`` is an (N, m) integer array of 1-based symbols. ``visit(i, x, psi)``
    is called for i = m-1, ..., 0 with the orbit point x_i in U^{w_i} at step
    start+i and psi = -log T'(x_i). Returns x_0.

    The point at position i depends only on the suffix w_i ... w_{m-1}, so
    each distinct suffix is inverted once.
    """
    words = np.asarray(words)
    N, m = words.shape
    if start + m > fiber.horizon:
        raise HorizonExhausted(f"need steps up to {start + m}, horizon is {fiber.horizon}")
    if np.ndim(y0) == 0:
        ids = np.zeros(N, dtype=np.int64)
        y = np.array([float(y0)])
    else:
        ids = np.arange(N, dtype=np.int64)
        y = np.broadcast_to(np.asarray(y0, dtype=float), (N,)).copy()
    for i in range(m - 1, -1, -1):
        step = fiber[start + i]
        code = ids * step.l + (words[:, i].astype(np.int64) - 1)
        uniq, ids = np.unique(code, return_inverse=True)
        ids = ids.reshape(-1)
        sym = uniq % step.l + 1
        yin = y[uniq // step.l]
        x = np.empty(uniq.size)
        psi = np.empty(uniq.size) if visit is not None else None
        for s in np.unique(sym):
            mask = sym == s
            br = step.branches[int(s) - 1]
            if psi is None:
                x[mask] = br.inverse(yin[mask], tol)
            else:
                x[mask], psi[mask] = br.inverse_with_psi(yin[mask], tol)
        if visit is not None:
            visit(i, x[ids], psi[ids])
        y = x
    return y[ids]
