"""Prediction metrics and dictionary-sparsity summaries."""

from __future__ import annotations

import numpy as np

from .data import TimeSeries
from .kernels import gram_sq_norm


def mse(predictions: TimeSeries, targets: TimeSeries, start_index: int = 0) -> float:
    """Mean squared prediction error from ``start_index`` onward."""
    p, t = predictions.values, targets.values
    if len(p) != len(t):
        raise ValueError(f"length mismatch: {len(p)} predictions vs {len(t)} targets")
    if not 0 <= start_index < len(p):
        raise ValueError(f"start_index {start_index} out of range for length {len(p)}")
    r = t[start_index:] - p[start_index:]
    return float(np.mean(r**2))


def gram_offdiag_energy(centres, sigma_k: float) -> float:
    """Mean squared off-diagonal Gram entry, in [0, 1].

    Zero means all centres are infinitely separated on the kernel's scale;
    one means they coincide. Used as a scalar summary of how
    close-to-diagonal a dictionary's Gram matrix is.
    """
    centres = np.atleast_2d(np.asarray(centres, dtype=float))
    n = centres.shape[0]
    if n < 2:
        raise ValueError("off-diagonal energy needs at least two centres")
    return (gram_sq_norm(centres, sigma_k) - n) / (n * n - n)
