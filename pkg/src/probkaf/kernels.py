"""Gaussian kernel evaluations, kernel vectors and Gram matrices.

Inputs are delay-embedding vectors; a dictionary is an (N, d) array of
centres. All computations are float64.
"""

from __future__ import annotations

import numpy as np


def _check_sigma(sigma_k: float) -> float:
    sigma_k = float(sigma_k)
    if not np.isfinite(sigma_k) or sigma_k <= 0.0:
        raise ValueError(f"kernel lengthscale must be a positive finite real, got {sigma_k}")
    return sigma_k


def kernel_eval(x, s, sigma_k: float) -> float:
    """Gaussian kernel exp(-||x - s||^2 / (2 sigma_k^2)) between two vectors."""
    sigma_k = _check_sigma(sigma_k)
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    if x.shape != s.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {s.shape}")
    sq = float(np.sum((x - s) ** 2))
    return float(np.exp(-sq / (2.0 * sigma_k**2)))


def kernel_vector(x, centres, sigma_k: float) -> np.ndarray:
    """Kernel evaluations of ``x`` against every centre; shape (N,).

    ``centres`` is an (N, d) array. An empty dictionary (N = 0) yields an
    empty vector.
    """
    sigma_k = _check_sigma(sigma_k)
    x = np.asarray(x, dtype=float)
    centres = np.atleast_2d(np.asarray(centres, dtype=float))
    if centres.size == 0:
        return np.zeros(0)
    if centres.shape[1] != x.shape[0]:
        raise ValueError(
            f"dimension mismatch: input has dim {x.shape[0]}, centres have dim {centres.shape[1]}"
        )
    sq = np.sum((centres - x[None, :]) ** 2, axis=1)
    return np.exp(-sq / (2.0 * sigma_k**2))


def sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (len(a), len(b))."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    diff = a[:, None, :] - b[None, :, :]
    return np.sum(diff**2, axis=2)


def gram(centres, sigma_k: float) -> np.ndarray:
    """Gram matrix K[j, k] = kernel_eval(s_j, s_k, sigma_k); symmetric, unit diagonal."""
    sigma_k = _check_sigma(sigma_k)
    centres = np.atleast_2d(np.asarray(centres, dtype=float))
    if centres.shape[0] < 1:
        raise ValueError("dictionary must contain at least one centre")
    g = np.exp(-sq_dists(centres, centres) / (2.0 * sigma_k**2))
    # exact symmetry and unit diagonal regardless of rounding in sq_dists
    g = 0.5 * (g + g.T)
    np.fill_diagonal(g, 1.0)
    return g


def gram_sq_norm(centres, sigma_k: float) -> float:
    """Squared Frobenius norm of the Gram matrix, sum_jk K(s_j, s_k)^2.

    This is the quantity penalised by the sparsity-inducing dictionary
    prior; it is at least N (the diagonal alone) and grows as centres
    cluster together relative to ``sigma_k``.
    """
    g = gram(centres, sigma_k)
    return float(np.sum(g**2))
