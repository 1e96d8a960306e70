"""Shared fixtures and independent numerical oracles for the test suite."""

import numpy as np
import pytest

from probkaf.data import EmbeddedDataset
from probkaf.model import ModelParams


def central_difference(f, u, h=1e-5):
    """Central finite-difference gradient of a scalar function of a vector."""
    u = np.asarray(u, dtype=float)
    grad = np.empty_like(u)
    for j in range(len(u)):
        up, um = u.copy(), u.copy()
        up[j] += h
        um[j] -= h
        grad[j] = (f(up) - f(um)) / (2.0 * h)
    return grad


def ridge_solution(design, targets, sigma_eps, l_alpha):
    """Closed-form maximiser of the Gaussian likelihood + Gaussian weight prior."""
    n = design.shape[1]
    a = design.T @ design / sigma_eps**2 + np.eye(n) / l_alpha**2
    b = design.T @ targets / sigma_eps**2
    return np.linalg.solve(a, b)


def design_matrix(inputs, centres, sigma_k):
    """Kernel design matrix built from first principles (independent path)."""
    inputs = np.atleast_2d(inputs)
    centres = np.atleast_2d(centres)
    out = np.empty((len(inputs), len(centres)))
    for i, x in enumerate(inputs):
        for j, s in enumerate(centres):
            out[i, j] = np.exp(-np.sum((x - s) ** 2) / (2.0 * sigma_k**2))
    return out


def random_params(rng, n_centres=5, order=5, scale_spread=0.4):
    """Feasible random model state with moderate scales."""
    return ModelParams(
        alpha=rng.normal(size=n_centres),
        centres=rng.normal(size=(n_centres, order)),
        sigma_k=float(np.exp(rng.normal(0.0, scale_spread))),
        sigma_eps=float(np.exp(rng.normal(-0.5, scale_spread))),
        l_alpha=float(np.exp(rng.normal(0.0, scale_spread))),
        l_dict=float(np.exp(rng.normal(0.0, scale_spread))),
    )


def random_dataset(rng, n_pairs=20, order=5):
    return EmbeddedDataset(
        inputs=rng.normal(size=(n_pairs, order)), targets=rng.normal(size=n_pairs)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
