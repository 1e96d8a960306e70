import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probkaf.kernels import gram, gram_sq_norm, kernel_eval, kernel_vector

# exp(-0.5), the kernel between [0] and [1] at unit lengthscale
EXP_HALF = 0.6065306597126334

finite_floats = st.floats(min_value=-50, max_value=50, allow_nan=False)


def test_kernel_identity():
    assert kernel_eval([1.0, 2.0], [1.0, 2.0], sigma_k=1.0) == 1.0
    assert kernel_eval([0.3], [0.3], sigma_k=7.0) == 1.0


def test_kernel_unit_separation():
    assert kernel_eval([0.0], [1.0], sigma_k=1.0) == pytest.approx(EXP_HALF, abs=1e-15)


def test_kernel_flat_lengthscale_limit():
    assert kernel_eval([0.0], [1.0], sigma_k=1e6) == pytest.approx(1.0, abs=1e-9)


def test_kernel_rejects_bad_sigma():
    for bad in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            kernel_eval([0.0], [1.0], sigma_k=bad)


def test_kernel_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        kernel_eval([0.0, 1.0], [0.0], sigma_k=1.0)
    with pytest.raises(ValueError):
        kernel_vector([0.0, 1.0], np.zeros((3, 3)), sigma_k=1.0)


@settings(max_examples=100)
@given(
    st.lists(finite_floats, min_size=1, max_size=6),
    st.floats(min_value=1e-3, max_value=1e3),
)
def test_kernel_symmetry(values, sigma):
    x = np.array(values)
    s = x[::-1].copy()
    assert kernel_eval(x, s, sigma) == kernel_eval(s, x, sigma)


def test_kernel_vector_basics():
    x = np.array([0.0])
    assert np.array_equal(kernel_vector(x, x[None, :], 1.0), [1.0])
    v = kernel_vector(x, np.array([[0.0], [1.0]]), 1.0)
    assert v == pytest.approx([1.0, EXP_HALF], abs=1e-15)
    same = kernel_vector(np.array([2.0, 3.0]), np.tile([0.5, -1.0], (3, 1)), 2.0)
    assert same[0] == same[1] == same[2]


def test_gram_small_cases():
    assert np.array_equal(gram(np.array([[0.7, 0.1]]), 1.0), [[1.0]])
    two_same = gram(np.array([[1.0], [1.0]]), 0.5)
    assert np.array_equal(two_same, np.ones((2, 2)))
    g = gram(np.array([[0.0], [1.0]]), 1.0)
    expected = np.array([[1.0, EXP_HALF], [EXP_HALF, 1.0]])
    assert np.max(np.abs(g - expected)) < 1e-15


def test_gram_sq_norm_cases():
    assert gram_sq_norm(np.array([[3.0]]), 1.0) == 1.0
    assert gram_sq_norm(np.array([[2.0], [2.0]]), 1.0) == 4.0
    far = gram_sq_norm(np.array([[0.0], [1e4]]), 1.0)
    assert far == pytest.approx(2.0, abs=1e-9)


@settings(max_examples=60)
@given(
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=1, max_value=4),
    st.floats(min_value=0.05, max_value=20.0),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_gram_sq_norm_at_least_n(n, d, sigma, seed):
    rng = np.random.default_rng(seed)
    centres = rng.normal(size=(n, d))
    assert gram_sq_norm(centres, sigma) >= n


def test_gram_sq_norm_monotone_in_separation():
    distances = np.linspace(0.0, 6.0, 40)
    values = [gram_sq_norm(np.array([[0.0], [r]]), 1.0) for r in distances]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_gram_positive_semidefinite():
    rng = np.random.default_rng(42)
    for _ in range(20):
        centres = rng.normal(size=(5, 3))
        sigma = float(rng.uniform(0.2, 5.0))
        eigs = np.linalg.eigvalsh(gram(centres, sigma))
        assert eigs.min() >= -1e-8


def test_gram_symmetric_unit_diagonal():
    rng = np.random.default_rng(3)
    centres = rng.normal(size=(6, 4))
    g = gram(centres, 0.8)
    assert np.array_equal(g, g.T)
    assert np.array_equal(np.diag(g), np.ones(6))
    assert np.all(g > 0) and np.all(g <= 1)
