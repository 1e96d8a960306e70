"""Generative model for a Gaussian-kernel adaptive filter.

The latent state is theta = (alpha, centres, sigma_k, sigma_eps, l_alpha,
l_dict): filter weights, dictionary, kernel lengthscale, observation noise
std and the two prior scales. The log-posterior over a delay-embedded
dataset combines a Gaussian likelihood, a Gaussian weight prior, a
dictionary prior penalising the squared Frobenius norm of the Gram matrix
(pushes centres apart), and half-Normal priors on all four positive scales.

Optimisation and sampling operate on an unconstrained vector in which the
four scales are log-transformed; gradients returned here are taken with
respect to those unconstrained coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import EmbeddedDataset
from .kernels import kernel_vector, sq_dists

LOG_2PI = math.log(2.0 * math.pi)

# exp(u) for |u| beyond these bounds would make scale**3 overflow or
# vanish in float64; such states get log-density -inf instead of NaN
_SCALE_LO = 1e-100
_SCALE_HI = 1e100


@dataclass
class HyperParams:
    """Variances of the half-Normal priors on the four scale parameters."""

    v_k: float = 1.0
    v_eps: float = 1.0
    v_alpha: float = 1.0
    v_dict: float = 1.0

    def __post_init__(self):
        for name in ("v_k", "v_eps", "v_alpha", "v_dict"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be a positive finite real, got {v}")
            setattr(self, name, v)


@dataclass
class ModelParams:
    """Full latent state of the probabilistic filter model."""

    alpha: np.ndarray
    centres: np.ndarray
    sigma_k: float
    sigma_eps: float
    l_alpha: float = 1.0
    l_dict: float = 1.0

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.centres = np.atleast_2d(np.asarray(self.centres, dtype=float))
        if self.alpha.ndim != 1:
            raise ValueError("alpha must be a 1-D weight vector")
        if self.alpha.shape[0] != self.centres.shape[0]:
            raise ValueError(
                f"{self.alpha.shape[0]} weights for {self.centres.shape[0]} centres"
            )
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.centres))):
            raise ValueError("non-finite entries in weights or centres")
        for name in ("sigma_k", "sigma_eps", "l_alpha", "l_dict"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be a positive finite real, got {v}")
            setattr(self, name, v)

    @property
    def n_centres(self) -> int:
        return self.centres.shape[0]

    @property
    def order(self) -> int:
        return self.centres.shape[1]


@dataclass
class LogDensity:
    """Unnormalised log-density value with an optional gradient.

    The gradient, when present, is with respect to the unconstrained
    parameter vector (see :func:`to_unconstrained`).
    """

    value: float
    gradient: Optional[np.ndarray] = None


def half_normal_logpdf(z: float, v: float) -> float:
    """Log-density of |Normal(0, v)| at z >= 0."""
    if z < 0:
        raise ValueError("half-Normal support is z >= 0")
    if v <= 0:
        raise ValueError("half-Normal variance must be positive")
    return 0.5 * math.log(2.0 / (math.pi * v)) - z**2 / (2.0 * v)


def predict(params: ModelParams, x) -> float:
    """Filter output alpha^T K(x, centres)."""
    return float(params.alpha @ kernel_vector(x, params.centres, params.sigma_k))


def _likelihood_parts(alpha, centres, sigma_k, sigma_eps, data):
    """Gaussian log-likelihood plus the intermediates its gradient reuses."""
    sqxs = sq_dists(data.inputs, centres)
    design = np.exp(-sqxs / (2.0 * sigma_k**2))
    resid = data.targets - design @ alpha
    m = len(data)
    ll = -0.5 * m * (LOG_2PI + 2.0 * math.log(sigma_eps)) - float(
        np.sum(resid**2)
    ) / (2.0 * sigma_eps**2)
    return ll, design, sqxs, resid


def _prior_parts(alpha, centres, sigma_k, sigma_eps, l_alpha, l_dict, hyper):
    """Joint log-prior plus the Gram intermediates its gradient reuses."""
    sqss = sq_dists(centres, centres)
    g = np.exp(-sqss / (2.0 * sigma_k**2))
    gram_sq = float(np.sum(g**2))
    lp = -float(np.sum(alpha**2)) / (2.0 * l_alpha**2) - 0.5 * (
        LOG_2PI + 2.0 * math.log(l_alpha)
    )
    lp += -gram_sq / (2.0 * l_dict**2) - 0.5 * (LOG_2PI + 2.0 * math.log(l_dict))
    lp += half_normal_logpdf(sigma_k, hyper.v_k)
    lp += half_normal_logpdf(sigma_eps, hyper.v_eps)
    lp += half_normal_logpdf(l_alpha, hyper.v_alpha)
    lp += half_normal_logpdf(l_dict, hyper.v_dict)
    return lp, g, sqss, gram_sq


def log_likelihood(params: ModelParams, data: EmbeddedDataset) -> float:
    """Sum of Gaussian observation log-densities over all embedded pairs."""
    if data.order != params.order:
        raise ValueError(f"data order {data.order} != model order {params.order}")
    ll, _, _, _ = _likelihood_parts(
        params.alpha, params.centres, params.sigma_k, params.sigma_eps, data
    )
    return ll


def log_prior(params: ModelParams, hyper: HyperParams) -> float:
    """Weight prior + dictionary prior + half-Normal scale (hyper)priors."""
    lp, _, _, _ = _prior_parts(
        params.alpha,
        params.centres,
        params.sigma_k,
        params.sigma_eps,
        params.l_alpha,
        params.l_dict,
        hyper,
    )
    return lp


def to_unconstrained(params: ModelParams) -> np.ndarray:
    """Pack params into a free real vector; the four scales enter as logs."""
    return np.concatenate(
        [
            params.alpha,
            params.centres.ravel(),
            np.log(
                [params.sigma_k, params.sigma_eps, params.l_alpha, params.l_dict]
            ),
        ]
    )


def from_unconstrained(u: np.ndarray, n_centres: int, order: int) -> ModelParams:
    """Inverse of :func:`to_unconstrained` for a model of shape (n_centres, order)."""
    u = np.asarray(u, dtype=float)
    expected = n_centres + n_centres * order + 4
    if u.shape != (expected,):
        raise ValueError(
            f"unconstrained vector has length {u.shape}, expected ({expected},)"
        )
    scales = np.exp(u[-4:])
    return ModelParams(
        alpha=u[:n_centres].copy(),
        centres=u[n_centres : n_centres + n_centres * order].reshape(n_centres, order).copy(),
        sigma_k=scales[0],
        sigma_eps=scales[1],
        l_alpha=scales[2],
        l_dict=scales[3],
    )


def _natural_grads(alpha, centres, sigma_k, sigma_eps, l_alpha, l_dict, hyper, data,
                   design, sqxs, resid, g, sqss, gram_sq):
    """Gradient of the log-posterior in natural (constrained) coordinates."""
    m = len(data)
    inv_se2 = 1.0 / sigma_eps**2
    inv_sk2 = 1.0 / sigma_k**2

    grad_alpha = design.T @ (resid * inv_se2) - alpha / l_alpha**2

    # centres: likelihood pulls each centre toward inputs it explains,
    # the dictionary prior pushes centres apart
    w = (resid[:, None] * design) * alpha[None, :] * (inv_se2 * inv_sk2)
    grad_centres = w.T @ data.inputs - np.sum(w, axis=0)[:, None] * centres
    v = g**2
    rowsum = np.sum(v, axis=1)
    grad_centres -= (2.0 * inv_sk2 / l_dict**2) * (v @ centres - rowsum[:, None] * centres)

    grad_sk = (
        float(resid @ ((design * sqxs) @ alpha)) * inv_se2 / sigma_k**3
        - float(np.sum(v * sqss)) / (l_dict**2 * sigma_k**3)
        - sigma_k / hyper.v_k
    )
    grad_se = (
        -m / sigma_eps
        + float(np.sum(resid**2)) / sigma_eps**3
        - sigma_eps / hyper.v_eps
    )
    grad_la = (
        -1.0 / l_alpha
        + float(np.sum(alpha**2)) / l_alpha**3
        - l_alpha / hyper.v_alpha
    )
    grad_ld = -1.0 / l_dict + gram_sq / l_dict**3 - l_dict / hyper.v_dict
    return grad_alpha, grad_centres, grad_sk, grad_se, grad_la, grad_ld


def log_posterior(
    params: ModelParams,
    hyper: HyperParams,
    data: EmbeddedDataset,
    with_grad: bool = False,
) -> LogDensity:
    """Unnormalised log-posterior log p(theta | data) = likelihood + prior.

    With ``with_grad`` the gradient over the unconstrained coordinates is
    attached (chain rule through the log transform of the scales; no
    change-of-variables term, so this is the gradient of the natural-space
    posterior reparameterised).
    """
    value = log_likelihood(params, data) + log_prior(params, hyper)
    if not with_grad:
        return LogDensity(value=value)
    gradient = grad_log_posterior(params, hyper, data)
    return LogDensity(value=value, gradient=gradient)


def grad_log_posterior(
    params: ModelParams, hyper: HyperParams, data: EmbeddedDataset
) -> np.ndarray:
    """Analytic gradient of the log-posterior over unconstrained coordinates."""
    if data.order != params.order:
        raise ValueError(f"data order {data.order} != model order {params.order}")
    a, s = params.alpha, params.centres
    sk, se, la, ld = params.sigma_k, params.sigma_eps, params.l_alpha, params.l_dict
    _, design, sqxs, resid = _likelihood_parts(a, s, sk, se, data)
    _, g, sqss, gram_sq = _prior_parts(a, s, sk, se, la, ld, hyper)
    ga, gs, gsk, gse, gla, gld = _natural_grads(
        a, s, sk, se, la, ld, hyper, data, design, sqxs, resid, g, sqss, gram_sq
    )
    return np.concatenate(
        [ga, gs.ravel(), [gsk * sk, gse * se, gla * la, gld * ld]]
    )


def unconstrained_logpost(
    u: np.ndarray,
    n_centres: int,
    order: int,
    hyper: HyperParams,
    data: EmbeddedDataset,
    want_grad: bool = False,
    jacobian: bool = False,
) -> tuple[float, Optional[np.ndarray]]:
    """Log-posterior as a function of the unconstrained vector.

    ``jacobian=True`` adds the change-of-variables term (+log scale per
    transformed coordinate), giving the density the sampler must target on
    the unconstrained space. States whose scales over/underflow float64
    get -inf so callers can reject them.
    """
    u = np.asarray(u, dtype=float)
    n_alpha = n_centres
    n_cent = n_centres * order
    if u.shape != (n_alpha + n_cent + 4,):
        raise ValueError(f"unconstrained vector has wrong length {u.shape}")
    with np.errstate(over="ignore"):
        scales = np.exp(u[-4:])
    if not np.all(np.isfinite(scales)) or np.any(scales < _SCALE_LO) or np.any(scales > _SCALE_HI):
        return -np.inf, None
    alpha = u[:n_alpha]
    centres = u[n_alpha : n_alpha + n_cent].reshape(n_centres, order)
    sk, se, la, ld = scales
    # rejected trial states may overflow intermediates; map them to -inf
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        ll, design, sqxs, resid = _likelihood_parts(alpha, centres, sk, se, data)
        lp, g, sqss, gram_sq = _prior_parts(alpha, centres, sk, se, la, ld, hyper)
        value = ll + lp
        if jacobian:
            value += float(np.sum(u[-4:]))
        if not np.isfinite(value):
            return -np.inf, None
        if not want_grad:
            return value, None
        ga, gs, gsk, gse, gla, gld = _natural_grads(
            alpha, centres, sk, se, la, ld, hyper, data, design, sqxs, resid, g, sqss, gram_sq
        )
        grad = np.concatenate([ga, gs.ravel(), [gsk * sk, gse * se, gla * la, gld * ld]])
        if jacobian:
            grad[-4:] += 1.0
    return value, grad
