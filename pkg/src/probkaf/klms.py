"""Kernel least-mean-squares filtering with dictionary sparsification.

States are immutable; :func:`klms_step` returns the updated state. A
filter built with :func:`from_pretrained` carries weights, centres and
lengthscale learnt by the probabilistic model and can keep its dictionary
frozen while the weights continue to adapt.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .data import EmbeddedDataset
from .kernels import kernel_vector
from .model import ModelParams


@dataclass(frozen=True)
class Novelty:
    """Admit a centre only if far from the dictionary and the error is large."""

    delta_dist: float
    delta_err: float = 0.0


@dataclass(frozen=True)
class Coherence:
    """Admit a centre only if its best kernel similarity stays below mu_0."""

    mu_0: float


Sparsifier = Optional[Union[Novelty, Coherence]]


@dataclass
class KlmsState:
    """Dictionary, weights and learning settings of an online KLMS filter.

    ``sparsifier`` None means every sample is admitted. ``freeze_dict``
    disables admission entirely; a frozen filter adapts all weights by the
    LMS rule over its fixed kernel basis. When ``max_dict`` is reached the
    filter behaves as if frozen.
    """

    centres: np.ndarray
    alpha: np.ndarray
    sigma_k: float
    learning_rate: float
    sparsifier: Sparsifier = None
    max_dict: Optional[int] = None
    freeze_dict: bool = False

    def __post_init__(self):
        self.centres = np.asarray(self.centres, dtype=float)
        if self.centres.size == 0:
            self.centres = self.centres.reshape(0, self.centres.shape[-1] if self.centres.ndim == 2 else 0)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.alpha.shape[0] != self.centres.shape[0]:
            raise ValueError("weight vector and dictionary disagree in size")
        if self.sigma_k <= 0:
            raise ValueError("sigma_k must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.max_dict is not None and self.max_dict < 1:
            raise ValueError("max_dict must be positive when set")

    @property
    def dict_size(self) -> int:
        return self.centres.shape[0]


@dataclass(frozen=True)
class StepResult:
    prediction: float
    error: float
    centre_added: bool


def empty_state(
    order: int,
    sigma_k: float,
    learning_rate: float,
    sparsifier: Sparsifier = None,
    max_dict: Optional[int] = None,
) -> KlmsState:
    """Filter with an empty dictionary, ready to learn from scratch."""
    return KlmsState(
        centres=np.zeros((0, order)),
        alpha=np.zeros(0),
        sigma_k=sigma_k,
        learning_rate=learning_rate,
        sparsifier=sparsifier,
        max_dict=max_dict,
    )


def klms_predict(state: KlmsState, x) -> float:
    """Filter output; zero while the dictionary is empty."""
    if state.dict_size == 0:
        return 0.0
    return float(state.alpha @ kernel_vector(x, state.centres, state.sigma_k))


def novelty_admit(state: KlmsState, x, error: float) -> bool:
    """Platt's criterion: far from every centre AND error above threshold."""
    if state.dict_size == 0:
        return True
    sp = state.sparsifier
    if not isinstance(sp, Novelty):
        raise TypeError("state has no novelty sparsifier")
    x = np.asarray(x, dtype=float)
    min_dist = float(np.min(np.sqrt(np.sum((state.centres - x[None, :]) ** 2, axis=1))))
    return min_dist > sp.delta_dist and abs(error) > sp.delta_err


def coherence_admit(state: KlmsState, x) -> bool:
    """Admit iff the maximal kernel value against the dictionary is <= mu_0."""
    if state.dict_size == 0:
        return True
    sp = state.sparsifier
    if not isinstance(sp, Coherence):
        raise TypeError("state has no coherence sparsifier")
    return float(np.max(kernel_vector(x, state.centres, state.sigma_k))) <= sp.mu_0


def klms_step(state: KlmsState, x, y: float) -> tuple[KlmsState, StepResult]:
    """One online update: predict, then grow the dictionary or adapt weights.

    An admitted sample joins the dictionary with weight eta*error. A
    frozen (or full) dictionary gets the LMS weight update over the fixed
    basis; a novelty rejection leaves the state untouched and a coherence
    rejection moves only the most similar centre's weight.
    """
    x = np.asarray(x, dtype=float)
    if state.dict_size > 0 and x.shape[0] != state.centres.shape[1]:
        raise ValueError(
            f"input of dimension {x.shape[0]} against dictionary of dimension {state.centres.shape[1]}"
        )
    pred = klms_predict(state, x)
    err = float(y) - pred
    eta = state.learning_rate

    basis_fixed = state.freeze_dict or (
        state.max_dict is not None and state.dict_size >= state.max_dict
    )
    if not basis_fixed:
        if state.sparsifier is None:
            admit = True
        elif isinstance(state.sparsifier, Novelty):
            admit = novelty_admit(state, x, err)
        elif isinstance(state.sparsifier, Coherence):
            admit = coherence_admit(state, x)
        else:
            raise TypeError(f"unknown sparsifier {state.sparsifier!r}")
        if admit:
            new_state = dataclasses.replace(
                state,
                centres=np.vstack([state.centres, x[None, :]]) if state.dict_size else x[None, :].copy(),
                alpha=np.append(state.alpha, eta * err),
            )
            return new_state, StepResult(pred, err, True)
        if isinstance(state.sparsifier, Novelty):
            return state, StepResult(pred, err, False)
        # coherence rejection: adapt the most similar centre only
        j = int(np.argmax(kernel_vector(x, state.centres, state.sigma_k)))
        alpha = state.alpha.copy()
        alpha[j] += eta * err
        return dataclasses.replace(state, alpha=alpha), StepResult(pred, err, False)

    if state.dict_size == 0:
        # frozen empty filter can never learn anything
        return state, StepResult(pred, err, False)
    alpha = state.alpha + eta * err * kernel_vector(x, state.centres, state.sigma_k)
    return dataclasses.replace(state, alpha=alpha), StepResult(pred, err, False)


def from_pretrained(
    params: ModelParams,
    learning_rate: float,
    freeze_dict: bool,
    sparsifier: Sparsifier = None,
    max_dict: Optional[int] = None,
) -> KlmsState:
    """KLMS filter seeded with the dictionary, weights and lengthscale of a fit."""
    return KlmsState(
        centres=params.centres.copy(),
        alpha=params.alpha.copy(),
        sigma_k=params.sigma_k,
        learning_rate=learning_rate,
        sparsifier=sparsifier,
        max_dict=max_dict,
        freeze_dict=freeze_dict,
    )


def klms_run(state: KlmsState, data: EmbeddedDataset) -> tuple[KlmsState, np.ndarray]:
    """Run the filter over the pairs in order; returns final state and predictions."""
    preds = np.empty(len(data))
    for i in range(len(data)):
        state, res = klms_step(state, data.inputs[i], data.targets[i])
        preds[i] = res.prediction
    return state, preds


def greedy_packing_size(inputs: np.ndarray, delta: float) -> int:
    """Dictionary size a distance-only novelty filter reaches on this stream."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    chosen = inputs[0][None, :]
    for x in inputs[1:]:
        if np.min(np.sum((chosen - x[None, :]) ** 2, axis=1)) > delta**2:
            chosen = np.vstack([chosen, x[None, :]])
    return len(chosen)


def calibrate_novelty(
    inputs: np.ndarray, target_size: int, delta_err: float = 0.0, n_iters: int = 60
) -> Novelty:
    """Bisect the novelty distance threshold to hit a target dictionary size.

    With ``delta_err`` zero the admission decision depends only on the
    input geometry, so the stream can be replayed without tracking
    weights.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if target_size < 1 or target_size > len(inputs):
        raise ValueError(f"target size {target_size} out of range for {len(inputs)} inputs")
    diam = float(np.sqrt(np.max(np.sum((inputs - inputs[0]) ** 2, axis=1)))) * 2.0
    lo, hi = 0.0, max(diam, 1e-12)
    best_delta, best_gap = hi, float("inf")
    for _ in range(n_iters):
        mid = 0.5 * (lo + hi)
        size = greedy_packing_size(inputs, mid)
        gap = abs(size - target_size)
        if gap < best_gap or (gap == best_gap and size >= target_size):
            best_delta, best_gap = mid, gap
        if size == target_size:
            break
        if size > target_size:
            lo = mid
        else:
            hi = mid
    return Novelty(delta_dist=best_delta, delta_err=delta_err)
