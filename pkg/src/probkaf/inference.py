"""MAP optimisation and MCMC sampling of the filter-model posterior.

Both operate on the unconstrained parameter vector. The optimiser is
gradient ascent with a backtracking line search (spectral initial step);
the sampler is an adaptive random-walk Metropolis whose global proposal
scale is tuned during burn-in and then frozen, so the post-burn-in kernel
satisfies detailed balance.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .data import EmbeddedDataset
from .model import (
    HyperParams,
    ModelParams,
    from_unconstrained,
    to_unconstrained,
    unconstrained_logpost,
)

PARAM_BLOCKS = ("alpha", "centres", "sigma_k", "sigma_eps", "l_alpha", "l_dict")


@dataclass
class MapConfig:
    max_iters: int = 500
    step_size: float = 0.1
    grad_tol: float = 1e-6
    seed: int = 0
    n_restarts: int = 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_size <= 0 or self.grad_tol <= 0:
            raise ValueError("step_size and grad_tol must be positive")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be at least 1")


@dataclass
class McmcConfig:
    n_samples: int = 1000
    n_burnin: int = 1000
    initial_proposal_scale: float = 0.1
    adapt_target: float = 0.3
    seed: int = 0
    # ceiling for the adapted global scale; keeps proposals bounded when
    # the target is so flat that acceptance stays high no matter what
    max_scale: float = 1e6

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.n_burnin < 0:
            raise ValueError("n_burnin must be nonnegative")
        if self.initial_proposal_scale <= 0:
            raise ValueError("initial_proposal_scale must be positive")
        if not 0.0 < self.adapt_target < 1.0:
            raise ValueError("adapt_target must lie in (0, 1)")
        if self.max_scale < self.initial_proposal_scale:
            raise ValueError("max_scale must not undercut the initial proposal scale")


@dataclass
class McmcChain:
    """Post-burn-in draws with their log-posterior values."""

    draws: list[ModelParams]
    log_post_values: np.ndarray
    acceptance_rate: float
    n_accepted: int = 0

    def __post_init__(self):
        self.log_post_values = np.asarray(self.log_post_values, dtype=float)
        if len(self.draws) != len(self.log_post_values):
            raise ValueError("draws and log_post_values disagree in length")
        if not 0.0 <= self.acceptance_rate <= 1.0:
            raise ValueError("acceptance_rate must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.draws)


def block_mask(n_centres: int, order: int, frozen: Sequence[str]) -> np.ndarray:
    """Boolean mask over the unconstrained vector; False marks frozen blocks."""
    unknown = set(frozen) - set(PARAM_BLOCKS)
    if unknown:
        raise ValueError(f"unknown parameter blocks: {sorted(unknown)}")
    mask = np.ones(n_centres + n_centres * order + 4, dtype=bool)
    if "alpha" in frozen:
        mask[:n_centres] = False
    if "centres" in frozen:
        mask[n_centres : n_centres + n_centres * order] = False
    for offset, name in enumerate(("sigma_k", "sigma_eps", "l_alpha", "l_dict")):
        if name in frozen:
            mask[-4 + offset] = False
    return mask


def map_fit(
    init: ModelParams,
    hyper: HyperParams,
    data: EmbeddedDataset,
    cfg: MapConfig,
    frozen: Sequence[str] = (),
    history: Optional[list] = None,
) -> ModelParams:
    """Gradient-ascent MAP estimate of the log-posterior.

    Stops when the masked gradient infinity-norm drops below
    ``cfg.grad_tol``, when ``cfg.max_iters`` ascent steps have been taken,
    or when no representable step increases the objective. The accepted
    iterates are monotone in log-posterior; ``history`` (a caller-supplied
    list) collects their objective values.

    ``frozen`` names parameter blocks (see PARAM_BLOCKS) held at their
    initial values.
    """
    n, d = init.n_centres, init.order
    mask = block_mask(n, d, frozen)
    u = to_unconstrained(init)
    f, g = unconstrained_logpost(u, n, d, hyper, data, want_grad=True, jacobian=False)
    if not math.isfinite(f):
        raise FloatingPointError(f"non-finite log-posterior at the initial point: {f}")
    if history is not None:
        history.append(f)
    g_eff = np.where(mask, g, 0.0)
    if float(np.max(np.abs(g_eff))) < cfg.grad_tol:
        return init

    step = cfg.step_size
    for _ in range(cfg.max_iters):
        g_eff = np.where(mask, g, 0.0)
        if float(np.max(np.abs(g_eff))) < cfg.grad_tol:
            break
        trial = step
        accepted = False
        for _ in range(60):
            u_new = u + trial * g_eff
            f_new, g_new = unconstrained_logpost(
                u_new, n, d, hyper, data, want_grad=True, jacobian=False
            )
            if (
                math.isfinite(f_new)
                and f_new > f
                and g_new is not None
                and np.all(np.isfinite(g_new))
            ):
                accepted = True
                break
            trial *= 0.5
        if not accepted:
            break
        # spectral (Barzilai-Borwein) guess for the next step size
        s_vec = u_new - u
        y_vec = np.where(mask, g_new, 0.0) - g_eff
        denom = -float(s_vec @ y_vec)
        if denom > 0.0 and math.isfinite(denom):
            step = float(np.clip(float(s_vec @ s_vec) / denom, 1e-12, 1e6))
        else:
            step = trial * 2.0
        u, f, g = u_new, f_new, g_new
        if history is not None:
            history.append(f)
    return from_unconstrained(u, n, d)


def derive_seed(base_seed: int, tag: int) -> int:
    """Deterministic child seed for restart/window streams."""
    return int(np.random.SeedSequence((base_seed, tag)).generate_state(1)[0])


def map_fit_multistart(
    data: EmbeddedDataset,
    n_centres: int,
    hyper: HyperParams,
    cfg: MapConfig,
    sigma_eps_init: float = 0.1,
) -> ModelParams:
    """Best of ``cfg.n_restarts`` staged MAP ascents from re-drawn initialisations.

    Each restart first solves the concave weight subproblem with the
    kernel fixed, then releases every parameter. Ascending from zero
    weights directly lets the dictionary prior collapse the lengthscale
    before the weights can latch onto the data (a degenerate
    everything-is-noise mode); the warm weight phase removes that basin.
    The posterior over centres is also multimodal, so restarts from
    different k-means++ draws are kept and compared by log-posterior.
    """
    best: Optional[ModelParams] = None
    best_value = -math.inf
    weights_only = tuple(b for b in PARAM_BLOCKS if b != "alpha")
    warm_cfg = dataclasses.replace(cfg, max_iters=max(100, cfg.max_iters // 10))
    for r in range(cfg.n_restarts):
        init = default_init(
            data, n_centres, seed=derive_seed(cfg.seed, r), sigma_eps=sigma_eps_init
        )
        warm = map_fit(init, hyper, data, warm_cfg, frozen=weights_only)
        fit = map_fit(warm, hyper, data, cfg)
        value, _ = unconstrained_logpost(
            to_unconstrained(fit), n_centres, data.order, hyper, data
        )
        if value > best_value:
            best, best_value = fit, value
    assert best is not None
    return best


def adaptive_rwm(
    log_target: Callable[[np.ndarray], float],
    u0: np.ndarray,
    n_samples: int,
    n_burnin: int,
    initial_scale: float,
    adapt_target: float,
    rng: np.random.Generator,
    mask: Optional[np.ndarray] = None,
    base_scales: Optional[np.ndarray] = None,
    max_scale: float = 1e6,
) -> tuple[np.ndarray, np.ndarray, float, int, float]:
    """Random-walk Metropolis with Robbins-Monro scale adaptation.

    Proposals are componentwise-scaled Gaussian: coordinate j moves by
    ``scale * base_scales[j] * z``. The global scale is adapted toward
    ``adapt_target`` mean acceptance during the first ``n_burnin``
    iterations only; afterwards the kernel is fixed. Returns (draws,
    log-target values, acceptance rate over the retained draws, accept
    count, final scale).
    """
    u = np.asarray(u0, dtype=float).copy()
    lp = float(log_target(u))
    if not math.isfinite(lp):
        raise FloatingPointError(f"initial state has non-finite log-density: {lp}")
    n_dim = len(u)
    active = np.ones(n_dim, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    per_coord = np.ones(n_dim) if base_scales is None else np.asarray(base_scales, dtype=float)
    if per_coord.shape != (n_dim,) or np.any(per_coord <= 0):
        raise ValueError("base_scales must be positive and match the state dimension")
    scale = float(initial_scale)
    draws = np.empty((n_samples, n_dim))
    lps = np.empty(n_samples)
    n_accepted = 0
    accepted_in_burnin = 0
    for t in range(n_burnin + n_samples):
        z = rng.standard_normal(n_dim) * per_coord
        z[~active] = 0.0
        prop = u + scale * z
        lp_prop = float(log_target(prop))
        if math.isnan(lp_prop):
            lp_prop = -math.inf
        log_ratio = lp_prop - lp
        acc_prob = math.exp(min(0.0, log_ratio))
        accept = rng.random() < acc_prob
        if accept:
            u = prop
            lp = lp_prop
        if t < n_burnin:
            accepted_in_burnin += accept
            gain = (t + 1.0) ** -0.6
            log_step = gain * (acc_prob - adapt_target)
            # bold rescale while acceptance is extreme, e.g. when started
            # at a sharp posterior mode where the initial scale is hopeless
            if acc_prob < 0.01:
                log_step = min(log_step, -0.35)
            elif acc_prob > 0.99:
                log_step = max(log_step, 0.35)
            scale = float(np.clip(scale * math.exp(log_step), 1e-12, max_scale))
        else:
            i = t - n_burnin
            draws[i] = u
            lps[i] = lp
            n_accepted += accept
    if n_burnin > 0 and accepted_in_burnin == 0:
        raise RuntimeError(
            "no proposal accepted during the entire burn-in; "
            f"proposal scale {initial_scale} is pathological for this target"
        )
    return draws, lps, n_accepted / n_samples, n_accepted, scale


def block_scales(n_centres: int, order: int, alpha: float = 1.0, centres: float = 1.0,
                 scalars: float = 1.0) -> np.ndarray:
    """Per-coordinate proposal scales, one value per parameter block."""
    return np.concatenate(
        [
            np.full(n_centres, alpha),
            np.full(n_centres * order, centres),
            np.full(4, scalars),
        ]
    )


def mcmc_sample(
    init: ModelParams,
    hyper: HyperParams,
    data: EmbeddedDataset,
    cfg: McmcConfig,
    frozen: Sequence[str] = (),
    base_scales: Optional[np.ndarray] = None,
) -> McmcChain:
    """Sample the posterior with adaptive random-walk Metropolis.

    Sampling happens on the unconstrained vector with the
    change-of-variables term included, so the chain targets the actual
    posterior over the positive scales. The recorded log_post_values are
    natural-space log-posterior values (without that term).
    """
    n, d = init.n_centres, init.order
    mask = block_mask(n, d, frozen)
    rng = np.random.default_rng(cfg.seed)

    def target(u: np.ndarray) -> float:
        return unconstrained_logpost(u, n, d, hyper, data, jacobian=True)[0]

    draws_u, lps, rate, n_acc, _ = adaptive_rwm(
        target,
        to_unconstrained(init),
        cfg.n_samples,
        cfg.n_burnin,
        cfg.initial_proposal_scale,
        cfg.adapt_target,
        rng,
        mask=mask,
        base_scales=base_scales,
        max_scale=cfg.max_scale,
    )
    natural_lps = lps - np.sum(draws_u[:, -4:], axis=1)
    draws = [from_unconstrained(row, n, d) for row in draws_u]
    return McmcChain(
        draws=draws, log_post_values=natural_lps, acceptance_rate=rate, n_accepted=n_acc
    )


def chain_mean(chain: McmcChain) -> ModelParams:
    """Average the draws in unconstrained coordinates and map back.

    Averaging the log-scales keeps every returned scale strictly positive.
    """
    if len(chain) == 0:
        raise ValueError("empty chain")
    n, d = chain.draws[0].n_centres, chain.draws[0].order
    mean_u = np.mean([to_unconstrained(p) for p in chain.draws], axis=0)
    return from_unconstrained(mean_u, n, d)


def chain_map(chain: McmcChain) -> ModelParams:
    """Draw with the highest recorded log-posterior."""
    if len(chain) == 0:
        raise ValueError("empty chain")
    return chain.draws[int(np.argmax(chain.log_post_values))]


def median_pairwise_distance(inputs: np.ndarray, rng: Optional[np.random.Generator] = None,
                             max_points: int = 500) -> float:
    """Median Euclidean distance between input rows (subsampled when large)."""
    pts = np.atleast_2d(np.asarray(inputs, dtype=float))
    if len(pts) > max_points:
        if rng is None:
            rng = np.random.default_rng(0)
        pts = pts[rng.choice(len(pts), size=max_points, replace=False)]
    if len(pts) < 2:
        return 1.0
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=2))
    med = float(np.median(dist[np.triu_indices(len(pts), k=1)]))
    return med if med > 0.0 else 1.0


def default_init(
    data: EmbeddedDataset,
    n_centres: int,
    seed: int,
    sigma_eps: float = 0.1,
    l_alpha: float = 1.0,
    l_dict: float = 1.0,
) -> ModelParams:
    """Starting point for inference: zero weights, spread-out centres.

    Centres are chosen from the observed inputs k-means++ style (each new
    centre drawn with probability proportional to squared distance from
    the ones already chosen); the kernel lengthscale starts at the median
    pairwise input distance.
    """
    rng = np.random.default_rng(seed)
    inputs = data.inputs
    m = len(inputs)
    sigma_k = median_pairwise_distance(inputs, rng=rng)
    chosen = [int(rng.integers(m))]
    dist2 = np.sum((inputs - inputs[chosen[0]]) ** 2, axis=1)
    while len(chosen) < min(n_centres, m):
        total = float(np.sum(dist2))
        if total > 0.0:
            idx = int(rng.choice(m, p=dist2 / total))
        else:
            idx = int(rng.integers(m))
        chosen.append(idx)
        dist2 = np.minimum(dist2, np.sum((inputs - inputs[idx]) ** 2, axis=1))
    centres = inputs[chosen].copy()
    if n_centres > m:
        # more centres than observed inputs: recycle with a small jitter
        extra_idx = [k % m for k in range(n_centres - m)]
        extra = inputs[extra_idx] + rng.normal(0.0, 0.01 * sigma_k, size=(len(extra_idx), data.order))
        centres = np.vstack([centres, extra])
    return ModelParams(
        alpha=np.zeros(n_centres),
        centres=centres,
        sigma_k=sigma_k,
        sigma_eps=sigma_eps,
        l_alpha=l_alpha,
        l_dict=l_dict,
    )
