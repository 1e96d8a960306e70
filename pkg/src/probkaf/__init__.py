"""Probabilistic initialisation and fully-adaptive operation of kernel adaptive filters."""

from .adaptive import AdaptiveConfig, OnlineState, adaptive_run, blend
from .data import (
    EmbeddedDataset,
    LorenzConfig,
    TimeSeries,
    embed,
    load_csv,
    lorenz_generate,
    save_csv,
    standardize,
    synthetic_wind,
    windows,
)
from .evaluation import gram_offdiag_energy, mse
from .inference import (
    MapConfig,
    McmcChain,
    McmcConfig,
    chain_map,
    chain_mean,
    default_init,
    derive_seed,
    map_fit,
    map_fit_multistart,
    mcmc_sample,
)
from .kernels import gram, gram_sq_norm, kernel_eval, kernel_vector
from .klms import (
    Coherence,
    KlmsState,
    Novelty,
    StepResult,
    calibrate_novelty,
    coherence_admit,
    empty_state,
    from_pretrained,
    klms_predict,
    klms_run,
    klms_step,
    novelty_admit,
)
from .model import (
    HyperParams,
    LogDensity,
    ModelParams,
    from_unconstrained,
    grad_log_posterior,
    log_likelihood,
    log_posterior,
    log_prior,
    predict,
    to_unconstrained,
)

__version__ = "0.1.0"
