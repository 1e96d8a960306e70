"""Experiment driver: config files, the four experiment kinds, file outputs.

Configs are INI files with flat key/value sections; every key has a
default and the fully resolved configuration is echoed into the report so
a run can be reproduced from its report.json alone. Output files are
written with round-trippable float formatting, so re-running with the
same config and seed yields byte-identical CSVs.
"""

from __future__ import annotations

import configparser
import copy
import dataclasses
import json
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .adaptive import AdaptiveConfig, adaptive_run
from .data import TimeSeries, embed, load_csv, lorenz_generate, LorenzConfig, standardize, synthetic_wind
from .evaluation import gram_offdiag_energy, mse
from .inference import (
    MapConfig,
    McmcConfig,
    chain_map,
    chain_mean,
    derive_seed,
    map_fit_multistart,
    mcmc_sample,
    median_pairwise_distance,
)
from .kernels import gram
from .klms import (
    Coherence,
    KlmsState,
    Novelty,
    calibrate_novelty,
    empty_state,
    from_pretrained,
    klms_run,
)
from .model import HyperParams, ModelParams
from .kernels import sq_dists


class ConfigError(Exception):
    """Bad or missing configuration (exit code 2)."""


class DataError(Exception):
    """Missing or malformed data (exit code 3)."""


class NumericalError(Exception):
    """Inference or integration failure (exit code 4)."""


DEFAULTS: dict[str, dict] = {
    "experiment": {"kind": "", "seed": None, "outdir": "out"},
    "data": {
        "source": "lorenz",
        "path": "",
        "n_samples": 1000,
        "standardize": True,
        "dt": 0.01,
        "lorenz_sigma": 10.0,
        "lorenz_rho": 28.0,
        "lorenz_beta": 8.0 / 3.0,
        "lorenz_x0": 1.0,
        "lorenz_y0": 1.0,
        "lorenz_z0": 1.0,
    },
    "model": {
        "order": 5,
        "dict_size": 5,
        "sigma_eps_init": 0.1,
        "v_k": 1.0,
        "v_eps": 1.0,
        "v_alpha": 1.0,
        "v_dict": 1.0,
    },
    "map": {"max_iters": 2000, "step_size": 0.1, "grad_tol": 1e-6, "n_restarts": 3},
    "mcmc": {
        "n_samples": 500,
        "n_burnin": 500,
        "proposal_scale": 0.05,
        "adapt_target": 0.3,
    },
    "fit": {"train_sizes": "250", "summary": "mean", "use_mcmc": True},
    "klms": {
        "learning_rate": 0.05,
        "sparsifier": "none",
        "delta_dist": 0.1,
        "delta_err": 0.0,
        "mu_0": 0.95,
        "sigma_k": 0.0,  # 0 means: use the median-distance heuristic
        "max_dict": 0,  # 0 means unbounded
        "mse_start_index": 0,  # 0 means: everything the filter predicted
    },
    "pretrain": {
        "train_size": 270,
        "learning_rate": 0.01,
        "baseline_learning_rate": 0.05,
        "freeze_dict": True,
    },
    "adaptive": {"window_len": 25, "rho": 0.9},
}

KINDS = ("fit-offline", "pretrain-klms", "klms", "adaptive")


def _convert(section: str, key: str, raw, default):
    if raw is None or isinstance(raw, (int, float, bool)):
        return raw
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if isinstance(default, int) and default is not None:
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {text!r}") from None
    return text


def load_config(
    config_path: Optional[str],
    overrides: Optional[dict[str, str]] = None,
    kind: Optional[str] = None,
) -> dict:
    """Resolve the configuration: defaults, then file, then CLI overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if config_path:
        if not os.path.exists(config_path):
            raise ConfigError(f"no such config file: {config_path}")
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            parser.read(config_path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{config_path}: {exc}") from exc
        for section in parser.sections():
            if section not in cfg:
                raise ConfigError(f"{config_path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in cfg[section]:
                    raise ConfigError(f"{config_path}: unknown key [{section}] {key}")
                if section == "experiment" and key == "seed":
                    cfg[section][key] = _convert(section, key, raw, 0)
                else:
                    cfg[section][key] = _convert(section, key, raw, DEFAULTS[section][key])
    for dotted, raw in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        section, key = dotted.split(".", 1)
        if section not in cfg or key not in cfg[section]:
            raise ConfigError(f"unknown config field [{section}] {key}")
        if section == "experiment" and key == "seed":
            cfg[section][key] = _convert(section, key, raw, 0)
        else:
            cfg[section][key] = _convert(section, key, raw, DEFAULTS[section][key])
    if kind is not None:
        cfg["experiment"]["kind"] = kind
    if cfg["experiment"]["kind"] not in KINDS:
        raise ConfigError(
            f"experiment kind must be one of {KINDS}, got {cfg['experiment']['kind']!r}"
        )
    if cfg["experiment"]["seed"] is None:
        raise ConfigError("a seed is required: set [experiment] seed or pass --seed")
    cfg["experiment"]["seed"] = int(cfg["experiment"]["seed"])
    return cfg


@dataclass
class ExperimentReport:
    mse: float
    dict_size: int
    gram_offdiag_energy: float
    runtime_seconds: float
    config_echo: dict
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "mse": self.mse,
            "dict_size": self.dict_size,
            "gram_offdiag_energy": self.gram_offdiag_energy,
            "runtime_seconds": self.runtime_seconds,
            "config": self.config_echo,
        }
        out.update(self.extras)
        return out


def _fmt(x: float) -> str:
    return repr(float(x))


def write_predictions_csv(path: str, indices, targets, predictions) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("index,target,prediction\n")
        for i, t, p in zip(indices, targets, predictions):
            fh.write(f"{int(i)},{_fmt(t)},{_fmt(p)}\n")


def write_gram_csv(path: str, g: np.ndarray) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for row in np.atleast_2d(g):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_predictions_csv(path: str) -> tuple[np.ndarray, TimeSeries, TimeSeries]:
    """Read an index,target,prediction file back into series."""
    if not os.path.exists(path):
        raise DataError(f"no such predictions file: {path}")
    idx, tgt, prd = [], [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "index,target,prediction":
            raise DataError(f"{path}: unexpected header {header!r}")
        for rownum, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != 3:
                raise DataError(f"{path}: row {rownum} is malformed")
            try:
                idx.append(int(parts[0]))
                tgt.append(float(parts[1]))
                prd.append(float(parts[2]))
            except ValueError:
                raise DataError(f"{path}: row {rownum} is malformed") from None
    if not idx:
        raise DataError(f"{path}: no data rows")
    return np.array(idx), TimeSeries(np.array(tgt)), TimeSeries(np.array(prd))


def build_series(cfg: dict) -> TimeSeries:
    """Materialise the working series (generated or loaded, then scaled)."""
    data_cfg = cfg["data"]
    seed = cfg["experiment"]["seed"]
    source = data_cfg["source"]
    try:
        if source == "lorenz":
            series = lorenz_generate(
                LorenzConfig(
                    sigma=data_cfg["lorenz_sigma"],
                    rho=data_cfg["lorenz_rho"],
                    beta=data_cfg["lorenz_beta"],
                    dt=data_cfg["dt"],
                    n_steps=data_cfg["n_samples"],
                    initial_state=(
                        data_cfg["lorenz_x0"],
                        data_cfg["lorenz_y0"],
                        data_cfg["lorenz_z0"],
                    ),
                )
            )
        elif source == "wind":
            series = synthetic_wind(data_cfg["n_samples"], seed=seed)
        elif source == "csv":
            if not data_cfg["path"]:
                raise ConfigError("[data] path is required when source = csv")
            try:
                series = load_csv(data_cfg["path"])
            except (FileNotFoundError, ValueError) as exc:
                raise DataError(str(exc)) from exc
        else:
            raise ConfigError(f"[data] source must be lorenz, wind or csv, got {source!r}")
    except FloatingPointError as exc:
        raise NumericalError(str(exc)) from exc
    if data_cfg["standardize"]:
        try:
            series, _, _ = standardize(series)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    return series


def _hyper(cfg: dict) -> HyperParams:
    m = cfg["model"]
    return HyperParams(v_k=m["v_k"], v_eps=m["v_eps"], v_alpha=m["v_alpha"], v_dict=m["v_dict"])


def _map_cfg(cfg: dict, seed: int) -> MapConfig:
    m = cfg["map"]
    return MapConfig(
        max_iters=m["max_iters"],
        step_size=m["step_size"],
        grad_tol=m["grad_tol"],
        seed=seed,
        n_restarts=m["n_restarts"],
    )


def _mcmc_cfg(cfg: dict, seed: int) -> McmcConfig:
    m = cfg["mcmc"]
    return McmcConfig(
        n_samples=m["n_samples"],
        n_burnin=m["n_burnin"],
        initial_proposal_scale=m["proposal_scale"],
        adapt_target=m["adapt_target"],
        seed=seed,
    )


def one_step_predictions(params: ModelParams, series: TimeSeries, start: int, end: int) -> np.ndarray:
    """Fixed-parameter one-step-ahead predictions for indices [start, end)."""
    d = params.order
    if start < d or end > len(series):
        raise ValueError(f"prediction range [{start}, {end}) needs history of {d} samples")
    segment = embed(TimeSeries(series.values[start - d : end]), d)
    design = np.exp(
        -sq_dists(segment.inputs, params.centres) / (2.0 * params.sigma_k**2)
    )
    return design @ params.alpha


def fit_offline_params(
    train: TimeSeries, cfg: dict, seed_tag: int
) -> ModelParams:
    """Offline fit: multistart gradient MAP, then (optionally) MCMC summarised per config."""
    model_cfg = cfg["model"]
    seed = cfg["experiment"]["seed"]
    data = embed(train, model_cfg["order"])
    hyper = _hyper(cfg)
    params = map_fit_multistart(
        data,
        model_cfg["dict_size"],
        hyper,
        _map_cfg(cfg, derive_seed(seed, seed_tag)),
        sigma_eps_init=model_cfg["sigma_eps_init"],
    )
    if cfg["fit"]["use_mcmc"]:
        chain = mcmc_sample(params, hyper, data, _mcmc_cfg(cfg, derive_seed(seed, seed_tag + 1)))
        summary = cfg["fit"]["summary"]
        if summary == "mean":
            params = chain_mean(chain)
        elif summary == "map":
            params = chain_map(chain)
        else:
            raise ConfigError(f"[fit] summary must be 'mean' or 'map', got {summary!r}")
    return params


def _offdiag_or_zero(centres: np.ndarray, sigma_k: float) -> float:
    return gram_offdiag_energy(centres, sigma_k) if len(centres) >= 2 else 0.0


def run_fit_offline(cfg: dict, outdir: str) -> tuple[float, int, float, dict]:
    series = build_series(cfg)
    d = cfg["model"]["order"]
    sizes_raw = str(cfg["fit"]["train_sizes"])
    try:
        sizes = [int(s) for s in sizes_raw.replace(" ", "").split(",") if s]
    except ValueError:
        raise ConfigError(f"[fit] train_sizes: cannot parse {sizes_raw!r}") from None
    if not sizes:
        raise ConfigError("[fit] train_sizes is empty")
    for t in sizes:
        if not d < t < len(series):
            raise ConfigError(f"[fit] train size {t} must lie in ({d}, {len(series)})")
    runs = []
    suffix = len(sizes) > 1
    for k, t in enumerate(sizes):
        train = TimeSeries(series.values[:t], name=series.name)
        try:
            params = fit_offline_params(train, cfg, seed_tag=2 * k)
        except (FloatingPointError, RuntimeError) as exc:
            raise NumericalError(f"train size {t}: {exc}") from exc
        preds = one_step_predictions(params, series, d, len(series))
        indices = np.arange(d, len(series))
        heldout_mse = mse(
            TimeSeries(preds), TimeSeries(series.values[d:]), start_index=t - d
        )
        energy = _offdiag_or_zero(params.centres, params.sigma_k)
        tag = f"_train{t}" if suffix else ""
        write_predictions_csv(
            os.path.join(outdir, f"predictions{tag}.csv"), indices, series.values[d:], preds
        )
        write_gram_csv(os.path.join(outdir, f"gram{tag}.csv"), gram(params.centres, params.sigma_k))
        runs.append(
            {
                "train_size": t,
                "mse": heldout_mse,
                "dict_size": params.n_centres,
                "gram_offdiag_energy": energy,
            }
        )
    last = runs[-1]
    return last["mse"], last["dict_size"], last["gram_offdiag_energy"], {"runs": runs}


def _build_klms_sigma(cfg: dict, inputs: np.ndarray) -> float:
    sigma_k = cfg["klms"]["sigma_k"]
    if sigma_k and sigma_k > 0:
        return sigma_k
    return median_pairwise_distance(inputs, rng=np.random.default_rng(cfg["experiment"]["seed"]))


def _build_sparsifier(cfg: dict):
    k = cfg["klms"]
    name = k["sparsifier"]
    if name == "none":
        return None
    if name == "novelty":
        return Novelty(delta_dist=k["delta_dist"], delta_err=k["delta_err"])
    if name == "coherence":
        return Coherence(mu_0=k["mu_0"])
    raise ConfigError(f"[klms] sparsifier must be none, novelty or coherence, got {name!r}")


def run_klms(cfg: dict, outdir: str) -> tuple[float, int, float, dict]:
    series = build_series(cfg)
    d = cfg["model"]["order"]
    if len(series) <= d:
        raise DataError(f"series of length {len(series)} too short for order {d}")
    data = embed(series, d)
    sigma_k = _build_klms_sigma(cfg, data.inputs)
    max_dict = cfg["klms"]["max_dict"] or None
    state = empty_state(
        d, sigma_k, cfg["klms"]["learning_rate"], _build_sparsifier(cfg), max_dict
    )
    state, preds = klms_run(state, data)
    indices = np.arange(d, len(series))
    start = max(cfg["klms"]["mse_start_index"] - d, 0)
    value = mse(TimeSeries(preds), TimeSeries(series.values[d:]), start_index=start)
    write_predictions_csv(os.path.join(outdir, "predictions.csv"), indices, series.values[d:], preds)
    write_gram_csv(os.path.join(outdir, "gram.csv"), gram(state.centres, state.sigma_k))
    energy = _offdiag_or_zero(state.centres, state.sigma_k)
    return value, state.dict_size, energy, {"sigma_k": state.sigma_k}


def run_pretrain_klms(cfg: dict, outdir: str) -> tuple[float, int, float, dict]:
    series = build_series(cfg)
    d = cfg["model"]["order"]
    n_train = cfg["pretrain"]["train_size"]
    if not d < n_train < len(series):
        raise ConfigError(f"[pretrain] train_size {n_train} must lie in ({d}, {len(series)})")
    train = TimeSeries(series.values[:n_train], name=series.name)
    train_data = embed(train, d)
    hyper = _hyper(cfg)
    seed = cfg["experiment"]["seed"]
    try:
        params = map_fit_multistart(
            train_data,
            cfg["model"]["dict_size"],
            hyper,
            _map_cfg(cfg, derive_seed(seed, 0)),
            sigma_eps_init=cfg["model"]["sigma_eps_init"],
        )
    except (FloatingPointError, RuntimeError) as exc:
        raise NumericalError(f"pre-training failed: {exc}") from exc

    # pre-trained filter predicts the stream after the training region
    pre_state = from_pretrained(
        params, cfg["pretrain"]["learning_rate"], cfg["pretrain"]["freeze_dict"]
    )
    stream = embed(series, d)
    pre_pairs_start = n_train - d
    pre_data = dataclasses.replace(
        stream,
        inputs=stream.inputs[pre_pairs_start:],
        targets=stream.targets[pre_pairs_start:],
    )
    pre_state, pre_preds = klms_run(pre_state, pre_data)
    pre_mse = mse(TimeSeries(pre_preds), TimeSeries(series.values[n_train:]))

    # baseline: novelty KLMS from scratch, thresholds calibrated to the same
    # dictionary size, lengthscale from the median-distance heuristic
    sigma_b = _build_klms_sigma(cfg, stream.inputs)
    novelty = calibrate_novelty(stream.inputs, cfg["model"]["dict_size"])
    base_state = empty_state(d, sigma_b, cfg["pretrain"]["baseline_learning_rate"], novelty)
    base_state, base_preds = klms_run(base_state, stream)
    base_mse = mse(
        TimeSeries(base_preds), TimeSeries(series.values[d:]), start_index=n_train - d
    )

    write_predictions_csv(
        os.path.join(outdir, "predictions.csv"),
        np.arange(n_train, len(series)),
        series.values[n_train:],
        pre_preds,
    )
    write_predictions_csv(
        os.path.join(outdir, "predictions_baseline.csv"),
        np.arange(d, len(series)),
        series.values[d:],
        base_preds,
    )
    write_gram_csv(os.path.join(outdir, "gram.csv"), gram(pre_state.centres, pre_state.sigma_k))
    write_gram_csv(
        os.path.join(outdir, "gram_baseline.csv"), gram(base_state.centres, base_state.sigma_k)
    )
    extras = {
        "baseline": {
            "mse": base_mse,
            "dict_size": base_state.dict_size,
            "gram_offdiag_energy": _offdiag_or_zero(base_state.centres, base_state.sigma_k),
            "sigma_k": base_state.sigma_k,
            "novelty_delta_dist": novelty.delta_dist,
        }
    }
    energy = _offdiag_or_zero(pre_state.centres, pre_state.sigma_k)
    return pre_mse, pre_state.dict_size, energy, extras


def run_adaptive(cfg: dict, outdir: str) -> tuple[float, int, float, dict]:
    series = build_series(cfg)
    seed = cfg["experiment"]["seed"]
    acfg = AdaptiveConfig(
        order=cfg["model"]["order"],
        dict_size=cfg["model"]["dict_size"],
        rho=cfg["adaptive"]["rho"],
        window_len=cfg["adaptive"]["window_len"],
        mcmc=_mcmc_cfg(cfg, seed),
        hyper=_hyper(cfg),
        map_cfg=_map_cfg(cfg, seed),
    )
    try:
        preds, states = adaptive_run(series, acfg)
    except (FloatingPointError, RuntimeError, ValueError) as exc:
        raise NumericalError(str(exc)) from exc
    w = acfg.window_len
    indices = np.arange(w, len(series))
    start = max(cfg["klms"]["mse_start_index"] - w, 0)
    value = mse(preds, TimeSeries(series.values[w:]), start_index=start)
    theta = states[-1].theta_online
    write_predictions_csv(
        os.path.join(outdir, "predictions.csv"), indices, series.values[w:], preds.values
    )
    write_gram_csv(os.path.join(outdir, "gram.csv"), gram(theta.centres, theta.sigma_k))
    energy = _offdiag_or_zero(theta.centres, theta.sigma_k)
    return value, theta.n_centres, energy, {"n_windows": len(states)}


_RUNNERS = {
    "fit-offline": run_fit_offline,
    "pretrain-klms": run_pretrain_klms,
    "klms": run_klms,
    "adaptive": run_adaptive,
}


def run_experiment(
    config_path: Optional[str],
    overrides: Optional[dict[str, str]] = None,
    kind: Optional[str] = None,
) -> ExperimentReport:
    """Run one experiment end to end and write its output files.

    Writes predictions.csv, gram.csv and report.json into the configured
    output directory and returns the report.
    """
    cfg = load_config(config_path, overrides=overrides, kind=kind)
    outdir = cfg["experiment"]["outdir"]
    os.makedirs(outdir, exist_ok=True)
    t0 = time.perf_counter()
    value, dict_size, energy, extras = _RUNNERS[cfg["experiment"]["kind"]](cfg, outdir)
    runtime = time.perf_counter() - t0
    report = ExperimentReport(
        mse=value,
        dict_size=dict_size,
        gram_offdiag_energy=energy,
        runtime_seconds=runtime,
        config_echo=cfg,
        extras=extras,
    )
    with open(os.path.join(outdir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def sweep_learning_rate(
    config_path: Optional[str],
    overrides: Optional[dict[str, str]] = None,
    kind: Optional[str] = None,
    key: Optional[str] = None,
    grid: Optional[list[float]] = None,
) -> dict:
    """Re-run an experiment over a learning-rate grid and record each MSE.

    ``key`` is the dotted config field to sweep; defaults to the natural
    learning-rate field of the experiment kind. Writes sweep.json next to
    the usual outputs with the grid, per-rate MSEs and the best setting.
    """
    base = load_config(config_path, overrides=overrides, kind=kind)
    resolved_kind = base["experiment"]["kind"]
    if key is None:
        key = {
            "klms": "klms.learning_rate",
            "pretrain-klms": "pretrain.learning_rate",
        }.get(resolved_kind)
        if key is None:
            raise ConfigError(f"sweep-lr does not apply to kind {resolved_kind!r}")
    if grid is None:
        grid = [float(x) for x in np.logspace(-3, -1, 9)]
    entries = []
    for eta in grid:
        ov = dict(overrides or {})
        ov[key] = repr(float(eta))
        report = run_experiment(config_path, overrides=ov, kind=kind)
        entries.append({"learning_rate": float(eta), "mse": report.mse})
    best = min(entries, key=lambda e: e["mse"])
    outdir = base["experiment"]["outdir"]
    os.makedirs(outdir, exist_ok=True)
    result = {"key": key, "entries": entries, "best": best}
    with open(os.path.join(outdir, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result
