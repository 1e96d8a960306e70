"""Time-series generation, CSV ingestion, delay embedding and slicing."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    """Ordered scalar observations."""

    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) < 1:
            raise ValueError("a time series is a non-empty 1-D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite value in series {self.name!r}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class EmbeddedDataset:
    """Delay-embedded input/target pairs: inputs (M, d), targets (M,)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.ndim != 2 or self.targets.ndim != 1:
            raise ValueError("inputs must be (M, d), targets (M,)")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets disagree in length")
        if self.inputs.shape[0] < 1:
            raise ValueError("empty dataset")

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def order(self) -> int:
        return self.inputs.shape[1]


@dataclass
class LorenzConfig:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    dt: float = 0.01
    n_steps: int = 1000
    initial_state: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")


def _lorenz_rhs(state: np.ndarray, sigma: float, rho: float, beta: float) -> np.ndarray:
    x, y, z = state
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def lorenz_generate(cfg: LorenzConfig) -> TimeSeries:
    """First channel of the Lorenz system, integrated with classical RK4.

    Sample k is the x-coordinate at time k*dt, starting from the initial
    state; the output has exactly ``cfg.n_steps`` samples.
    """
    state = np.asarray(cfg.initial_state, dtype=float)
    out = np.empty(cfg.n_steps)
    out[0] = state[0]
    h = cfg.dt
    for k in range(1, cfg.n_steps):
        k1 = _lorenz_rhs(state, cfg.sigma, cfg.rho, cfg.beta)
        k2 = _lorenz_rhs(state + 0.5 * h * k1, cfg.sigma, cfg.rho, cfg.beta)
        k3 = _lorenz_rhs(state + 0.5 * h * k2, cfg.sigma, cfg.rho, cfg.beta)
        k4 = _lorenz_rhs(state + h * k3, cfg.sigma, cfg.rho, cfg.beta)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise FloatingPointError(f"integration diverged at step {k}")
        out[k] = state[0]
    return TimeSeries(out, name="lorenz")


def embed(series: TimeSeries, d: int) -> EmbeddedDataset:
    """Delay embedding: x_k = values[k : k+d], y_k = values[k+d]."""
    if d < 1:
        raise ValueError("filter order d must be at least 1")
    v = series.values
    if len(v) <= d:
        raise ValueError(f"series of length {len(v)} too short for order d={d}")
    m = len(v) - d
    idx = np.arange(m)[:, None] + np.arange(d)[None, :]
    return EmbeddedDataset(inputs=v[idx], targets=v[d:])


def load_csv(path: str) -> TimeSeries:
    """Read a scalar series from CSV.

    Accepted headers: ``value`` (single column) or ``t,value`` (second
    column used). Decimal point, LF or CRLF endings.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such data file: {path}")
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip().lower() for h in header]
        if header == ["value"]:
            col = 0
        elif header == ["t", "value"]:
            col = 1
        else:
            raise ValueError(f"{path}: unrecognised header {header!r}, expected 'value' or 't,value'")
        for rownum, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) <= col:
                raise ValueError(f"{path}: row {rownum} has too few columns")
            try:
                v = float(row[col])
            except ValueError:
                raise ValueError(f"{path}: row {rownum}: cannot parse {row[col]!r} as a number") from None
            if not math.isfinite(v):
                raise ValueError(f"{path}: row {rownum}: non-finite value {row[col]!r}")
            values.append(v)
    if not values:
        raise ValueError(f"{path}: no data rows")
    return TimeSeries(np.array(values), name=os.path.basename(path))


def save_csv(series: TimeSeries, path: str) -> None:
    """Write a series in the single-column format accepted by load_csv."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("value\n")
        for v in series.values:
            fh.write(f"{float(v)!r}\n")


def standardize(series: TimeSeries) -> tuple[TimeSeries, float, float]:
    """Shift/scale to zero mean and unit (population) standard deviation.

    Returns the transformed series together with the original mean and
    std so the transform can be inverted.
    """
    v = series.values
    if len(v) < 2:
        raise ValueError("need at least two samples to standardize")
    mean = float(np.mean(v))
    std = float(np.std(v))
    if std == 0.0:
        raise ValueError("constant series cannot be standardized (std = 0)")
    return TimeSeries((v - mean) / std, name=series.name), mean, std


def windows(series: TimeSeries, width: int, stride: int) -> list[TimeSeries]:
    """Consecutive slices [k*stride, k*stride + width); a trailing partial window is dropped."""
    if width < 1 or stride < 1:
        raise ValueError("width and stride must be positive")
    v = series.values
    if width > len(v):
        raise ValueError(f"window width {width} exceeds series length {len(v)}")
    out = []
    start = 0
    while start + width <= len(v):
        out.append(TimeSeries(v[start : start + width], name=series.name))
        start += stride
    return out


def synthetic_wind(
    n_samples: int,
    seed: int,
    amp_slow: float = 1.0,
    period_slow: float = 400.0,
    amp_fast: float = 0.5,
    period_fast: float = 90.0,
    ar_coeff: float = 0.9,
    noise_std: float = 0.15,
) -> TimeSeries:
    """Wind-flavoured synthetic series: two slow sinusoids plus AR(1) noise.

    The phases and the noise stream are drawn from the seeded generator,
    so different seeds give genuinely different realisations.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples, dtype=float)
    phase1, phase2 = rng.uniform(0.0, 2.0 * np.pi, size=2)
    base = amp_slow * np.sin(2.0 * np.pi * t / period_slow + phase1)
    base += amp_fast * np.sin(2.0 * np.pi * t / period_fast + phase2)
    ar = np.empty(n_samples)
    innov = rng.normal(0.0, noise_std, size=n_samples)
    # start the AR(1) component at its stationary distribution
    ar[0] = innov[0] / math.sqrt(1.0 - ar_coeff**2)
    for k in range(1, n_samples):
        ar[k] = ar_coeff * ar[k - 1] + innov[k]
    return TimeSeries(base + ar, name=f"wind-{seed}")
