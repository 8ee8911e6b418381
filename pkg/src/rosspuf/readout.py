"""Tapped-delay feature construction and the ridge-regression readout.

Each usable symbol contributes one row of n_channels * taps + 1 features:
the current and previous (taps-1) detector samples of every channel plus the
direct input sample.  Features are standardized per column and the target is
centered before the ridge solve, so the trained weights live on a common
scale across challenge-response pairs - which is what lets a single ensemble
calibration turn them into bits later.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .photonics import StateMatrix


@dataclass(frozen=True)
class RidgeConfig:
    taps: int = 11
    washout: int = 20
    lam: float = 1e-6

    def __post_init__(self):
        if self.taps < 1:
            raise ValueError(f"taps must be >= 1, got {self.taps}")
        if self.washout < self.taps - 1:
            raise ValueError(
                f"washout must be >= taps-1 = {self.taps - 1}, got {self.washout}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class FeatureMatrix:
    """Regression design matrix plus the row/column bookkeeping."""

    values: np.ndarray  # [n_rows, n_channels*taps + 1]
    taps: int
    n_channels: int
    first_symbol: int  # symbol index of row 0 (== washout)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]


@dataclass
class Response:
    """Trained readout for one challenge: weights, task error, derived key."""

    weights: np.ndarray
    nmse: float
    key: "object | None" = None  # BinaryKey, filled by the key generator
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None
    target_mean: float = 0.0
    extras: dict = field(default_factory=dict)


def build_features(states: StateMatrix | np.ndarray, x_in: np.ndarray,
                   cfg: RidgeConfig = RidgeConfig()) -> FeatureMatrix:
    """Assemble the tapped-delay design matrix.

    Row t (t >= washout) holds, channel by channel, the samples at symbols
    t, t-1, ..., t-(taps-1), followed by x_in[t].
    """
    samples = states.samples if isinstance(states, StateMatrix) else np.asarray(states)
    x_in = np.asarray(x_in, dtype=float)
    n_symbols, n_channels = samples.shape
    if x_in.size != n_symbols:
        raise ValueError(
            f"states ({n_symbols} symbols) and input ({x_in.size}) length mismatch")
    if n_symbols <= cfg.washout:
        raise ValueError(f"need more than washout={cfg.washout} symbols, got {n_symbols}")

    rows = n_symbols - cfg.washout
    out = np.empty((rows, n_channels * cfg.taps + 1))
    t = np.arange(cfg.washout, n_symbols)
    for ch in range(n_channels):
        for tap in range(cfg.taps):
            out[:, ch * cfg.taps + tap] = samples[t - tap, ch]
    out[:, -1] = x_in[t]
    if not np.all(np.isfinite(out)):
        raise ValueError("feature matrix contains non-finite entries")
    return FeatureMatrix(values=out, taps=cfg.taps, n_channels=n_channels,
                         first_symbol=cfg.washout)


def standardize_columns(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center/scale each column; constant columns get unit scale."""
    mean = values.mean(axis=0)
    scale = values.std(axis=0)
    scale = np.where(scale > 0.0, scale, 1.0)
    return (values - mean) / scale, mean, scale


def ridge_fit(features: np.ndarray, targets: np.ndarray, lam: float) -> np.ndarray:
    """argmin ||F w - y||^2 + lam ||w||^2 via the normal equations.

    The Gram matrix is factorized with a symmetric positive-definite solver;
    at lam = 0 a singular system raises a LinAlgError advising lam > 0.
    """
    f = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if f.shape[0] != y.shape[0]:
        raise ValueError(f"rows {f.shape[0]} vs targets {y.shape[0]} mismatch")
    gram = f.T @ f
    if lam > 0.0:
        gram = gram + lam * np.eye(f.shape[1])
    rhs = f.T @ y
    try:
        cho = scipy.linalg.cho_factor(gram, check_finite=False)
        return scipy.linalg.cho_solve(cho, rhs, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"normal equations not positive definite ({exc}); use lambda > 0") from exc


def nmse(pred: np.ndarray, target: np.ndarray) -> float:
    """mean((pred-target)^2) / var(target)."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError("prediction/target length mismatch")
    var = float(target.var())
    if var == 0.0:
        raise ValueError("target variance is zero, NMSE undefined")
    return float(np.mean((pred - target) ** 2) / var)


def fit_readout(states: StateMatrix | np.ndarray, x_in: np.ndarray,
                y_out: np.ndarray, cfg: RidgeConfig = RidgeConfig()) -> Response:
    """Standardized ridge fit of the readout; returns weights and task NMSE."""
    feats = build_features(states, x_in, cfg)
    y = np.asarray(y_out, dtype=float)[feats.first_symbol:]
    values, mean, scale = standardize_columns(feats.values)
    y_mean = float(y.mean())
    w = ridge_fit(values, y - y_mean, cfg.lam)
    pred = values @ w + y_mean
    return Response(weights=w, nmse=nmse(pred, y),
                    feature_mean=mean, feature_scale=scale, target_mean=y_mean)
