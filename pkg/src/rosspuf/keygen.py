"""Weight-to-key conversion and the end-to-end challenge->key pipeline.

Trained readout weights are mapped onto [0,1] by a calibrated CDF and cut
into 2^n_bit equal bins; each weight's bin index, encoded on n_bit bits,
concatenates into the binary response key.

Three calibration grades are supported, all frozen into an immutable
:class:`CalibrationProfile` by a one-time ensemble pass:

* ``pooled``    - single mean/sigma over the pooled ensemble and the
  standard-normal CDF.  Simplest, but tapped-readout weights are strongly
  correlated across indices and per-index means survive, so pooled keys
  carry visible structure.
* ``indexed``   - per-index mean/sigma with a configurable mean-shrink
  factor that deliberately retains a fraction of the index-mean structure.
  Used by the identifiability sweeps, where that structure is the signal.
* ``empirical`` - per-index empirical quantile tables on both sides of an
  eigenvalue-floored ZCA whitening, cross-fitted inside the ensemble.
  Removes index-to-index correlation and marginal shape error down to the
  ensemble resolution; this is the grade whose concatenated keys satisfy
  the randomness battery.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import photonics, readout
from ._util import bits_to_hex, derive_seed, hex_to_bits
from .challenge import Challenge, make_challenge
from .photonics import DetectionConfig, DeviceProfile
from .readout import Response, RidgeConfig


class CalibrationError(RuntimeError):
    """Weight ensemble unusable (degenerate spread or too small)."""


QUANTILE_KNOTS = 257


@dataclass(frozen=True)
class CalibrationProfile:
    """Ensemble statistics and quantization settings, fixed after calibration.

    ``adc_ranges`` is the per-channel ADC full scale recorded during the
    calibration pass; it travels with the profile so every later response
    uses the same converter setting.  Which of the optional field groups is
    populated depends on ``mode``.
    """

    mu: float
    sigma: float
    n_bit: int = 4
    encoding: str = "natural"
    mode: str = "pooled"
    ensemble_size: int = 0
    adc_ranges: np.ndarray | None = None
    seed_schedule: dict = field(default_factory=dict)
    # indexed mode
    index_mu: np.ndarray | None = None
    index_sigma: np.ndarray | None = None
    mean_shrink: float = 0.0
    # empirical mode
    table_in: np.ndarray | None = None     # [n_weights, knots]
    whitening: np.ndarray | None = None    # [n_weights, n_weights]
    table_out: np.ndarray | None = None    # [n_weights, knots]
    clip_eps: float = 1e-4

    def __post_init__(self):
        if self.sigma <= 0:
            raise CalibrationError(f"sigma must be > 0, got {self.sigma}")
        if not 1 <= self.n_bit <= 16:
            raise ValueError(f"n_bit must be in [1,16], got {self.n_bit}")
        if self.encoding not in ("natural", "gray"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if self.mode not in ("pooled", "indexed", "empirical"):
            raise ValueError(f"unknown calibration mode {self.mode!r}")
        if not 0.0 <= self.mean_shrink <= 1.0:
            raise ValueError("mean_shrink must lie in [0, 1]")


@dataclass(frozen=True)
class BinaryKey:
    """Packed response bits: weight_count bins of n_bit bits each."""

    bits: np.ndarray  # uint8 0/1, length = weight_count * bits_per_weight
    bits_per_weight: int
    weight_count: int

    def __post_init__(self):
        if self.bits.size != self.weight_count * self.bits_per_weight:
            raise ValueError("key length must equal weight_count * bits_per_weight")

    @property
    def n_bits(self) -> int:
        return self.bits.size

    def to_hex(self) -> str:
        return bits_to_hex(self.bits)

    @classmethod
    def from_hex(cls, s: str, bits_per_weight: int, weight_count: int) -> "BinaryKey":
        bits = hex_to_bits(s, bits_per_weight * weight_count)
        return cls(bits=bits, bits_per_weight=bits_per_weight, weight_count=weight_count)


# ---------------------------------------------------------------------------
# calibration builders
# ---------------------------------------------------------------------------

def _as_ensemble(weight_ensemble) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(weight_ensemble, dtype=float))
    if arr.shape[0] < 2:
        raise CalibrationError("ensemble needs at least 2 weight vectors")
    return arr


def calibrate(weight_ensemble, n_bit: int = 4,
              encoding: str = "natural") -> CalibrationProfile:
    """Pooled sample mean/std of an ensemble of weight vectors."""
    arr = _as_ensemble(weight_ensemble)
    mu = float(arr.mean())
    sigma = float(arr.std())
    if sigma <= 0.0:
        raise CalibrationError("degenerate weight ensemble (zero spread)")
    return CalibrationProfile(mu=mu, sigma=sigma, n_bit=n_bit, encoding=encoding,
                              mode="pooled", ensemble_size=arr.shape[0])


def calibrate_indexed(weight_ensemble, mean_shrink: float = 0.7, n_bit: int = 4,
                      encoding: str = "natural") -> CalibrationProfile:
    """Per-index statistics with partial retention of the index means.

    The whitening center for index k is mu + mean_shrink*(mu_k - mu): at
    shrink 0 this degenerates to the pooled profile's centering, at 1 the
    index-mean structure is removed entirely.  The retained fraction keeps
    inter-challenge distances measurably below the ideal 0.5, which is what
    the identifiability heatmaps plot.
    """
    arr = _as_ensemble(weight_ensemble)
    mu_k = arr.mean(axis=0)
    sd_k = arr.std(axis=0)
    if not np.all(sd_k > 0):
        raise CalibrationError("degenerate ensemble: some index has zero spread")
    mu = float(arr.mean())
    center = mu + mean_shrink * (mu_k - mu)
    z = (arr - center) / sd_k
    return CalibrationProfile(
        mu=float(z.mean()), sigma=float(z.std()), n_bit=n_bit, encoding=encoding,
        mode="indexed", ensemble_size=arr.shape[0],
        index_mu=mu_k, index_sigma=sd_k, mean_shrink=mean_shrink)


def _quantile_tables(arr: np.ndarray, knots: int) -> np.ndarray:
    qs = np.linspace(0.0, 1.0, knots)
    return np.quantile(arr, qs, axis=0).T.copy()  # [n_weights, knots]


def _ecdf_apply(values: np.ndarray, tables: np.ndarray, eps: float) -> np.ndarray:
    """Map values[..., k] through table k's interpolated empirical CDF."""
    values = np.atleast_2d(values)
    qs = np.linspace(0.0, 1.0, tables.shape[1])
    out = np.empty_like(values, dtype=float)
    for k in range(values.shape[1]):
        out[:, k] = np.interp(values[:, k], tables[k], qs)
    return np.clip(out, eps, 1.0 - eps)


def calibrate_empirical(weight_ensemble, n_bit: int = 4, encoding: str = "natural",
                        eigen_floor: float = 0.3, split: float = 0.6,
                        knots: int = QUANTILE_KNOTS) -> CalibrationProfile:
    """Quantile-whitening calibration for randomness-grade keys.

    Stage A maps每 weight index through its empirical CDF (estimated on the
    first ``split`` fraction of the ensemble) and gaussianizes; a ZCA
    whitening matrix with eigenvalues floored at ``eigen_floor`` times the
    median removes cross-index correlation; stage B's output quantile
    tables are fitted on the held-out remainder, so out-of-sample vectors
    land on a genuinely uniform scale.  The floor keeps the low-variance
    weight directions from amplifying detector noise into bit flips.
    """
    arr = _as_ensemble(weight_ensemble)
    n = arr.shape[0]
    n_fit = int(n * split)
    if n_fit < arr.shape[1] + 1 or n - n_fit < 8:
        raise CalibrationError(
            f"empirical calibration needs a larger ensemble: got {n} vectors for "
            f"{arr.shape[1]} weights")
    fit, held = arr[:n_fit], arr[n_fit:]
    eps = 0.5 / n_fit

    table_in = _quantile_tables(fit, knots)
    z0 = ndtri(_ecdf_apply(fit, table_in, eps))
    cov = z0.T @ z0 / (len(z0) - 1)
    lam, vec = np.linalg.eigh(cov)
    lam = np.maximum(lam, eigen_floor * np.median(lam))
    zca = (vec * (lam ** -0.5)) @ vec.T

    z1_held = ndtri(_ecdf_apply(held, table_in, eps)) @ zca.T
    table_out = _quantile_tables(z1_held, knots)
    return CalibrationProfile(
        mu=0.0, sigma=1.0, n_bit=n_bit, encoding=encoding,
        mode="empirical", ensemble_size=n,
        table_in=table_in, whitening=zca, table_out=table_out, clip_eps=eps)


# ---------------------------------------------------------------------------
# weight -> bits
# ---------------------------------------------------------------------------

def to_uniform(weights, profile: CalibrationProfile) -> np.ndarray:
    """Map a weight vector (or stack of them) onto [0, 1] per the profile.

    Pooled mode is the plain normal CDF u = ndtr((w - mu)/sigma); indexed
    mode whitens per index first; empirical mode runs the quantile/ZCA
    pipeline.  All modes are strictly increasing in each input coordinate.
    """
    w = np.asarray(weights, dtype=float)
    single = w.ndim == 1
    w2 = np.atleast_2d(w)
    if profile.mode == "pooled":
        u = ndtr((w2 - profile.mu) / profile.sigma)
    elif profile.mode == "indexed":
        z = (w2 - _indexed_center(profile)) / profile.index_sigma
        u = ndtr((z - profile.mu) / profile.sigma)
    else:
        z0 = ndtri(_ecdf_apply(w2, profile.table_in, profile.clip_eps))
        z1 = z0 @ profile.whitening.T
        u = _ecdf_apply(z1, profile.table_out, profile.clip_eps)
    return u[0] if single else u


def _indexed_center(profile: CalibrationProfile) -> np.ndarray:
    mu_k = np.asarray(profile.index_mu)
    # global mean of the original ensemble is recoverable from the stored
    # index means; shrink pulls each index center toward it
    mu_g = float(mu_k.mean())
    return mu_g + profile.mean_shrink * (mu_k - mu_g)


def _gray(idx: np.ndarray) -> np.ndarray:
    return idx ^ (idx >> 1)


def quantize_bits(u_values, n_bit: int, encoding: str = "natural") -> BinaryKey:
    """Cut [0,1] into 2^n_bit bins and emit each bin index on n_bit bits."""
    u = np.asarray(u_values, dtype=float).ravel()
    if u.size == 0:
        raise ValueError("no values to quantize")
    if u.min() < 0.0 or u.max() > 1.0:
        raise ValueError(f"values must lie in [0,1], got [{u.min()},{u.max()}]")
    levels = 1 << n_bit
    idx = np.minimum(np.floor(u * levels).astype(np.int64), levels - 1)
    if encoding == "gray":
        idx = _gray(idx)
    elif encoding != "natural":
        raise ValueError(f"unknown encoding {encoding!r}")
    shifts = np.arange(n_bit - 1, -1, -1)
    bits = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    return BinaryKey(bits=bits.ravel(), bits_per_weight=n_bit, weight_count=u.size)


def key_from_weights(weights, profile: CalibrationProfile) -> BinaryKey:
    return quantize_bits(to_uniform(weights, profile), profile.n_bit, profile.encoding)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def respond(device: DeviceProfile, challenge: Challenge, det_cfg: DetectionConfig,
            ridge_cfg: RidgeConfig = RidgeConfig(),
            profile: CalibrationProfile | None = None,
            analog: photonics.AnalogTrace | None = None,
            noise_seed: int | None = None) -> Response:
    """Evaluate one challenge-response pair end to end.

    simulate -> features -> ridge -> NMSE -> CDF -> bits.  Deterministic
    given (fab seed, challenge seed, noise seed).  ``analog`` short-circuits
    the optical stage when one challenge is re-interrogated under fresh
    noise seeds.  Without a calibration profile the readout is fitted but no
    key is attached.
    """
    if analog is None:
        analog = photonics.analog_front_end(device, challenge.modulator_input(), det_cfg)
    ranges = profile.adc_ranges if profile is not None else None
    states = photonics.digitize(analog, det_cfg, adc_ranges=ranges, noise_seed=noise_seed)
    resp = readout.fit_readout(states, challenge.x_in, challenge.y_out, ridge_cfg)
    if profile is not None:
        resp.key = key_from_weights(resp.weights, profile)
    return resp


def harvest_weights(device: DeviceProfile, det_cfg: DetectionConfig,
                    ridge_cfg: RidgeConfig, challenge_seeds, noise_seeds,
                    adc_ranges: np.ndarray, challenge_length: int = 2000,
                    analog_cache: dict | None = None) -> np.ndarray:
    """Fit one weight vector per (challenge seed, noise seed) pair."""
    out = []
    for cs, ns in zip(challenge_seeds, noise_seeds):
        if analog_cache is not None and cs in analog_cache:
            ch, analog = analog_cache[cs]
        else:
            ch = make_challenge(cs, challenge_length)
            analog = photonics.analog_front_end(device, ch.modulator_input(), det_cfg)
            if analog_cache is not None:
                analog_cache[cs] = (ch, analog)
        states = photonics.digitize(analog, det_cfg, adc_ranges=adc_ranges, noise_seed=ns)
        out.append(readout.fit_readout(states, ch.x_in, ch.y_out, ridge_cfg).weights)
    return np.asarray(out)


def calibrate_device(device: DeviceProfile, det_cfg: DetectionConfig,
                     ridge_cfg: RidgeConfig = RidgeConfig(),
                     n_bit: int = 4, encoding: str = "natural",
                     mode: str = "empirical", ensemble_size: int = 1000,
                     calibration_seed: int = 0, challenge_length: int = 2000,
                     mean_shrink: float = 0.7,
                     analog_cache: dict | None = None) -> CalibrationProfile:
    """One-time calibration pass for a device/configuration pair.

    Fixes the ADC full scale from the noiseless trace of the first
    calibration challenge, harvests ``ensemble_size`` seeded challenge
    responses, and builds the requested grade of profile.  The derived seed
    schedule is recorded so the pass can be replayed.
    """
    if ensemble_size < 2:
        raise CalibrationError("ensemble needs at least 2 challenge-response pairs")
    ch_seeds = [derive_seed(calibration_seed, "calib-challenge", i)
                for i in range(ensemble_size)]
    noise_seeds = [derive_seed(calibration_seed, "calib-noise", i)
                   for i in range(ensemble_size)]

    first = make_challenge(ch_seeds[0], challenge_length)
    analog = photonics.analog_front_end(device, first.modulator_input(), det_cfg)
    adc_ranges = photonics.observed_adc_ranges(analog)
    if analog_cache is not None:
        analog_cache[ch_seeds[0]] = (first, analog)

    weights = harvest_weights(device, det_cfg, ridge_cfg, ch_seeds, noise_seeds,
                              adc_ranges, challenge_length, analog_cache)
    if mode == "pooled":
        base = calibrate(weights, n_bit=n_bit, encoding=encoding)
    elif mode == "indexed":
        base = calibrate_indexed(weights, mean_shrink, n_bit=n_bit, encoding=encoding)
    elif mode == "empirical":
        base = calibrate_empirical(weights, n_bit=n_bit, encoding=encoding)
    else:
        raise ValueError(f"unknown calibration mode {mode!r}")
    return dataclasses.replace(
        base, adc_ranges=adc_ranges,
        seed_schedule={
            "calibration_seed": calibration_seed,
            "challenge_length": challenge_length,
            "mode": mode,
            "challenge_seeds": ch_seeds,
            "noise_seeds": noise_seeds,
        })


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _opt(arr):
    return None if arr is None else np.asarray(arr).tolist()


def profile_to_dict(p: CalibrationProfile) -> dict:
    return {
        "schema": "rosspuf/calibration/v1",
        "mode": p.mode,
        "mu": p.mu,
        "sigma": p.sigma,
        "n_bit": p.n_bit,
        "encoding": p.encoding,
        "ensemble_size": p.ensemble_size,
        "mean_shrink": p.mean_shrink,
        "clip_eps": p.clip_eps,
        "adc_ranges": _opt(p.adc_ranges),
        "index_mu": _opt(p.index_mu),
        "index_sigma": _opt(p.index_sigma),
        "table_in": _opt(p.table_in),
        "whitening": _opt(p.whitening),
        "table_out": _opt(p.table_out),
        "seed_schedule": p.seed_schedule,
    }


def profile_from_dict(d: dict) -> CalibrationProfile:
    if d.get("schema") != "rosspuf/calibration/v1":
        raise ValueError(f"unsupported calibration schema: {d.get('schema')!r}")

    def arr(key):
        v = d.get(key)
        return None if v is None else np.asarray(v, dtype=float)

    return CalibrationProfile(
        mu=d["mu"], sigma=d["sigma"], n_bit=d["n_bit"], encoding=d["encoding"],
        mode=d.get("mode", "pooled"), ensemble_size=d["ensemble_size"],
        mean_shrink=d.get("mean_shrink", 0.0), clip_eps=d.get("clip_eps", 1e-4),
        adc_ranges=arr("adc_ranges"), index_mu=arr("index_mu"),
        index_sigma=arr("index_sigma"), table_in=arr("table_in"),
        whitening=arr("whitening"), table_out=arr("table_out"),
        seed_schedule=d.get("seed_schedule", {}),
    )


def response_to_dict(resp: Response) -> dict:
    d = {
        "schema": "rosspuf/response/v1",
        "weights": np.asarray(resp.weights).tolist(),
        "nmse": resp.nmse,
        "key": None,
    }
    if resp.key is not None:
        d["key"] = {
            "hex": resp.key.to_hex(),
            "bits_per_weight": resp.key.bits_per_weight,
            "weight_count": resp.key.weight_count,
        }
    return d
