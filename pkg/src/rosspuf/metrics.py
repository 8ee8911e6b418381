"""Reproducibility and identifiability statistics over binary responses.

Intra-challenge distances measure how much detector noise perturbs repeated
keys from one challenge; inter-challenge distances measure how different the
keys of distinct challenges are.  The two populations never overlap at desk
scale, so the equal error rate is extrapolated from Gaussian fits of both.
Sweep harnesses grid these statistics over ADC resolution, bits per weight
and ring count, with a fully recorded seed schedule.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from . import keygen, photonics
from ._util import derive_seed
from .challenge import Challenge, make_challenge
from .keygen import BinaryKey, CalibrationProfile
from .photonics import DetectionConfig, DeviceProfile, NominalConfig
from .readout import RidgeConfig

MAX_PAIRS = 1_000_000
ADC_FEASIBLE_BITS = 10  # state of the art at 40 GSa/s


@dataclass(frozen=True)
class HammingStats:
    mean: float
    std: float
    count: int
    histogram: np.ndarray  # counts per bin
    bin_edges: np.ndarray

    @classmethod
    def from_fractions(cls, fractions: np.ndarray, bins: int = 100) -> "HammingStats":
        fractions = np.asarray(fractions, dtype=float)
        if fractions.size == 0:
            raise ValueError("no distance samples")
        hist, edges = np.histogram(fractions, bins=bins, range=(0.0, 1.0))
        return cls(mean=float(fractions.mean()), std=float(fractions.std()),
                   count=fractions.size, histogram=hist, bin_edges=edges)


@dataclass(frozen=True)
class EerReport:
    intra: HammingStats
    inter: HammingStats
    threshold: float
    eer: float
    degenerate: bool = False
    below_empirical_floor: bool = False


def _as_bits(key) -> np.ndarray:
    return key.bits if isinstance(key, BinaryKey) else np.asarray(key, dtype=np.uint8)


def hamming_frac(a, b) -> float:
    """popcount(a xor b) / length, for equal-length keys."""
    a = _as_bits(a)
    b = _as_bits(b)
    if a.size != b.size:
        raise ValueError(f"key length mismatch: {a.size} vs {b.size}")
    return float(np.count_nonzero(a != b)) / a.size


def pairwise_fractions(keys, max_pairs: int = MAX_PAIRS, seed: int = 0) -> np.ndarray:
    """All-pairs fractional Hamming distances, subsampled past ``max_pairs``."""
    mat = np.asarray([_as_bits(k) for k in keys], dtype=np.float64)
    n, length = mat.shape
    if n < 2:
        raise ValueError("need at least two keys")
    overlap = mat @ mat.T  # ones shared
    weight = np.diag(overlap)
    dist = weight[:, None] + weight[None, :] - 2.0 * overlap
    iu = np.triu_indices(n, k=1)
    fractions = dist[iu] / length
    if fractions.size > max_pairs:
        rng = np.random.default_rng(seed)
        fractions = rng.choice(fractions, size=max_pairs, replace=False)
    return fractions


def collect_intra(device: DeviceProfile, challenge: Challenge, trials: int,
                  det_cfg: DetectionConfig, ridge_cfg: RidgeConfig,
                  profile: CalibrationProfile, sweep_seed: int = 0) -> HammingStats:
    """Distances over ``trials`` re-interrogations of one challenge.

    The optical stage is computed once; each trial only re-draws the seeded
    detector noise before sampling, quantization and the readout fit.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    keys = intra_keys(device, challenge, trials, det_cfg, ridge_cfg, profile, sweep_seed)
    return HammingStats.from_fractions(pairwise_fractions(keys))


def intra_keys(device, challenge, trials, det_cfg, ridge_cfg, profile,
               sweep_seed: int = 0) -> list[BinaryKey]:
    analog = photonics.analog_front_end(device, challenge.modulator_input(), det_cfg)
    keys = []
    for t in range(trials):
        resp = keygen.respond(device, challenge, det_cfg, ridge_cfg, profile,
                              analog=analog,
                              noise_seed=derive_seed(sweep_seed, "intra-noise", t))
        keys.append(resp.key)
    return keys


def collect_inter(device: DeviceProfile, challenge_seeds, det_cfg: DetectionConfig,
                  ridge_cfg: RidgeConfig, profile: CalibrationProfile,
                  sweep_seed: int = 0, challenge_length: int = 2000) -> HammingStats:
    """Distances across one response per challenge seed (fresh noise seeds)."""
    seeds = list(challenge_seeds)
    if len(seeds) < 2:
        raise ValueError("need at least 2 challenge seeds")
    keys = []
    for i, cs in enumerate(seeds):
        ch = make_challenge(cs, challenge_length)
        resp = keygen.respond(device, ch, det_cfg, ridge_cfg, profile,
                              noise_seed=derive_seed(sweep_seed, "inter-noise", i))
        keys.append(resp.key)
    return HammingStats.from_fractions(pairwise_fractions(keys))


def _q_tail(z: float) -> float:
    return float(0.5 * erfc(z / np.sqrt(2.0)))


def eer_fit(intra: HammingStats, inter: HammingStats) -> EerReport:
    """Gaussian-fit equal error rate of the two distance populations.

    With N(mu_i, sigma_i) and N(mu_e, sigma_e) the rates cross at
    tau = (mu_i*sigma_e + mu_e*sigma_i)/(sigma_i + sigma_e), where the two
    tail probabilities coincide by construction.  Degenerate fits (zero
    spread) report 0 or 0.5 with a flag instead of failing.
    """
    if intra.std == 0.0 or inter.std == 0.0:
        equal = intra.mean == inter.mean
        return EerReport(intra=intra, inter=inter,
                         threshold=(intra.mean + inter.mean) / 2.0,
                         eer=0.5 if equal else 0.0, degenerate=True)
    tau = (intra.mean * inter.std + inter.mean * intra.std) / (intra.std + inter.std)
    eer = _q_tail((tau - intra.mean) / intra.std)
    floor = 1.0 / (intra.count + inter.count)
    return EerReport(intra=intra, inter=inter, threshold=float(tau), eer=eer,
                     below_empirical_floor=eer < floor)


# ---------------------------------------------------------------------------
# sweep harnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepBudget:
    """Trial counts for one sweep cell; desk-scale defaults."""

    calibration_crps: int = 32
    intra_trials: int = 30
    inter_crps: int = 40
    challenge_length: int = 2000
    master_seed: int = 0
    mean_shrink: float = 0.7


def _weights_for_cell(device, det_cfg, ridge_cfg, budget, analog_cache):
    """Calibration, intra and inter weight vectors at one ADC resolution.

    Challenges (and their analog traces) are shared across cells; only the
    noise seeds and the digitization differ, so the cache key is the
    challenge seed.
    """
    seed = budget.master_seed

    def analog_for(cs):
        if cs not in analog_cache:
            ch = make_challenge(cs, budget.challenge_length)
            analog_cache[cs] = (ch, photonics.analog_front_end(
                device, ch.modulator_input(), det_cfg))
        return analog_cache[cs]

    calib_seeds = [derive_seed(seed, "grid-calib-challenge", i)
                   for i in range(budget.calibration_crps)]
    _, first_analog = analog_for(calib_seeds[0])
    adc_ranges = photonics.observed_adc_ranges(first_analog)

    m = det_cfg.adc_bits
    calib = keygen.harvest_weights(
        device, det_cfg, ridge_cfg, calib_seeds,
        [derive_seed(seed, "grid-calib-noise", m, i) for i in range(len(calib_seeds))],
        adc_ranges, budget.challenge_length, analog_cache)

    intra_seed = derive_seed(seed, "grid-intra-challenge")
    analog_for(intra_seed)
    intra = keygen.harvest_weights(
        device, det_cfg, ridge_cfg, [intra_seed] * budget.intra_trials,
        [derive_seed(seed, "grid-intra-noise", m, t) for t in range(budget.intra_trials)],
        adc_ranges, budget.challenge_length, analog_cache)

    inter_seeds = [derive_seed(seed, "grid-inter-challenge", i)
                   for i in range(budget.inter_crps)]
    inter = keygen.harvest_weights(
        device, det_cfg, ridge_cfg, inter_seeds,
        [derive_seed(seed, "grid-inter-noise", m, i) for i in range(len(inter_seeds))],
        adc_ranges, budget.challenge_length, analog_cache)
    return calib, intra, inter, adc_ranges


def sweep_bit_grid(device: DeviceProfile, m_bits, n_bits,
                   det_cfg: DetectionConfig = DetectionConfig(),
                   ridge_cfg: RidgeConfig = RidgeConfig(),
                   budget: SweepBudget = SweepBudget(),
                   encoding: str = "natural") -> list[dict]:
    """Intra/inter/EER statistics per (m_bit, n_bit) cell.

    Weight vectors are harvested once per ADC resolution and re-quantized
    for every bits-per-weight value, which is exact: n_bit only affects the
    binarization stage.
    """
    m_bits = list(m_bits)
    n_bits = list(n_bits)
    if any(not 1 <= m <= 16 for m in m_bits) or any(not 1 <= b <= 16 for b in n_bits):
        raise ValueError("m_bit and n_bit ranges must lie within [1,16]")
    rows = []
    analog_cache: dict = {}
    for m in m_bits:
        cell_cfg = dataclasses.replace(det_cfg, adc_bits=m)
        calib_w, intra_w, inter_w, _ = _weights_for_cell(
            device, cell_cfg, ridge_cfg, budget, analog_cache)
        base = keygen.calibrate_indexed(calib_w, budget.mean_shrink,
                                        n_bit=n_bits[0], encoding=encoding)
        for n in n_bits:
            profile = dataclasses.replace(base, n_bit=n)
            intra_keys_ = [keygen.key_from_weights(w, profile) for w in intra_w]
            inter_keys_ = [keygen.key_from_weights(w, profile) for w in inter_w]
            intra = HammingStats.from_fractions(pairwise_fractions(intra_keys_))
            inter = HammingStats.from_fractions(pairwise_fractions(inter_keys_))
            report = eer_fit(intra, inter)
            rows.append({
                "m_bit": m, "n_bit": n,
                "intra_mean": intra.mean, "intra_std": intra.std,
                "inter_mean": inter.mean, "inter_std": inter.std,
                "eer": report.eer,
                "feasible": int(m <= ADC_FEASIBLE_BITS),
            })
    return rows


def sweep_mrr_count(counts, nominal: NominalConfig = NominalConfig(),
                    fab_seed: int = 0,
                    det_cfg: DetectionConfig = DetectionConfig(adc_bits=3),
                    ridge_cfg: RidgeConfig = RidgeConfig(),
                    budget: SweepBudget = SweepBudget(),
                    n_bit: int = 4, encoding: str = "natural") -> list[dict]:
    """Intra/inter/EER statistics against rings per node.

    Each count fabricates a fresh variant under the same fab seed policy;
    the key length scales as (channels*taps + 1)*n_bit.
    """
    rows = []
    for count in counts:
        if count < 1:
            raise ValueError(f"MRR count must be >= 1, got {count}")
        variant = dataclasses.replace(nominal, mrrs_per_node=int(count))
        device = photonics.fabricate(variant, fab_seed)
        calib_w, intra_w, inter_w, _ = _weights_for_cell(
            device, det_cfg, ridge_cfg, budget, {})
        profile = keygen.calibrate_indexed(calib_w, budget.mean_shrink,
                                           n_bit=n_bit, encoding=encoding)
        intra_keys_ = [keygen.key_from_weights(w, profile) for w in intra_w]
        inter_keys_ = [keygen.key_from_weights(w, profile) for w in inter_w]
        intra = HammingStats.from_fractions(pairwise_fractions(intra_keys_))
        inter = HammingStats.from_fractions(pairwise_fractions(inter_keys_))
        report = eer_fit(intra, inter)
        n_channels = device.n_channels
        rows.append({
            "mrrs_per_node": int(count), "n_channels": n_channels,
            "key_bits": (n_channels * ridge_cfg.taps + 1) * n_bit,
            "intra_mean": intra.mean, "intra_std": intra.std,
            "inter_mean": inter.mean, "inter_std": inter.std,
            "eer": report.eer,
        })
    return rows
