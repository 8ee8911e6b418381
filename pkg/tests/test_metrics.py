import dataclasses

import numpy as np
import pytest
from scipy import stats

import rosspuf as rp
from rosspuf.keygen import BinaryKey, calibrate_device
from rosspuf.metrics import (EerReport, HammingStats, SweepBudget, collect_inter,
                             collect_intra, eer_fit, hamming_frac, pairwise_fractions,
                             sweep_bit_grid, sweep_mrr_count)


def _key(bits):
    bits = np.asarray(bits, dtype=np.uint8)
    return BinaryKey(bits=bits, bits_per_weight=1, weight_count=bits.size)


def test_hamming_trivial_cases():
    a = np.random.default_rng(0).integers(0, 2, 500).astype(np.uint8)
    assert hamming_frac(_key(a), _key(a)) == 0.0
    assert hamming_frac(_key(a), _key(1 - a)) == 1.0
    with pytest.raises(ValueError):
        hamming_frac(_key(a), _key(a[:-1]))


def test_hamming_binomial_moments():
    rng = np.random.default_rng(1)
    n_pairs, length = 10_000, 1060
    a = rng.integers(0, 2, size=(n_pairs, length))
    b = rng.integers(0, 2, size=(n_pairs, length))
    fractions = np.mean(a != b, axis=1)
    width = 0.5 / np.sqrt(length)  # binomial std of the fractional distance
    assert abs(fractions.mean() - 0.5) < 5 * width / np.sqrt(n_pairs) + 1e-3
    assert abs(fractions.std() - width) < 0.001


def test_pairwise_fractions_match_direct_loop():
    rng = np.random.default_rng(2)
    keys = [_key(rng.integers(0, 2, 64)) for _ in range(8)]
    fractions = np.sort(pairwise_fractions(keys))
    direct = np.sort([hamming_frac(keys[i], keys[j])
                      for i in range(8) for j in range(i + 1, 8)])
    assert np.allclose(fractions, direct)


def test_pairwise_subsampling_is_deterministic():
    rng = np.random.default_rng(3)
    keys = [_key(rng.integers(0, 2, 32)) for _ in range(60)]
    a = pairwise_fractions(keys, max_pairs=100, seed=5)
    b = pairwise_fractions(keys, max_pairs=100, seed=5)
    assert a.size == 100
    assert np.array_equal(a, b)


def test_hamming_metric_axioms_on_random_triples():
    rng = np.random.default_rng(4)
    for _ in range(50):
        a, b, c = (rng.integers(0, 2, 128).astype(np.uint8) for _ in range(3))
        dab = hamming_frac(_key(a), _key(b))
        dba = hamming_frac(_key(b), _key(a))
        dac = hamming_frac(_key(a), _key(c))
        dcb = hamming_frac(_key(c), _key(b))
        assert dab == dba
        assert dab <= dac + dcb + 1e-12
    assert hamming_frac(_key(a), _key(a)) == 0.0


def _stats(mean, std, count=1000):
    rng = np.random.default_rng(0)
    return HammingStats.from_fractions(
        np.clip(rng.normal(mean, std, count), 0, 1))


def test_eer_identical_distributions():
    s = HammingStats(mean=0.3, std=0.02, count=100,
                     histogram=np.array([100]), bin_edges=np.array([0.0, 1.0]))
    report = eer_fit(s, s)
    assert report.threshold == pytest.approx(0.3)
    assert report.eer == pytest.approx(0.5)


def test_eer_paper_operating_point_closed_form():
    intra = HammingStats(mean=0.22, std=0.02, count=1000,
                         histogram=np.array([1000]), bin_edges=np.array([0.0, 1.0]))
    inter = HammingStats(mean=0.46, std=0.02, count=1000,
                         histogram=np.array([1000]), bin_edges=np.array([0.0, 1.0]))
    report = eer_fit(intra, inter)
    assert report.threshold == pytest.approx(0.34, abs=1e-12)
    # independent oracle: upper tail of the standard normal at z = 6
    expected = stats.norm.sf(6.0)
    assert report.eer == pytest.approx(expected, rel=1e-9)
    assert f"{report.eer:.3e}" == "9.866e-10"


def test_eer_increases_with_intra_spread():
    inter = HammingStats(mean=0.46, std=0.02, count=100,
                         histogram=np.array([100]), bin_edges=np.array([0.0, 1.0]))
    last = 0.0
    for sigma in (0.01, 0.02, 0.04, 0.06, 0.08):
        intra = HammingStats(mean=0.22, std=sigma, count=100,
                             histogram=np.array([100]), bin_edges=np.array([0.0, 1.0]))
        eer = eer_fit(intra, inter).eer
        assert eer > last
        last = eer


def test_eer_degenerate_flags():
    a = HammingStats(mean=0.1, std=0.0, count=10,
                     histogram=np.array([10]), bin_edges=np.array([0.0, 1.0]))
    b = HammingStats(mean=0.4, std=0.02, count=10,
                     histogram=np.array([10]), bin_edges=np.array([0.0, 1.0]))
    report = eer_fit(a, b)
    assert report.degenerate and report.eer == 0.0
    same = eer_fit(a, dataclasses.replace(a))
    assert same.degenerate and same.eer == 0.5


def test_eer_exchange_reflection_invariance():
    intra = _stats(0.2, 0.015)
    inter = _stats(0.45, 0.02)
    fwd = eer_fit(intra, inter)
    mirrored = eer_fit(
        dataclasses.replace(inter, mean=1.0 - inter.mean),
        dataclasses.replace(intra, mean=1.0 - intra.mean))
    assert fwd.eer == pytest.approx(mirrored.eer, rel=1e-9)


def test_hamming_stats_histogram_sums_to_count():
    fr = np.random.default_rng(5).uniform(0, 1, 321)
    st = HammingStats.from_fractions(fr)
    assert st.histogram.sum() == st.count == 321


@pytest.fixture(scope="module")
def small_profile(small_device, small_det, small_ridge):
    return calibrate_device(small_device, small_det, small_ridge, mode="indexed",
                            ensemble_size=10, calibration_seed=4,
                            challenge_length=300)


def test_collect_intra_noise_disabled_is_zero(small_device, small_ridge,
                                              small_challenge, small_profile):
    quiet = rp.DetectionConfig(adc_bits=8, samples_per_symbol=8,
                               thermal_noise_density=0.0, shot_noise_enabled=False)
    st = collect_intra(small_device, small_challenge, 4, quiet, small_ridge,
                       small_profile, sweep_seed=1)
    assert st.mean == 0.0


def test_collect_inter_runs_and_degenerate_seed_list(small_device, small_det,
                                                     small_ridge, small_profile):
    quiet = dataclasses.replace(small_det, thermal_noise_density=0.0,
                                shot_noise_enabled=False)
    st = collect_inter(small_device, [21, 22, 23], quiet, small_ridge, small_profile,
                       challenge_length=300)
    assert 0.0 < st.mean < 1.0
    same = collect_inter(small_device, [21, 21], quiet, small_ridge, small_profile,
                         challenge_length=300)
    assert same.mean == 0.0  # same challenge, noise off: intra-like behaviour


def test_sweep_bit_grid_singleton(small_device, small_det, small_ridge):
    budget = SweepBudget(calibration_crps=8, intra_trials=4, inter_crps=4,
                         challenge_length=300, master_seed=9)
    rows = sweep_bit_grid(small_device, [3], [4], small_det, small_ridge, budget)
    assert len(rows) == 1
    row = rows[0]
    assert row["m_bit"] == 3 and row["n_bit"] == 4 and row["feasible"] == 1
    assert 0 <= row["eer"] <= 0.5
    rows = sweep_bit_grid(small_device, [12], [2], small_det, small_ridge, budget)
    assert rows[0]["feasible"] == 0  # beyond the 40 GSa/s ADC resolution limit
    with pytest.raises(ValueError):
        sweep_bit_grid(small_device, [0], [4], small_det, small_ridge, budget)


def test_sweep_mrr_count_key_length_law(small_nominal, small_det, small_ridge):
    budget = SweepBudget(calibration_crps=8, intra_trials=4, inter_crps=4,
                         challenge_length=300, master_seed=10)
    rows = sweep_mrr_count([1, 2], small_nominal, 11, small_det, small_ridge,
                           budget, n_bit=4)
    for row, count in zip(rows, [1, 2]):
        channels = small_nominal.n_nodes * count
        assert row["n_channels"] == channels
        assert row["key_bits"] == (channels * small_ridge.taps + 1) * 4
