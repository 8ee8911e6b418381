"""Acceptance suite: one test per criterion, one printed verdict line each.

Shared artifacts (device, calibration ensembles, key corpora) are computed
once in session fixtures; everything is derived from MASTER_SEED through
named paths, so the whole suite is reproducible bit for bit.

Operating points:
* quiet default detection (the key-generation profile) for readout quality,
  reconstruction margins and the randomness corpus;
* the identification point (thermal 1 fA/sqrt(Hz)) for the Hamming-distance
  statistics and heatmap trends, where detector noise is the object of study.
"""

import dataclasses
import json
import time

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

import rosspuf as rp
from rosspuf import cli, fuzzy, metrics, randtests
from rosspuf._util import derive_seed
from rosspuf.keygen import (calibrate_empirical, calibrate_indexed, harvest_weights,
                            key_from_weights)
from rosspuf.photonics import DetectionConfig, NominalConfig, observed_adc_ranges

MASTER_SEED = 1
CORPUS_KEYS = 1000
CAL_ENSEMBLE = 2400
INTER_SEEDS = 500
INTRA_TRIALS = 100


def verdict(criterion: str, passed: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"{criterion}: {detail}"


@pytest.fixture(scope="session")
def device():
    return rp.fabricate(NominalConfig(), fab_seed=MASTER_SEED)


@pytest.fixture(scope="session")
def ridge():
    return rp.RidgeConfig()


@pytest.fixture(scope="session")
def det_quiet():
    return DetectionConfig(adc_bits=3)


@pytest.fixture(scope="session")
def det_ident():
    return DetectionConfig(adc_bits=3, thermal_noise_density=1e-15)


@pytest.fixture(scope="session")
def prng_stack(device, det_quiet, ridge):
    """Quiet-point calibration ensemble, empirical profile and key corpus."""
    t0 = time.time()
    cal_seeds = [derive_seed(MASTER_SEED, "acc-calib", i) for i in range(CAL_ENSEMBLE)]
    cal_noise = [derive_seed(MASTER_SEED, "acc-calib-noise", i)
                 for i in range(CAL_ENSEMBLE)]
    first = rp.make_challenge(cal_seeds[0], 2000)
    ranges = observed_adc_ranges(
        rp.analog_front_end(device, first.modulator_input(), det_quiet))
    w_cal = harvest_weights(device, det_quiet, ridge, cal_seeds, cal_noise, ranges)
    profile = dataclasses.replace(calibrate_empirical(w_cal, n_bit=4),
                                  adc_ranges=ranges)
    corpus_seeds = [derive_seed(MASTER_SEED, "acc-corpus", i)
                    for i in range(CORPUS_KEYS)]
    corpus_noise = [derive_seed(MASTER_SEED, "acc-corpus-noise", i)
                    for i in range(CORPUS_KEYS)]
    w_corpus = harvest_weights(device, det_quiet, ridge, corpus_seeds, corpus_noise,
                               ranges)
    keys = [key_from_weights(w, profile) for w in w_corpus]
    print(f"\n[prng stack: {CAL_ENSEMBLE} calibration + {CORPUS_KEYS} corpus pairs "
          f"in {time.time() - t0:.0f} s]")
    return {"profile": profile, "ranges": ranges, "keys": keys}


@pytest.fixture(scope="session")
def ident_stack(device, det_ident, ridge):
    """Identification-point profile plus inter/intra key sets."""
    t0 = time.time()
    cal_seeds = [derive_seed(MASTER_SEED, "acc-id-calib", i) for i in range(120)]
    cal_noise = [derive_seed(MASTER_SEED, "acc-id-calib-noise", i) for i in range(120)]
    first = rp.make_challenge(cal_seeds[0], 2000)
    ranges = observed_adc_ranges(
        rp.analog_front_end(device, first.modulator_input(), det_ident))
    w_cal = harvest_weights(device, det_ident, ridge, cal_seeds, cal_noise, ranges)
    profile = dataclasses.replace(
        calibrate_indexed(w_cal, mean_shrink=0.7, n_bit=4), adc_ranges=ranges)

    inter_seeds = [derive_seed(MASTER_SEED, "acc-inter", i)
                   for i in range(INTER_SEEDS)]
    inter_noise = [derive_seed(MASTER_SEED, "acc-inter-noise", i)
                   for i in range(INTER_SEEDS)]
    w_inter = harvest_weights(device, det_ident, ridge, inter_seeds, inter_noise,
                              ranges)

    intra_seed = derive_seed(MASTER_SEED, "acc-intra-challenge")
    cache: dict = {}
    w_intra = harvest_weights(
        device, det_ident, ridge, [intra_seed] * INTRA_TRIALS,
        [derive_seed(MASTER_SEED, "acc-intra-noise", t) for t in range(INTRA_TRIALS)],
        ranges, analog_cache=cache)
    print(f"\n[ident stack: 120 calibration + {INTER_SEEDS} inter + "
          f"{INTRA_TRIALS} intra pairs in {time.time() - t0:.0f} s]")
    return {"profile": profile, "w_inter": w_inter, "w_intra": w_intra}


@pytest.fixture(scope="session")
def inter_fractions(ident_stack):
    keys = [key_from_weights(w, ident_stack["profile"])
            for w in ident_stack["w_inter"]]
    return metrics.pairwise_fractions(keys)


@pytest.fixture(scope="session")
def intra_fractions(ident_stack):
    keys = [key_from_weights(w, ident_stack["profile"])
            for w in ident_stack["w_intra"]]
    return metrics.pairwise_fractions(keys)


def test_criterion_1_readout_quality(device):
    ch = rp.make_challenge(derive_seed(MASTER_SEED, "acc-nmse"), 2000)
    det = DetectionConfig(adc_bits=16,
                          noise_seed=derive_seed(MASTER_SEED, "acc-nmse-noise"))
    resp = rp.respond(device, ch, det)
    verdict("1 readout-quality",
            resp.nmse <= 0.05,
            f"NMSE at m_bit=16 over 2000 NARMA-10 symbols: {resp.nmse:.4f} "
            f"(required <= 0.05)")


def test_criterion_2_key_length_law(prng_stack, det_quiet, ridge):
    key24 = prng_stack["keys"][0]
    dev20 = rp.fabricate(NominalConfig(mrrs_per_node=5), fab_seed=MASTER_SEED)
    prof20 = rp.calibrate_device(dev20, det_quiet, ridge, mode="indexed",
                                 ensemble_size=16,
                                 calibration_seed=derive_seed(MASTER_SEED, "acc-20ch"))
    ch = rp.make_challenge(derive_seed(MASTER_SEED, "acc-20ch-challenge"), 2000)
    key20 = rp.respond(dev20, ch, det_quiet, ridge, prof20).key
    ok = key24.n_bits == 1060 and key20.n_bits == 884
    verdict("2 key-length-law", ok,
            f"24 channels -> {key24.n_bits} bits (expect 1060); "
            f"20 channels -> {key20.n_bits} bits (expect 884)")


def test_criterion_3_identifiability(inter_fractions):
    mean = float(inter_fractions.mean())
    std = float(inter_fractions.std())
    width = 0.5 / np.sqrt(1060.0)
    ok = 0.40 <= mean <= 0.50 and abs(std - width) <= 0.01
    verdict("3 identifiability", ok,
            f"inter-challenge Hamming over {INTER_SEEDS} seeds: mean {mean:.4f} "
            f"(band [0.40, 0.50]), std {std:.4f} (binomial width {width:.4f} "
            f"+/- 0.01)")


def test_criterion_4_reproducibility(intra_fractions, inter_fractions):
    intra_stats = metrics.HammingStats.from_fractions(intra_fractions)
    inter_stats = metrics.HammingStats.from_fractions(inter_fractions)
    report = metrics.eer_fit(intra_stats, inter_stats)
    separated = intra_fractions.max() < inter_fractions.min()
    ok = intra_stats.mean <= 0.35 and separated and report.eer <= 1e-6
    verdict("4 reproducibility", ok,
            f"intra mean {intra_stats.mean:.4f} (<= 0.35), max intra "
            f"{intra_fractions.max():.4f} < min inter {inter_fractions.min():.4f}, "
            f"fitted EER {report.eer:.2e} (<= 1e-6)")


@pytest.fixture(scope="session")
def bitgrid_rows(device, det_ident, ridge):
    t0 = time.time()
    budget = metrics.SweepBudget(
        calibration_crps=32, intra_trials=30, inter_crps=40,
        master_seed=derive_seed(MASTER_SEED, "acc-grid"), mean_shrink=0.7)
    rows = metrics.sweep_bit_grid(device, range(1, 17), [4], det_ident, ridge, budget)
    print(f"\n[bit grid 16x1 in {time.time() - t0:.0f} s]")
    return rows


def test_criterion_5_heatmap_trends(ident_stack, bitgrid_rows):
    # intra trend: requantize the 100 intra weight vectors per n_bit at m_bit=3
    profile = ident_stack["profile"]
    means = []
    for n in range(1, 9):
        prof_n = dataclasses.replace(profile, n_bit=n)
        keys = [key_from_weights(w, prof_n) for w in ident_stack["w_intra"]]
        means.append(metrics.pairwise_fractions(keys).mean())
    rho = stats.spearmanr(np.arange(1, 9), means).statistic

    inter_by_m = {row["m_bit"]: row["inter_mean"] for row in bitgrid_rows}
    plateau = [inter_by_m[m] for m in (1, 2, 3, 4)]
    beyond = [inter_by_m[m] for m in range(6, 17) if m in inter_by_m]
    plateau_ok = min(plateau) >= 0.45
    decline_ok = np.mean(beyond) < np.mean(plateau) - 0.003
    ok = rho >= 0.9 and plateau_ok and decline_ok
    verdict("5 heatmap-trends", ok,
            f"intra vs n_bit at m=3: Spearman rho {rho:.3f} (>= 0.9), means "
            f"{np.round(means, 4).tolist()}; inter plateau m1-4 min "
            f"{min(plateau):.4f} (>= 0.45); mean beyond {np.mean(beyond):.4f} < "
            f"plateau {np.mean(plateau):.4f} - 0.003")


def test_criterion_6_eer_formula():
    intra = metrics.HammingStats(mean=0.22, std=0.02, count=1,
                                 histogram=np.array([1]),
                                 bin_edges=np.array([0.0, 1.0]))
    inter = metrics.HammingStats(mean=0.46, std=0.02, count=1,
                                 histogram=np.array([1]),
                                 bin_edges=np.array([0.0, 1.0]))
    report = metrics.eer_fit(intra, inter)
    oracle = stats.norm.sf(6.0)  # closed-form Q(6)
    ok = (abs(report.threshold - 0.34) < 1e-12
          and f"{report.eer:.3e}" == "9.866e-10"
          and abs(report.eer - oracle) / oracle < 1e-9)
    verdict("6 eer-formula", ok,
            f"tau {report.threshold:.4f} (expect 0.34), EER {report.eer:.3e} "
            f"(closed form {oracle:.3e})")


@pytest.fixture(scope="session")
def ecc_stack(device, ridge):
    """Robust operating point: quiet detection at m_bit=16, n_bit=4, Gray bins.

    Gray encoding turns every bin crossing into exactly one flipped bit,
    which is what keeps the worst-case intra flip count inside the
    correction capacity.
    """
    t0 = time.time()
    det16 = DetectionConfig(adc_bits=16)
    cal_seeds = [derive_seed(MASTER_SEED, "acc-ecc-calib", i) for i in range(600)]
    cal_noise = [derive_seed(MASTER_SEED, "acc-ecc-calib-noise", i)
                 for i in range(600)]
    first = rp.make_challenge(cal_seeds[0], 2000)
    ranges = observed_adc_ranges(
        rp.analog_front_end(device, first.modulator_input(), det16))
    w_cal = harvest_weights(device, det16, ridge, cal_seeds, cal_noise, ranges)
    profile = dataclasses.replace(calibrate_empirical(w_cal, n_bit=4,
                                                      encoding="gray"),
                                  adc_ranges=ranges)

    ref_seed = derive_seed(MASTER_SEED, "acc-ecc-ref")
    cache: dict = {}
    w_ref = harvest_weights(device, det16, ridge, [ref_seed],
                            [derive_seed(MASTER_SEED, "acc-ecc-ref-noise")],
                            ranges, analog_cache=cache)
    w_intra = harvest_weights(
        device, det16, ridge, [ref_seed] * 200,
        [derive_seed(MASTER_SEED, "acc-ecc-intra", t) for t in range(200)],
        ranges, analog_cache=cache)
    inter_seeds = [derive_seed(MASTER_SEED, "acc-ecc-inter", i) for i in range(200)]
    w_inter = harvest_weights(
        device, det16, ridge, inter_seeds,
        [derive_seed(MASTER_SEED, "acc-ecc-inter-noise", i) for i in range(200)],
        ranges)
    ref = key_from_weights(w_ref[0], profile)
    intra = [key_from_weights(w, profile) for w in w_intra]
    inter = [key_from_weights(w, profile) for w in w_inter]
    print(f"\n[ecc stack: 600 calibration + 1 + 200 + 200 pairs "
          f"in {time.time() - t0:.0f} s]")
    return {"ref": ref, "intra": intra, "inter": inter}


def test_criterion_7_ecc_margin(ecc_stack):
    ref = ecc_stack["ref"]
    intra_flips = [int(np.count_nonzero(k.bits != ref.bits))
                   for k in ecc_stack["intra"]]
    code = fuzzy.bch_build(1060, 32)
    helper, enrolled = fuzzy.enroll(ref, code)

    def accepted(key):
        out = fuzzy.reconstruct(helper, key, code)
        return out is not None and np.array_equal(out, enrolled)

    n_intra = sum(accepted(k) for k in ecc_stack["intra"])
    n_inter = sum(accepted(k) for k in ecc_stack["inter"])
    ok = (max(intra_flips) <= 32 and 300 <= code.parity <= 380
          and n_intra == len(ecc_stack["intra"]) and n_inter == 0)
    verdict("7 ecc-margin", ok,
            f"intra flips max {max(intra_flips)} (<= 32 of 1060), BCH parity "
            f"{code.parity} in [300, 380]; corrected {n_intra}/"
            f"{len(ecc_stack['intra'])} intra, accepted {n_inter}/"
            f"{len(ecc_stack['inter'])} inter")


def test_criterion_8_bch_soundness():
    code = fuzzy.bch_build(1060, 32)
    rng = np.random.default_rng(derive_seed(MASTER_SEED, "acc-bch"))
    n_s = code.codeword_len
    exact = 0
    trials = 10_000
    for _ in range(trials):
        msg = rng.integers(0, 2, 1060).astype(np.uint8)
        cw = fuzzy.bch_encode(code, msg)
        weight = int(rng.integers(0, code.t + 1))
        pos = rng.choice(n_s, size=weight, replace=False)
        noisy = cw.copy()
        noisy[pos] ^= 1
        decoded = fuzzy.bch_decode(code, noisy)
        if decoded is not None and decoded[1] == weight \
                and np.array_equal(decoded[0], msg):
            exact += 1
    # over-capacity stress at the fuzzy layer: never a silent wrong key
    silent_wrong = 0
    for _ in range(500):
        key = rng.integers(0, 2, 1060).astype(np.uint8)
        helper, enrolled = fuzzy.enroll(key, code)
        noisy = key.copy()
        pos = rng.choice(1060, size=code.t + 1, replace=False)
        noisy[pos] ^= 1
        out = fuzzy.reconstruct(helper, noisy, code)
        if out is not None and not np.array_equal(out, enrolled):
            silent_wrong += 1
    ok = exact == trials and silent_wrong == 0
    verdict("8 bch-soundness", ok,
            f"{exact}/{trials} random error patterns of weight <= t decoded "
            f"exactly; {silent_wrong}/500 over-capacity trials accepted silently")


def _pi_bits(n=100):
    mp.mp.prec = n + 64
    x = mp.pi
    return np.array([int(mp.floor(x / mp.mpf(2) ** (1 - k)) % 2) for k in range(n)],
                    dtype=np.uint8)


def test_criterion_9_randomness(prng_stack):
    # worked-example fidelity
    p_ref = randtests.nist_test("Frequency", _pi_bits(100))[0]
    anchors_ok = abs(p_ref - 0.109599) <= 1e-4

    corpus = np.concatenate([k.bits for k in prng_stack["keys"]])
    n_seq = 10
    seq_len = corpus.size // n_seq
    sequences = [corpus[i * seq_len:(i + 1) * seq_len] for i in range(n_seq)]
    report = randtests.run_battery(sequences, alpha=0.01)
    battery_ok = not report.skipped and report.all_passed

    zeros_fail = randtests.nist_test("Frequency",
                                     np.zeros(2000, dtype=np.uint8))[0] < 0.01
    alt = np.tile([0, 1], 5000).astype(np.uint8)
    alternating_fail = randtests.nist_test("Runs", alt)[0] < 0.01
    ext = randtests.permute_extend(corpus[:53_000], seed=3, block_len=1060)
    extend_ok = ext.sum() == 2 * corpus[:53_000].sum() and ext.size == 106_000

    summary = "; ".join(
        f"{name} {'/'.join(f'{s.uniformity_p:.3f}' for s in subs)}"
        f" prop {min(s.proportion for s in subs):.2f}"
        for name, subs in report.results.items())
    ok = anchors_ok and battery_ok and zeros_fail and alternating_fail and extend_ok
    verdict("9 randomness", ok,
            f"reference example p={p_ref:.6f}; corpus {corpus.size} bits in "
            f"{n_seq} sequences: {summary}; controls fail as expected; "
            f"permutation extension conserves counts")


def test_criterion_10_determinism(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({
        "master_seed": 5,
        "device": {"n_nodes": 2, "mrrs_per_node": 2, "splitter_ways": 2},
        "detection": {"samples_per_symbol": 8, "adc_bits": 8},
        "ridge": {"taps": 3, "washout": 5},
        "keygen": {"n_bit": 4, "encoding": "natural", "mode": "indexed",
                   "ensemble_size": 10, "mean_shrink": 0.7},
        "challenge_length": 300,
        "sweep": {"m_bits": [3], "n_bits": [4], "calibration_crps": 6,
                  "intra_trials": 4, "inter_crps": 4, "mrr_counts": [1, 2],
                  "ecc_t": [0, 2], "ecc_trials": 4},
    }))
    cfg = str(cfg_path)

    outputs = {}
    for run in ("a", "b"):
        base = tmp_path / run
        base.mkdir()
        dev = base / "device.json"
        cli.main(["--config", cfg, "fabricate", "--seed", "3", "--out", str(dev)])
        cal = base / "cal.json"
        cli.main(["--config", cfg, "calibrate", "--device", str(dev),
                  "--out", str(cal)])
        resp = base / "resp.json"
        cli.main(["--config", cfg, "respond", "--device", str(dev),
                  "--challenge-seed", "21", "--calibration", str(cal),
                  "--out", str(resp)])
        grid = base / "grid.csv"
        cli.main(["--config", cfg, "sweep", "bitgrid", "--device", str(dev),
                  "--out", str(grid)])
        helper = base / "helper.json"
        cli.main(["--config", cfg, "enroll", "--response", str(resp), "--t", "3",
                  "--out", str(helper)])
        outputs[run] = {p.name: p.read_bytes() for p in base.iterdir()}

    same = all(outputs["a"][name] == outputs["b"][name] for name in outputs["a"])
    ok = same and set(outputs["a"]) == set(outputs["b"])
    verdict("10 determinism", ok,
            f"{len(outputs['a'])} artifact files byte-identical across re-runs "
            f"(fabricate, calibrate, respond, sweep, enroll)")
