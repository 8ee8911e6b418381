import dataclasses
import json

import numpy as np
import pytest

import rosspuf as rp
from rosspuf.fuzzy import (BchParameterError, bch_build, bch_decode, bch_encode,
                           ecc_sweep, enroll, helper_from_dict, helper_to_dict,
                           key_digest, reconstruct)
from rosspuf.keygen import calibrate_device


@pytest.fixture(scope="module")
def code_small():
    return bch_build(100, 5)  # GF(2^8) working code for bulk trials


@pytest.fixture(scope="module")
def code_full():
    return bch_build(1060, 32)


def test_build_paper_scale_parameters(code_full):
    assert code_full.m == 11
    assert code_full.n == 2047
    assert code_full.parity <= 11 * 32
    assert 300 <= code_full.parity <= 380
    assert code_full.data_len == 1060
    assert code_full.codeword_len == 1060 + code_full.parity


def test_build_single_error_hamming_equivalent():
    code = bch_build(4, 1)
    assert code.m == 3 and code.n == 7
    assert code.parity == 3  # parity = m for the single-error case
    assert code.shortening == 0


def test_build_rejects_infeasible():
    with pytest.raises(BchParameterError):
        bch_build(0, 1)
    with pytest.raises(BchParameterError):
        bch_build(60000, 3000)


def _poly_divides(generator: np.ndarray, n: int) -> bool:
    """Long-division oracle over GF(2): does g(x) divide x^n + 1?"""
    dividend = np.zeros(n + 1, dtype=np.uint8)
    dividend[0] = 1
    dividend[n] = 1
    g = generator.astype(np.uint8)
    deg_g = g.size - 1
    rem = dividend.copy()
    for power in range(n, deg_g - 1, -1):
        if rem[power]:
            rem[power - deg_g:power + 1] ^= g
    return not rem.any()


def test_generator_divides_xn_plus_one(code_small, code_full):
    assert _poly_divides(code_small.generator, code_small.n)
    assert _poly_divides(code_full.generator, code_full.n)


def test_encode_zero_message(code_small):
    cw = bch_encode(code_small, np.zeros(code_small.data_len, dtype=np.uint8))
    assert not cw.any()


def test_encode_linearity(code_small):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        m1 = rng.integers(0, 2, code_small.data_len).astype(np.uint8)
        m2 = rng.integers(0, 2, code_small.data_len).astype(np.uint8)
        cw1 = bch_encode(code_small, m1)
        cw2 = bch_encode(code_small, m2)
        assert np.array_equal(bch_encode(code_small, m1 ^ m2), cw1 ^ cw2)


def test_random_codewords_have_zero_syndrome(code_small):
    rng = np.random.default_rng(1)
    for _ in range(200):
        msg = rng.integers(0, 2, code_small.data_len).astype(np.uint8)
        cw = bch_encode(code_small, msg)
        decoded = bch_decode(code_small, cw)
        assert decoded is not None
        out, n_err = decoded
        assert n_err == 0
        assert np.array_equal(out, msg)


def test_decode_corrects_within_capacity(code_small):
    rng = np.random.default_rng(2)
    n_s = code_small.codeword_len
    for trial in range(1000):
        msg = rng.integers(0, 2, code_small.data_len).astype(np.uint8)
        cw = bch_encode(code_small, msg)
        weight = int(rng.integers(0, code_small.t + 1))
        pos = rng.choice(n_s, size=weight, replace=False)
        noisy = cw.copy()
        noisy[pos] ^= 1
        decoded = bch_decode(code_small, noisy)
        assert decoded is not None, f"decode failed at weight {weight}"
        out, n_err = decoded
        assert n_err == weight
        assert np.array_equal(out, msg)


def test_decode_full_code_spot_checks(code_full):
    rng = np.random.default_rng(3)
    for weight in (0, 1, 16, 32):
        msg = rng.integers(0, 2, 1060).astype(np.uint8)
        cw = bch_encode(code_full, msg)
        pos = rng.choice(code_full.codeword_len, size=weight, replace=False)
        noisy = cw.copy()
        noisy[pos] ^= 1
        out, n_err = bch_decode(code_full, noisy)
        assert n_err == weight
        assert np.array_equal(out, msg)


def test_decode_beyond_capacity_never_silently_wrong(code_small):
    rng = np.random.default_rng(4)
    for _ in range(300):
        msg = rng.integers(0, 2, code_small.data_len).astype(np.uint8)
        cw = bch_encode(code_small, msg)
        pos = rng.choice(code_small.codeword_len, size=code_small.t + 1, replace=False)
        noisy = cw.copy()
        noisy[pos] ^= 1
        decoded = bch_decode(code_small, noisy)
        if decoded is not None:
            # may miscorrect to a different codeword; it must be a codeword,
            # and the fuzzy layer's digest is what rejects it
            out, _ = decoded
            assert not np.array_equal(out, msg)
            recheck = bch_decode(code_small, bch_encode(code_small, out))
            assert recheck is not None and recheck[1] == 0


def test_enroll_reconstruct_noiseless(code_small):
    rng = np.random.default_rng(5)
    key = rng.integers(0, 2, code_small.data_len).astype(np.uint8)
    helper, enrolled = enroll(key, code_small)
    assert helper.parity_bits == code_small.parity
    out = reconstruct(helper, key, code_small)
    assert np.array_equal(out, enrolled)


def test_helper_data_differs_for_different_keys(code_small):
    rng = np.random.default_rng(6)
    k1 = rng.integers(0, 2, code_small.data_len).astype(np.uint8)
    k2 = k1.copy()
    k2[[1, 5, 9]] ^= 1  # within distance t, so parities must differ
    h1, _ = enroll(k1, code_small)
    h2, _ = enroll(k2, code_small)
    assert not np.array_equal(h1.parity, h2.parity)
    assert h1.digest != h2.digest


def test_helper_leak_accounting(code_full):
    key = np.random.default_rng(7).integers(0, 2, 1060).astype(np.uint8)
    helper, _ = enroll(key, code_full)
    assert helper.parity_bits == code_full.parity <= 11 * code_full.t


def test_reconstruct_boundary_accept_reject(code_small):
    rng = np.random.default_rng(8)
    key = rng.integers(0, 2, code_small.data_len).astype(np.uint8)
    helper, enrolled = enroll(key, code_small)
    for _ in range(50):
        pos = rng.choice(code_small.data_len, size=code_small.t, replace=False)
        noisy = key.copy()
        noisy[pos] ^= 1
        out = reconstruct(helper, noisy, code_small)
        assert out is not None and np.array_equal(out, enrolled)
        pos = rng.choice(code_small.data_len, size=code_small.t + 1, replace=False)
        noisy = key.copy()
        noisy[pos] ^= 1
        out = reconstruct(helper, noisy, code_small)
        assert out is None or np.array_equal(out, enrolled)


def test_reconstruct_rejects_unrelated_key(code_full):
    rng = np.random.default_rng(9)
    key = rng.integers(0, 2, 1060).astype(np.uint8)
    helper, _ = enroll(key, code_full)
    # an inter-challenge key disagrees in roughly half the bits
    other = key ^ (rng.random(1060) < 0.46).astype(np.uint8)
    assert reconstruct(helper, other, code_full) is None


def test_helper_serialization_roundtrip(code_small):
    key = np.random.default_rng(10).integers(0, 2, code_small.data_len).astype(np.uint8)
    helper, _ = enroll(key, code_small)
    again = helper_from_dict(json.loads(json.dumps(helper_to_dict(helper))))
    assert np.array_equal(helper.parity, again.parity)
    assert helper.digest == again.digest
    assert reconstruct(again, key, code_small) is not None


def test_digest_is_stable():
    bits = np.array([1, 0, 1, 1, 0, 0, 0, 1], dtype=np.uint8)
    assert key_digest(bits) == key_digest(bits.copy())


def test_ecc_sweep_no_correction_and_monotonicity(small_device, small_ridge,
                                                  small_challenge):
    quiet = rp.DetectionConfig(adc_bits=8, samples_per_symbol=8,
                               thermal_noise_density=0.0, shot_noise_enabled=False)
    profile = calibrate_device(small_device, quiet, small_ridge, mode="indexed",
                               ensemble_size=8, calibration_seed=6,
                               challenge_length=300)
    rows = ecc_sweep(small_device, small_challenge, quiet, small_ridge, profile,
                     t_values=[0, 2], trials=6, sweep_seed=12, challenge_length=300)
    # no noise: every repeat is exact, so t = 0 already corrects everything
    assert rows[0]["t"] == 0 and rows[0]["parity_bits"] == 0
    assert rows[0]["intra_corrected"] == 1.0
    assert rows[0]["inter_accepted"] == 0.0
    assert rows[1]["intra_corrected"] >= rows[0]["intra_corrected"]
    assert rows[1]["inter_accepted"] == 0.0
