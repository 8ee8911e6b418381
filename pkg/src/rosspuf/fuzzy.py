"""Exact key reconstruction: shortened binary BCH code + fuzzy commitment.

Enrollment publishes the BCH parity of the key (the systematic form of a
fuzzy commitment whose codeword mask has an all-zero message part) together
with an integrity digest.  A later noisy key is decoded against the public
parity; reconstruction succeeds only when the flip count is within the
code's correction capacity and the digest matches, so a miscorrected word
can never be accepted silently.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

import numpy as np

from . import keygen, photonics
from ._util import derive_seed, pack_bits
from .challenge import Challenge, make_challenge
from .keygen import BinaryKey, CalibrationProfile
from .photonics import DetectionConfig, DeviceProfile
from .readout import RidgeConfig

# primitive polynomials over GF(2), bit i = coefficient of x^i
_PRIMITIVE = {
    3: 0b1011, 4: 0b10011, 5: 0b100101, 6: 0b1000011, 7: 0b10001001,
    8: 0b100011101, 9: 0b1000010001, 10: 0b10000001001, 11: 0b100000000101,
    12: 0b1000001010011, 13: 0b10000000011011, 14: 0b100010001000011,
    15: 0b1000000000000011, 16: 0b10001000000001011,
}


class BchParameterError(ValueError):
    """No field size accommodates the requested key length and capacity."""


def _field_tables(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Log/antilog tables of GF(2^m) for the registered primitive polynomial."""
    poly = _PRIMITIVE[m]
    n = (1 << m) - 1
    antilog = np.zeros(n, dtype=np.int64)
    log = np.zeros(n + 1, dtype=np.int64)
    x = 1
    for i in range(n):
        antilog[i] = x
        log[x] = i
        x <<= 1
        if x & (1 << m):
            x ^= poly
    if x != 1:
        raise AssertionError(f"polynomial for m={m} is not primitive")
    return log, antilog


@dataclass(frozen=True)
class BchCode:
    """Narrow-sense binary BCH code over GF(2^m), shortened to the key length.

    ``generator`` holds the generator polynomial coefficients, index =
    degree.  External bit order of messages and codewords is message first,
    parity last; internally bit i sits at polynomial degree n_s - 1 - i.
    """

    m: int
    n: int
    t: int
    parity: int
    data_len: int
    generator: np.ndarray
    log: np.ndarray
    antilog: np.ndarray
    parity_matrix: np.ndarray  # [data_len, parity]: parity = message @ M mod 2

    @property
    def k_full(self) -> int:
        return self.n - self.parity

    @property
    def shortening(self) -> int:
        return self.k_full - self.data_len

    @property
    def codeword_len(self) -> int:
        return self.data_len + self.parity


def _minimal_polynomial(coset, log, antilog, n):
    """prod (x + alpha^j) over a conjugacy coset; coefficients land in GF(2)."""
    poly = [1]
    for j in coset:
        root = antilog[j % n]
        nxt = [0] * (len(poly) + 1)
        for d, coeff in enumerate(poly):
            nxt[d + 1] ^= coeff
            if coeff and root:
                nxt[d] ^= antilog[(log[coeff] + log[root]) % n]
        poly = nxt
    if any(c not in (0, 1) for c in poly):
        raise AssertionError("minimal polynomial has coefficients outside GF(2)")
    return np.asarray(poly, dtype=np.uint8)


def bch_build(key_len: int, t: int) -> BchCode:
    """Smallest-field narrow-sense BCH code correcting t errors on key_len bits.

    Picks the least m with 2^m - 1 >= key_len + m*t, builds the generator
    from the minimal polynomials of alpha^1..alpha^{2t}, and shortens the
    message to exactly key_len bits.
    """
    if key_len < 1 or t < 1:
        raise BchParameterError(f"need key_len >= 1 and t >= 1, got {key_len}, {t}")
    for m in sorted(_PRIMITIVE):
        n = (1 << m) - 1
        if n >= key_len + m * t:
            break
    else:
        raise BchParameterError(
            f"no supported field fits key_len={key_len} with t={t}")

    log, antilog = _field_tables(m)
    seen = set()
    generator = np.asarray([1], dtype=np.uint8)
    for s in range(1, 2 * t + 1):
        if s in seen:
            continue
        coset = []
        j = s
        while j not in coset:
            coset.append(j)
            j = (j * 2) % n
        seen.update(coset)
        minimal = _minimal_polynomial(coset, log, antilog, n)
        generator = np.convolve(generator, minimal) & 1

    parity = generator.size - 1
    if n - parity < key_len:
        raise BchParameterError(
            f"generator degree {parity} leaves fewer than {key_len} message bits")

    # parity_matrix rows: remainder of x^(parity + j) mod g for the message
    # bit living at that degree, pre-flipped into external bit order.
    g_low = generator[:parity].astype(np.uint8)
    rows = np.zeros((key_len, parity), dtype=np.uint8)
    rem = g_low.copy()  # x^parity mod g
    for j in range(key_len):
        rows[j] = rem
        carry = rem[parity - 1]
        rem = np.roll(rem, 1)
        rem[0] = 0
        if carry:
            rem ^= g_low
    # external message bit i has degree parity + (key_len - 1 - i);
    # external parity bit i has degree parity - 1 - i.
    matrix = rows[::-1, ::-1].copy()
    return BchCode(m=m, n=n, t=t, parity=parity, data_len=key_len,
                   generator=generator, log=log, antilog=antilog,
                   parity_matrix=matrix)


def bch_encode(code: BchCode, message: np.ndarray) -> np.ndarray:
    """Systematic codeword: message bits followed by their parity."""
    msg = np.asarray(message, dtype=np.uint8)
    if msg.size != code.data_len:
        raise ValueError(f"message must be {code.data_len} bits, got {msg.size}")
    parity = (msg.astype(np.int64) @ code.parity_matrix.astype(np.int64)) & 1
    return np.concatenate([msg, parity.astype(np.uint8)])


def _syndromes(code: BchCode, positions: np.ndarray) -> np.ndarray:
    """S_e = sum alpha^(e*pos) over set-bit polynomial positions, e=1..2t."""
    es = np.arange(1, 2 * code.t + 1, dtype=np.int64)
    if positions.size == 0:
        return np.zeros(es.size, dtype=np.int64)
    exps = (es[:, None] * positions[None, :]) % code.n
    return np.bitwise_xor.reduce(code.antilog[exps], axis=1)


def _xor_polys(p: list[int], q: list[int]) -> list[int]:
    if len(p) < len(q):
        p, q = q, p
    out = p[:]
    for i, coeff in enumerate(q):
        out[i] ^= coeff
    return out


def _berlekamp_massey(code: BchCode, synd: np.ndarray) -> tuple[list[int], int]:
    """Error locator from the syndromes: (coefficients [1, c1, ...], length L)."""
    log, antilog, n = code.log, code.antilog, code.n

    def mul(a, b):
        if a == 0 or b == 0:
            return 0
        return int(antilog[(log[a] + log[b]) % n])

    c = [1]
    b = [1]
    lth = 0
    shift = 1
    bscale = 1
    for step in range(synd.size):
        d = int(synd[step])
        for i in range(1, lth + 1):
            if i < len(c):
                d ^= mul(c[i], int(synd[step - i]))
        if d == 0:
            shift += 1
            continue
        factor = mul(d, int(antilog[(n - log[bscale]) % n]))  # d / bscale
        adjust = [0] * shift + [mul(factor, coeff) for coeff in b]
        if 2 * lth <= step:
            prev = c[:]
            c = _xor_polys(c, adjust)
            lth = step + 1 - lth
            b = prev
            bscale = d
            shift = 1
        else:
            c = _xor_polys(c, adjust)
            shift += 1
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c, lth


def bch_decode(code: BchCode, received: np.ndarray) -> tuple[np.ndarray, int] | None:
    """Correct up to t errors; returns (message, error count) or None.

    Syndromes, Berlekamp-Massey and a Chien search over the shortened
    positions; any inconsistency (locator degree > t, missing roots, roots
    in the removed prefix, residual syndrome) reports failure instead of
    guessing.
    """
    word = np.asarray(received, dtype=np.uint8)
    n_s = code.codeword_len
    if word.size != n_s:
        raise ValueError(f"received word must be {n_s} bits, got {word.size}")
    positions = (n_s - 1 - np.flatnonzero(word)).astype(np.int64)
    synd = _syndromes(code, positions)
    if not synd.any():
        return word[:code.data_len].copy(), 0

    locator, lth = _berlekamp_massey(code, synd)
    degree = len(locator) - 1
    if lth == 0 or lth > code.t or degree != lth:
        return None

    # Chien search: evaluate the locator at alpha^j for all j; a root at
    # j = (n - p) % n flags an error at polynomial position p.
    coeffs = np.asarray(locator, dtype=np.int64)
    ks = np.flatnonzero(coeffs)
    logs = code.log[coeffs[ks]]
    js = np.arange(code.n, dtype=np.int64)
    terms = code.antilog[(logs[:, None] + ks[:, None] * js[None, :]) % code.n]
    values = np.bitwise_xor.reduce(terms, axis=0)
    roots = np.flatnonzero(values == 0)
    if roots.size != degree:
        return None
    err_pos = (code.n - roots) % code.n
    if err_pos.max(initial=-1) >= n_s:
        return None

    corrected = word.copy()
    corrected[n_s - 1 - err_pos] ^= 1
    check = _syndromes(code, (n_s - 1 - np.flatnonzero(corrected)).astype(np.int64))
    if check.any():
        return None
    return corrected[:code.data_len].copy(), int(degree)


# ---------------------------------------------------------------------------
# fuzzy commitment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HelperData:
    """Public reconstruction data: BCH parity of the key plus a digest.

    Stored in the systematic form, i.e. the codeword-xor-key mask with its
    always-zero message half dropped; the parity alone reveals at most
    ``parity_bits`` bits of information about the key.
    """

    key_len: int
    t: int
    field_m: int
    parity: np.ndarray
    digest: str

    @property
    def parity_bits(self) -> int:
        return self.parity.size


def key_digest(bits: np.ndarray) -> str:
    return hashlib.sha256(pack_bits(bits)).hexdigest()


def enroll(response_key, code: BchCode) -> tuple[HelperData, np.ndarray]:
    """Commit to a key: publish its parity and digest, return the enrolled key."""
    bits = response_key.bits if isinstance(response_key, BinaryKey) else \
        np.asarray(response_key, dtype=np.uint8)
    if bits.size != code.data_len:
        raise ValueError(f"key must be {code.data_len} bits, got {bits.size}")
    codeword = bch_encode(code, bits)
    helper = HelperData(key_len=code.data_len, t=code.t, field_m=code.m,
                        parity=codeword[code.data_len:].copy(),
                        digest=key_digest(bits))
    return helper, bits.copy()


def reconstruct(helper: HelperData, noisy_key, code: BchCode | None = None
                ) -> np.ndarray | None:
    """Recover the enrolled key from a noisy re-response, or reject.

    Succeeds iff the noisy key is within the code's correction capacity of
    the enrolled key and the decoded word matches the stored digest.
    """
    bits = noisy_key.bits if isinstance(noisy_key, BinaryKey) else \
        np.asarray(noisy_key, dtype=np.uint8)
    if bits.size != helper.key_len:
        raise ValueError(f"key must be {helper.key_len} bits, got {bits.size}")
    if code is None:
        code = bch_build(helper.key_len, helper.t)
    if code.data_len != helper.key_len or code.t != helper.t or code.m != helper.field_m:
        raise ValueError("helper data does not match the supplied code")
    decoded = bch_decode(code, np.concatenate([bits, helper.parity]))
    if decoded is None:
        return None
    message, _ = decoded
    if key_digest(message) != helper.digest:
        return None
    return message


def helper_to_dict(helper: HelperData) -> dict:
    return {
        "schema": "rosspuf/helper-data/v1",
        "key_len": helper.key_len,
        "t": helper.t,
        "field_m": helper.field_m,
        "parity_bits": helper.parity_bits,
        "parity_hex": pack_bits(helper.parity).hex(),
        "digest": helper.digest,
    }


def helper_from_dict(d: dict) -> HelperData:
    if d.get("schema") != "rosspuf/helper-data/v1":
        raise ValueError(f"unsupported helper schema: {d.get('schema')!r}")
    from ._util import unpack_bits
    parity = unpack_bits(bytes.fromhex(d["parity_hex"]), d["parity_bits"])
    return HelperData(key_len=d["key_len"], t=d["t"], field_m=d["field_m"],
                      parity=parity, digest=d["digest"])


# ---------------------------------------------------------------------------
# ECC budget sweep
# ---------------------------------------------------------------------------

def ecc_sweep(device: DeviceProfile, challenge: Challenge,
              det_cfg: DetectionConfig, ridge_cfg: RidgeConfig,
              profile: CalibrationProfile, t_values, trials: int = 100,
              sweep_seed: int = 0, challenge_length: int = 2000) -> list[dict]:
    """Correction/acceptance fractions against the error-correction budget.

    Enrolls one reference response, then for each capacity t counts how many
    intra re-responses reconstruct exactly and how many inter-challenge
    responses are (wrongly) accepted.  t = 0 means no code: only noiseless
    exact repeats count as corrected.
    """
    analog = photonics.analog_front_end(device, challenge.modulator_input(), det_cfg)
    ref = keygen.respond(device, challenge, det_cfg, ridge_cfg, profile,
                         analog=analog, noise_seed=derive_seed(sweep_seed, "ecc-ref"))
    ref_bits = ref.key.bits
    intra = [keygen.respond(device, challenge, det_cfg, ridge_cfg, profile,
                            analog=analog,
                            noise_seed=derive_seed(sweep_seed, "ecc-intra", i)
                            ).key.bits
             for i in range(trials)]
    inter = []
    for i in range(trials):
        ch = make_challenge(derive_seed(sweep_seed, "ecc-inter-challenge", i),
                            challenge_length)
        inter.append(keygen.respond(device, ch, det_cfg, ridge_cfg, profile,
                                    noise_seed=derive_seed(sweep_seed, "ecc-inter-noise", i)
                                    ).key.bits)

    rows = []
    for t in t_values:
        if t == 0:
            intra_ok = float(np.mean([np.array_equal(k, ref_bits) for k in intra]))
            inter_ok = float(np.mean([np.array_equal(k, ref_bits) for k in inter]))
            rows.append({"t": 0, "parity_bits": 0,
                         "intra_corrected": intra_ok, "inter_accepted": inter_ok})
            continue
        code = bch_build(ref_bits.size, int(t))
        helper, enrolled = enroll(ref_bits, code)

        def accepted(noisy):
            out = reconstruct(helper, noisy, code)
            return out is not None and np.array_equal(out, enrolled)

        rows.append({
            "t": int(t), "parity_bits": code.parity,
            "intra_corrected": float(np.mean([accepted(k) for k in intra])),
            "inter_accepted": float(np.mean([accepted(k) for k in inter])),
        })
    return rows
