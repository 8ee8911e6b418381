"""Statistical randomness battery: the nine core SP 800-22 tests.

Implemented natively: Frequency, BlockFrequency, CumulativeSums (2 p-values),
Runs, LongestRun, Rank, FFT, ApproximateEntropy and Serial (2 p-values).
Multi-sequence aggregation combines the pass proportion (three-sigma binomial
band around 1 - alpha) with a chi-square uniformity check of the p-values.
The remaining reference tests are reached by exporting bitstreams for an
external suite; dataset extension by block permutation is also provided.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc, gammaincc
from scipy.stats import norm

TEST_NAMES = (
    "Frequency", "BlockFrequency", "CumulativeSums", "Runs", "LongestRun",
    "Rank", "FFT", "ApproximateEntropy", "Serial",
)

UNIFORMITY_THRESHOLD = 1e-4


class NotApplicable(ValueError):
    """Sequence too short (or parameters unsuitable) for a test."""


def as_bits(seq) -> np.ndarray:
    bits = np.asarray(seq, dtype=np.uint8)
    if bits.ndim != 1 or bits.size == 0:
        raise ValueError("bit sequence must be 1-d and non-empty")
    if bits.max(initial=0) > 1:
        raise ValueError("bit sequence must contain only 0/1")
    return bits


# ---------------------------------------------------------------------------
# individual tests; each returns a tuple of p-values
# ---------------------------------------------------------------------------

def frequency_test(bits: np.ndarray) -> tuple[float]:
    n = bits.size
    if n < 100:
        raise NotApplicable(f"Frequency needs >= 100 bits, got {n}")
    s = abs(int(2 * np.count_nonzero(bits) - n))
    return (float(erfc(s / np.sqrt(n) / np.sqrt(2.0))),)


def block_frequency_test(bits: np.ndarray, block_len: int = 128) -> tuple[float]:
    n = bits.size
    if n < 100 or n < block_len:
        raise NotApplicable(f"BlockFrequency needs >= {max(100, block_len)} bits")
    n_blocks = n // block_len
    pi = bits[:n_blocks * block_len].reshape(n_blocks, block_len).mean(axis=1)
    chi2 = 4.0 * block_len * float(np.sum((pi - 0.5) ** 2))
    return (float(gammaincc(n_blocks / 2.0, chi2 / 2.0)),)


def cumulative_sums_test(bits: np.ndarray) -> tuple[float, float]:
    n = bits.size
    if n < 100:
        raise NotApplicable(f"CumulativeSums needs >= 100 bits, got {n}")
    steps = 2.0 * bits.astype(np.int64) - 1

    def p_of(z: float) -> float:
        sq = np.sqrt(n)
        k1 = np.arange(int(np.floor((-n / z + 1) / 4.0)),
                       int(np.floor((n / z - 1) / 4.0)) + 1)
        total = 1.0 - np.sum(norm.cdf((4 * k1 + 1) * z / sq)
                             - norm.cdf((4 * k1 - 1) * z / sq))
        k2 = np.arange(int(np.floor((-n / z - 3) / 4.0)),
                       int(np.floor((n / z - 1) / 4.0)) + 1)
        total += np.sum(norm.cdf((4 * k2 + 3) * z / sq)
                        - norm.cdf((4 * k2 + 1) * z / sq))
        return float(min(max(total, 0.0), 1.0))

    fwd = np.cumsum(steps)
    bwd = np.cumsum(steps[::-1])
    return (p_of(float(np.abs(fwd).max())), p_of(float(np.abs(bwd).max())))


def runs_test(bits: np.ndarray) -> tuple[float]:
    n = bits.size
    if n < 100:
        raise NotApplicable(f"Runs needs >= 100 bits, got {n}")
    pi = float(bits.mean())
    if abs(pi - 0.5) >= 2.0 / np.sqrt(n):
        return (0.0,)  # frequency prerequisite failed
    v = int(np.count_nonzero(np.diff(bits))) + 1
    num = abs(v - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * np.sqrt(2.0 * n) * pi * (1.0 - pi)
    return (float(erfc(num / den)),)


_LONGEST_RUN_TABLES = (
    # (min n, M, class boundaries [lo..hi], class probabilities)
    (750000, 10000, (10, 16),
     (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6272, 128, (4, 9),
     (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, (1, 4),
     (0.2148, 0.3672, 0.2305, 0.1875)),
)


def longest_run_test(bits: np.ndarray) -> tuple[float]:
    n = bits.size
    for min_n, block_len, (lo, hi), pi in _LONGEST_RUN_TABLES:
        if n >= min_n:
            break
    else:
        raise NotApplicable(f"LongestRun needs >= 128 bits, got {n}")
    n_blocks = n // block_len
    blocks = bits[:n_blocks * block_len].reshape(n_blocks, block_len)
    # pad with zero columns so runs of ones cannot cross block edges
    padded = np.zeros((n_blocks, block_len + 2), dtype=np.int8)
    padded[:, 1:-1] = blocks
    flat = padded.ravel()
    edges = np.diff(flat)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    lengths = ends - starts
    block_of = starts // (block_len + 2)
    longest = np.zeros(n_blocks, dtype=np.int64)
    np.maximum.at(longest, block_of, lengths)
    classed = np.clip(longest, lo, hi) - lo
    counts = np.bincount(classed, minlength=hi - lo + 1)
    expected = n_blocks * np.asarray(pi)
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    return (float(gammaincc((len(pi) - 1) / 2.0, chi2 / 2.0)),)


def _rank_probability(r: int, m: int = 32, q: int = 32) -> float:
    """P(rank = r) for a random GF(2) matrix of shape m x q."""
    exponent = r * (m + q - r) - m * q
    prod = 1.0
    for i in range(r):
        prod *= (1.0 - 2.0 ** (i - q)) * (1.0 - 2.0 ** (i - m)) / (1.0 - 2.0 ** (i - r))
    return (2.0 ** exponent) * prod


def _gf2_ranks(matrices: np.ndarray) -> np.ndarray:
    """Ranks of a batch of 32x32 GF(2) matrices, vectorized elimination."""
    n_mat = matrices.shape[0]
    weights = (1 << np.arange(31, -1, -1)).astype(np.uint64)
    rows = (matrices.astype(np.uint64) @ weights).astype(np.uint64)  # [n_mat, 32]
    used = np.zeros_like(rows, dtype=bool)
    rank = np.zeros(n_mat, dtype=np.int64)
    idx = np.arange(n_mat)
    for bit in range(31, -1, -1):
        mask = np.uint64(1 << bit)
        has = (rows & mask) != 0
        candidates = has & ~used
        exists = candidates.any(axis=1)
        pivot = np.argmax(candidates, axis=1)
        pivot_rows = np.where(exists, rows[idx, pivot], np.uint64(0))
        eliminate = has & exists[:, None]
        eliminate[idx[exists], pivot[exists]] = False
        rows = np.where(eliminate, rows ^ pivot_rows[:, None], rows)
        used[idx[exists], pivot[exists]] = True
        rank += exists
    return rank


def rank_test(bits: np.ndarray) -> tuple[float]:
    n = bits.size
    n_mat = n // 1024
    if n_mat < 38:
        raise NotApplicable(f"Rank needs >= 38912 bits, got {n}")
    mats = bits[:n_mat * 1024].reshape(n_mat, 32, 32)
    ranks = _gf2_ranks(mats)
    p32 = _rank_probability(32)
    p31 = _rank_probability(31)
    p_rest = 1.0 - p32 - p31
    f32 = int(np.count_nonzero(ranks == 32))
    f31 = int(np.count_nonzero(ranks == 31))
    rest = n_mat - f32 - f31
    chi2 = ((f32 - p32 * n_mat) ** 2 / (p32 * n_mat)
            + (f31 - p31 * n_mat) ** 2 / (p31 * n_mat)
            + (rest - p_rest * n_mat) ** 2 / (p_rest * n_mat))
    return (float(np.exp(-chi2 / 2.0)),)


def fft_test(bits: np.ndarray) -> tuple[float]:
    n = bits.size
    if n < 1000:
        raise NotApplicable(f"FFT needs >= 1000 bits, got {n}")
    x = 2.0 * bits.astype(np.float64) - 1.0
    moduli = np.abs(np.fft.rfft(x))[:n // 2]
    threshold = np.sqrt(np.log(1.0 / 0.05) * n)
    n0 = 0.95 * n / 2.0
    n1 = int(np.count_nonzero(moduli < threshold))
    d = (n1 - n0) / np.sqrt(n * 0.95 * 0.05 / 4.0)
    return (float(erfc(abs(d) / np.sqrt(2.0))),)


def _pattern_counts(bits: np.ndarray, block_len: int) -> np.ndarray:
    """Occurrences of every overlapping pattern on the circular sequence."""
    ext = np.concatenate([bits, bits[:block_len - 1]])
    windows = np.lib.stride_tricks.sliding_window_view(ext, block_len)
    powers = (1 << np.arange(block_len - 1, -1, -1)).astype(np.int64)
    values = windows.astype(np.int64) @ powers
    return np.bincount(values, minlength=1 << block_len)


def approximate_entropy_test(bits: np.ndarray, block_len: int = 10) -> tuple[float]:
    n = bits.size
    if block_len < 1 or block_len > int(np.log2(n)) - 5:
        raise NotApplicable(
            f"ApproximateEntropy needs m < log2(n)-5 (m={block_len}, n={n})")

    def phi(blk: int) -> float:
        c = _pattern_counts(bits, blk) / n
        c = c[c > 0]
        return float(np.sum(c * np.log(c)))

    apen = phi(block_len) - phi(block_len + 1)
    chi2 = 2.0 * n * (np.log(2.0) - apen)
    return (float(gammaincc(1 << (block_len - 1), chi2 / 2.0)),)


def serial_test(bits: np.ndarray, block_len: int = 16) -> tuple[float, float]:
    n = bits.size
    if block_len < 2 or block_len > int(np.log2(n)) - 2:
        raise NotApplicable(f"Serial needs m < log2(n)-2 (m={block_len}, n={n})")

    def psi2(blk: int) -> float:
        if blk < 1:
            return 0.0
        counts = _pattern_counts(bits, blk).astype(np.float64)
        return float((1 << blk) / n * np.sum(counts ** 2) - n)

    d1 = psi2(block_len) - psi2(block_len - 1)
    d2 = psi2(block_len) - 2.0 * psi2(block_len - 1) + psi2(block_len - 2)
    p1 = float(gammaincc(1 << (block_len - 2), d1 / 2.0))
    p2 = float(gammaincc(1 << (block_len - 3), d2 / 2.0))
    return (p1, p2)


_DISPATCH = {
    "Frequency": frequency_test,
    "BlockFrequency": block_frequency_test,
    "CumulativeSums": cumulative_sums_test,
    "Runs": runs_test,
    "LongestRun": longest_run_test,
    "Rank": rank_test,
    "FFT": fft_test,
    "ApproximateEntropy": approximate_entropy_test,
    "Serial": serial_test,
}

_PARAM_NAMES = {
    "BlockFrequency": "block_frequency_m",
    "ApproximateEntropy": "approximate_entropy_m",
    "Serial": "serial_m",
}


def nist_test(kind: str, bits, params: dict | None = None) -> tuple[float, ...]:
    """Run one named test; returns its p-value tuple (1 or 2 entries)."""
    if kind not in _DISPATCH:
        raise ValueError(f"unknown test kind {kind!r}; expected one of {TEST_NAMES}")
    bits = as_bits(bits)
    params = params or {}
    kwargs = {}
    if kind in _PARAM_NAMES and _PARAM_NAMES[kind] in params:
        kwargs["block_len"] = params[_PARAM_NAMES[kind]]
    pvals = _DISPATCH[kind](bits, **kwargs)
    for p in pvals:
        if not 0.0 <= p <= 1.0:
            raise AssertionError(f"{kind} produced p outside [0,1]: {p}")
    return pvals


def default_params(n: int) -> dict:
    """Reference-style parameters scaled down for shorter sequences."""
    return {
        "block_frequency_m": 128,
        "approximate_entropy_m": min(10, max(2, int(np.log2(n)) - 6)),
        "serial_m": min(16, max(3, int(np.log2(n)) - 3)),
    }


# ---------------------------------------------------------------------------
# multi-sequence aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubResult:
    """One p-value stream of a test across all sequences."""

    name: str
    index: int
    p_values: np.ndarray
    proportion: float
    proportion_low: float
    proportion_high: float
    proportion_pass: bool
    uniformity_p: float
    uniformity_pass: bool

    @property
    def passed(self) -> bool:
        return self.proportion_pass and self.uniformity_pass


@dataclass
class BatteryReport:
    alpha: float
    n_sequences: int
    results: dict = field(default_factory=dict)  # name -> list[SubResult]
    skipped: dict = field(default_factory=dict)  # name -> reason

    def passed(self, name: str) -> bool:
        return name in self.results and all(r.passed for r in self.results[name])

    @property
    def all_passed(self) -> bool:
        return all(self.passed(name) for name in self.results)

    def to_dict(self) -> dict:
        return {
            "schema": "rosspuf/battery-report/v1",
            "alpha": self.alpha,
            "n_sequences": self.n_sequences,
            "skipped": dict(self.skipped),
            "tests": {
                name: [{
                    "index": r.index,
                    "proportion": r.proportion,
                    "proportion_band": [r.proportion_low, r.proportion_high],
                    "uniformity_p": r.uniformity_p,
                    "passed": r.passed,
                    "p_values": r.p_values.tolist(),
                } for r in subs]
                for name, subs in self.results.items()
            },
        }

    def table(self) -> str:
        """Reference-style text table: one line per test."""
        lines = ["P-VALUE   PROPORTION  STATISTICAL TEST      PASSED"]
        for name, subs in self.results.items():
            n_pass = sum(r.passed for r in subs)
            first = subs[0]
            prop = f"{int(round(first.proportion * self.n_sequences))}/{self.n_sequences}"
            lines.append(f"{first.uniformity_p:<9.5f} {prop:>10}  {name:<20}  "
                         f"{n_pass}/{len(subs)}")
        for name, reason in self.skipped.items():
            lines.append(f"{'-':<9} {'-':>10}  {name:<20}  skipped: {reason}")
        return "\n".join(lines)


def uniformity_p(p_values: np.ndarray) -> float:
    """Chi-square uniformity of p-values over 10 equal bins."""
    counts, _ = np.histogram(p_values, bins=10, range=(0.0, 1.0))
    expected = p_values.size / 10.0
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    return float(gammaincc(4.5, chi2 / 2.0))


def run_battery(sequences, alpha: float = 0.01,
                params: dict | None = None) -> BatteryReport:
    """Run every applicable test over the sequences and aggregate verdicts.

    Pass proportion must fall inside (1-alpha) +/- 3*sqrt(alpha(1-alpha)/m)
    and the p-values must satisfy the chi-square uniformity threshold.
    Tests that are inapplicable for the sequence length are recorded as
    skipped, not failed.
    """
    seqs = [as_bits(s) for s in sequences]
    if len(seqs) < 2:
        raise ValueError("proportion analysis needs at least 2 sequences")
    if params is None:
        params = default_params(min(s.size for s in seqs))
    report = BatteryReport(alpha=alpha, n_sequences=len(seqs))
    p_hat = 1.0 - alpha
    margin = 3.0 * np.sqrt(alpha * (1.0 - alpha) / len(seqs))

    for name in TEST_NAMES:
        streams: list[list[float]] | None = None
        try:
            for seq in seqs:
                pvals = nist_test(name, seq, params)
                if streams is None:
                    streams = [[] for _ in pvals]
                for i, p in enumerate(pvals):
                    streams[i].append(p)
        except NotApplicable as exc:
            report.skipped[name] = str(exc)
            continue
        subs = []
        for i, stream in enumerate(streams):
            ps = np.asarray(stream)
            prop = float(np.mean(ps >= alpha))
            low = p_hat - margin
            high = min(1.0, p_hat + margin)
            up = uniformity_p(ps)
            subs.append(SubResult(
                name=name, index=i, p_values=ps, proportion=prop,
                proportion_low=low, proportion_high=high,
                proportion_pass=low <= prop <= high,
                uniformity_p=up, uniformity_pass=up >= UNIFORMITY_THRESHOLD,
            ))
        report.results[name] = subs
    return report


# ---------------------------------------------------------------------------
# dataset extension and export
# ---------------------------------------------------------------------------

def permute_extend(bits, seed: int, block_len: int | None = None) -> np.ndarray:
    """Append a seeded permutation of the dataset's key blocks to itself.

    Permutation happens at whole-block granularity (default: the entire
    dataset as one block), so all per-block statistics and the total bit
    counts are conserved exactly; the output is exactly twice as long.
    """
    bits = as_bits(bits)
    if block_len is None:
        block_len = bits.size
    if block_len < 1 or bits.size % block_len != 0:
        raise ValueError(f"dataset length {bits.size} not divisible by block "
                         f"length {block_len}")
    blocks = bits.reshape(-1, block_len)
    order = np.random.default_rng(seed).permutation(blocks.shape[0])
    return np.concatenate([bits, blocks[order].ravel()])


def export_bits(bits, path, fmt: str = "ascii01") -> Path:
    """Write a bitstream for the external reference suite.

    ascii01: one '0'/'1' character per bit.  packed: most-significant-bit
    first bytes with the exact bit length in a JSON sidecar.
    """
    bits = as_bits(bits)
    path = Path(path)
    if fmt == "ascii01":
        path.write_text("".join("1" if b else "0" for b in bits))
    elif fmt == "packed":
        path.write_bytes(np.packbits(bits).tobytes())
        sidecar = path.with_suffix(path.suffix + ".meta.json")
        sidecar.write_text(json.dumps(
            {"schema": "rosspuf/bitstream/v1", "format": "packed",
             "n_bits": int(bits.size)}, sort_keys=True))
    else:
        raise ValueError(f"unknown format {fmt!r}; expected ascii01 or packed")
    return path


def import_bits(path, fmt: str = "ascii01") -> np.ndarray:
    """Inverse of :func:`export_bits`."""
    path = Path(path)
    if fmt == "ascii01":
        text = "".join(path.read_text().split())
        return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")
    if fmt == "packed":
        sidecar = path.with_suffix(path.suffix + ".meta.json")
        n_bits = json.loads(sidecar.read_text())["n_bits"]
        raw = np.frombuffer(path.read_bytes(), dtype=np.uint8)
        return np.unpackbits(raw)[:n_bits]
    raise ValueError(f"unknown format {fmt!r}; expected ascii01 or packed")
