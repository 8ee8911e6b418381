"""Shared plumbing: named seed derivation, bit packing, canonical JSON."""

from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np


def derive_seed(master: int, *path: int | str) -> int:
    """Derive a named 128-bit child seed from a master seed.

    Every stochastic stage (fabrication, challenge, noise, calibration,
    sweep trials) pulls its seed through a distinct path so that any single
    experiment can be replayed in isolation.  The derivation is a pure
    function of ``(master, path)``.
    """
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:16], "big")


def rng_for(master: int, *path: int | str) -> np.random.Generator:
    """PCG64 generator seeded via :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(master, *path))


def pack_bits(bits: np.ndarray) -> bytes:
    """Pack a 0/1 array into MSB-first bytes (last byte zero padded)."""
    bits = np.asarray(bits, dtype=np.uint8)
    return np.packbits(bits).tobytes()


def unpack_bits(data: bytes, n_bits: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; ``n_bits`` strips the padding."""
    arr = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if n_bits > arr.size:
        raise ValueError(f"need {n_bits} bits, payload holds {arr.size}")
    return arr[:n_bits].copy()


def bits_to_hex(bits: np.ndarray) -> str:
    return pack_bits(bits).hex()


def hex_to_bits(s: str, n_bits: int) -> np.ndarray:
    return unpack_bits(bytes.fromhex(s), n_bits)


def canonical_json(obj: Any) -> str:
    """Deterministic JSON encoding (sorted keys, fixed separators)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(obj: Any) -> str:
    """SHA-256 digest of the canonical JSON form of a config mapping."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()
