"""Challenge generation: seeded uniform input series and NARMA target series.

A challenge is the public half of a challenge-response pair: an input
time-trace plus the target time-trace the readout is trained against.  The
pair is a pure function of ``(seed, length, params)`` so a stored seed is
enough to regenerate it anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import derive_seed


class ChallengeError(RuntimeError):
    """Challenge could not be generated (retry budget exhausted)."""


class NarmaDivergence(RuntimeError):
    """NARMA recursion exceeded the divergence bound."""

    def __init__(self, index: int, value: float):
        super().__init__(f"NARMA diverged at step {index} (|y|={value:.3g})")
        self.index = index
        self.value = value


@dataclass(frozen=True)
class NarmaParams:
    """Coefficients of the NARMA-m recursion."""

    a1: float = 0.3
    a2: float = 0.05
    b: float = 1.5
    c: float = 0.1
    m: int = 10
    divergence_bound: float = 10.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"memory order must be >= 1, got {self.m}")
        for name in ("a1", "a2", "b", "c"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"coefficient {name} must be finite")


@dataclass(frozen=True)
class Challenge:
    """An input/target series pair plus the seed that generated it."""

    seed: int
    x_in: np.ndarray
    y_out: np.ndarray
    params: NarmaParams = field(default=NarmaParams())
    sub_seed: int = 0
    input_range: tuple[float, float] = (0.0, 0.5)

    @property
    def length(self) -> int:
        return self.x_in.size

    def modulator_input(self) -> np.ndarray:
        """Affine map of x_in onto the modulator's [0, 1] domain."""
        lo, hi = self.input_range
        return (self.x_in - lo) / (hi - lo)


def gen_input(seed: int, n: int, lo: float = 0.0, hi: float = 0.5) -> np.ndarray:
    """n i.i.d. uniform values on [lo, hi] from a seeded PCG64 stream."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=n)


def narma_target(x: np.ndarray, params: NarmaParams = NarmaParams()) -> np.ndarray:
    """Run the NARMA-m recursion over an input series.

    y[t+1] = a1*y[t] + a2*y[t]*sum(y[t-i], i=0..m-1) + b*x[t-(m-1)]*x[t] + c

    History before t=0 is zero.  Raises :class:`NarmaDivergence` as soon as
    |y| exceeds the bound so the caller can re-seed.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("input series must be finite")
    n = x.size
    m = params.m
    y = np.zeros(n)
    window = 0.0  # running sum of the last m values of y
    for t in range(n - 1):
        window += y[t]
        if t - m >= 0:
            window -= y[t - m]
        xm = x[t - (m - 1)] if t - (m - 1) >= 0 else 0.0
        y[t + 1] = (
            params.a1 * y[t]
            + params.a2 * y[t] * window
            + params.b * xm * x[t]
            + params.c
        )
        if abs(y[t + 1]) > params.divergence_bound:
            raise NarmaDivergence(t + 1, y[t + 1])
    return y


def make_challenge(
    seed: int,
    n: int = 2000,
    params: NarmaParams = NarmaParams(),
    lo: float = 0.0,
    hi: float = 0.5,
    max_retries: int = 16,
) -> Challenge:
    """Generate a challenge, deterministically re-seeding on divergence."""
    if n < params.m + 1:
        raise ValueError(f"n must be >= m+1 = {params.m + 1}, got {n}")
    for attempt in range(max_retries):
        sub_seed = seed if attempt == 0 else derive_seed(seed, "retry", attempt)
        x = gen_input(sub_seed, n, lo, hi)
        try:
            y = narma_target(x, params)
        except NarmaDivergence:
            continue
        return Challenge(
            seed=seed, x_in=x, y_out=y, params=params,
            sub_seed=sub_seed, input_range=(lo, hi),
        )
    raise ChallengeError(f"no stable NARMA series for seed {seed} after {max_retries} attempts")


def challenge_to_dict(ch: Challenge, inline_series: bool = False) -> dict:
    d = {
        "schema": "rosspuf/challenge/v1",
        "seed": ch.seed,
        "sub_seed": ch.sub_seed,
        "length": int(ch.length),
        "input_range": list(ch.input_range),
        "params": {
            "a1": ch.params.a1, "a2": ch.params.a2, "b": ch.params.b,
            "c": ch.params.c, "m": ch.params.m,
            "divergence_bound": ch.params.divergence_bound,
        },
    }
    if inline_series:
        d["x_in"] = ch.x_in.tolist()
        d["y_out"] = ch.y_out.tolist()
    return d


def challenge_from_dict(d: dict) -> Challenge:
    """Regenerate a challenge from its file record (seed is sufficient)."""
    p = d["params"]
    params = NarmaParams(a1=p["a1"], a2=p["a2"], b=p["b"], c=p["c"], m=p["m"],
                         divergence_bound=p.get("divergence_bound", 10.0))
    lo, hi = d["input_range"]
    return make_challenge(d["seed"], d["length"], params, lo, hi)
