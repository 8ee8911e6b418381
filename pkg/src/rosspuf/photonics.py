"""Frequency-domain simulation of the recurrent optical spectrum slicing device.

The device is a bank of waveguide loops, each holding a series of add/drop
micro-ring resonators.  Filters and loop are linear, so the whole optical
stage collapses to closed-form transfer functions (the recirculation is a
geometric series); the only nonlinearity is square-law photodetection.  A
fabricated device differs from the nominal design through seeded random
refractive-index deviations, resonance jitter and coupling spread - that
deviation record is the physical secret the key generator harvests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import lfilter

C_LIGHT = 299792458.0  # m/s
Q_ELECTRON = 1.602176634e-19  # C


class ConfigError(ValueError):
    """Invalid nominal device or detection configuration."""


class ModelError(RuntimeError):
    """Physical model violated (divergent loop, non-finite field)."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MrrParams:
    """One add/drop micro-ring: geometry, loss and its fabricated resonance.

    ``resonance_offset`` is the ring's resonance relative to the optical
    carrier (baseband Hz) and already contains the target detuning plus all
    sampled fabrication deviations.  ``coupling_strength`` is the amplitude
    of the inter-ring waveguide link feeding this ring.
    """

    kappa: float
    radius: float
    n_eff: float
    n_g: float
    alpha: float
    resonance_offset: float
    coupling_strength: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ConfigError(f"kappa must be in (0,1), got {self.kappa}")
        if self.radius <= 0:
            raise ConfigError(f"radius must be positive, got {self.radius}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 < self.coupling_strength <= 1.0:
            raise ConfigError(
                f"coupling_strength must be in (0,1], got {self.coupling_strength}")

    @property
    def circumference(self) -> float:
        return 2.0 * np.pi * self.radius

    @property
    def round_trip_amplitude(self) -> float:
        """Field amplitude after one trip, a = exp(-alpha*L/2)."""
        return float(np.exp(-self.alpha * self.circumference / 2.0))

    @property
    def fsr(self) -> float:
        """Free spectral range c/(n_g*L) in Hz."""
        return C_LIGHT / (self.n_g * self.circumference)


@dataclass(frozen=True)
class RossNode:
    """One waveguide loop: a series of rings plus the recirculation path."""

    mrrs: tuple[MrrParams, ...]
    loop_delay: float = 25e-12
    feedback_strength: float = 0.9
    inter_mrr_delay: float = 2.5e-12

    def __post_init__(self):
        if len(self.mrrs) == 0:
            raise ConfigError("node needs at least one MRR")
        if not 0.0 <= self.feedback_strength < 1.0:
            raise ConfigError(
                f"feedback_strength must be in [0,1), got {self.feedback_strength}")
        if self.loop_delay < 0 or self.inter_mrr_delay < 0:
            raise ConfigError("delays must be >= 0")


@dataclass(frozen=True)
class NominalConfig:
    """Fabrication recipe: nominal geometry plus deviation widths.

    Setting the three deviation widths to zero yields the ideal design with
    ring k resonant exactly at carrier + k * detuning_spacing (k counted
    from -total//2 across all nodes).
    """

    n_nodes: int = 4
    mrrs_per_node: int = 6
    detuning_spacing: float = 1e9
    kappa: float = 0.25
    radius: float = 55e-6
    n_eff: float = 3.4
    n_g: float = 4.2
    alpha: float = 10.0
    feedback_strength: float = 0.9
    loop_delay: float = 25e-12
    inter_mrr_delay: float = 2.5e-12
    coupling_mu: float = 0.97
    coupling_sigma: float = 0.1
    dneff_halfwidth: float = 0.015
    resonance_jitter_sigma: float = 0.1e9
    carrier_wavelength: float = 1556e-9
    mean_power: float = 10e-3
    splitter_ways: int = 4

    def __post_init__(self):
        if self.n_nodes < 1 or self.mrrs_per_node < 1:
            raise ConfigError("need at least one node and one MRR per node")
        if not 0.0 < self.kappa < 1.0:
            raise ConfigError(f"kappa must be in (0,1), got {self.kappa}")
        if self.radius <= 0 or self.alpha < 0:
            raise ConfigError("radius must be > 0 and alpha >= 0")
        if self.loop_delay < 0 or self.inter_mrr_delay < 0:
            raise ConfigError("delays must be >= 0")
        if not 0.0 <= self.feedback_strength < 1.0:
            raise ConfigError("feedback_strength must be in [0,1)")
        if self.dneff_halfwidth < 0 or self.resonance_jitter_sigma < 0 or self.coupling_sigma < 0:
            raise ConfigError("deviation widths must be >= 0")
        if self.splitter_ways < self.n_nodes:
            raise ConfigError("splitter must have at least one way per node")

    @property
    def carrier_frequency(self) -> float:
        return C_LIGHT / self.carrier_wavelength


@dataclass(frozen=True)
class DeviceProfile:
    """One fabricated chip: nodes with sampled deviations, plus the record.

    ``deviation_record`` holds, per (node, ring), the tuple
    (dneff, folded_shift_hz, jitter_hz, coupling) actually sampled - it is a
    pure function of ``fab_seed`` and the nominal config, so the profile can
    be serialized and re-loaded without re-sampling.
    """

    nominal: NominalConfig
    nodes: tuple[RossNode, ...]
    fab_seed: int
    deviation_record: tuple[tuple[tuple[float, float, float, float], ...], ...]

    @property
    def carrier_wavelength(self) -> float:
        return self.nominal.carrier_wavelength

    @property
    def carrier_frequency(self) -> float:
        return self.nominal.carrier_frequency

    @property
    def mean_power(self) -> float:
        return self.nominal.mean_power

    @property
    def splitter_ways(self) -> int:
        return self.nominal.splitter_ways

    @property
    def n_channels(self) -> int:
        return sum(len(node.mrrs) for node in self.nodes)

    @property
    def channel_map(self) -> tuple[tuple[int, int], ...]:
        """(node index, MRR index) for each detector channel."""
        return tuple(
            (i, j) for i, node in enumerate(self.nodes) for j in range(len(node.mrrs))
        )


@dataclass(frozen=True)
class DetectionConfig:
    """Photodiode + ADC chain settings, including the seeded noise stream.

    The default noise budget is the quiet key-generation operating profile:
    24-way spectrum slicing leaves the weak slices at microamp photocurrents,
    so the readout quality and exact-reconstruction margins require a
    low-noise receiver.  ``paper_noise()`` returns the 10 pA/sqrt(Hz) +
    shot-noise configuration for noise-dominated studies.
    """

    pd_bandwidth: float = 40e9
    responsivity: float = 1.0
    thermal_noise_density: float = 1e-16  # A/sqrt(Hz)
    shot_noise_enabled: bool = False
    adc_bits: int = 16
    samples_per_symbol: int = 16
    symbol_rate: float = 40e9
    noise_seed: int = 0
    modulation_bias: float = 0.0
    modulation_depth: float = 1.0

    @staticmethod
    def paper_noise(**overrides) -> "DetectionConfig":
        """Thermal 10 pA/sqrt(Hz) with shot noise on."""
        base = dict(thermal_noise_density=10e-12, shot_noise_enabled=True)
        base.update(overrides)
        return DetectionConfig(**base)

    def __post_init__(self):
        if not 1 <= self.adc_bits <= 16:
            raise ConfigError(f"adc_bits must be in [1,16], got {self.adc_bits}")
        if self.samples_per_symbol < 4:
            raise ConfigError(
                f"samples_per_symbol must be >= 4, got {self.samples_per_symbol}")
        if self.pd_bandwidth <= 0 or self.symbol_rate <= 0:
            raise ConfigError("bandwidth and symbol rate must be positive")
        if self.thermal_noise_density < 0 or self.responsivity <= 0:
            raise ConfigError("responsivity must be > 0, noise density >= 0")


@dataclass(frozen=True)
class AnalogTrace:
    """Deterministic electrical traces before noise, sampling and ADC."""

    electrical: np.ndarray  # [n_channels, n_samples], photocurrent in A
    sample_rate: float
    n_symbols: int
    samples_per_symbol: int
    channel_map: tuple[tuple[int, int], ...]

    @property
    def symbol_center_index(self) -> np.ndarray:
        sps = self.samples_per_symbol
        return np.arange(self.n_symbols) * sps + sps // 2


@dataclass(frozen=True)
class StateMatrix:
    """Digitized per-symbol, per-channel detector samples."""

    samples: np.ndarray  # [n_symbols, n_channels]
    channel_map: tuple[tuple[int, int], ...]
    symbol_rate: float
    adc_bits: int
    adc_ranges: np.ndarray  # [n_channels, 2]

    @property
    def n_symbols(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]


# ---------------------------------------------------------------------------
# fabrication
# ---------------------------------------------------------------------------

def _fold(shift: float, fsr: float) -> float:
    """Fold a frequency shift into (-fsr/2, fsr/2]."""
    return float((shift + fsr / 2.0) % fsr - fsr / 2.0)


def fabricate(nominal: NominalConfig = NominalConfig(), fab_seed: int = 0) -> DeviceProfile:
    """Sample one device from the nominal design.

    Per ring the stream draws, in fixed order: a uniform refractive-index
    deviation on [-w, w], a resonance jitter N(0, sigma_f) and a coupling
    strength N(mu, sigma) clipped into (0, 1].  The index deviation maps to
    a resonance shift f_c * dn/n_g folded modulo the ring's free spectral
    range.  Re-running with the same seed is bit-identical.
    """
    rng = np.random.default_rng(fab_seed)
    total = nominal.n_nodes * nominal.mrrs_per_node
    f_c = nominal.carrier_frequency

    nodes = []
    record = []
    k = 0
    for _ in range(nominal.n_nodes):
        mrrs = []
        node_record = []
        for _ in range(nominal.mrrs_per_node):
            target = (k - total // 2) * nominal.detuning_spacing
            dneff = rng.uniform(-nominal.dneff_halfwidth, nominal.dneff_halfwidth)
            jitter = rng.normal(0.0, nominal.resonance_jitter_sigma)
            coupling = float(np.clip(
                rng.normal(nominal.coupling_mu, nominal.coupling_sigma), 1e-9, 1.0))
            fsr = C_LIGHT / (nominal.n_g * 2.0 * np.pi * nominal.radius)
            folded = _fold(f_c * dneff / nominal.n_g, fsr)
            mrrs.append(MrrParams(
                kappa=nominal.kappa,
                radius=nominal.radius,
                n_eff=nominal.n_eff,
                n_g=nominal.n_g,
                alpha=nominal.alpha,
                resonance_offset=target + folded + jitter,
                coupling_strength=coupling,
            ))
            node_record.append((float(dneff), folded, float(jitter), coupling))
            k += 1
        nodes.append(RossNode(
            mrrs=tuple(mrrs),
            loop_delay=nominal.loop_delay,
            feedback_strength=nominal.feedback_strength,
            inter_mrr_delay=nominal.inter_mrr_delay,
        ))
        record.append(tuple(node_record))

    return DeviceProfile(
        nominal=nominal, nodes=tuple(nodes),
        fab_seed=fab_seed, deviation_record=tuple(record),
    )


# ---------------------------------------------------------------------------
# transfer functions
# ---------------------------------------------------------------------------

def mrr_response(mrr: MrrParams, freq_grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Through/drop field transfer of one add/drop ring on a baseband grid.

    Symmetric couplers with field cross-coupling kappa; the round-trip phase
    is linearized around the fabricated resonance with the group-index slope,
    phi(f) = 2*pi*(n_g/c)*L*(f - f_res), so the response repeats every free
    spectral range and the drop magnitude peaks exactly on resonance.
    """
    f = np.asarray(freq_grid, dtype=float)
    r = np.sqrt(1.0 - mrr.kappa ** 2)
    a = mrr.round_trip_amplitude
    phi = 2.0 * np.pi * (mrr.n_g / C_LIGHT) * mrr.circumference * (f - mrr.resonance_offset)
    # exp(-i*phi): with the e^{+i*2*pi*f*t} synthesis convention a positive
    # round-trip time must appear as a negative phase slope (causal ring).
    ring = a * np.exp(-1j * phi)
    denom = 1.0 - r * r * ring
    h_thru = r * (1.0 - ring) / denom
    h_drop = -(mrr.kappa ** 2) * np.sqrt(a) * np.exp(-1j * phi / 2.0) / denom
    return h_thru, h_drop


def mrr_linewidth_analytic(mrr: MrrParams) -> float:
    """-3 dB full width of the drop resonance, (1-r^2*a)/(pi*sqrt(r^2*a))*FSR."""
    r2a = (1.0 - mrr.kappa ** 2) * mrr.round_trip_amplitude
    return float((1.0 - r2a) / (np.pi * np.sqrt(r2a)) * mrr.fsr)


def mrr_linewidth_scan(mrr: MrrParams, resolution: float = 1e6) -> float:
    """Measure the drop-port -3 dB full width by brute-force grid scan."""
    guess = mrr_linewidth_analytic(mrr)
    span = 4.0 * guess
    grid = mrr.resonance_offset + np.arange(-span, span, resolution)
    _, h_drop = mrr_response(mrr, grid)
    power = np.abs(h_drop) ** 2
    peak = power.max()
    above = np.flatnonzero(power >= peak / 2.0)
    return float((above[-1] - above[0]) * resolution)


def node_transfer(node: RossNode, freq_grid: np.ndarray) -> np.ndarray:
    """Per-channel transfer of one loop, [n_freq x n_mrrs].

    Channel k taps ring k's drop port after the through-cascade of rings
    before it; the recirculation multiplies everything by the closed-loop
    factor G = 1/(1 - F_str * F * exp(-i*2*pi*f*T_d)) with F the full-chain
    through product. c_io = 1/2 is the in/out amplitude of the two loop
    couplers.
    """
    f = np.asarray(freq_grid, dtype=float)
    c_io = 0.5
    link = np.exp(-2j * np.pi * f * node.inter_mrr_delay)

    thru = []
    drop = []
    for mrr in node.mrrs:
        h_t, h_d = mrr_response(mrr, f)
        thru.append(mrr.coupling_strength * h_t * link)
        drop.append(h_d)

    chain = np.ones_like(f, dtype=complex)
    partial = []
    for stage in thru:
        partial.append(chain.copy())
        chain = chain * stage

    loop_gain = (node.feedback_strength * chain
                 * np.exp(-2j * np.pi * f * node.loop_delay))
    peak = np.abs(loop_gain).max() if f.size else 0.0
    if peak >= 1.0:
        raise ModelError(f"loop diverges: max |F_str*F(f)| = {peak:.6f} >= 1")
    g = 1.0 / (1.0 - loop_gain)

    out = np.empty((f.size, len(node.mrrs)), dtype=complex)
    for k, (h_d, before) in enumerate(zip(drop, partial)):
        out[:, k] = c_io * h_d * before * g
    return out


# ---------------------------------------------------------------------------
# modulation and detection
# ---------------------------------------------------------------------------

def modulate(x: np.ndarray, cfg: DetectionConfig, device: DeviceProfile) -> np.ndarray:
    """Intensity-modulate the carrier with one power sample per input symbol.

    Per-symbol optical power is P_mean*(bias + depth*x)/(bias + depth*mean(x)),
    so the batch-average power equals the device's mean power; rectangular
    shaping at samples_per_symbol oversampling.  Returns the complex baseband
    field envelope.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 1:
        raise ValueError("input series must be non-empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("input series must be finite")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError(
            f"modulator input must lie in [0,1], got [{x.min():.4g},{x.max():.4g}]")
    norm = cfg.modulation_bias + cfg.modulation_depth * float(x.mean())
    if norm <= 0.0:
        power = np.zeros_like(x)
    else:
        power = device.mean_power * (cfg.modulation_bias + cfg.modulation_depth * x) / norm
    field = np.sqrt(power).astype(complex)
    return np.repeat(field, cfg.samples_per_symbol)


def _grid_length(n_samples: int) -> int:
    return 1 << int(np.ceil(np.log2(max(n_samples, 2))))


@lru_cache(maxsize=8)
def _transfer_table(device: DeviceProfile, n_grid: int, sample_rate: float) -> np.ndarray:
    """Channel transfer functions on the FFT grid, [n_channels, n_grid]."""
    freqs = np.fft.fftfreq(n_grid, d=1.0 / sample_rate)
    split = 1.0 / np.sqrt(device.splitter_ways)
    rows = []
    for node in device.nodes:
        t = node_transfer(node, freqs)  # [n_grid, n_mrrs]
        rows.extend((split * t[:, k] for k in range(t.shape[1])))
    return np.asarray(rows)


def field_to_electrical(device: DeviceProfile, field: np.ndarray,
                        cfg: DetectionConfig) -> np.ndarray:
    """Propagate a baseband field through every channel and detect it.

    FFT -> per-channel transfer -> IFFT -> square-law detection scaled by
    responsivity -> one-pole low-pass at the photodiode bandwidth.
    Returns photocurrents [n_channels, n_samples].
    """
    if not np.all(np.isfinite(field)):
        raise ModelError("non-finite field sample")
    n = field.size
    n_grid = _grid_length(n)
    fs = cfg.samples_per_symbol * cfg.symbol_rate
    spectrum = np.fft.fft(field, n=n_grid)
    table = _transfer_table(device, n_grid, fs)
    fields = np.fft.ifft(table * spectrum[None, :], axis=1)[:, :n]
    current = cfg.responsivity * np.abs(fields) ** 2
    # one-pole low-pass: y[k] = (1-b)*x[k] + b*y[k-1], b = exp(-2*pi*B/fs)
    b = np.exp(-2.0 * np.pi * cfg.pd_bandwidth / fs)
    return lfilter([1.0 - b], [1.0, -b], current, axis=1)


def analog_front_end(device: DeviceProfile, x: np.ndarray,
                     cfg: DetectionConfig) -> AnalogTrace:
    """Deterministic part of the pipeline: modulate, filter, detect."""
    field = modulate(x, cfg, device)
    electrical = field_to_electrical(device, field, cfg)
    return AnalogTrace(
        electrical=electrical,
        sample_rate=cfg.samples_per_symbol * cfg.symbol_rate,
        n_symbols=int(np.asarray(x).size),
        samples_per_symbol=cfg.samples_per_symbol,
        channel_map=device.channel_map,
    )


def observed_adc_ranges(analog: AnalogTrace) -> np.ndarray:
    """Per-channel (min, max) of the noiseless symbol-center samples."""
    samples = analog.electrical[:, analog.symbol_center_index]
    return np.stack([samples.min(axis=1), samples.max(axis=1)], axis=1)


def digitize(analog: AnalogTrace, cfg: DetectionConfig,
             adc_ranges: np.ndarray | None = None,
             noise_seed: int | None = None) -> StateMatrix:
    """Noise, symbol-center sampling and uniform ADC quantization.

    Thermal noise has density*sqrt(B) RMS; shot noise variance is 2*q*I*B at
    the local photocurrent.  Both come from one seeded stream.  If no ADC
    ranges are passed, the full scale is the noiseless observed range of this
    trace (a self-calibration pass); out-of-range samples saturate.
    """
    seed = cfg.noise_seed if noise_seed is None else noise_seed
    current = analog.electrical
    sigma2 = np.full_like(current, (cfg.thermal_noise_density ** 2) * cfg.pd_bandwidth)
    if cfg.shot_noise_enabled:
        sigma2 = sigma2 + 2.0 * Q_ELECTRON * np.clip(current, 0.0, None) * cfg.pd_bandwidth
    if sigma2.max() > 0.0:
        rng = np.random.default_rng(seed)
        current = current + rng.standard_normal(current.shape) * np.sqrt(sigma2)

    sampled = current[:, analog.symbol_center_index]  # [n_ch, n_symbols]
    if adc_ranges is None:
        adc_ranges = observed_adc_ranges(analog)
    adc_ranges = np.asarray(adc_ranges, dtype=float)

    lo = adc_ranges[:, 0][:, None]
    hi = adc_ranges[:, 1][:, None]
    span = hi - lo
    levels = 1 << cfg.adc_bits
    with np.errstate(divide="ignore", invalid="ignore"):
        code = np.floor((sampled - lo) / span * levels)
    code = np.where(span > 0.0, np.clip(code, 0, levels - 1), 0.0)
    lsb = np.where(span > 0.0, span / levels, 0.0)
    quantized = lo + (code + 0.5) * lsb
    quantized = np.where(span > 0.0, quantized, lo)

    return StateMatrix(
        samples=np.ascontiguousarray(quantized.T),
        channel_map=analog.channel_map,
        symbol_rate=cfg.symbol_rate,
        adc_bits=cfg.adc_bits,
        adc_ranges=adc_ranges,
    )


def simulate_states(device: DeviceProfile, x: np.ndarray, cfg: DetectionConfig,
                    adc_ranges: np.ndarray | None = None) -> StateMatrix:
    """Full pipeline from modulator input to quantized state matrix."""
    return digitize(analog_front_end(device, x, cfg), cfg, adc_ranges)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def device_to_dict(device: DeviceProfile) -> dict:
    nom = device.nominal
    return {
        "schema": "rosspuf/device-profile/v1",
        "fab_seed": device.fab_seed,
        "nominal": {
            "n_nodes": nom.n_nodes,
            "mrrs_per_node": nom.mrrs_per_node,
            "detuning_spacing": nom.detuning_spacing,
            "kappa": nom.kappa,
            "radius": nom.radius,
            "n_eff": nom.n_eff,
            "n_g": nom.n_g,
            "alpha": nom.alpha,
            "feedback_strength": nom.feedback_strength,
            "loop_delay": nom.loop_delay,
            "inter_mrr_delay": nom.inter_mrr_delay,
            "coupling_mu": nom.coupling_mu,
            "coupling_sigma": nom.coupling_sigma,
            "dneff_halfwidth": nom.dneff_halfwidth,
            "resonance_jitter_sigma": nom.resonance_jitter_sigma,
            "carrier_wavelength": nom.carrier_wavelength,
            "mean_power": nom.mean_power,
            "splitter_ways": nom.splitter_ways,
        },
        "deviation_record": [
            [list(mrr) for mrr in node] for node in device.deviation_record
        ],
    }


def device_from_dict(d: dict) -> DeviceProfile:
    """Rebuild a device from its file record without re-sampling."""
    if d.get("schema") != "rosspuf/device-profile/v1":
        raise ConfigError(f"unsupported device schema: {d.get('schema')!r}")
    nominal = NominalConfig(**d["nominal"])
    total = nominal.n_nodes * nominal.mrrs_per_node
    nodes = []
    record = []
    k = 0
    for node_devs in d["deviation_record"]:
        mrrs = []
        node_record = []
        for dneff, folded, jitter, coupling in node_devs:
            target = (k - total // 2) * nominal.detuning_spacing
            mrrs.append(MrrParams(
                kappa=nominal.kappa, radius=nominal.radius,
                n_eff=nominal.n_eff, n_g=nominal.n_g, alpha=nominal.alpha,
                resonance_offset=target + folded + jitter,
                coupling_strength=coupling,
            ))
            node_record.append((dneff, folded, jitter, coupling))
            k += 1
        nodes.append(RossNode(
            mrrs=tuple(mrrs), loop_delay=nominal.loop_delay,
            feedback_strength=nominal.feedback_strength,
            inter_mrr_delay=nominal.inter_mrr_delay,
        ))
        record.append(tuple(node_record))
    return DeviceProfile(nominal=nominal, nodes=tuple(nodes),
                         fab_seed=d["fab_seed"], deviation_record=tuple(record))
