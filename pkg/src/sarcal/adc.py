"""Behavioral model of a redundant-weight SAR ADC with a lossy reference.

The model captures four non-ideality families:

* **Capacitor mismatch** -- every bit weight is realized as a bank of unit
  capacitors; the realized value is drawn once per instance with a relative
  sigma that scales as ``1/sqrt(weight)`` (larger banks match better).
  Digital recombination always uses the nominal integer weights, so the
  mismatch between analog step and digital weight is what produces static
  nonlinearity.
* **Comparator offset and noise** -- a per-instance input offset plus fresh
  Gaussian noise on every bit decision.
* **Sampling (kT/C) noise** -- Gaussian noise with sigma ``sqrt(kB*T/C_s)``
  added to the tracked input at the sampling instant.
* **Reference ripple with memory** -- each DAC up-transition pulls charge
  from the reference node, deflecting it by ``-dQ/(C_par + C_decap)``.  The
  deflection recovers through the series resistance with a single time
  constant ``tau = R * (C_par + C_decap)`` and is *not* required to settle
  within a bit cycle or even a conversion, so errors carry across samples.
  Every comparison sees the instantaneous effective reference.

Conversion uses a greedy accumulate-up search: the trial threshold for
cycle ``i`` adds the realized step of weight ``i`` on top of the accepted
stack, referenced to the instantaneous reference voltage.  With the default
redundant weight set a wrong early decision within the overlap range is
absorbed by later cycles.  Charge is drawn from the reference only on
up-transitions (accepted trials) plus the MSB-bank recharge during tracking
when the previous conversion ended with the MSB bank discharged; the
resulting draw is strongly code-dependent, which is exactly what makes the
ripple signal-correlated.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import ConfigError, UsageError
from .signals import Signal
from .streams import CodeStream

BOLTZMANN = 1.380649e-23  # J/K, exact (SI 2019)

#: Weight set used by the 12-bit parts: plain binary with the 64 weight
#: repeated once, giving sum 4159 >= 4095 and a 64-LSB correction range
#: for decisions made at or before the first 64.
DEFAULT_WEIGHTS_12BIT = (2048, 1024, 512, 256, 128, 64, 64, 32, 16, 8, 4, 2, 1)


def binary_weights(resolution_bits: int) -> tuple[int, ...]:
    """Plain non-redundant binary weight set for an N-bit converter."""
    return tuple(1 << (resolution_bits - 1 - i) for i in range(resolution_bits))


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


@dataclass(frozen=True)
class AdcConfig:
    """Static electrical configuration of one SAR ADC.

    The input convention is single-ended-equivalent differential: the full
    scale spans ``[-v_ref, +v_ref]``, code 0 sits at the bottom rail and the
    mid-scale code ``2**(N-1)`` corresponds to 0 V.
    """

    resolution_bits: int = 12
    bit_weights: tuple[int, ...] = DEFAULT_WEIGHTS_12BIT
    v_ref: float = 0.5
    unit_cap: float = 0.6e-15
    samp_cap: float = 2.5e-12
    cap_mismatch_sigma: float = 0.0
    comp_offset_sigma: float = 0.0
    comp_noise_sigma: float = 0.0
    fs: float = 84e6
    bit_cycle_time: float = 0.65e-9
    temperature: float = 300.0

    def __post_init__(self):
        object.__setattr__(self, "bit_weights", tuple(int(w) for w in self.bit_weights))
        _require(self.resolution_bits >= 1, "resolution_bits: must be >= 1")
        _require(len(self.bit_weights) >= self.resolution_bits,
                 "bit_weights: need at least resolution_bits entries")
        _require(all(w > 0 for w in self.bit_weights),
                 "bit_weights: all weights must be positive")
        _require(sum(self.bit_weights) >= self.n_codes - 1,
                 f"bit_weights: sum {sum(self.bit_weights)} cannot reach full scale "
                 f"{self.n_codes - 1}")
        _require(self.v_ref > 0, "v_ref: must be positive")
        _require(self.unit_cap > 0, "unit_cap: must be positive")
        _require(self.samp_cap > 0, "samp_cap: must be positive")
        _require(self.cap_mismatch_sigma >= 0, "cap_mismatch_sigma: must be >= 0")
        _require(self.comp_offset_sigma >= 0, "comp_offset_sigma: must be >= 0")
        _require(self.comp_noise_sigma >= 0, "comp_noise_sigma: must be >= 0")
        _require(self.fs > 0, "fs: must be positive")
        _require(self.bit_cycle_time > 0, "bit_cycle_time: must be positive")
        _require(self.temperature >= 0, "temperature: must be >= 0")
        _require(self.n_cycles * self.bit_cycle_time <= 1.0 / self.fs,
                 "bit_cycle_time: conversion does not fit in one sample period "
                 f"({self.n_cycles} cycles x {self.bit_cycle_time} s at fs={self.fs})")

    @property
    def n_codes(self) -> int:
        return 1 << self.resolution_bits

    @property
    def n_cycles(self) -> int:
        return len(self.bit_weights)

    @property
    def lsb(self) -> float:
        return 2.0 * self.v_ref / self.n_codes

    @property
    def ktc_sigma(self) -> float:
        return math.sqrt(BOLTZMANN * self.temperature / self.samp_cap)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["bit_weights"] = list(self.bit_weights)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "AdcConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"adc config: unknown fields {sorted(unknown)}")
        return cls(**data)

    @staticmethod
    def ideal(resolution_bits: int = 12, v_ref: float = 0.5, fs: float = 84e6,
              bit_cycle_time: float | None = None) -> "AdcConfig":
        """Noiseless, mismatch-free configuration with binary weights.

        Temperature is set to zero so even the sampling network is silent.
        """
        if bit_cycle_time is None:
            bit_cycle_time = 1.0 / fs / (resolution_bits + 2)
        return AdcConfig(
            resolution_bits=resolution_bits,
            bit_weights=binary_weights(resolution_bits),
            v_ref=v_ref,
            fs=fs,
            bit_cycle_time=bit_cycle_time,
            temperature=0.0,
        )


@dataclass(frozen=True)
class RefNetworkConfig:
    """Reference supply network: series resistance into a lumped node cap.

    ``tau = series_resistance * (parasitic_cap + decap)``.  Setting either
    factor to zero disables ripple (instant recovery / nothing to deflect).
    """

    series_resistance: float = 0.0
    parasitic_cap: float = 0.0
    decap: float = 0.0

    def __post_init__(self):
        _require(self.series_resistance >= 0, "series_resistance: must be >= 0")
        _require(self.parasitic_cap >= 0, "parasitic_cap: must be >= 0")
        _require(self.decap >= 0, "decap: must be >= 0")
        _require(math.isfinite(self.tau), "tau: must be finite")

    @property
    def node_cap(self) -> float:
        return self.parasitic_cap + self.decap

    @property
    def tau(self) -> float:
        return self.series_resistance * self.node_cap

    @property
    def active(self) -> bool:
        return self.tau > 0.0 and self.node_cap > 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RefNetworkConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"reference network config: unknown fields "
                              f"{sorted(unknown)}")
        return cls(**data)


@dataclass
class ConversionResult:
    """Diagnostics of a single conversion."""

    code: int
    decisions: np.ndarray          # uint8, one entry per bit cycle
    ref_trace: np.ndarray          # reference deviation (V) seen at each cycle
    switching_charge: float        # total charge drawn from the reference (C)


@dataclass
class AdcInstance:
    """One manufactured ADC: a config plus frozen mismatch draws and live state."""

    config: AdcConfig
    refnet: RefNetworkConfig
    seed: int
    cap_values: np.ndarray         # realized capacitance per weight (F)
    comp_offset: float             # input-referred comparator offset (V)
    gain: float = 1.0              # sampling-path gain relative to nominal
    timing_skew: float = 0.0       # sampling-instant offset (s)
    ref_deviation: float = 0.0     # reference deviation (V) at ref_time
    ref_time: float = -math.inf
    prev_msb_up: bool = False
    last_conv_time: float = -math.inf
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    # derived arrays for the kernel, filled by build_instance
    _step_frac: np.ndarray = None
    _cap_charge: np.ndarray = None
    _defl: np.ndarray = None

    def _refresh_derived(self) -> None:
        cfg = self.config
        self._step_frac = np.ascontiguousarray(
            self.cap_values / (cfg.n_codes * cfg.unit_cap))
        self._cap_charge = np.ascontiguousarray(self.cap_values * cfg.v_ref)
        if self.refnet.active:
            self._defl = np.ascontiguousarray(
                self.cap_values * cfg.v_ref / self.refnet.node_cap)
        else:
            self._defl = np.zeros_like(self.cap_values)

    def reference_deviation_at(self, t: float) -> float:
        """Reference deviation (V) at time ``t >= ref_time``; pure query."""
        if not self.refnet.active or not math.isfinite(self.ref_time):
            return 0.0
        if t < self.ref_time:
            raise UsageError(f"t: {t} precedes the reference state time {self.ref_time}")
        return self.ref_deviation * math.exp(-(t - self.ref_time) / self.refnet.tau)


def build_instance(config: AdcConfig, refnet: RefNetworkConfig | None = None,
                   seed: int = 0, gain: float = 1.0,
                   timing_skew: float = 0.0) -> AdcInstance:
    """Draw one manufactured instance.  Deterministic in ``seed``.

    Capacitor banks are drawn as ``nominal * (1 + N(0, sigma)/sqrt(weight))``
    so the relative spread of a weight-w bank shrinks with sqrt(w); the
    comparator offset is ``N(0, comp_offset_sigma)``.
    """
    if refnet is None:
        refnet = RefNetworkConfig()
    ss = np.random.SeedSequence(int(seed))
    static_ss, noise_ss = ss.spawn(2)
    static_rng = np.random.default_rng(static_ss)

    weights = np.asarray(config.bit_weights, dtype=np.float64)
    eps = static_rng.standard_normal(config.n_cycles)
    cap_values = weights * config.unit_cap * (
        1.0 + config.cap_mismatch_sigma * eps / np.sqrt(weights))
    if np.any(cap_values <= 0):
        raise ConfigError("cap_mismatch_sigma: drawn capacitor values are not "
                          "all positive; sigma is unphysically large")
    comp_offset = float(static_rng.standard_normal() * config.comp_offset_sigma)

    inst = AdcInstance(
        config=config,
        refnet=refnet,
        seed=int(seed),
        cap_values=cap_values,
        comp_offset=comp_offset,
        gain=float(gain),
        timing_skew=float(timing_skew),
        rng=np.random.default_rng(noise_ss),
    )
    inst._refresh_derived()
    return inst


@njit(cache=True)
def _sar_kernel(v_samp, comp_noise, step_frac, weights, cap_charge, defl,
                v_ref, comp_offset, decay_cycle, decay_gap, code_max,
                ripple_on, r0, prev_msb_up0, record, decisions_out, rtrace_out,
                codes_out, charge_out):
    """Convert a block of sampled voltages.  Returns final ripple state.

    ``v_samp`` already includes gain, timing skew and kT/C noise.  ``r0`` is
    the reference deviation at the first conversion's sampling instant.
    """
    n = v_samp.shape[0]
    n_cycles = step_frac.shape[0]
    r = r0
    prev_up = prev_msb_up0
    for k in range(n):
        if k > 0:
            r *= decay_gap
        q = 0.0
        if not prev_up:
            # MSB bank recharges from the reference during tracking.
            q += cap_charge[0]
            if ripple_on:
                r -= defl[0]
        acc = 0.0
        code = 0
        msb_up = False
        v = v_samp[k] + comp_offset
        for i in range(n_cycles):
            thresh = -v_ref + 2.0 * (v_ref + r) * (acc + step_frac[i])
            d = (v + comp_noise[k, i]) >= thresh
            if record:
                rtrace_out[k, i] = r
                decisions_out[k, i] = 1 if d else 0
            if d:
                acc += step_frac[i]
                code += weights[i]
            if i == 0:
                msb_up = d
            if i < n_cycles - 1:
                if ripple_on:
                    r *= decay_cycle
                if d:
                    q += cap_charge[i + 1]
                    if ripple_on:
                        r -= defl[i + 1]
        prev_up = msb_up
        if code > code_max:
            code = code_max
        codes_out[k] = code
        charge_out[k] = q
    return r, prev_up


_EMPTY_U8 = np.zeros((0, 0), dtype=np.uint8)
_EMPTY_F8 = np.zeros((0, 0), dtype=np.float64)


def _advance_ripple(inst: AdcInstance, t: float) -> float:
    """Reference deviation decayed from the stored state time to ``t``."""
    if not inst.refnet.active:
        return 0.0
    if not math.isfinite(inst.ref_time):
        return 0.0
    dt = t - inst.ref_time
    return inst.ref_deviation * math.exp(-dt / inst.refnet.tau)


def _decay_factors(inst: AdcInstance) -> tuple[float, float]:
    cfg, net = inst.config, inst.refnet
    if not net.active:
        return 0.0, 0.0
    decay_cycle = math.exp(-cfg.bit_cycle_time / net.tau)
    gap = 1.0 / cfg.fs - (cfg.n_cycles - 1) * cfg.bit_cycle_time
    decay_gap = math.exp(-gap / net.tau)
    return decay_cycle, decay_gap


def _run_block(inst: AdcInstance, v_samp: np.ndarray, t0: float, record: bool):
    cfg = inst.config
    n = len(v_samp)
    comp_noise = inst.rng.standard_normal((n, cfg.n_cycles)) * cfg.comp_noise_sigma
    codes = np.empty(n, dtype=np.int64)
    charge = np.empty(n, dtype=np.float64)
    if record:
        decisions = np.zeros((n, cfg.n_cycles), dtype=np.uint8)
        rtrace = np.zeros((n, cfg.n_cycles), dtype=np.float64)
    else:
        decisions, rtrace = _EMPTY_U8, _EMPTY_F8
    decay_cycle, decay_gap = _decay_factors(inst)
    r0 = _advance_ripple(inst, t0)
    weights = np.asarray(cfg.bit_weights, dtype=np.int64)
    r, prev_up = _sar_kernel(
        v_samp, comp_noise, inst._step_frac, weights, inst._cap_charge,
        inst._defl, cfg.v_ref, inst.comp_offset, decay_cycle, decay_gap,
        cfg.n_codes - 1, inst.refnet.active, r0, inst.prev_msb_up, record,
        decisions, rtrace, codes, charge)
    inst.ref_deviation = float(r)
    inst.ref_time = t0 + (n - 1) / cfg.fs + (cfg.n_cycles - 1) * cfg.bit_cycle_time
    inst.prev_msb_up = bool(prev_up)
    inst.last_conv_time = t0 + (n - 1) / cfg.fs
    return codes, charge, decisions, rtrace


def sample_and_convert(inst: AdcInstance, v_in: float, t: float) -> ConversionResult:
    """Sample ``v_in`` at time ``t`` and run one full conversion.

    ``t`` must not precede the previous conversion (streams only move
    forward).  Inputs beyond the rails saturate without error.
    """
    if t < inst.last_conv_time:
        raise UsageError(f"t: {t} precedes the previous conversion at "
                         f"{inst.last_conv_time}; time must be non-decreasing")
    cfg = inst.config
    ktc = float(inst.rng.standard_normal()) * cfg.ktc_sigma
    v_samp = np.array([inst.gain * v_in + ktc], dtype=np.float64)
    codes, charge, decisions, rtrace = _run_block(inst, v_samp, t, record=True)
    return ConversionResult(
        code=int(codes[0]),
        decisions=decisions[0].copy(),
        ref_trace=rtrace[0].copy(),
        switching_charge=float(charge[0]),
    )


def convert_samples(inst: AdcInstance, v: np.ndarray, t0: float = 0.0,
                    return_charge: bool = False):
    """Convert a block of already-tracked input voltages at ``fs``.

    ``v[k]`` is the analog input present at sampling instant ``t0 + k/fs``.
    The sampling-path gain applies, then kT/C noise is added.  Used directly
    for ramp/test stimuli; `convert_stream` wraps it for Signal objects.
    """
    if t0 < inst.last_conv_time:
        raise UsageError(f"t0: {t0} precedes the previous conversion at "
                         f"{inst.last_conv_time}; time must be non-decreasing")
    v = np.ascontiguousarray(v, dtype=np.float64)
    cfg = inst.config
    ktc = inst.rng.standard_normal(len(v)) * cfg.ktc_sigma
    v_samp = inst.gain * v + ktc
    codes, charge, _, _ = _run_block(inst, v_samp, t0, record=False)
    stream = CodeStream(codes, fs=cfg.fs, t0=t0)
    if return_charge:
        return stream, charge
    return stream


def convert_stream(inst: AdcInstance, signal: Signal, n: int,
                   t0: float = 0.0) -> CodeStream:
    """Convert ``n`` samples of ``signal`` starting at wall-clock ``t0``.

    The instance's timing skew shifts the *sampled* instants
    (``v = gain * signal(t_k + skew)``) while the reported time axis stays
    nominal, which is how a skewed ADC looks from the digital side.
    """
    if n <= 0:
        raise UsageError(f"n: must be positive, got {n}")
    cfg = inst.config
    t_nominal = t0 + np.arange(n, dtype=np.float64) / cfg.fs
    v = signal.evaluate(t_nominal + inst.timing_skew)
    stream = convert_samples(inst, v, t0)
    stream.meta = {"signal": signal.to_dict(), "gain": inst.gain,
                   "timing_skew": inst.timing_skew, "seed": inst.seed}
    return stream


def warmup() -> None:
    """Force JIT compilation of the conversion kernel (cached on disk)."""
    cfg = AdcConfig.ideal(4, fs=1e6)
    inst = build_instance(cfg, RefNetworkConfig(1.0, 1e-12), seed=0)
    convert_samples(inst, np.zeros(4), 0.0)
