"""Test-signal construction and coherent-sampling helpers.

All stimuli used by the simulator are sums of sinusoids plus a DC offset.
For spectral tests the tone frequency is snapped to an odd FFT bin that is
coprime with the record length, so that every sample of the record lands on
a distinct phase of the tone and rectangular-window FFTs need no windowing
corrections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UsageError

_KINDS = ("single_tone", "two_tone", "dc")


@dataclass(frozen=True)
class Signal:
    """A deterministic analog stimulus: sum of sinusoids plus DC.

    ``evaluate(t)`` returns ``dc_offset + sum_i amplitudes[i] *
    sin(2*pi*frequencies[i]*t + phases[i])``.
    """

    kind: str = "single_tone"
    amplitudes: tuple[float, ...] = (0.5,)
    frequencies: tuple[float, ...] = (1e6,)
    phases: tuple[float, ...] = (0.0,)
    dc_offset: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"kind: unknown signal kind {self.kind!r}")
        n_expected = {"single_tone": 1, "two_tone": 2, "dc": 0}[self.kind]
        for name in ("amplitudes", "frequencies", "phases"):
            value = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, value)
            if len(value) != n_expected:
                raise ConfigError(
                    f"{name}: expected {n_expected} entries for kind {self.kind!r}, "
                    f"got {len(value)}"
                )
        if any(a < 0 for a in self.amplitudes):
            raise ConfigError("amplitudes: must be non-negative")
        if any(f <= 0 for f in self.frequencies):
            raise ConfigError("frequencies: must be positive")

    def evaluate(self, t):
        """Evaluate the stimulus at time(s) ``t`` (seconds; scalar or array)."""
        t = np.asarray(t, dtype=np.float64)
        out = np.full(t.shape, self.dc_offset, dtype=np.float64)
        for a, f, ph in zip(self.amplitudes, self.frequencies, self.phases):
            out += a * np.sin(2.0 * np.pi * f * t + ph)
        return out if out.ndim else float(out)

    # -- constructors -------------------------------------------------

    @staticmethod
    def tone(amplitude: float, frequency: float, phase: float = 0.0,
             dc_offset: float = 0.0) -> "Signal":
        return Signal("single_tone", (amplitude,), (frequency,), (phase,), dc_offset)

    @staticmethod
    def two_tone(a1: float, f1: float, a2: float, f2: float,
                 phase1: float = 0.0, phase2: float = 0.0,
                 dc_offset: float = 0.0) -> "Signal":
        return Signal("two_tone", (a1, a2), (f1, f2), (phase1, phase2), dc_offset)

    @staticmethod
    def dc(level: float) -> "Signal":
        return Signal("dc", (), (), (), level)

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "amplitudes": list(self.amplitudes),
            "frequencies": list(self.frequencies),
            "phases": list(self.phases),
            "dc_offset": self.dc_offset,
        }

    @staticmethod
    def from_dict(d: dict) -> "Signal":
        unknown = set(d) - {"kind", "amplitudes", "frequencies", "phases", "dc_offset"}
        if unknown:
            raise ConfigError(f"signal: unknown fields {sorted(unknown)}")
        return Signal(
            kind=d.get("kind", "single_tone"),
            amplitudes=tuple(d.get("amplitudes", ())),
            frequencies=tuple(d.get("frequencies", ())),
            phases=tuple(d.get("phases", ())),
            dc_offset=float(d.get("dc_offset", 0.0)),
        )


def coherent_bin(fs: float, n_fft: int, f_target: float) -> tuple[int, float]:
    """Pick the odd FFT bin nearest ``f_target`` that is coprime with ``n_fft``.

    Returns ``(bin, f_actual)`` with ``f_actual = bin * fs / n_fft``.  The
    bin is constrained to the open interval (0, n_fft/2) so the tone and all
    of its low-order aliases stay off DC and Nyquist.
    """
    if n_fft < 8:
        raise UsageError(f"n_fft: must be at least 8, got {n_fft}")
    if not (0.0 < f_target < fs / 2.0):
        raise UsageError(
            f"f_target: must lie in (0, fs/2) = (0, {fs / 2.0}), got {f_target}"
        )
    candidate = f_target * n_fft / fs
    # Walk outward from the rounded candidate until an odd coprime bin is hit.
    base = int(round(candidate))
    best = None
    for offset in range(0, n_fft):
        for b in (base - offset, base + offset):
            if b % 2 == 1 and 0 < b < n_fft // 2 and math.gcd(b, n_fft) == 1:
                dist = abs(b - candidate)
                if best is None or dist < best[0] - 1e-12:
                    best = (dist, b)
        if best is not None and offset > best[0] + 1:
            break
    if best is None:
        raise UsageError("f_target: no valid coherent bin exists for this n_fft")
    b = best[1]
    return b, b * fs / n_fft


def coherent_tone(fs: float, n_fft: int, f_target: float, amplitude: float,
                  phase: float = 0.0, dc_offset: float = 0.0) -> tuple[Signal, int]:
    """Build a coherently sampled single tone near ``f_target``.

    Returns ``(signal, bin)`` where ``signal.frequencies[0]`` is exactly
    ``bin * fs / n_fft``.
    """
    b, f = coherent_bin(fs, n_fft, f_target)
    return Signal.tone(amplitude, f, phase, dc_offset), b


def coherent_two_tone(fs: float, n_fft: int, f1_target: float,
                      f2_target: float, amplitude: float,
                      dc_offset: float = 0.0) -> tuple[Signal, int, int]:
    """Build an equal-amplitude two-tone stimulus on distinct coherent bins.

    Returns ``(signal, bin1, bin2)``.  Raises UsageError when the two targets
    snap to the same bin.
    """
    b1, f1 = coherent_bin(fs, n_fft, f1_target)
    b2, f2 = coherent_bin(fs, n_fft, f2_target)
    if b1 == b2:
        raise UsageError(
            f"two-tone targets {f1_target:g} and {f2_target:g} Hz snap to the "
            f"same coherent bin {b1}; separate them by at least one bin")
    return Signal.two_tone(amplitude, f1, amplitude, f2, dc_offset=dc_offset), b1, b2


def make_hist_stimulus(v_ref: float, fs: float, n_samples: int,
                       f_target: float | None = None,
                       overdrive: float = 0.02,
                       dc_offset: float = 0.0) -> Signal:
    """Sine stimulus for code-density (histogram) measurements.

    The amplitude overdrives the ``[-v_ref, +v_ref]`` full scale by
    ``overdrive`` (default 2%) so that both rail codes accumulate counts,
    which the cumulative-histogram inversion requires.  The frequency is
    snapped to an odd coherent bin of the ``n_samples``-long record so the
    record visits phases uniformly.
    """
    if overdrive <= 0:
        raise ConfigError(f"overdrive: must be positive, got {overdrive}")
    if f_target is None:
        # A slow default: ~100 cycles over the record.
        f_target = 101 * fs / n_samples
    _, f = coherent_bin(fs, n_samples, f_target)
    return Signal.tone(v_ref * (1.0 + overdrive), f, 0.0, dc_offset)
