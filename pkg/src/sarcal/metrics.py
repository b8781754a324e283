"""Static and dynamic converter metrics.

Spectral metrics assume coherent sampling (tone on an odd bin coprime with
the record length) and therefore use a rectangular window.  The power
spectrum is one-sided and scaled so its sum equals the time-domain mean
square, which keeps Parseval checks exact.  Sign conventions: sndr/sfdr and
the IM ratios are positive dB (carrier over disturbance); thd is negative
dB (harmonic power relative to the carrier).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, UsageError
from .refcal import transitions_from_histogram
from .signals import Signal
from .streams import CodeStream, stream_values

_TINY = 1e-300


def _fold(b: int, n_fft: int) -> int:
    b = abs(int(b)) % n_fft
    return n_fft - b if b > n_fft // 2 else b


def _power_spectrum(x: np.ndarray) -> np.ndarray:
    """One-sided power spectrum of a mean-removed record.

    ``sum(p)`` equals ``mean((x - mean(x))**2)`` to float precision.
    """
    n = len(x)
    x = x - x.mean()
    spec = np.fft.rfft(x)
    p = (spec.real ** 2 + spec.imag ** 2) / (float(n) * float(n))
    p[1:] *= 2.0
    if n % 2 == 0:
        p[-1] /= 2.0
    return p


@dataclass
class SpectrumReport:
    power_dbc: np.ndarray          # per-bin power relative to the signal bin
    signal_bin: int
    sndr_db: float
    sfdr_db: float
    thd_db: float
    enob_bits: float
    spur_bin: int
    total_power: float             # time-domain mean square of the record
    n_fft: int
    warning: bool = False          # some bin carries more power than signal_bin

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="\n") as fh:
            fh.write("bin,power_db\n")
            for b, p in enumerate(self.power_dbc):
                fh.write(f"{b},{p:.6f}\n")


def spectrum(stream, n_fft: int, signal_bin: int) -> SpectrumReport:
    """Rectangular-window FFT metrics of the first ``n_fft`` samples.

    sndr excludes only DC and the signal bin; sfdr is signal over the
    largest remaining bin; thd folds harmonics 2..5 back into the first
    Nyquist zone.
    """
    x = stream_values(stream)
    if len(x) < n_fft:
        raise UsageError(f"stream length {len(x)} is shorter than n_fft {n_fft}")
    if not (0 < signal_bin <= n_fft // 2):
        raise UsageError(f"signal_bin: must lie in (0, n_fft/2], got {signal_bin}")
    p = _power_spectrum(x[:n_fft])
    total = float(np.sum(p))
    p_sig = float(p[signal_bin])

    mask = np.ones(len(p), dtype=bool)
    mask[0] = False
    mask[signal_bin] = False
    p_nd = float(np.sum(p[mask]))
    sndr = 10.0 * math.log10((p_sig + _TINY) / (p_nd + _TINY))

    spur_bin = int(np.argmax(np.where(mask, p, -1.0)))
    p_spur = float(p[spur_bin])
    sfdr = 10.0 * math.log10((p_sig + _TINY) / (p_spur + _TINY))
    warning = bool(p_spur > p_sig)

    p_harm = 0.0
    for h in (2, 3, 4, 5):
        hb = _fold(h * signal_bin, n_fft)
        if hb in (0, signal_bin):
            continue
        p_harm += float(p[hb])
    thd = 10.0 * math.log10((p_harm + _TINY) / (p_sig + _TINY))

    power_dbc = 10.0 * np.log10((p + _TINY) / (p_sig + _TINY))
    return SpectrumReport(
        power_dbc=power_dbc, signal_bin=signal_bin,
        sndr_db=sndr, sfdr_db=sfdr, thd_db=thd,
        enob_bits=enob(sndr), spur_bin=spur_bin,
        total_power=total, n_fft=n_fft, warning=warning)


def enob(sndr_db: float) -> float:
    return (sndr_db - 1.76) / 6.02


@dataclass
class LinearityReport:
    dnl: np.ndarray                # LSB, codes 1 .. n_codes-2
    inl: np.ndarray                # LSB, transitions 1 .. n_codes-1 (ends 0)
    max_abs_dnl: float
    inl_extreme: float             # signed INL entry with the largest magnitude
    missing_codes: list
    n_codes: int

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="\n") as fh:
            fh.write("code,dnl,inl\n")
            for i, (d, v) in enumerate(zip(self.dnl, self.inl)):
                fh.write(f"{i + 1},{d:.6f},{v:.6f}\n")


def dnl_inl_sine(stream, stimulus: Signal, n_codes: int) -> LinearityReport:
    """Code-density DNL/INL from an overdriven-sine record.

    Fractional streams are re-quantized to the integer grid first.  DNL is
    relative to the endpoint-fit LSB; INL is the transition deviation from
    the endpoint line (first and last are zero by construction).
    """
    x = stream_values(stream)
    if len(x) < 64 * n_codes:
        raise UsageError(f"record length {len(x)} is below the required "
                         f"{64 * n_codes} (64 hits per average bin)")
    codes = np.clip(np.rint(x), 0, n_codes - 1).astype(np.int64)
    transitions = transitions_from_histogram(codes, stimulus, n_codes)
    t_first, t_last = transitions[0], transitions[-1]
    lsb = (t_last - t_first) / (n_codes - 2)
    if not (lsb > 0):
        raise UsageError("transitions: endpoint levels are not increasing")
    dnl = np.diff(transitions) / lsb - 1.0
    line = t_first + lsb * np.arange(n_codes - 1, dtype=np.float64)
    inl = (transitions - line) / lsb
    counts = np.bincount(codes, minlength=n_codes)
    missing = [int(k) for k in range(1, n_codes - 1) if counts[k] == 0]
    return LinearityReport(
        dnl=dnl, inl=inl,
        max_abs_dnl=float(np.max(np.abs(dnl))),
        inl_extreme=float(inl[np.argmax(np.abs(inl))]),
        missing_codes=missing, n_codes=n_codes)


@dataclass
class ImReport:
    im2_db: float                  # tone power over the worst f1+-f2 product
    im3_db: float                  # tone power over the worst 2f1-f2 / 2f2-f1 product
    tone_bins: tuple
    im2_bins: tuple
    im3_bins: tuple


def im2_im3(stream, f1: float, f2: float, n_fft: int,
            fs: float | None = None) -> ImReport:
    """Two-tone intermodulation ratios from a coherent record.

    Both tones must sit on integer bins of the ``n_fft`` window, and no
    intermodulation product may land on a tone bin.
    """
    if fs is None:
        if not isinstance(stream, (CodeStream,)) and not hasattr(stream, "fs"):
            raise UsageError("fs: required when the stream carries no sample rate")
        fs = stream.fs
    bins = []
    for f in (f1, f2):
        b_real = f * n_fft / fs
        b = int(round(b_real))
        if abs(b_real - b) > 1e-6:
            raise ConfigError(f"tone at {f} Hz is not coherent with the "
                              f"{n_fft}-point window (bin {b_real:.4f})")
        bins.append(_fold(b, n_fft))
    b1, b2 = bins
    im2_bins = (_fold(b1 + b2, n_fft), _fold(b1 - b2, n_fft))
    im3_bins = (_fold(2 * b1 - b2, n_fft), _fold(2 * b2 - b1, n_fft))
    for b in im2_bins + im3_bins:
        if b in (b1, b2):
            raise ConfigError(
                f"intermodulation product bin {b} collides with a tone bin; "
                "choose different tone frequencies")
    x = stream_values(stream)
    if len(x) < n_fft:
        raise UsageError(f"stream length {len(x)} is shorter than n_fft {n_fft}")
    p = _power_spectrum(x[:n_fft])
    p_tone = max(float(p[b1]), float(p[b2]))
    p_im2 = max(float(p[b]) for b in im2_bins)
    p_im3 = max(float(p[b]) for b in im3_bins)
    return ImReport(
        im2_db=10.0 * math.log10((p_tone + _TINY) / (p_im2 + _TINY)),
        im3_db=10.0 * math.log10((p_tone + _TINY) / (p_im3 + _TINY)),
        tone_bins=(b1, b2), im2_bins=im2_bins, im3_bins=im3_bins)


def fom_walden(power_w: float, sndr_db: float, fs_hz: float) -> float:
    """Walden figure of merit in joules per conversion step."""
    if power_w < 0:
        raise UsageError("power_w: must be >= 0")
    if fs_hz <= 0:
        raise UsageError("fs_hz: must be positive")
    return power_w / (2.0 ** enob(sndr_db) * fs_hz)
