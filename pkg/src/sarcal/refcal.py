"""Foreground code-density calibration of the reference ADC.

A sine that overdrives full scale is converted many times; the cumulative
code histogram is inverted through the sine's amplitude density to recover
the transition voltages, a two-point endpoint fit maps them to ideal-code
units, and averaging the per-run transfer functions beats down thermal
noise by ``sqrt(runs)``.  The result is a lookup table of fractional
corrected codes for every raw code.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adc import AdcInstance, convert_stream
from .errors import ConfigError, InsufficientOverdriveError, UsageError
from .signals import Signal, make_hist_stimulus
from .streams import CodeStream


def _as_codes(codes) -> np.ndarray:
    if isinstance(codes, CodeStream):
        return codes.codes
    arr = np.asarray(codes)
    if not np.issubdtype(arr.dtype, np.integer):
        raise UsageError("codes: histogram input must be integer codes")
    return arr.astype(np.int64)


def transitions_from_histogram(codes, stimulus: Signal, n_codes: int) -> np.ndarray:
    """Recover transition voltages from a sine code-density record.

    Returns the ``n_codes - 1`` transition levels ``T(1) .. T(n_codes-1)``
    (``T(k)`` separates code ``k-1`` from ``k``).  The stimulus must be a
    single sinusoid whose swing overdrives both rails; if either rail code
    never occurs the record cannot anchor the inversion and an
    InsufficientOverdriveError is raised.
    """
    if stimulus.kind != "single_tone":
        raise UsageError("stimulus: code-density inversion requires a single tone")
    arr = _as_codes(codes)
    if arr.size == 0:
        raise UsageError("codes: empty record")
    if arr.min() < 0 or arr.max() >= n_codes:
        raise UsageError(f"codes: values outside [0, {n_codes - 1}]")
    counts = np.bincount(arr, minlength=n_codes)
    if counts[0] == 0 or counts[-1] == 0:
        raise InsufficientOverdriveError(
            "histogram record never reached rail code "
            f"{'0' if counts[0] == 0 else n_codes - 1}; "
            "increase the stimulus overdrive")
    total = counts.sum()
    below = np.cumsum(counts)[:-1]            # samples with code < k, k = 1..n-1
    amplitude = stimulus.amplitudes[0]
    offset = stimulus.dc_offset
    return offset - amplitude * np.cos(np.pi * below / total)


def transitions_from_ramp_histogram(codes, v_lo: float, v_hi: float,
                                    n_codes: int) -> np.ndarray:
    """Transition levels from a uniform-ramp record (internal test mode).

    Direct inversion: the fraction of samples below code ``k`` maps linearly
    onto the ramp span.  Used as an independent cross-check of the sine
    estimator.
    """
    arr = _as_codes(codes)
    counts = np.bincount(arr, minlength=n_codes)
    if counts[0] == 0 or counts[-1] == 0:
        raise InsufficientOverdriveError(
            "ramp record never reached one of the rail codes")
    below = np.cumsum(counts)[:-1]
    return v_lo + (v_hi - v_lo) * below / counts.sum()


def _code_centers(transitions: np.ndarray, n_codes: int) -> np.ndarray:
    """Map measured transitions to per-code ideal-code values.

    The ideal line passes through the first and last transitions; each
    interior code maps to the line coordinate of its bin midpoint, and the
    rail codes extrapolate along the same line.  An ideal converter maps to
    exactly ``values[k] = k``.
    """
    t_first, t_last = transitions[0], transitions[-1]
    slope = (t_last - t_first) / (n_codes - 2)
    if not (slope > 0):
        raise UsageError("transitions: endpoint levels are not increasing; "
                         "record does not describe a usable transfer function")
    origin = t_first - slope              # line coordinate of T(1) is 1
    values = np.empty(n_codes, dtype=np.float64)
    mids = 0.5 * (transitions[:-1] + transitions[1:])
    values[1:-1] = (mids - origin) / slope - 0.5
    values[0] = (t_first - origin) / slope - 1.0
    values[-1] = (t_last - origin) / slope
    return values


@dataclass
class Lut:
    """Per-code fractional correction table for one ADC instance."""

    values: np.ndarray                    # float64, one entry per raw code
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("values: lut entries must be finite")
        if np.any(np.diff(self.values) < -1e-9):
            raise ConfigError("values: lut must be non-decreasing in the raw code")

    @property
    def n_codes(self) -> int:
        return len(self.values)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="\n") as fh:
            fh.write("code,corrected_code\n")
            for k, v in enumerate(self.values):
                fh.write(f"{k},{v:.6f}\n")
        sidecar = path.with_suffix(".meta.json")
        with sidecar.open("w", newline="\n") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def from_csv(path) -> "Lut":
        path = Path(path)
        if not path.exists():
            raise UsageError(f"lut file not found: {path}")
        data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=np.float64)
        data = np.atleast_2d(data)
        if data.shape[1] != 2:
            raise UsageError(f"lut file has {data.shape[1]} columns, expected 2")
        meta = {}
        sidecar = path.with_suffix(".meta.json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
        return Lut(data[:, 1], meta=meta)


def build_lut(adc: AdcInstance, stimulus: Signal | None = None, runs: int = 100,
              samples_per_run: int = 1 << 18) -> Lut:
    """Measure the averaged static transfer function of ``adc``.

    Each run converts ``samples_per_run`` samples of the overdriven sine
    (time keeps advancing across runs, so every run sees fresh noise),
    recovers the transfer function, and expresses it in ideal-code units
    via its own endpoint fit; the table is the pointwise mean over runs.
    """
    if runs < 1:
        raise UsageError(f"runs: must be >= 1, got {runs}")
    cfg = adc.config
    if samples_per_run < 50 * cfg.n_codes:
        raise UsageError(
            f"samples_per_run: need at least 50 counts per average bin "
            f"({50 * cfg.n_codes}), got {samples_per_run}")
    if stimulus is None:
        stimulus = make_hist_stimulus(cfg.v_ref, cfg.fs, samples_per_run)
    t0 = 0.0 if not math.isfinite(adc.last_conv_time) \
        else adc.last_conv_time + 1.0 / cfg.fs
    acc = np.zeros(cfg.n_codes, dtype=np.float64)
    for _ in range(runs):
        stream = convert_stream(adc, stimulus, samples_per_run, t0=t0)
        t0 += samples_per_run / cfg.fs
        transitions = transitions_from_histogram(stream, stimulus, cfg.n_codes)
        acc += _code_centers(transitions, cfg.n_codes)
    values = acc / runs
    meta = {
        "runs": runs,
        "samples_per_run": samples_per_run,
        "stimulus": stimulus.to_dict(),
        "seed": adc.seed,
        "n_codes": cfg.n_codes,
    }
    return Lut(values, meta=meta)


def apply_lut(lut: Lut, codes):
    """Correct raw code(s) through the table (no interpolation).

    Accepts a scalar, an integer array, or a CodeStream; returns float64 of
    the same shape (scalar in, scalar out).
    """
    arr = _as_codes(codes) if not np.isscalar(codes) else None
    if arr is None:
        k = int(codes)
        if not (0 <= k < lut.n_codes):
            raise UsageError(f"code {k} outside the table range [0, {lut.n_codes - 1}]")
        return float(lut.values[k])
    if arr.size and (arr.min() < 0 or arr.max() >= lut.n_codes):
        raise UsageError(f"codes outside the table range [0, {lut.n_codes - 1}]")
    return lut.values[arr]
