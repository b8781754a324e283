"""Timestamped code streams and their CSV serialization.

CSV layout (one row per conversion): ``index,time_s,code``.  Raw ADC output
uses integer codes; calibrated output is fractional, so the ``code`` column
is written with six decimal places there.  Formats are fixed so repeated
runs with the same seed produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import UsageError


@dataclass
class CodeStream:
    """Raw conversion codes from one ADC at a uniform sample rate."""

    codes: np.ndarray          # int64, shape (n,)
    fs: float                  # sample rate of this ADC, Hz
    t0: float = 0.0            # wall-clock time of sample 0, seconds
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.codes)) / self.fs

    def to_csv(self, path) -> None:
        _write_csv(path, self.times, self.codes, fractional=False)

    @staticmethod
    def from_csv(path, fs: float | None = None, meta: dict | None = None) -> "CodeStream":
        t, values = _read_csv(path)
        if fs is None:
            fs = _infer_fs(t, path)
        return CodeStream(np.rint(values).astype(np.int64), fs=fs, t0=float(t[0]),
                          meta=meta or {})


@dataclass
class CorrectedStream:
    """Fractional-code stream produced by digital calibration.

    The first ``corrected_from`` samples lacked feature history and were
    passed through uncorrected.
    """

    values: np.ndarray         # float64, shape (n,)
    fs: float
    t0: float = 0.0
    corrected_from: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.values)) / self.fs

    def to_csv(self, path) -> None:
        _write_csv(path, self.times, self.values, fractional=True)

    @staticmethod
    def from_csv(path, fs: float | None = None, corrected_from: int = 0) -> "CorrectedStream":
        t, values = _read_csv(path)
        if fs is None:
            fs = _infer_fs(t, path)
        return CorrectedStream(values, fs=fs, t0=float(t[0]),
                               corrected_from=corrected_from)


def stream_values(stream) -> np.ndarray:
    """Return the sample values of a CodeStream/CorrectedStream/array as float64."""
    if isinstance(stream, CodeStream):
        return stream.codes.astype(np.float64)
    if isinstance(stream, CorrectedStream):
        return stream.values
    return np.asarray(stream, dtype=np.float64)


def _write_csv(path, times, values, fractional: bool) -> None:
    path = Path(path)
    fmt = "{i},{t:.12g},{v:.6f}\n" if fractional else "{i},{t:.12g},{v:d}\n"
    with path.open("w", newline="\n") as fh:
        fh.write("index,time_s,code\n")
        for i, (t, v) in enumerate(zip(times, values)):
            fh.write(fmt.format(i=i, t=t, v=v if fractional else int(v)))


def _read_csv(path):
    path = Path(path)
    if not path.exists():
        raise UsageError(f"stream file not found: {path}")
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=np.float64)
    if data.size == 0:
        raise UsageError(f"stream file is empty: {path}")
    data = np.atleast_2d(data)
    if data.shape[1] != 3:
        raise UsageError(f"stream file has {data.shape[1]} columns, expected 3: {path}")
    return data[:, 1], data[:, 2]


def _infer_fs(t: np.ndarray, path) -> float:
    if len(t) < 2:
        raise UsageError(f"cannot infer sample rate from a single-row stream: {path}")
    dt = np.median(np.diff(t))
    if dt <= 0:
        raise UsageError(f"non-increasing time axis in stream: {path}")
    return 1.0 / dt
