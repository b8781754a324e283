"""Feature extraction for the error-learning network.

The network prediction for main-ADC sample ``k`` is built from the current
code, a window of past codes, and a first backward difference.  The
difference term matters: inter-ADC gain and sampling-skew mismatch produce
errors proportional to the signal slope, and handing the network an
explicit derivative estimate lets a small hidden layer absorb them.

Codes are mapped affinely onto ``[-1, +1]``: mid-scale is exactly zero and
the bottom rail exactly -1 (the top rail is one LSB short of +1).  The
mapping is exactly invertible, which the correction path relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UsageError
from .streams import CodeStream, stream_values


@dataclass(frozen=True)
class FeatureSpec:
    """Shape of one feature vector.

    ``n_features`` counts everything the network sees: the current sample,
    ``past_samples`` past samples, and (if enabled) the backward
    difference.  With the defaults: 1 + 39 + 1 = 41.
    """

    n_features: int = 41
    include_derivative: bool = True
    resolution_bits: int = 12

    def __post_init__(self):
        minimum = 2 if self.include_derivative else 1
        if self.n_features < minimum:
            raise ConfigError(f"n_features: must be >= {minimum}")
        if self.resolution_bits < 1:
            raise ConfigError("resolution_bits: must be >= 1")

    @property
    def past_samples(self) -> int:
        return self.n_features - 2 if self.include_derivative else self.n_features - 1

    @property
    def window(self) -> int:
        """Number of consecutive samples a feature vector consumes."""
        return self.past_samples + 1


def normalize_codes(codes, resolution_bits: int = 12) -> np.ndarray:
    """Map (possibly fractional) codes onto [-1, +1] with mid-scale at 0."""
    half = float(1 << (resolution_bits - 1))
    return (np.asarray(codes, dtype=np.float64) - half) / half


def denormalize_codes(x, resolution_bits: int = 12) -> np.ndarray:
    """Exact inverse of `normalize_codes` (fractional output)."""
    half = float(1 << (resolution_bits - 1))
    return np.asarray(x, dtype=np.float64) * half + half


def aligned_indices(n_main: int, ratio: int = 8, phase: int = 0) -> np.ndarray:
    """Main-stream indices converted by both ADCs.

    The reference ADC runs ``ratio`` times slower; its sample ``j`` is taken
    at main index ``j * ratio + phase``.
    """
    if ratio < 1:
        raise UsageError(f"ratio: must be >= 1, got {ratio}")
    if not (0 <= phase < ratio):
        raise UsageError(f"phase: must lie in [0, {ratio}), got {phase}")
    return np.arange(phase, n_main, ratio, dtype=np.int64)


def make_features(normalized: np.ndarray, indices: np.ndarray,
                  spec: FeatureSpec) -> np.ndarray:
    """Feature matrix for the given sample indices.

    ``normalized`` is the full normalized main stream.  Row layout:
    ``[x[k], x[k-1], ..., x[k-past_samples], x[k]-x[k-1]]`` (the difference
    column is present only when the spec includes it).  All indices must
    have full history (``k >= past_samples``).
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and indices.min() < spec.past_samples:
        raise UsageError(
            f"indices: history requires k >= {spec.past_samples}, got "
            f"{int(indices.min())}")
    if indices.size and indices.max() >= len(normalized):
        raise UsageError("indices: beyond the end of the stream")
    lags = np.arange(spec.past_samples + 1, dtype=np.int64)
    x = normalized[indices[:, None] - lags[None, :]]
    if spec.include_derivative:
        x = np.concatenate([x, (x[:, 0] - x[:, 1])[:, None]], axis=1)
    return x


@dataclass
class TrainingSet:
    """Aligned feature/target pairs.

    Targets are in normalized units: corrected reference minus raw main at
    the shared sampling instants, i.e. exactly what must be *added* to the
    normalized main code.
    """

    features: np.ndarray           # (rows, n_features)
    targets: np.ndarray            # (rows,)
    indices: np.ndarray            # main-stream index of each row
    spec: FeatureSpec

    def __len__(self) -> int:
        return len(self.targets)


def build_training_set(main: CodeStream, ref_corrected, spec: FeatureSpec,
                       ratio: int = 8, phase: int = 0) -> TrainingSet:
    """Pair every usable aligned instant with its reference-derived target.

    ``ref_corrected`` is the LUT-corrected fractional reference stream.
    Aligned instants whose feature window reaches before the start of the
    record are dropped.
    """
    main_codes = stream_values(main)
    ref_values = stream_values(ref_corrected)
    n_main = len(main_codes)
    idx = aligned_indices(n_main, ratio, phase)
    needed = (n_main - 1 - phase) // ratio + 1 if n_main > phase else 0
    if len(ref_values) < needed:
        raise UsageError(
            f"ref_corrected: need {needed} reference samples to cover the "
            f"main stream, got {len(ref_values)}")
    keep = idx >= spec.past_samples
    idx = idx[keep]
    norm_main = normalize_codes(main_codes, spec.resolution_bits)
    norm_ref = normalize_codes(ref_values, spec.resolution_bits)
    features = make_features(norm_main, idx, spec)
    targets = norm_ref[(idx - phase) // ratio] - norm_main[idx]
    return TrainingSet(features=features, targets=targets, indices=idx, spec=spec)
