"""Shallow error-learning network: one tanh hidden layer, linear output.

The network regresses the main ADC's momentary code error from the feature
window.  Everything is plain float64 numpy: the model is small enough that
a framework would only add nondeterminism.  Training uses mini-batch Adam
on mean-squared error with a hard budget on *consumed examples* (one
example presented once costs one unit, regardless of epochs), which mirrors
how convergence cost is accounted for in on-line calibration.

A fixed-point inference path (`quantize` / `predict_q`) emulates a
12-bit-weight hardware implementation: symmetric per-tensor weight scales
and a 1024-entry interpolated tanh table at matching precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (ConfigError, QuantizationError, TrainingDivergenceError,
                     UsageError)
from .features import FeatureSpec, TrainingSet, denormalize_codes, make_features, \
    normalize_codes
from .streams import CodeStream, CorrectedStream

MODEL_FORMAT_VERSION = 1


@dataclass
class AnnModel:
    w1: np.ndarray                 # (hidden_units, n_features)
    b1: np.ndarray                 # (hidden_units,)
    w2: np.ndarray                 # (hidden_units,)
    b2: float

    @property
    def hidden_units(self) -> int:
        return self.w1.shape[0]

    @property
    def n_features(self) -> int:
        return self.w1.shape[1]

    @property
    def n_weights(self) -> int:
        """Multiplicative parameters only (both layers)."""
        return self.w1.size + self.w2.size

    @property
    def n_params(self) -> int:
        """All trainable parameters, biases included."""
        return self.n_weights + self.b1.size + 1

    def copy(self) -> "AnnModel":
        return AnnModel(self.w1.copy(), self.b1.copy(), self.w2.copy(),
                        float(self.b2))

    def predict(self, x: np.ndarray):
        """Network output for one feature vector (m,) or a batch (B, m)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.n_features:
            raise UsageError(f"x: expected {self.n_features} features, "
                             f"got {x.shape[1]}")
        a1 = np.tanh(x @ self.w1.T + self.b1)
        out = a1 @ self.w2 + self.b2
        return float(out[0]) if single else out


def init_model(hidden_units: int, n_features: int, seed: int = 0) -> AnnModel:
    """Glorot-uniform weights, zero biases.  Deterministic in ``seed``."""
    if hidden_units < 1:
        raise ConfigError("hidden_units: must be >= 1")
    if n_features < 1:
        raise ConfigError("n_features: must be >= 1")
    rng = np.random.default_rng(seed)
    lim1 = math.sqrt(6.0 / (n_features + hidden_units))
    lim2 = math.sqrt(6.0 / (hidden_units + 1))
    w1 = rng.uniform(-lim1, lim1, size=(hidden_units, n_features))
    w2 = rng.uniform(-lim2, lim2, size=hidden_units)
    return AnnModel(w1=w1, b1=np.zeros(hidden_units), w2=w2, b2=0.0)


def _loss_and_grads(model: AnnModel, x: np.ndarray, y: np.ndarray):
    """MSE loss ``mean((pred - y)**2)`` and its exact gradients."""
    batch = len(y)
    z1 = x @ model.w1.T + model.b1
    a1 = np.tanh(z1)
    pred = a1 @ model.w2 + model.b2
    res = pred - y
    loss = float(np.mean(res * res))
    dpred = (2.0 / batch) * res
    g_w2 = a1.T @ dpred
    g_b2 = float(np.sum(dpred))
    dz1 = np.outer(dpred, model.w2) * (1.0 - a1 * a1)
    g_w1 = dz1.T @ x
    g_b1 = dz1.sum(axis=0)
    return loss, {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}


def mse_loss(model: AnnModel, x: np.ndarray, y: np.ndarray) -> float:
    res = model.predict(x) - y
    return float(np.mean(res * res))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-3
    batch_size: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_samples: int = 1 << 16     # budget of consumed training examples
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate: must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size: must be >= 1")
        if not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1):
            raise ConfigError("beta1/beta2: must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ConfigError("epsilon: must be positive")
        if self.max_samples < 1:
            raise ConfigError("max_samples: must be >= 1")
        if not (0 <= self.validation_fraction < 1):
            raise ConfigError("validation_fraction: must lie in [0, 1)")


@dataclass
class LossHistory:
    """Per-pass losses.  Entry i is recorded after pass i over the data."""

    train_mse: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    consumed: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="\n") as fh:
            fh.write("epoch,consumed,train_mse,val_mse\n")
            for i, (c, tr, va) in enumerate(
                    zip(self.consumed, self.train_mse, self.val_mse)):
                fh.write(f"{i},{c},{tr:.10e},{va:.10e}\n")


def train(model: AnnModel, ts: TrainingSet, cfg: TrainConfig) -> tuple[AnnModel, LossHistory]:
    """Adam/MSE training within the consumed-example budget.

    The input model is left untouched; a trained copy is returned together
    with the per-pass loss history.  Raises TrainingDivergenceError (naming
    the pass) if the loss stops being finite.
    """
    if len(ts) == 0:
        raise UsageError("training set is empty")
    model = model.copy()
    if ts.features.shape[1] != model.n_features:
        raise UsageError(
            f"training set has {ts.features.shape[1]} features but the model "
            f"expects {model.n_features}")
    rng = np.random.default_rng(cfg.seed)
    n = len(ts)
    n_val = int(round(n * cfg.validation_fraction))
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        raise UsageError("validation split leaves no training rows")
    x_tr = np.ascontiguousarray(ts.features[train_idx])
    y_tr = np.ascontiguousarray(ts.targets[train_idx])
    x_va = np.ascontiguousarray(ts.features[val_idx])
    y_va = np.ascontiguousarray(ts.targets[val_idx])

    params = {"w1": model.w1, "b1": model.b1, "w2": model.w2}
    m_state = {k: np.zeros_like(v) for k, v in params.items()}
    v_state = {k: np.zeros_like(v) for k, v in params.items()}
    m_b2 = v_b2 = 0.0

    history = LossHistory()
    consumed = 0
    step = 0
    epoch = 0
    while consumed < cfg.max_samples:
        order = rng.permutation(len(train_idx))
        for start in range(0, len(order), cfg.batch_size):
            remaining = cfg.max_samples - consumed
            if remaining <= 0:
                break
            batch = order[start:start + min(cfg.batch_size, remaining)]
            if len(batch) == 0:
                break
            _, grads = _loss_and_grads(model, x_tr[batch], y_tr[batch])
            step += 1
            # cosine-decayed step size: cfg.learning_rate is the peak, the
            # schedule runs to zero as the sample budget is spent
            lr = cfg.learning_rate * 0.5 * (
                1.0 + math.cos(math.pi * consumed / cfg.max_samples))
            corr1 = 1.0 - cfg.beta1 ** step
            corr2 = 1.0 - cfg.beta2 ** step
            for k in params:
                m_state[k] = cfg.beta1 * m_state[k] + (1 - cfg.beta1) * grads[k]
                v_state[k] = cfg.beta2 * v_state[k] + (1 - cfg.beta2) * grads[k] ** 2
                params[k] -= lr * (m_state[k] / corr1) / (
                    np.sqrt(v_state[k] / corr2) + cfg.epsilon)
            m_b2 = cfg.beta1 * m_b2 + (1 - cfg.beta1) * grads["b2"]
            v_b2 = cfg.beta2 * v_b2 + (1 - cfg.beta2) * grads["b2"] ** 2
            model.b2 -= lr * (m_b2 / corr1) / (
                math.sqrt(v_b2 / corr2) + cfg.epsilon)
            consumed += len(batch)
        train_mse = mse_loss(model, x_tr, y_tr)
        val_mse = mse_loss(model, x_va, y_va) if n_val else float("nan")
        history.train_mse.append(train_mse)
        history.val_mse.append(val_mse)
        history.consumed.append(consumed)
        if not math.isfinite(train_mse) or (n_val and not math.isfinite(val_mse)):
            raise TrainingDivergenceError(epoch)
        epoch += 1
    return model, history


# -- gradient verification ------------------------------------------------

_TENSOR_ORDER = ("w1", "b1", "w2", "b2")


def _param_sizes(model: AnnModel) -> dict:
    return {"w1": model.w1.size, "b1": model.b1.size, "w2": model.w2.size, "b2": 1}


def _perturbed(model: AnnModel, tensor: str, flat_index: int, delta: float) -> AnnModel:
    out = model.copy()
    if tensor == "b2":
        out.b2 += delta
    else:
        getattr(out, tensor).ravel()[flat_index] += delta
    return out


def gradient_check(model: AnnModel, ts: TrainingSet, n_probes: int = 100,
                   step: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Probes ``n_probes`` randomly chosen parameters against the MSE loss on
    the full provided set.
    """
    if n_probes < 1:
        raise UsageError("n_probes: must be >= 1")
    x, y = ts.features, ts.targets
    _, grads = _loss_and_grads(model, x, y)
    sizes = _param_sizes(model)
    total = sum(sizes.values())
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_probes, total), replace=total <= n_probes)
    worst = 0.0
    for flat in np.atleast_1d(picks):
        flat = int(flat)
        for tensor in _TENSOR_ORDER:
            if flat < sizes[tensor]:
                break
            flat -= sizes[tensor]
        lo = mse_loss(_perturbed(model, tensor, flat, -step), x, y)
        hi = mse_loss(_perturbed(model, tensor, flat, +step), x, y)
        g_fd = (hi - lo) / (2.0 * step)
        g_an = grads[tensor] if tensor == "b2" else grads[tensor].ravel()[flat]
        denom = max(abs(g_an), abs(g_fd), 1e-12)
        worst = max(worst, abs(g_an - g_fd) / denom)
    return worst


# -- fixed-point inference --------------------------------------------------

TANH_TABLE_SIZE = 1024
TANH_TABLE_SPAN = 8.0              # table covers [-span, +span]


def _quantize_tensor(name: str, values: np.ndarray, bits: int):
    qmax = (1 << (bits - 1)) - 1
    finite = np.isfinite(values)
    if not np.all(finite):
        raise QuantizationError(f"{name}: tensor contains non-finite values")
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    scale = peak / qmax if peak > 0 else 1.0
    q = np.rint(values / scale).astype(np.int64)
    if np.any(np.abs(q) > qmax):
        raise QuantizationError(f"{name}: overflow at scale {scale:g}")
    return q, scale


@dataclass
class QuantizedModel:
    """Fixed-point view of an AnnModel (symmetric per-tensor scales)."""

    q_w1: np.ndarray
    q_b1: np.ndarray
    q_w2: np.ndarray
    q_b2: int
    scales: dict                   # tensor name -> scale
    bits: int
    q_tanh: np.ndarray             # quantized table over [-span, +span]
    tanh_scale: float

    @property
    def hidden_units(self) -> int:
        return self.q_w1.shape[0]

    @property
    def n_features(self) -> int:
        return self.q_w1.shape[1]


def quantize(model: AnnModel, bits: int = 12) -> QuantizedModel:
    """Quantize all tensors to ``bits``-wide symmetric fixed point."""
    if not (4 <= bits <= 16):
        raise UsageError(f"bits: supported range is [4, 16], got {bits}")
    qmax = (1 << (bits - 1)) - 1
    q_w1, s_w1 = _quantize_tensor("w1", model.w1, bits)
    q_b1, s_b1 = _quantize_tensor("b1", model.b1, bits)
    q_w2, s_w2 = _quantize_tensor("w2", model.w2, bits)
    q_b2, s_b2 = _quantize_tensor("b2", np.array([model.b2]), bits)
    grid = np.linspace(-TANH_TABLE_SPAN, TANH_TABLE_SPAN, TANH_TABLE_SIZE)
    tanh_scale = 1.0 / qmax
    q_tanh = np.rint(np.tanh(grid) / tanh_scale).astype(np.int64)
    return QuantizedModel(
        q_w1=q_w1, q_b1=q_b1, q_w2=q_w2, q_b2=int(q_b2[0]),
        scales={"w1": s_w1, "b1": s_b1, "w2": s_w2, "b2": s_b2},
        bits=bits, q_tanh=q_tanh, tanh_scale=tanh_scale)


def predict_q(qm: QuantizedModel, x: np.ndarray):
    """Fixed-point forward pass.

    Inputs are quantized to the same bit width (normalized codes use unit
    scale; the derivative column may reach +-2, so it keeps the same step
    with one extra integer bit, as a hardware datapath would).  Hidden
    activations go through the interpolated quantized tanh table and are
    re-quantized before the output layer.  Accumulations are exact integer
    sums scaled at the end, emulating a wide accumulator.

    The result tracks the float model to within a small documented bound
    (interpolation plus rounding); at 16 bits the divergence is below 1e-3
    for unit-scale models.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != qm.n_features:
        raise UsageError(f"x: expected {qm.n_features} features, got {x.shape[1]}")
    qmax = (1 << (qm.bits - 1)) - 1
    s_x = 1.0 / qmax
    q_x = np.rint(np.clip(x, -2.0, 2.0) / s_x).astype(np.int64)

    acc = q_x @ qm.q_w1.T                                   # exact int64
    z1 = acc * (qm.scales["w1"] * s_x) + qm.q_b1 * qm.scales["b1"]

    # interpolated table lookup, then re-quantize the activation
    span = TANH_TABLE_SPAN
    pos = (np.clip(z1, -span, span) + span) / (2 * span) * (TANH_TABLE_SIZE - 1)
    i0 = np.clip(pos.astype(np.int64), 0, TANH_TABLE_SIZE - 2)
    frac = pos - i0
    a1 = (qm.q_tanh[i0] * (1.0 - frac) + qm.q_tanh[i0 + 1] * frac) * qm.tanh_scale
    q_a1 = np.rint(a1 / qm.tanh_scale).astype(np.int64)

    acc2 = q_a1 @ qm.q_w2
    out = acc2 * (qm.scales["w2"] * qm.tanh_scale) + qm.q_b2 * qm.scales["b2"]
    return float(out[0]) if single else out


# -- stream correction ------------------------------------------------------

def correct_stream(model, main: CodeStream, spec: FeatureSpec) -> CorrectedStream:
    """Apply the learned correction to every sample with full history.

    ``model`` may be a float AnnModel or a QuantizedModel.  The corrected
    value is ``denormalize(normalize(code) + prediction)``; the first
    ``spec.past_samples`` samples are passed through unmodified and flagged
    via ``corrected_from``.
    """
    codes = main.codes
    norm = normalize_codes(codes, spec.resolution_bits)
    values = codes.astype(np.float64).copy()
    start = spec.past_samples
    if len(codes) > start:
        idx = np.arange(start, len(codes), dtype=np.int64)
        feats = make_features(norm, idx, spec)
        if isinstance(model, QuantizedModel):
            pred = predict_q(model, feats)
        else:
            pred = model.predict(feats)
        values[start:] = denormalize_codes(norm[idx] + pred, spec.resolution_bits)
    return CorrectedStream(values=values, fs=main.fs, t0=main.t0,
                           corrected_from=start,
                           meta=dict(main.meta, corrected=True))


# -- persistence ------------------------------------------------------------

def save_model(model: AnnModel, path) -> None:
    """Write the float model as versioned JSON (row-major weight arrays)."""
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "hidden_units": model.hidden_units,
        "n_features": model.n_features,
        "w1": [[float(v) for v in row] for row in model.w1],
        "b1": [float(v) for v in model.b1],
        "w2": [float(v) for v in model.w2],
        "b2": float(model.b2),
    }
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> AnnModel:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"model file not found: {path}")
    payload = json.loads(path.read_text())
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise UsageError(f"model format_version {version!r} is not supported "
                         f"(expected {MODEL_FORMAT_VERSION})")
    expected = {"format_version", "hidden_units", "n_features", "w1", "b1",
                "w2", "b2"}
    unknown = set(payload) - expected
    if unknown:
        raise UsageError(f"model file has unknown fields {sorted(unknown)}")
    w1 = np.asarray(payload["w1"], dtype=np.float64)
    b1 = np.asarray(payload["b1"], dtype=np.float64)
    w2 = np.asarray(payload["w2"], dtype=np.float64)
    model = AnnModel(w1=w1, b1=b1, w2=w2, b2=float(payload["b2"]))
    if (w1.shape != (payload["hidden_units"], payload["n_features"])
            or b1.shape != (payload["hidden_units"],)
            or w2.shape != (payload["hidden_units"],)):
        raise UsageError("model file arrays are inconsistent with the "
                         "declared layer sizes")
    return model
