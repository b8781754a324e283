"""Experiment orchestration: scenarios, pipeline stages, sweeps, reports.

A Scenario bundles everything one experiment needs -- both ADC configs, the
inter-ADC mismatches, the stimulus, feature/training settings and seeds --
and serializes to a versioned JSON file so every run is reproducible from
a config plus a seed.  The pipeline stages mirror the calibration flow:

    simulate      -> main + reference code streams (shared time axis)
    calibrate-ref -> histogram LUT for the reference ADC
    train         -> error-learning model + loss history
    evaluate      -> before/after metrics report (JSON)
    sweep         -> capacity/feature grid, one CSV row per point

Determinism contract: config + seed fully determine every output byte.
Sub-seeds for the two ADC instances and for training are derived from the
scenario seed through a single SeedSequence expansion, so changing one
stage never perturbs another.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .adc import AdcConfig, RefNetworkConfig, build_instance, convert_stream
from .ann import (AnnModel, LossHistory, QuantizedModel, TrainConfig,
                  correct_stream, init_model, load_model, quantize,
                  save_model, train)
from .errors import ConfigError, UsageError
from .features import FeatureSpec, TrainingSet, build_training_set
from .metrics import dnl_inl_sine, fom_walden, im2_im3, spectrum
from .refcal import Lut, apply_lut, build_lut
from .signals import Signal, make_hist_stimulus
from .streams import CodeStream, CorrectedStream

SCENARIO_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1

#: fixed decimation between the main and reference ADCs
SUBSAMPLE_RATIO = 8

#: coherent bin of the linearity-capture tone.  Low and odd on purpose: a
#: slow stimulus crosses each code while the reference network is near its
#: quasi-static sag, so code-localized transfer anomalies survive in the
#: histogram instead of being smeared over hundreds of codes.
DNL_TONE_BIN = 11


def _build_from_dict(cls, data: dict, what: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{what}: expected an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{what}: unknown fields {sorted(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class Scenario:
    """Complete, serializable description of one dual-ADC experiment."""

    main_adc: AdcConfig
    ref_adc: AdcConfig
    signal: Signal
    main_ref_network: RefNetworkConfig = RefNetworkConfig()
    ref_ref_network: RefNetworkConfig = RefNetworkConfig()
    gain_mismatch: float = 1.0          # applied to the main ADC's input
    timing_skew: float = 0.0            # seconds, applied to the main ADC
    features: FeatureSpec = FeatureSpec()
    training: TrainConfig = TrainConfig()
    hidden_units: int = 40
    n_samples: int = 1 << 19            # main-ADC capture length
    eval_samples: int = 1 << 16         # held-out tail window for metrics
    dnl_samples: int = 1 << 19          # dedicated overdriven linearity record
    lut_runs: int = 100
    lut_samples_per_run: int = 1 << 18
    alignment_phase: int = 0
    power_w: float = 1.2e-3             # dissipation assumed for the FoM
    seed: int = 0
    sweep_hidden: tuple[int, ...] = (5, 40, 80)
    sweep_features: tuple[int, ...] = (41,)
    sweep_n_seeds: int = 5
    out_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "sweep_hidden",
                           tuple(int(h) for h in self.sweep_hidden))
        object.__setattr__(self, "sweep_features",
                           tuple(int(m) for m in self.sweep_features))
        fs_main, fs_ref = self.main_adc.fs, self.ref_adc.fs
        if abs(fs_main - SUBSAMPLE_RATIO * fs_ref) > 1e-6 * fs_main:
            raise ConfigError(
                f"ref_adc.fs: must be main fs / {SUBSAMPLE_RATIO} "
                f"(got {fs_ref:g} vs main {fs_main:g})")
        for name, adc in (("main_adc", self.main_adc), ("ref_adc", self.ref_adc)):
            if adc.resolution_bits != self.features.resolution_bits:
                raise ConfigError(
                    f"{name}.resolution_bits: must match features "
                    f"({adc.resolution_bits} vs {self.features.resolution_bits})")
        if self.gain_mismatch <= 0:
            raise ConfigError("gain_mismatch: must be positive")
        if self.n_samples < 1 or self.n_samples % SUBSAMPLE_RATIO:
            raise ConfigError(f"n_samples: must be a positive multiple of "
                              f"{SUBSAMPLE_RATIO}")
        if not (0 < self.eval_samples < self.n_samples):
            raise ConfigError("eval_samples: must lie in (0, n_samples)")
        if not (0 <= self.alignment_phase < SUBSAMPLE_RATIO):
            raise ConfigError(f"alignment_phase: must lie in "
                              f"[0, {SUBSAMPLE_RATIO})")
        if self.hidden_units < 1:
            raise ConfigError("hidden_units: must be >= 1")
        if self.dnl_samples < 64 * self.main_adc.n_codes:
            raise ConfigError("dnl_samples: too short for a trustworthy "
                              "code histogram (need >= 64 per code)")
        if self.lut_runs < 1 or self.lut_samples_per_run < 1:
            raise ConfigError("lut_runs/lut_samples_per_run: must be >= 1")
        if self.power_w <= 0:
            raise ConfigError("power_w: must be positive")
        if self.sweep_n_seeds < 1 or not self.sweep_hidden or not self.sweep_features:
            raise ConfigError("sweep: hidden/features lists must be non-empty "
                              "and n_seeds >= 1")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCENARIO_SCHEMA_VERSION,
            "main_adc": self.main_adc.to_dict(),
            "main_ref_network": self.main_ref_network.to_dict(),
            "ref_adc": self.ref_adc.to_dict(),
            "ref_ref_network": self.ref_ref_network.to_dict(),
            "signal": self.signal.to_dict(),
            "features": dataclasses.asdict(self.features),
            "training": dataclasses.asdict(self.training),
            "gain_mismatch": self.gain_mismatch,
            "timing_skew": self.timing_skew,
            "hidden_units": self.hidden_units,
            "n_samples": self.n_samples,
            "eval_samples": self.eval_samples,
            "dnl_samples": self.dnl_samples,
            "lut_runs": self.lut_runs,
            "lut_samples_per_run": self.lut_samples_per_run,
            "alignment_phase": self.alignment_phase,
            "power_w": self.power_w,
            "seed": self.seed,
            "sweep": {"hidden": list(self.sweep_hidden),
                      "features": list(self.sweep_features),
                      "n_seeds": self.sweep_n_seeds},
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ConfigError("scenario: expected a JSON object")
        version = data.get("schema_version")
        if version != SCENARIO_SCHEMA_VERSION:
            raise ConfigError(f"scenario: schema_version {version!r} is not "
                              f"supported (expected {SCENARIO_SCHEMA_VERSION})")
        expected = {"schema_version", "main_adc", "main_ref_network",
                    "ref_adc", "ref_ref_network", "signal", "features",
                    "training", "gain_mismatch", "timing_skew", "hidden_units",
                    "n_samples", "eval_samples", "dnl_samples", "lut_runs",
                    "lut_samples_per_run", "alignment_phase", "power_w",
                    "seed", "sweep", "out_dir"}
        unknown = set(data) - expected
        if unknown:
            raise ConfigError(f"scenario: unknown fields {sorted(unknown)}")
        kwargs = {
            "main_adc": AdcConfig.from_dict(data["main_adc"]),
            "ref_adc": AdcConfig.from_dict(data["ref_adc"]),
            "signal": Signal.from_dict(data["signal"]),
        }
        if "main_ref_network" in data:
            kwargs["main_ref_network"] = RefNetworkConfig.from_dict(
                data["main_ref_network"])
        if "ref_ref_network" in data:
            kwargs["ref_ref_network"] = RefNetworkConfig.from_dict(
                data["ref_ref_network"])
        if "features" in data:
            kwargs["features"] = _build_from_dict(FeatureSpec, data["features"],
                                                  "scenario.features")
        if "training" in data:
            kwargs["training"] = _build_from_dict(TrainConfig, data["training"],
                                                  "scenario.training")
        if "sweep" in data:
            sweep = data["sweep"]
            unknown = set(sweep) - {"hidden", "features", "n_seeds"}
            if unknown:
                raise ConfigError(f"scenario.sweep: unknown fields "
                                  f"{sorted(unknown)}")
            kwargs["sweep_hidden"] = tuple(sweep.get("hidden", (5, 40, 80)))
            kwargs["sweep_features"] = tuple(sweep.get("features", (41,)))
            kwargs["sweep_n_seeds"] = sweep.get("n_seeds", 5)
        for key in ("gain_mismatch", "timing_skew", "hidden_units",
                    "n_samples", "eval_samples", "dnl_samples", "lut_runs",
                    "lut_samples_per_run", "alignment_phase", "power_w",
                    "seed", "out_dir"):
            if key in data:
                kwargs[key] = data[key]
        return cls(**kwargs)

    def with_seed(self, seed: int | None) -> "Scenario":
        return self if seed is None else replace(self, seed=int(seed))


def load_scenario(path, seed: int | None = None) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"scenario file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path}: invalid JSON ({exc})") from exc
    return Scenario.from_dict(data).with_seed(seed)


def save_scenario(scenario: Scenario, path) -> None:
    with Path(path).open("w", newline="\n") as fh:
        json.dump(scenario.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- seed plumbing ----------------------------------------------------------

@dataclass(frozen=True)
class SeedSet:
    main: int
    ref: int
    train: int
    aux: int
    sweep: tuple[int, ...]


def derive_seeds(seed: int, n_sweep: int = 0) -> SeedSet:
    """Expand one scenario seed into independent per-stage seeds."""
    words = np.random.SeedSequence(seed).generate_state(4 + n_sweep,
                                                        dtype=np.uint64)
    return SeedSet(main=int(words[0]), ref=int(words[1]), train=int(words[2]),
                   aux=int(words[3]), sweep=tuple(int(w) for w in words[4:]))


def _main_instance(scn: Scenario, seed: int):
    return build_instance(scn.main_adc, scn.main_ref_network, seed=seed,
                          gain=scn.gain_mismatch, timing_skew=scn.timing_skew)


def _ref_instance(scn: Scenario, seed: int):
    return build_instance(scn.ref_adc, scn.ref_ref_network, seed=seed)


# -- pipeline stages --------------------------------------------------------

def run_simulate(scn: Scenario) -> tuple[CodeStream, CodeStream]:
    """Capture both ADCs on a shared wall-clock axis."""
    seeds = derive_seeds(scn.seed)
    main = convert_stream(_main_instance(scn, seeds.main), scn.signal,
                          scn.n_samples)
    n_ref = scn.n_samples // SUBSAMPLE_RATIO
    ref = convert_stream(_ref_instance(scn, seeds.ref), scn.signal, n_ref,
                         t0=scn.alignment_phase / scn.main_adc.fs)
    return main, ref


def run_calibrate_ref(scn: Scenario) -> Lut:
    """Foreground-calibrate the reference ADC with the histogram method.

    The instance is rebuilt from the reference sub-seed, so the LUT is
    measured on the same mismatch realization that run_simulate captures.
    """
    seeds = derive_seeds(scn.seed)
    inst = _ref_instance(scn, seeds.ref)
    stimulus = make_hist_stimulus(scn.ref_adc.v_ref, scn.ref_adc.fs,
                                  scn.lut_samples_per_run)
    return build_lut(inst, stimulus, runs=scn.lut_runs,
                     samples_per_run=scn.lut_samples_per_run)


def corrected_reference(scn: Scenario, ref: CodeStream, lut: Lut) -> CorrectedStream:
    return CorrectedStream(values=apply_lut(lut, ref.codes), fs=ref.fs,
                           t0=ref.t0, corrected_from=0,
                           meta=dict(ref.meta, lut_applied=True))


def training_rows(scn: Scenario, main: CodeStream, ref: CodeStream,
                  lut: Lut, spec: FeatureSpec | None = None,
                  boundary: int | None = None) -> TrainingSet:
    """Aligned training pairs restricted to the pre-held-out region.

    ``boundary`` overrides the default cut (everything before the evaluation
    window); pass ``len(main.codes)`` to keep every aligned row.
    """
    spec = spec or scn.features
    ref_corr = corrected_reference(scn, ref, lut)
    full = build_training_set(main, ref_corr, spec, ratio=SUBSAMPLE_RATIO,
                              phase=scn.alignment_phase)
    if boundary is None:
        boundary = scn.n_samples - scn.eval_samples
    keep = full.indices < boundary
    return TrainingSet(features=full.features[keep], targets=full.targets[keep],
                       indices=full.indices[keep], spec=spec)


def run_train(scn: Scenario, main: CodeStream, ref: CodeStream, lut: Lut,
              hidden_units: int | None = None,
              spec: FeatureSpec | None = None,
              train_seed: int | None = None,
              ) -> tuple[AnnModel, LossHistory]:
    """Fit the correction network on the training region of the capture."""
    spec = spec or scn.features
    hidden = hidden_units or scn.hidden_units
    if train_seed is None:
        train_seed = derive_seeds(scn.seed).train
    rows = training_rows(scn, main, ref, lut, spec)
    init_word, shuffle_word = (int(w) for w in
                               np.random.SeedSequence(train_seed)
                               .generate_state(2, dtype=np.uint64))
    model = init_model(hidden, spec.n_features, seed=init_word)
    cfg = replace(scn.training, seed=shuffle_word)
    return train(model, rows, cfg)


def _slice_stream(stream, start: int):
    if isinstance(stream, CodeStream):
        return CodeStream(codes=stream.codes[start:], fs=stream.fs,
                          t0=stream.t0 + start / stream.fs, meta=stream.meta)
    return CorrectedStream(values=stream.values[start:], fs=stream.fs,
                           t0=stream.t0 + start / stream.fs,
                           corrected_from=max(0, stream.corrected_from - start),
                           meta=stream.meta)


def _signal_bins(scn: Scenario) -> list[int]:
    """Bin index of each stimulus tone in the evaluation FFT window."""
    n = scn.eval_samples
    fs = scn.main_adc.fs
    bins = []
    for f in scn.signal.frequencies:
        b = int(round(f / fs * n))
        if not (0 < b < n // 2):
            raise ConfigError(f"signal: tone at {f:g} Hz falls outside the "
                              f"evaluation band")
        if abs(b * fs / n - f) > 1e-6 * fs / n:
            raise ConfigError(f"signal: tone at {f:g} Hz is not coherent with "
                              f"the {n}-point evaluation window")
        bins.append(b)
    return bins


def _spectral_block(scn: Scenario, stream) -> dict:
    bins = _signal_bins(scn)
    amps = scn.signal.amplitudes
    signal_bin = bins[int(np.argmax(amps))]
    rep = spectrum(stream, n_fft=scn.eval_samples, signal_bin=signal_bin)
    block = {
        "sndr_db": rep.sndr_db,
        "sfdr_db": rep.sfdr_db,
        "enob_bits": rep.enob_bits,
        "thd_db": rep.thd_db,
        "signal_bin": rep.signal_bin,
        "fom_j_per_step": fom_walden(scn.power_w, rep.sndr_db, scn.main_adc.fs),
    }
    if len(bins) == 2:
        im = im2_im3(stream, scn.signal.frequencies[0],
                     scn.signal.frequencies[1], n_fft=scn.eval_samples,
                     fs=scn.main_adc.fs)
        block["im2_db"] = im.im2_db
        block["im3_db"] = im.im3_db
    return block


def make_dnl_capture(scn: Scenario) -> tuple[CodeStream, CodeStream, Signal]:
    """Dedicated overdriven-tone record for histogram linearity.

    Reuses the main-ADC sub-seed so the static mismatch realization is the
    one being evaluated.  The tone is slow (a handful of coherent periods
    per record) so the reference network tracks the drawn current almost
    quasi-statically; transition estimates then expose the sag profile
    instead of averaging over it.  The reference ADC digitizes the same
    stimulus at ``fs/8`` so a corrector can be fitted to this capture the
    same way the deployed model is fitted to the scenario capture.
    """
    seeds = derive_seeds(scn.seed)
    f_target = DNL_TONE_BIN * scn.main_adc.fs / scn.dnl_samples
    stim = make_hist_stimulus(scn.main_adc.v_ref, scn.main_adc.fs,
                              scn.dnl_samples, f_target=f_target)
    main = convert_stream(_main_instance(scn, seeds.main), stim,
                          scn.dnl_samples)
    ref = convert_stream(_ref_instance(scn, seeds.ref), stim,
                         scn.dnl_samples // SUBSAMPLE_RATIO,
                         t0=scn.alignment_phase / scn.main_adc.fs)
    return main, ref, stim


def _linearity_block(scn: Scenario, stream, stimulus: Signal) -> dict:
    rep = dnl_inl_sine(stream, stimulus, scn.main_adc.n_codes)
    return {
        "max_abs_dnl": rep.max_abs_dnl,
        "inl_extreme": rep.inl_extreme,
        "missing_codes": rep.missing_codes,
    }


def train_on_capture(scn: Scenario, capture_main: CodeStream,
                     capture_ref: CodeStream, lut: Lut,
                     ) -> tuple[AnnModel, LossHistory]:
    """Fit a corrector to a dedicated capture (used for linearity reports).

    Works like :func:`run_train` but keeps every aligned row (histogram
    linearity is measured on the whole record, so nothing is held out) and
    draws its init/shuffle words from the auxiliary sub-seed so the deployed
    model's training is not perturbed.
    """
    rows = training_rows(scn, capture_main, capture_ref, lut,
                         boundary=len(capture_main.codes))
    init_word, shuffle_word = (int(w) for w in
                               np.random.SeedSequence(derive_seeds(scn.seed).aux)
                               .generate_state(2, dtype=np.uint64))
    model = init_model(scn.hidden_units, scn.features.n_features,
                       seed=init_word)
    cfg = replace(scn.training, seed=shuffle_word)
    return train(model, rows, cfg)


def run_evaluate(scn: Scenario, main: CodeStream,
                 model: AnnModel | QuantizedModel | None = None,
                 lut: Lut | None = None,
                 include_linearity: bool = True,
                 dnl_capture: tuple[CodeStream, CodeStream, Signal] | None = None,
                 ) -> dict:
    """Before/after metrics on the held-out tail window of the capture.

    Linearity is reported from a dedicated slow overdriven capture.  Its
    corrected figures use a model fitted to that capture (via ``lut``),
    mirroring the per-stimulus training used for the spectral metrics; the
    deployed ``model`` corrects only the spectral evaluation window.
    """
    if len(main.codes) < scn.n_samples:
        raise UsageError(f"main stream has {len(main.codes)} samples; "
                         f"scenario expects {scn.n_samples}")
    if model is not None and include_linearity and lut is None:
        raise UsageError("corrected linearity needs the reference LUT; pass "
                         "lut= or include_linearity=False")
    w0 = scn.n_samples - scn.eval_samples
    window = _slice_stream(main, w0)
    before = _spectral_block(scn, window)
    if include_linearity:
        if dnl_capture is None:
            dnl_capture = make_dnl_capture(scn)
        dnl_main, dnl_ref, dnl_stim = dnl_capture
        before.update(_linearity_block(scn, dnl_main, dnl_stim))
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "seed": scn.seed,
        "fs_hz": scn.main_adc.fs,
        "n_samples": scn.n_samples,
        "eval_window": {"start": w0, "length": scn.eval_samples},
        "signal": scn.signal.to_dict(),
        "uncorrected": before,
        "corrected": None,
        "delta": None,
    }
    if model is None:
        return report
    corrected = correct_stream(model, main, scn.features)
    after = _spectral_block(scn, _slice_stream(corrected, w0))
    if include_linearity:
        dnl_model, _ = train_on_capture(scn, dnl_main, dnl_ref, lut)
        corrected_dnl = correct_stream(dnl_model, dnl_main, scn.features)
        after.update(_linearity_block(scn, corrected_dnl, dnl_stim))
    delta = {k: after[k] - before[k]
             for k in ("sndr_db", "sfdr_db", "enob_bits")}
    if "im2_db" in before:
        # intermodulation products are negative-dB relative levels, so
        # improvement = before - after ... both conventions trip people up;
        # report the suppression gained, positive when calibration helps.
        delta["im2_db"] = before["im2_db"] - after["im2_db"]
        delta["im3_db"] = before["im3_db"] - after["im3_db"]
    if include_linearity:
        delta["max_abs_dnl"] = after["max_abs_dnl"] - before["max_abs_dnl"]
    report["corrected"] = after
    report["delta"] = delta
    return report


def save_report(report: dict, path) -> None:
    with Path(path).open("w", newline="\n") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_report(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"report file not found: {path}")
    data = json.loads(path.read_text())
    version = data.get("schema_version")
    if version != REPORT_SCHEMA_VERSION:
        raise UsageError(f"report schema_version {version!r} is not supported "
                         f"(expected {REPORT_SCHEMA_VERSION})")
    expected = {"schema_version", "seed", "fs_hz", "n_samples", "eval_window",
                "signal", "uncorrected", "corrected", "delta"}
    unknown = set(data) - expected
    if unknown:
        raise UsageError(f"report has unknown fields {sorted(unknown)}")
    return data


# -- sweep ------------------------------------------------------------------

SWEEP_COLUMNS = ("hidden_units", "n_features", "seed_index", "sndr_db",
                 "sfdr_db", "enob_bits", "delta_sndr_db", "delta_sfdr_db",
                 "train_mse", "val_mse")


def run_sweep(scn: Scenario, hidden_list=None, feature_list=None,
              n_seeds: int | None = None, workers: int = 1) -> list[dict]:
    """Train/evaluate a grid of (hidden units, feature count, seed) points.

    The capture and the reference LUT are produced once and shared: sweep
    points differ only in model capacity, feature window and training seed,
    which matches how a capacity study would be run against one recorded
    data set.  Rows come back sorted by (h, m, seed), independent of worker
    scheduling.
    """
    hidden_list = list(hidden_list or scn.sweep_hidden)
    feature_list = list(feature_list or scn.sweep_features)
    n_seeds = n_seeds or scn.sweep_n_seeds
    if not hidden_list or not feature_list or n_seeds < 1:
        raise UsageError("sweep: hidden/feature lists must be non-empty and "
                         "n_seeds >= 1")
    seeds = derive_seeds(scn.seed, n_sweep=n_seeds)
    main, ref = run_simulate(scn)
    lut = run_calibrate_ref(scn)
    w0 = scn.n_samples - scn.eval_samples
    window_before = _spectral_block(scn, _slice_stream(main, w0))

    specs = {m: replace(scn.features, n_features=m) for m in feature_list}
    rows_by_spec = {m: training_rows(scn, main, ref, lut, specs[m])
                    for m in feature_list}

    def one_point(point):
        h, m, k = point
        spec = specs[m]
        init_word, shuffle_word = (int(w) for w in
                                   np.random.SeedSequence(seeds.sweep[k])
                                   .generate_state(2, dtype=np.uint64))
        model = init_model(h, spec.n_features, seed=init_word)
        model, hist = train(model, rows_by_spec[m],
                            replace(scn.training, seed=shuffle_word))
        corrected = correct_stream(model, main, spec)
        after = _spectral_block(scn, _slice_stream(corrected, w0))
        return {
            "hidden_units": h,
            "n_features": m,
            "seed_index": k,
            "sndr_db": after["sndr_db"],
            "sfdr_db": after["sfdr_db"],
            "enob_bits": after["enob_bits"],
            "delta_sndr_db": after["sndr_db"] - window_before["sndr_db"],
            "delta_sfdr_db": after["sfdr_db"] - window_before["sfdr_db"],
            "train_mse": hist.train_mse[-1],
            "val_mse": hist.val_mse[-1],
        }

    points = [(h, m, k) for h in hidden_list for m in feature_list
              for k in range(n_seeds)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one_point, points))
    else:
        rows = [one_point(p) for p in points]
    rows.sort(key=lambda r: (r["hidden_units"], r["n_features"],
                             r["seed_index"]))
    return rows


def save_sweep_csv(rows: list[dict], path) -> None:
    with Path(path).open("w", newline="\n") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            cells = []
            for col in SWEEP_COLUMNS:
                value = row[col]
                cells.append(str(value) if isinstance(value, (int, np.integer))
                             else f"{value:.10g}")
            fh.write(",".join(cells) + "\n")


# -- file-level commands (CLI backends) --------------------------------------

MAIN_STREAM_FILE = "main.csv"
REF_STREAM_FILE = "reference.csv"
LUT_FILE = "lut.csv"
MODEL_FILE = "model.json"
HISTORY_FILE = "loss_history.csv"
REPORT_FILE = "report.json"
SWEEP_FILE = "sweep.csv"


def _out_dir(scn: Scenario, out: str | None) -> Path:
    target = out or scn.out_dir
    if target is None:
        raise UsageError("no output directory: pass --out or set out_dir in "
                         "the scenario")
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require_file(path: Path, hint: str) -> Path:
    if not path.exists():
        raise UsageError(f"missing input {path} (run `{hint}` first)")
    return path


def cmd_simulate(scn: Scenario, out: str | None = None) -> tuple[Path, Path]:
    out_dir = _out_dir(scn, out)
    main, ref = run_simulate(scn)
    main_path = out_dir / MAIN_STREAM_FILE
    ref_path = out_dir / REF_STREAM_FILE
    main.to_csv(main_path)
    ref.to_csv(ref_path)
    return main_path, ref_path


def cmd_calibrate_ref(scn: Scenario, out: str | None = None) -> Path:
    out_dir = _out_dir(scn, out)
    lut = run_calibrate_ref(scn)
    lut_path = out_dir / LUT_FILE
    lut.to_csv(lut_path)
    return lut_path


def cmd_train(scn: Scenario, out: str | None = None) -> tuple[Path, Path]:
    out_dir = _out_dir(scn, out)
    main = CodeStream.from_csv(
        _require_file(out_dir / MAIN_STREAM_FILE, "sarcal simulate"))
    ref = CodeStream.from_csv(
        _require_file(out_dir / REF_STREAM_FILE, "sarcal simulate"))
    lut = Lut.from_csv(
        _require_file(out_dir / LUT_FILE, "sarcal calibrate-ref"))
    model, history = run_train(scn, main, ref, lut)
    model_path = out_dir / MODEL_FILE
    history_path = out_dir / HISTORY_FILE
    save_model(model, model_path)
    history.to_csv(history_path)
    return model_path, history_path


def cmd_evaluate(scn: Scenario, out: str | None = None,
                 quantized_bits: int | None = None) -> Path:
    out_dir = _out_dir(scn, out)
    main = CodeStream.from_csv(
        _require_file(out_dir / MAIN_STREAM_FILE, "sarcal simulate"))
    model = None
    lut = None
    model_path = out_dir / MODEL_FILE
    if model_path.exists():
        model = load_model(model_path)
        if quantized_bits is not None:
            model = quantize(model, bits=quantized_bits)
        lut = Lut.from_csv(
            _require_file(out_dir / LUT_FILE, "sarcal calibrate-ref"))
    report = run_evaluate(scn, main, model, lut=lut)
    report_path = out_dir / REPORT_FILE
    save_report(report, report_path)
    return report_path


def cmd_sweep(scn: Scenario, out: str | None = None, hidden_list=None,
              feature_list=None, n_seeds: int | None = None,
              workers: int = 1) -> Path:
    out_dir = _out_dir(scn, out)
    rows = run_sweep(scn, hidden_list, feature_list, n_seeds, workers)
    sweep_path = out_dir / SWEEP_FILE
    save_sweep_csv(rows, sweep_path)
    return sweep_path
