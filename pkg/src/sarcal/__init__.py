"""Behavioral SAR ADC simulation with blind dual-ADC digital calibration.

The package models a fast 12-bit redundant-weight SAR converter whose
reference node ripples under code-dependent charge draw, plus a slow
reference ADC of the same design sampling the same input at one eighth the
rate.  A histogram LUT linearizes the reference; a small tanh network then
learns the fast converter's momentary error from its own output history and
removes it purely in the digital domain.
"""

from .adc import (AdcConfig, AdcInstance, ConversionResult, RefNetworkConfig,
                  binary_weights, build_instance, convert_samples,
                  convert_stream, sample_and_convert, warmup)
from .ann import (AnnModel, LossHistory, QuantizedModel, TrainConfig,
                  correct_stream, gradient_check, init_model, load_model,
                  predict_q, quantize, save_model, train)
from .errors import (ConfigError, InsufficientOverdriveError,
                     QuantizationError, TrainingDivergenceError, UsageError)
from .features import (FeatureSpec, TrainingSet, aligned_indices,
                       build_training_set, denormalize_codes, make_features,
                       normalize_codes)
from .harness import (Scenario, cmd_calibrate_ref, cmd_evaluate, cmd_simulate,
                      cmd_sweep, cmd_train, derive_seeds, load_scenario,
                      run_calibrate_ref, run_evaluate, run_simulate, run_sweep,
                      run_train, save_scenario)
from .metrics import (ImReport, LinearityReport, SpectrumReport, dnl_inl_sine,
                      enob, fom_walden, im2_im3, spectrum)
from .refcal import (Lut, apply_lut, build_lut, transitions_from_histogram,
                     transitions_from_ramp_histogram)
from .signals import Signal, coherent_bin, coherent_tone, make_hist_stimulus
from .streams import CodeStream, CorrectedStream

__version__ = "0.1.0"

__all__ = [
    "AdcConfig", "AdcInstance", "AnnModel", "CodeStream", "ConfigError",
    "ConversionResult", "CorrectedStream", "FeatureSpec", "ImReport",
    "InsufficientOverdriveError", "LinearityReport", "LossHistory", "Lut",
    "QuantizationError", "QuantizedModel", "RefNetworkConfig", "Scenario",
    "SpectrumReport", "Signal", "TrainConfig", "TrainingDivergenceError",
    "TrainingSet", "UsageError", "aligned_indices", "apply_lut",
    "binary_weights", "build_instance", "build_lut", "build_training_set",
    "cmd_calibrate_ref", "cmd_evaluate", "cmd_simulate", "cmd_sweep",
    "cmd_train", "coherent_bin", "coherent_tone", "convert_samples",
    "convert_stream", "correct_stream", "denormalize_codes", "derive_seeds",
    "dnl_inl_sine", "enob", "fom_walden", "gradient_check", "im2_im3",
    "init_model", "load_model", "load_scenario", "make_features",
    "make_hist_stimulus", "normalize_codes", "predict_q", "quantize",
    "run_calibrate_ref", "run_evaluate", "run_simulate", "run_sweep",
    "run_train", "sample_and_convert", "save_model", "save_scenario",
    "spectrum", "train", "transitions_from_histogram",
    "transitions_from_ramp_histogram", "warmup",
]
