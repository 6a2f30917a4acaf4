"""Differentiable wavetable synthesis.

Audio is rendered from a small dictionary of single-cycle wavetables driven
by frame-rate controls (f0, amplitude, per-table attention). The dictionary
and the controls can be fitted to target audio by gradient descent on a
multi-scale spectral loss, and a fitted dictionary can be replayed at new
pitches without refitting.
"""

from .errors import DivergenceError, FormatError, SynthError, UnsupportedFormatError
from .io_formats import (
    AudioBuffer,
    RunConfig,
    bank_load,
    bank_save,
    f0_track_load,
    f0_track_save,
    run_config_load,
    run_config_save,
    track_load,
    track_save,
    wav_read,
    wav_write,
)
from .oscillator import (
    ControlTrack,
    PhaseState,
    SampleControls,
    accumulate_phase,
    synthesize,
    synthesize_additive,
    upsample_controls,
)
from .optimize import (
    AdamState,
    FitConfig,
    FitGrads,
    FitParams,
    adam_step,
    backward,
    fit,
    fit_oneshot,
    forward,
    pitch_shift,
    rank_wavetables,
)
from .spectral import (
    SpectralConfig,
    Spectrogram,
    a_weighting_db,
    estimate_f0,
    extract_loudness,
    multiscale_loss,
    multiscale_loss_grad,
    stft_magnitude,
)
from .wavetable import (
    MipmapBank,
    WavetableBank,
    bandlimit,
    build_mipmaps,
    init_bank,
    read_fractional,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AudioBuffer",
    "ControlTrack",
    "DivergenceError",
    "FitConfig",
    "FitGrads",
    "FitParams",
    "FormatError",
    "MipmapBank",
    "PhaseState",
    "RunConfig",
    "SampleControls",
    "SpectralConfig",
    "Spectrogram",
    "SynthError",
    "UnsupportedFormatError",
    "WavetableBank",
    "a_weighting_db",
    "accumulate_phase",
    "adam_step",
    "backward",
    "bandlimit",
    "bank_load",
    "bank_save",
    "build_mipmaps",
    "estimate_f0",
    "extract_loudness",
    "f0_track_load",
    "f0_track_save",
    "fit",
    "fit_oneshot",
    "forward",
    "init_bank",
    "multiscale_loss",
    "multiscale_loss_grad",
    "pitch_shift",
    "rank_wavetables",
    "read_fractional",
    "run_config_load",
    "run_config_save",
    "stft_magnitude",
    "synthesize",
    "synthesize_additive",
    "track_load",
    "track_save",
    "upsample_controls",
    "wav_read",
    "wav_write",
]
