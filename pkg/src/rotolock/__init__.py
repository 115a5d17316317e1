"""Deterministic simulation and signal-processing toolkit for a
rotating-electrode optical voltage sensor: electrode-modulated intensity,
optically generated reference, and generalized lock-in demodulation."""

__version__ = "0.1.0"

from .errors import ConfigError, PreconditionError
from .lockin import (
    DemodGain,
    DemodReference,
    DemodResult,
    HarmonicOutput,
    demod_gain,
    demod_gain_numeric,
    demodulate,
    harmonic_outputs,
    modulate,
    recover,
    split_even_odd,
    write_harmonics_csv,
)
from .modulation import ModulationFit, eval_modulation, modulation_series
from .reference import (
    EmissionFit,
    SpotGeometry,
    TrapezoidFit,
    detect_period,
    emission_intensity,
    fit_trapezoid_cosine,
    reference_waveform,
    synth_demod_reference,
    transmitted_fraction,
    transmitted_fraction_mc,
)
from .signals import (
    HarmonicSeries,
    SampledSignal,
    TimeGrid,
    WindowedSignal,
    downsample_at_phase,
    fit_harmonics,
    moving_integral,
    read_csv,
    rms_error,
    synth,
    write_csv,
)
from .sim import NoiseSpec, SimConfig, SimResult, gen_noise, report, run_simulation

__all__ = [
    "ConfigError",
    "PreconditionError",
    "TimeGrid",
    "SampledSignal",
    "HarmonicSeries",
    "WindowedSignal",
    "synth",
    "fit_harmonics",
    "moving_integral",
    "downsample_at_phase",
    "rms_error",
    "write_csv",
    "read_csv",
    "ModulationFit",
    "eval_modulation",
    "modulation_series",
    "EmissionFit",
    "SpotGeometry",
    "TrapezoidFit",
    "emission_intensity",
    "transmitted_fraction",
    "transmitted_fraction_mc",
    "reference_waveform",
    "fit_trapezoid_cosine",
    "detect_period",
    "synth_demod_reference",
    "DemodReference",
    "DemodGain",
    "HarmonicOutput",
    "DemodResult",
    "split_even_odd",
    "modulate",
    "demod_gain",
    "demod_gain_numeric",
    "demodulate",
    "harmonic_outputs",
    "recover",
    "write_harmonics_csv",
    "NoiseSpec",
    "SimConfig",
    "SimResult",
    "gen_noise",
    "run_simulation",
    "report",
]
