"""Simulator and analysis toolkit for a Sagnac-encoded single-photon BB84 link."""

from .channel import (
    ChannelParams,
    DetectionRecord,
    DetectorParams,
    ExperimentParams,
    SlotHistogram,
    channel_transmission,
    decode,
    decode_counts,
    histogram,
    simulate_run,
)
from .config import RunConfig
from .encoder import (
    EncoderParams,
    ModulationSequence,
    accept_by_filter,
    effective_phase,
    encoder_transmission,
    output_state,
    voltage_for_symbol,
)
from .errors import (
    ConfigError,
    DegenerateSeriesError,
    FitFailureError,
    NoPositiveRateError,
    ParameterError,
    ResourceLimitError,
    SagnacBb84Error,
    SequenceError,
    UndefinedSlotError,
)
from .g2fit import G2FitParams, G2FitResult, g2_fit, g2_model
from .polarization import (
    Basis,
    Bb84Symbol,
    JonesVector,
    StokesVector,
    apply_relative_phase,
    jones_to_stokes,
    projection_prob,
    state_from_phase,
)
from .qber import SlotCounts, encoding_agreement, mean_qber, qber_per_slot
from .skr import (
    SkrParams,
    SkrPoint,
    binary_entropy,
    max_tolerable_loss,
    skr_point,
    skr_point_at_loss,
    skr_sweep,
)
from .source import SourceParams, photon_number_probs, sample_emission_time
from .stability import NsdFit, StokesSeries, nsd_fit, periodogram, stability_metrics

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "Bb84Symbol",
    "ChannelParams",
    "ConfigError",
    "DegenerateSeriesError",
    "DetectionRecord",
    "DetectorParams",
    "EncoderParams",
    "ExperimentParams",
    "FitFailureError",
    "G2FitParams",
    "G2FitResult",
    "JonesVector",
    "ModulationSequence",
    "NoPositiveRateError",
    "NsdFit",
    "ParameterError",
    "ResourceLimitError",
    "RunConfig",
    "SagnacBb84Error",
    "SequenceError",
    "SkrParams",
    "SkrPoint",
    "SlotCounts",
    "SlotHistogram",
    "SourceParams",
    "StokesSeries",
    "StokesVector",
    "UndefinedSlotError",
    "accept_by_filter",
    "apply_relative_phase",
    "binary_entropy",
    "channel_transmission",
    "decode",
    "decode_counts",
    "effective_phase",
    "encoder_transmission",
    "encoding_agreement",
    "g2_fit",
    "g2_model",
    "histogram",
    "jones_to_stokes",
    "max_tolerable_loss",
    "mean_qber",
    "nsd_fit",
    "output_state",
    "periodogram",
    "photon_number_probs",
    "projection_prob",
    "qber_per_slot",
    "sample_emission_time",
    "simulate_run",
    "skr_point",
    "skr_point_at_loss",
    "skr_sweep",
    "stability_metrics",
    "state_from_phase",
    "voltage_for_symbol",
]
