"""Free-space Sagnac polarization encoder model.

Covers the symbol-to-voltage map, the timing of the phase-modulator windows
(including mismodulation of photons emitted outside the intended half-window),
extinction-ratio leakage, insertion loss, and the temporal acceptance filter.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SequenceError
from .polarization import Bb84Symbol, JonesVector, state_from_phase
from .source import DEFAULT_REP_RATE_HZ

DEFAULT_SLOT_PERIOD_PS = 1e12 / DEFAULT_REP_RATE_HZ
# The delay line is half a slot period, making early/late windows symmetric.
DEFAULT_DELTA_T_PS = DEFAULT_SLOT_PERIOD_PS / 2.0
DEFAULT_SEQUENCE_STRING = "LARDARDLAALDRDLR"

# Channel/symbol code order used throughout simulation and analysis arrays.
SYMBOL_ORDER = (Bb84Symbol.D, Bb84Symbol.A, Bb84Symbol.R, Bb84Symbol.L)
SYMBOL_CODE = {sym: i for i, sym in enumerate(SYMBOL_ORDER)}
PHASE_BY_CODE = np.array([sym.phase for sym in SYMBOL_ORDER])
ORTHO_CODE = np.array([SYMBOL_CODE[sym.orthogonal] for sym in SYMBOL_ORDER], dtype=np.uint8)


@dataclass(frozen=True)
class ModulationSequence:
    """Ordered BB84 symbols applied by the modulator, repeated cyclically."""

    symbols: tuple[Bb84Symbol, ...]

    def __post_init__(self):
        if len(self.symbols) < 1:
            raise SequenceError("modulation sequence must contain at least one symbol")
        if any(not isinstance(s, Bb84Symbol) for s in self.symbols):
            raise SequenceError("modulation sequence entries must be Bb84Symbol")

    @classmethod
    def from_string(cls, letters: str) -> "ModulationSequence":
        try:
            return cls(tuple(Bb84Symbol(ch) for ch in letters.strip().upper()))
        except ValueError as exc:
            raise SequenceError(f"invalid sequence string {letters!r}") from exc

    @classmethod
    def default(cls) -> "ModulationSequence":
        return cls.from_string(DEFAULT_SEQUENCE_STRING)

    def __len__(self) -> int:
        return len(self.symbols)

    def symbol_at(self, slot_index: int) -> Bb84Symbol:
        """Symbol applied in absolute slot `slot_index` (cyclic)."""
        return self.symbols[slot_index % len(self.symbols)]

    def codes(self) -> np.ndarray:
        """Symbol codes (D,A,R,L -> 0..3) for one sequence period."""
        return np.array([SYMBOL_CODE[s] for s in self.symbols], dtype=np.uint8)

    def as_string(self) -> str:
        return "".join(s.value for s in self.symbols)


@dataclass(frozen=True)
class EncoderParams:
    v_pi_volts: float = 4.2
    delta_t_ps: float = DEFAULT_DELTA_T_PS
    slot_period_ps: float = DEFAULT_SLOT_PERIOD_PS
    extinction_ratio_db: float = 27.7
    total_loss_db: float = 5.17
    p_mis: float = 0.0069
    filter_window_ps: float = 2650.0

    def __post_init__(self):
        if not (self.v_pi_volts > 0.0):
            raise ParameterError("v_pi_volts must be > 0")
        if not (0.0 < self.delta_t_ps <= self.slot_period_ps):
            raise ParameterError("delta_t_ps must satisfy 0 < delta_t <= slot_period")
        if not (0.0 < self.filter_window_ps <= self.delta_t_ps):
            raise ParameterError("filter_window_ps must satisfy 0 < window <= delta_t")
        if not (self.total_loss_db >= 0.0):
            raise ParameterError("total_loss_db must be >= 0")
        if not (self.extinction_ratio_db >= 0.0):  # math.inf = ideal modulator
            raise ParameterError("extinction_ratio_db must be >= 0")
        if not (0.0 <= self.p_mis < 0.5):
            raise ParameterError("p_mis must be in [0, 0.5)")

    @property
    def leakage_epsilon(self) -> float:
        """Orthogonal leakage power relative to the intended state."""
        if math.isinf(self.extinction_ratio_db):
            return 0.0
        return 10.0 ** (-self.extinction_ratio_db / 10.0)

    @property
    def leakage_prob(self) -> float:
        """Probability that a photon exits in the orthogonal state: eps/(1+eps)."""
        eps = self.leakage_epsilon
        return eps / (1.0 + eps)


def voltage_for_symbol(symbol: Bb84Symbol, params: EncoderParams) -> float:
    """Modulator voltage for a symbol: phase/pi * V_pi."""
    return symbol.phase / math.pi * params.v_pi_volts


def mismodulation_offset(emission_time_ps, delta_t_ps: float, slot_period_ps: float):
    """Slot offset of the modulation window a photon actually receives.

    0 inside the intended window [0, delta_t); +1 for late photons
    (next slot's window), -1 for early ones (previous slot's window).
    The pattern repeats with the slot period, so emission times beyond one
    period keep walking along the voltage staircase.  Accepts scalars or
    arrays.
    """
    t = np.asarray(emission_time_ps, dtype=float)
    if t.ndim == 0:
        tv = float(t)
        if tv < 0.0:
            return int(math.floor(tv / slot_period_ps))
        if tv >= delta_t_ps:
            return 1 + int(math.floor((tv - delta_t_ps) / slot_period_ps))
        return 0
    off = np.zeros(t.shape, dtype=np.int64)
    neg = t < 0.0
    off[neg] = np.floor(t[neg] / slot_period_ps)
    late = t >= delta_t_ps
    off[late] = 1 + np.floor((t[late] - delta_t_ps) / slot_period_ps)
    return off


def effective_phase(
    emission_time_ps: float,
    slot_index: int,
    seq: ModulationSequence,
    params: EncoderParams,
) -> tuple[float, bool]:
    """Phase actually applied to a photon of slot `slot_index` emitted at t.

    Photons outside [0, delta_t) receive the adjacent half-window's phase
    wholesale and are flagged as mismodulated.
    """
    if slot_index < 0:
        raise ParameterError("slot_index must be >= 0")
    off = mismodulation_offset(emission_time_ps, params.delta_t_ps, params.slot_period_ps)
    return seq.symbol_at(slot_index + off).phase, off != 0


def output_state(
    phase: float, params: EncoderParams, rng: np.random.Generator
) -> JonesVector:
    """Encoder output for an applied phase, with extinction-ratio leakage.

    Leakage is incoherent: with probability eps/(1+eps) the photon exits in
    the state orthogonal to the intended one (phase shifted by pi), so
    projection statistics onto the orthogonal analyzer equal eps/(1+eps).
    """
    p_leak = params.leakage_prob
    if p_leak > 0.0 and rng.random() < p_leak:
        return state_from_phase(phase + math.pi)
    return state_from_phase(phase)


def accept_by_filter(emission_time_ps: float, params: EncoderParams) -> bool:
    """Temporal filter: keep only detections inside [0, filter_window]."""
    return 0.0 <= emission_time_ps <= params.filter_window_ps


def encoder_transmission(params: EncoderParams) -> float:
    """Encoder power transmission 10^(-loss_dB/10)."""
    return 10.0 ** (-params.total_loss_db / 10.0)
