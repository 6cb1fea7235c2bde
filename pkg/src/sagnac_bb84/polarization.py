"""Jones/Stokes polarization algebra and the four BB84 states.

Conventions: states are pure Jones vectors (a_h, a_v) with global phase
ignored everywhere; comparisons go through |<a|b>|^2.  Stokes axes are
fixed as (s1: H/V, s2: D/A, s3: R/L).
"""

import cmath
import math
from dataclasses import dataclass
from enum import Enum

from .errors import ParameterError

# Tolerance for the unit-norm precondition on input states.
NORM_TOL = 1e-9


class Basis(Enum):
    X = "X"
    Y = "Y"


class Bb84Symbol(Enum):
    """The four BB84 polarization states, keyed by encoder phase."""

    D = "D"
    A = "A"
    R = "R"
    L = "L"

    @property
    def phase(self) -> float:
        """Relative phase between H and V that produces this state."""
        return _PHASE[self]

    @property
    def basis(self) -> Basis:
        return Basis.X if self in (Bb84Symbol.D, Bb84Symbol.A) else Basis.Y

    @property
    def orthogonal(self) -> "Bb84Symbol":
        """The other state of the same basis."""
        return _ORTHO[self]

    def jones(self) -> "JonesVector":
        return state_from_phase(self.phase)


_PHASE = {
    Bb84Symbol.D: 0.0,
    Bb84Symbol.R: math.pi / 2,
    Bb84Symbol.A: math.pi,
    Bb84Symbol.L: -math.pi / 2,
}
_ORTHO = {
    Bb84Symbol.D: Bb84Symbol.A,
    Bb84Symbol.A: Bb84Symbol.D,
    Bb84Symbol.R: Bb84Symbol.L,
    Bb84Symbol.L: Bb84Symbol.R,
}


@dataclass(frozen=True)
class JonesVector:
    """Two complex field amplitudes (a_h, a_v), dimensionless."""

    a_h: complex
    a_v: complex

    @property
    def norm_sq(self) -> float:
        return abs(self.a_h) ** 2 + abs(self.a_v) ** 2

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm_sq - 1.0) <= tol

    def normalized(self) -> "JonesVector":
        n = math.sqrt(self.norm_sq)
        if n == 0.0:
            raise ParameterError("cannot normalize the zero Jones vector")
        return JonesVector(self.a_h / n, self.a_v / n)

    def inner(self, other: "JonesVector") -> complex:
        """<self|other> with self as the bra."""
        return self.a_h.conjugate() * other.a_h + self.a_v.conjugate() * other.a_v


@dataclass(frozen=True)
class StokesVector:
    """Normalized Stokes components (s1, s2, s3)."""

    s1: float
    s2: float
    s3: float

    @property
    def degree_sq(self) -> float:
        return self.s1**2 + self.s2**2 + self.s3**2


def state_from_phase(phi: float) -> JonesVector:
    """(|H> + e^{i phi} |V>)/sqrt(2): the encoder output for relative phase phi."""
    if not math.isfinite(phi):
        raise ParameterError(f"relative phase must be finite, got {phi!r}")
    return JonesVector(1 / math.sqrt(2), cmath.exp(1j * phi) / math.sqrt(2))


def _require_normalized(state: JonesVector) -> None:
    if not state.is_normalized():
        raise ParameterError(
            f"state must be normalized within {NORM_TOL:g} (|a|^2 = {state.norm_sq!r})"
        )


def projection_prob(state: JonesVector, analyzer: Bb84Symbol) -> float:
    """Born-rule probability |<analyzer|state>|^2 of detecting `state` as `analyzer`."""
    _require_normalized(state)
    p = abs(analyzer.jones().inner(state)) ** 2
    return min(max(p, 0.0), 1.0)


def jones_to_stokes(state: JonesVector) -> StokesVector:
    """Normalized Stokes components of a pure state (unit length on the sphere)."""
    _require_normalized(state)
    cross = state.a_h.conjugate() * state.a_v
    return StokesVector(
        s1=abs(state.a_h) ** 2 - abs(state.a_v) ** 2,
        s2=2.0 * cross.real,
        s3=2.0 * cross.imag,
    )


def apply_relative_phase(state: JonesVector, phi: float) -> JonesVector:
    """Multiply the V amplitude by e^{i phi}; preserves the norm."""
    if not math.isfinite(phi):
        raise ParameterError(f"relative phase must be finite, got {phi!r}")
    return JonesVector(state.a_h, state.a_v * cmath.exp(1j * phi))
