"""Statistical model of the quantum-dot single-photon source.

Photon numbers follow the truncated distribution (p0, p1, p2) derived from
the mean photon number and g2(0); emission times within a slot are a
Gaussian instrument response convolved with the exponential radiative decay.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

DEFAULT_REP_RATE_HZ = 151.894e6


@dataclass(frozen=True)
class SourceParams:
    """Source parameters; defaults match the characterized device."""

    mean_photon_number: float = 0.138
    g2_zero: float = 0.005
    decay_time_ps: float = 990.0
    irf_sigma_ps: float = 50.0
    rep_rate_hz: float = DEFAULT_REP_RATE_HZ

    def __post_init__(self):
        # mean 0 is allowed so a vacuum source can be simulated
        if not (self.mean_photon_number >= 0.0):
            raise ParameterError("mean_photon_number must be >= 0")
        if not (0.0 <= self.g2_zero < 1.0):
            raise ParameterError("g2_zero must be in [0, 1)")
        if not (self.decay_time_ps > 0.0):
            raise ParameterError("decay_time_ps must be > 0")
        if not (self.irf_sigma_ps >= 0.0):
            raise ParameterError("irf_sigma_ps must be >= 0")
        if not (self.rep_rate_hz > 0.0):
            raise ParameterError("rep_rate_hz must be > 0")
        photon_number_probs(self)  # reject parameter combinations outside the domain

    @property
    def slot_period_ps(self) -> float:
        return 1e12 / self.rep_rate_hz


def photon_number_probs(params: SourceParams) -> tuple[float, float, float]:
    """(p0, p1, p2) with n-photon events neglected for n > 2.

    p2 = <n>^2 g2(0)/2, p1 = <n> - p2, p0 = 1 - p1 - p2; sums to one by
    construction.
    """
    n = params.mean_photon_number
    p2 = n * n * params.g2_zero / 2.0
    p1 = n - p2
    p0 = 1.0 - p1 - p2
    if p1 < 0.0 or p0 < 0.0:
        raise ParameterError(
            f"photon-number probabilities out of domain: p0={p0!r}, p1={p1!r}"
        )
    return p0, p1, p2


def sample_emission_time(
    params: SourceParams,
    rng: np.random.Generator,
    size: int | None = None,
) -> float | np.ndarray:
    """Emission time from slot start, in ps: Normal(0, sigma_irf) + Exp(tau).

    Negative excursions from the Gaussian are kept; they land in the
    previous slot's late window rather than being clamped.
    """
    t = rng.normal(0.0, params.irf_sigma_ps, size) + rng.exponential(
        params.decay_time_ps, size
    )
    return float(t) if size is None else t


def emission_time_cdf(
    t_ps: np.ndarray, decay_time_ps: float, irf_sigma_ps: float
) -> np.ndarray:
    """Analytic CDF of the emission-time distribution (exGaussian).

    With sigma -> 0 this reduces to the exponential CDF 1 - exp(-t/tau).
    Used as an independent reference for histogram shapes.
    """
    t = np.asarray(t_ps, dtype=float)
    tau = float(decay_time_ps)
    sig = float(irf_sigma_ps)
    if sig == 0.0:
        return np.where(t > 0.0, 1.0 - np.exp(-np.clip(t, 0.0, None) / tau), 0.0)
    from scipy.stats import norm

    u = t / sig
    # guard the exp overflow for t << 0, where the second term vanishes anyway
    arg = np.minimum(sig**2 / (2 * tau**2) - t / tau, 700.0)
    return norm.cdf(u) - np.exp(arg) * norm.cdf(u - sig / tau)


def expected_event_fraction_in_window(
    params: SourceParams, window_ps: float
) -> float:
    """Probability that an emission time falls inside [0, window_ps]."""
    lo, hi = emission_time_cdf(
        np.array([0.0, window_ps]), params.decay_time_ps, params.irf_sigma_ps
    )
    return float(hi - lo)
