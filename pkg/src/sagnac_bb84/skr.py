"""Asymptotic secure-key-rate engine for a sub-Poissonian BB84 source.

Rate per second:

    A = R * p_sift * { pc1_lower*(1 - h(e1_bar)) - f_EC * p_c * h(e_tot) }

built from the truncated photon-number distribution (p0, p1, p2), the
per-photon-number click probabilities

    pc_n = p_n * [1 - (1 - p_dc)*(1 - eta)^n],

the per-photon-number error rates e_n, the total error e_tot, the
single-photon bounds e1_bar and pc1_lower, and the binary entropy h.
All quantities are closed-form; no Monte Carlo is involved.
"""

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoPositiveRateError, ParameterError
from .source import DEFAULT_REP_RATE_HZ, SourceParams, photon_number_probs


@dataclass(frozen=True)
class SkrParams:
    """Inputs of the rate model; defaults are the reference simulation set."""

    rep_rate_hz: float = DEFAULT_REP_RATE_HZ
    p_sift: float = 0.5
    error_correction_efficiency: float = 1.16
    encoder_efficiency: float = 0.34
    decoder_efficiency: float = 0.8
    detector_efficiency: float = 0.8
    attenuation_db_per_km: float = 0.18
    mean_photon_number: float = 0.138
    g2_zero: float = 0.005
    misencoding_prob: float = 0.0069
    dark_click_prob: float | None = None  # per slot; defaults to 50/R

    def __post_init__(self):
        if self.dark_click_prob is None:
            object.__setattr__(self, "dark_click_prob", 50.0 / self.rep_rate_hz)
        for name in (
            "p_sift",
            "encoder_efficiency",
            "decoder_efficiency",
            "detector_efficiency",
            "misencoding_prob",
            "dark_click_prob",
        ):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ParameterError(f"{name} must be in [0, 1]")
        if self.error_correction_efficiency < 1.0:
            raise ParameterError("error_correction_efficiency must be >= 1")
        if self.rep_rate_hz <= 0.0:
            raise ParameterError("rep_rate_hz must be > 0")
        if self.attenuation_db_per_km < 0.0:
            raise ParameterError("attenuation_db_per_km must be >= 0")
        # delegate the photon-number domain checks
        photon_number_probs(
            SourceParams(
                mean_photon_number=self.mean_photon_number,
                g2_zero=self.g2_zero,
                rep_rate_hz=self.rep_rate_hz,
            )
        )

    @property
    def fixed_efficiency(self) -> float:
        """Efficiency product excluding the distance-dependent channel."""
        return self.encoder_efficiency * self.decoder_efficiency * self.detector_efficiency

    def to_dict(self) -> dict:
        return {
            "rep_rate_hz": self.rep_rate_hz,
            "p_sift": self.p_sift,
            "error_correction_efficiency": self.error_correction_efficiency,
            "encoder_efficiency": self.encoder_efficiency,
            "decoder_efficiency": self.decoder_efficiency,
            "detector_efficiency": self.detector_efficiency,
            "attenuation_db_per_km": self.attenuation_db_per_km,
            "mean_photon_number": self.mean_photon_number,
            "g2_zero": self.g2_zero,
            "misencoding_prob": self.misencoding_prob,
            "dark_click_prob": self.dark_click_prob,
        }


@dataclass(frozen=True)
class SkrPoint:
    """One rate evaluation with all intermediate bounds retained."""

    distance_km: float
    channel_loss_db: float
    eta_total: float
    p_c: float
    p_c0: float
    p_c1: float
    p_c2: float
    e_tot: float
    e1_bar: float
    pc1_lower: float
    skr_bps: float  # clamped at zero
    raw_rate_bps: float
    e1_saturated: bool


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2 (1-x), with h(0) = h(1) = 0."""
    if not (0.0 <= x <= 1.0):
        raise ParameterError(f"binary entropy argument must be in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def skr_point_at_loss(params: SkrParams, channel_loss_db: float) -> SkrPoint:
    """Evaluate the rate at a given channel loss in dB (fixed efficiencies
    applied on top)."""
    if channel_loss_db < 0.0:
        raise ParameterError("channel_loss_db must be >= 0")
    eta_c = 10.0 ** (-channel_loss_db / 10.0)
    eta = params.fixed_efficiency * eta_c
    p_dc = params.dark_click_prob
    p_mis = params.misencoding_prob

    src = SourceParams(
        mean_photon_number=params.mean_photon_number,
        g2_zero=params.g2_zero,
        rep_rate_hz=params.rep_rate_hz,
    )
    p = photon_number_probs(src)

    click = [1.0 - (1.0 - p_dc) * (1.0 - eta) ** n for n in range(3)]
    pc_n = [p[n] * click[n] for n in range(3)]
    p_c = sum(pc_n)

    # e_n * click_n = p_dc/2 + p_mis*(1-(1-eta)^n); the click-probability
    # denominators cancel in the total error
    e_tot = (
        sum(p[n] * (p_dc / 2.0 + p_mis * (1.0 - (1.0 - eta) ** n)) for n in range(3))
        / p_c
    )
    e1_raw = (e_tot * p_c - p[0] * p_dc / 2.0) / click[1]
    saturated = not (0.0 <= e1_raw <= 1.0)
    e1 = min(max(e1_raw, 0.0), 1.0)
    pc1_lower = p_c - p[0] * p_dc - p[2]

    raw = (
        params.rep_rate_hz
        * params.p_sift
        * (
            pc1_lower * (1.0 - binary_entropy(e1))
            - params.error_correction_efficiency * p_c * binary_entropy(e_tot)
        )
    )
    distance = (
        channel_loss_db / params.attenuation_db_per_km
        if params.attenuation_db_per_km > 0.0
        else math.nan
    )
    return SkrPoint(
        distance_km=distance,
        channel_loss_db=channel_loss_db,
        eta_total=eta,
        p_c=p_c,
        p_c0=pc_n[0],
        p_c1=pc_n[1],
        p_c2=pc_n[2],
        e_tot=e_tot,
        e1_bar=e1_raw,
        pc1_lower=pc1_lower,
        skr_bps=max(raw, 0.0),
        raw_rate_bps=raw,
        e1_saturated=saturated,
    )


def skr_point(params: SkrParams, distance_km: float) -> SkrPoint:
    """Evaluate the rate at a fiber distance in km."""
    if distance_km < 0.0:
        raise ParameterError("distance_km must be >= 0")
    point = skr_point_at_loss(params, params.attenuation_db_per_km * distance_km)
    return dataclasses.replace(point, distance_km=distance_km)


def skr_sweep(
    params: SkrParams, d_min_km: float, d_max_km: float, step_km: float
) -> list[SkrPoint]:
    """Rate over a distance grid, ordered by distance."""
    if d_min_km > d_max_km:
        raise ParameterError("d_min_km must be <= d_max_km")
    if step_km <= 0.0:
        raise ParameterError("step_km must be > 0")
    distances = np.arange(d_min_km, d_max_km + step_km * 1e-9, step_km)
    return [skr_point(params, float(d)) for d in distances]


def max_tolerable_loss(params: SkrParams, tol_db: float = 1e-3) -> float:
    """Channel loss (dB) at which the raw rate crosses zero, by bisection.

    The loss is counted before the fixed encoder/decoder/detector
    efficiencies.
    """
    if skr_point_at_loss(params, 0.0).raw_rate_bps <= 0.0:
        raise NoPositiveRateError("key rate is non-positive already at zero loss")
    lo, hi = 0.0, 1.0
    while skr_point_at_loss(params, hi).raw_rate_bps > 0.0:
        hi *= 2.0
        if hi > 500.0:
            raise NoPositiveRateError("key rate does not cross zero below 500 dB")
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if skr_point_at_loss(params, mid).raw_rate_bps > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
