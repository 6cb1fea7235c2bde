"""Polarization-stability metrics and noise-spectral-density fitting.

The error measure for a sample is one minus the projection of its Stokes
vector onto the normalized mean vector of the series; its spectrum is
fitted with a power law c*f^(-beta) in log-log space to identify flicker
noise.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateSeriesError, ParameterError

STOKES_CSV_HEADER = ["t_s", "s1", "s2", "s3"]

# Unit-norm tolerance for incoming Stokes samples.
_NORM_TOL = 1e-6


@dataclass
class StokesSeries:
    """Uniformly sampled normalized Stokes vectors."""

    t_s: np.ndarray
    vectors: np.ndarray  # shape (N, 3)

    def __post_init__(self):
        self.t_s = np.asarray(self.t_s, dtype=float)
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.t_s.ndim != 1 or self.vectors.shape != (self.t_s.size, 3):
            raise ParameterError("series must have shapes (N,) and (N, 3)")
        if self.t_s.size >= 2:
            dt = np.diff(self.t_s)
            if (dt <= 0).any():
                raise ParameterError("timestamps must be strictly increasing")
            mean_dt = dt.mean()
            if np.abs(dt - mean_dt).max() > 0.1 * mean_dt:
                raise ParameterError("sampling interval jitter exceeds 10% of the mean")

    def __len__(self) -> int:
        return self.t_s.size

    @property
    def interval_s(self) -> float:
        if len(self) < 2:
            raise ParameterError("need >= 2 samples for a sampling interval")
        return float(np.diff(self.t_s).mean())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(STOKES_CSV_HEADER)
            writer.writerows(
                (f"{t:.6f}", f"{v[0]:.12g}", f"{v[1]:.12g}", f"{v[2]:.12g}")
                for t, v in zip(self.t_s, self.vectors)
            )

    @classmethod
    def from_csv(cls, path) -> "StokesSeries":
        ts, vecs = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != STOKES_CSV_HEADER:
                raise ConfigError(f"unexpected Stokes header {header!r} in {path}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    ts.append(float(row[0]))
                    vecs.append([float(row[1]), float(row[2]), float(row[3])])
                except (ValueError, IndexError) as exc:
                    raise ConfigError(
                        f"malformed Stokes row at line {lineno} of {path}: {row!r}"
                    ) from exc
        return cls(np.asarray(ts), np.asarray(vecs))


@dataclass
class StabilityMetrics:
    mean_vector: np.ndarray  # normalized average Stokes vector
    component_deviation: np.ndarray  # shape (N, 3): S_i(t) - mean_i
    projection_error: np.ndarray  # shape (N,): 1 - S(t).S_avg
    mean_error: float
    max_error: float


def stability_metrics(series: StokesSeries) -> StabilityMetrics:
    """Per-sample deviations from the normalized mean Stokes vector."""
    if len(series) < 2:
        raise ParameterError("need >= 2 samples for stability metrics")
    norms = np.linalg.norm(series.vectors, axis=1)
    if np.abs(norms - 1.0).max() > _NORM_TOL:
        raise ParameterError("Stokes vectors must be normalized")
    vecs = series.vectors / norms[:, None]

    mean = vecs.mean(axis=0)
    mean_norm = np.linalg.norm(mean)
    if mean_norm == 0.0:
        raise DegenerateSeriesError("mean Stokes vector vanishes")
    s_avg = mean / mean_norm

    eps = 1.0 - vecs @ s_avg
    return StabilityMetrics(
        mean_vector=s_avg,
        component_deviation=vecs - s_avg,
        projection_error=eps,
        mean_error=float(eps.mean()),
        max_error=float(eps.max()),
    )


def periodogram(
    samples: np.ndarray, sample_interval_s: float, window: str = "none"
) -> tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram with the mean removed.

    Normalized so that the total power equals the series variance
    (Parseval); with a Hann window the power is scaled by the window's
    mean-square to keep this property on average.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        raise ParameterError("need >= 2 samples for a periodogram")
    if sample_interval_s <= 0.0:
        raise ParameterError("sample_interval_s must be > 0")
    x = x - x.mean()
    if window == "hann":
        w = np.hanning(n)
        x = x * w
        scale = 1.0 / np.mean(w**2)
    elif window == "none":
        scale = 1.0
    else:
        raise ParameterError(f"unknown window {window!r}")

    spec = np.abs(np.fft.rfft(x)) ** 2 * (scale / n**2)
    freqs = np.fft.rfftfreq(n, d=sample_interval_s)
    power = 2.0 * spec[1:]
    if n % 2 == 0:
        power[-1] /= 2.0  # Nyquist bin is not doubled
    return freqs[1:], power


@dataclass
class NsdFit:
    freq_hz: np.ndarray
    power: np.ndarray
    amplitude: float  # c in c*f^(-beta)
    beta: float
    beta_stderr: float
    residual_rms: float  # rms of log10 residuals over the fitted band
    residual_max: float  # largest positive log10 residual (line detector)
    poor_fit: bool
    fit_band: tuple


def nsd_fit(
    samples: np.ndarray,
    sample_interval_s: float,
    window: str = "none",
    skip_low_bins: int = 3,
    max_bins: int | None = None,
) -> NsdFit:
    """Fit c*f^(-beta) to the one-sided periodogram of an error series.

    The lowest `skip_low_bins` frequency bins are excluded by default (the
    band is configurable); the fit is an ordinary least-squares line in
    log10-log10 space.  A large residual scatter flags a poor power-law
    fit, e.g. for a line spectrum.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 1024:
        raise ParameterError("need >= 1024 samples for a spectral fit")
    if not np.any(x != x.mean()):
        raise DegenerateSeriesError("series is constant; spectrum is all zero")
    freqs, power = periodogram(x, sample_interval_s, window=window)

    lo = int(skip_low_bins)
    hi = power.size if max_bins is None else min(power.size, lo + int(max_bins))
    if hi - lo < 8:
        raise ParameterError("fit band must contain at least 8 bins")
    f_band = freqs[lo:hi]
    p_band = power[lo:hi]
    floor = power.max() * 1e-30
    logf = np.log10(f_band)
    logp = np.log10(np.clip(p_band, floor, None))

    (slope, intercept), cov = np.polyfit(logf, logp, 1, cov=True)
    resid = logp - (slope * logf + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    peak = float(resid.max())
    # multiplicative chi^2_2 scatter gives rms ~ 0.56 and peaks below ~1.5
    # decades; a sharp line sticks out by several decades
    return NsdFit(
        freq_hz=freqs,
        power=power,
        amplitude=10.0**intercept,
        beta=-float(slope),
        beta_stderr=float(math.sqrt(max(cov[0, 0], 0.0))),
        residual_rms=rms,
        residual_max=peak,
        poor_fit=rms > 1.5 or peak > 3.0,
        fit_band=(float(f_band[0]), float(f_band[-1])),
    )
