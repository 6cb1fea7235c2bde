"""Synthetic data generators for self-contained analysis tests.

The generators double as independent oracles: the spectral-shaping noise
generator knows its exponent by construction, and the correlation
histogram generator draws Poisson counts from the closed-form model.
"""

import numpy as np

from .g2fit import G2FitParams, g2_model
from .errors import ParameterError
from .source import DEFAULT_REP_RATE_HZ
from .stability import StokesSeries


def synthetic_g2_histogram(
    rng: np.random.Generator,
    g2_zero: float = 0.0055,
    bunch_amp: float = 0.1,
    bunch_time_ns: float = 38.0,
    sigma_t_ps: float = 150.0,
    decay_time_ps: float = 990.0,
    t0_ps: float = 0.0,
    rep_rate_hz: float = DEFAULT_REP_RATE_HZ,
    span_ns: float = 110.0,
    bin_ns: float = 0.1,
    side_peak_counts: float = 2e5,
) -> tuple[np.ndarray, np.ndarray, G2FitParams]:
    """Poisson-sampled correlation histogram from the closed-form model.

    `side_peak_counts` is the integrated count per side peak (the model
    amplitude); the default is a realistic accumulation for a bright
    source.  Returns bin centers, counts, and the true parameters.
    """
    params = G2FitParams(
        amp_side=side_peak_counts,
        amp_center=g2_zero * side_peak_counts,
        sigma_t_ps=sigma_t_ps,
        t0_ps=t0_ps,
        decay_time_ps=decay_time_ps,
        bunch_amp=bunch_amp,
        bunch_time_ns=bunch_time_ns,
        rep_rate_hz=rep_rate_hz,
    )
    n_bins = int(round(2.0 * span_ns / bin_ns))
    t = (np.arange(n_bins) + 0.5) * bin_ns - span_ns
    expected = g2_model(t, params) * bin_ns
    counts = rng.poisson(expected)
    return t, counts, params


def shaped_noise(rng: np.random.Generator, n: int, beta: float) -> np.ndarray:
    """Unit-variance noise with a 1/f^beta one-sided power spectrum.

    White Gaussian noise is shaped in the frequency domain with the
    f^(-beta/2) amplitude filter (DC removed), so the exponent is exact
    by construction.
    """
    if n < 2:
        raise ParameterError("need n >= 2 samples")
    spec = np.fft.rfft(rng.standard_normal(n))
    k = np.arange(spec.size, dtype=float)
    k[0] = 1.0
    spec = spec * k ** (-beta / 2.0)
    spec[0] = 0.0
    x = np.fft.irfft(spec, n)
    return x / x.std()


def synthetic_stokes_series(
    rng: np.random.Generator,
    n: int = 2**16,
    beta: float = 1.16,
    interval_s: float = 1.0,
    error_scale: float = 2e-5,
) -> StokesSeries:
    """Stokes series whose projection error carries a 1/f^beta spectrum.

    The wobble angle around the mean axis is chosen so the projection
    error equals a positive affine map of the shaped noise (offsets do not
    change the non-DC spectrum); azimuths are drawn uniformly so the mean
    vector stays on the wobble axis.
    """
    y = shaped_noise(rng, n, beta)
    eps = error_scale * (y - y.min()) + 1e-7
    theta = np.arccos(1.0 - eps)
    psi = rng.uniform(0.0, 2.0 * np.pi, n)
    vectors = np.stack(
        [
            np.cos(theta),
            np.sin(theta) * np.cos(psi),
            np.sin(theta) * np.sin(psi),
        ],
        axis=1,
    )
    return StokesSeries(t_s=np.arange(n) * interval_s, vectors=vectors)


def constant_stokes_series(
    n: int = 2048, interval_s: float = 1.0, vector=(1.0, 0.0, 0.0)
) -> StokesSeries:
    """Perfectly stable series; useful as the zero-error reference."""
    v = np.asarray(vector, dtype=float)
    v = v / np.linalg.norm(v)
    return StokesSeries(t_s=np.arange(n) * interval_s, vectors=np.tile(v, (n, 1)))
