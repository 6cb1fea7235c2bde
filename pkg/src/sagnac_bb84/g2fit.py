"""Second-order autocorrelation model and fit.

The correlation histogram is modeled as a comb of pulsed peaks, each the
convolution of a Gaussian instrument response with a two-sided exponential
decay, multiplied by a slow bunching envelope.  The center peak carries an
independent amplitude; its ratio to the side-peak amplitude is the
autocorrelation at zero delay, since both shapes integrate identically over
symmetric limits.

The convolution is evaluated in closed form through exponentially modified
Gaussian expressions, using the scaled complementary error function where
the direct form would overflow.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import erfc, erfcx

from .errors import ConfigError, FitFailureError, ParameterError
from .source import DEFAULT_REP_RATE_HZ

G2_CSV_HEADER = ["t_ns", "counts"]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class G2FitParams:
    """Parameters of the correlation model (amplitudes are peak areas in
    counts*ns; the repetition rate is fixed, not fitted)."""

    amp_side: float
    amp_center: float
    sigma_t_ps: float
    t0_ps: float
    decay_time_ps: float
    bunch_amp: float
    bunch_time_ns: float
    rep_rate_hz: float = DEFAULT_REP_RATE_HZ

    def __post_init__(self):
        if not (self.amp_side > 0.0):
            raise ParameterError("amp_side must be > 0")
        if not (self.amp_center >= 0.0):
            raise ParameterError("amp_center must be >= 0")
        if not (self.sigma_t_ps > 0.0):
            raise ParameterError("sigma_t_ps must be > 0")
        if not (self.decay_time_ps > 0.0):
            raise ParameterError("decay_time_ps must be > 0")
        if not (self.bunch_amp >= 0.0):
            raise ParameterError("bunch_amp must be >= 0")
        if not (self.bunch_time_ns > 0.0):
            raise ParameterError("bunch_time_ns must be > 0")

    @property
    def period_ns(self) -> float:
        return 1e9 / self.rep_rate_hz


def _emg_density(x: np.ndarray, sigma: float, tau: float) -> np.ndarray:
    """Density of Normal(0, sigma) + Exp(tau); overflow-safe for all x."""
    x = np.asarray(x, dtype=float)
    z = (sigma / tau - x / sigma) / _SQRT2
    out = np.empty_like(x)
    safe = z >= 0.0
    out[safe] = np.exp(-x[safe] ** 2 / (2.0 * sigma**2)) * erfcx(z[safe]) / (2.0 * tau)
    tail = ~safe
    out[tail] = (
        np.exp(sigma**2 / (2.0 * tau**2) - x[tail] / tau) * erfc(z[tail]) / (2.0 * tau)
    )
    return out


def peak_profile(x_ns: np.ndarray, sigma_ns: float, decay_ns: float) -> np.ndarray:
    """Unit-area pulse shape: Gaussian IRF convolved with exp(-|x|/T_D)/(2 T_D)."""
    x = np.asarray(x_ns, dtype=float)
    return 0.5 * (_emg_density(x, sigma_ns, decay_ns) + _emg_density(-x, sigma_ns, decay_ns))


def g2_model(t_ns, params: G2FitParams) -> np.ndarray:
    """Evaluate the full correlation model on delay values in ns."""
    t = np.atleast_1d(np.asarray(t_ns, dtype=float))
    period = params.period_ns
    sigma_ns = params.sigma_t_ps / 1e3
    decay_ns = params.decay_time_ps / 1e3
    x = t - params.t0_ps / 1e3

    i_max = int(math.ceil(np.abs(x).max() / period)) + 1
    total = params.amp_center * peak_profile(x, sigma_ns, decay_ns)
    for i in range(1, i_max + 1):
        total = total + params.amp_side * (
            peak_profile(x + i * period, sigma_ns, decay_ns)
            + peak_profile(x - i * period, sigma_ns, decay_ns)
        )
    bunching = 1.0 + params.bunch_amp * np.exp(-np.abs(x) / params.bunch_time_ns)
    out = total * bunching
    return out if np.ndim(t_ns) else float(out[0])


def g2_zero_from_integrals(params: G2FitParams, limit_ns: float = 100.0) -> float:
    """Ratio of center/side peak integrals over symmetric limits, both
    centered at zero; equals amp_center/amp_side because the two terms
    share one pulse shape."""
    x = np.linspace(-limit_ns, limit_ns, 200001)
    shape = peak_profile(x, params.sigma_t_ps / 1e3, params.decay_time_ps / 1e3)
    center = np.trapz(params.amp_center * shape, x)
    side = np.trapz(params.amp_side * shape, x)
    return center / side


@dataclass
class G2FitResult:
    params: G2FitParams
    stderr: dict
    g2_zero: float
    g2_zero_stderr: float
    covariance: np.ndarray
    reduced_chi2: float
    n_points: int

    def to_dict(self) -> dict:
        return {
            "params": {
                "amp_side": self.params.amp_side,
                "amp_center": self.params.amp_center,
                "sigma_t_ps": self.params.sigma_t_ps,
                "t0_ps": self.params.t0_ps,
                "decay_time_ps": self.params.decay_time_ps,
                "bunch_amp": self.params.bunch_amp,
                "bunch_time_ns": self.params.bunch_time_ns,
                "rep_rate_hz": self.params.rep_rate_hz,
            },
            "stderr": dict(self.stderr),
            "g2_zero": self.g2_zero,
            "g2_zero_stderr": self.g2_zero_stderr,
            "reduced_chi2": self.reduced_chi2,
            "n_points": self.n_points,
        }


_FIT_FIELDS = (
    "amp_side",
    "amp_center",
    "sigma_t_ps",
    "t0_ps",
    "decay_time_ps",
    "bunch_amp",
    "bunch_time_ns",
)


def _initial_guess(t: np.ndarray, counts: np.ndarray, period: float) -> dict:
    """Deterministic starting point from peak positions, widths and the
    envelope of side-peak heights.  No random restarts."""
    bin_width = float(np.median(np.diff(t)))
    t_peak = float(t[np.argmax(counts)])
    t0 = t_peak - period * round(t_peak / period)

    # per-peak heights on a window of +-P/4 around each expected center
    heights = {}
    i_lo = int(math.ceil((t.min() - t0 + period / 4.0) / period))
    i_hi = int(math.floor((t.max() - t0 - period / 4.0) / period))
    for i in range(i_lo, i_hi + 1):
        c = t0 + i * period
        sel = np.abs(t - c) <= period / 4.0
        if sel.any():
            heights[i] = float(counts[sel].max())
    side = {i: h for i, h in heights.items() if i != 0}
    far = sorted(side, key=lambda i: abs(i))[len(side) // 2 :]
    h_far = float(np.median([side[i] for i in far])) if far else float(np.median(counts))
    h_far = max(h_far, 1.0)

    # decay time from the mean |t - c| spread of the tallest side peak
    i_tall = max(side, key=side.get) if side else 1
    c = t0 + i_tall * period
    sel = np.abs(t - c) <= period / 2.0
    w = counts[sel].astype(float)
    decay = float(np.sum(w * np.abs(t[sel] - c)) / np.sum(w)) if w.sum() > 0 else period / 8.0
    decay = min(max(decay, bin_width), period / 2.0)

    sigma = max(bin_width, period / 100.0)
    amp_side = h_far * 2.0 * decay
    amp_center = max(heights.get(0, 0.0), 0.0) * 2.0 * decay

    # bunching envelope from the excess of near side peaks over the far level
    excess = [
        (abs(i) * period, side[i] / h_far - 1.0) for i in side if side[i] / h_far > 1.001
    ]
    if len(excess) >= 2:
        xs = np.array([e[0] for e in excess])
        ys = np.log(np.array([e[1] for e in excess]))
        slope, intercept = np.polyfit(xs, ys, 1)
        bunch_time = -1.0 / slope if slope < 0 else 5.0 * period
        bunch_amp = math.exp(intercept)
    else:
        bunch_time = 5.0 * period
        bunch_amp = 0.01
    bunch_time = min(max(bunch_time, period / 2.0), 1e4)
    bunch_amp = min(max(bunch_amp, 1e-3), 5.0)

    return {
        "amp_side": amp_side,
        "amp_center": amp_center,
        "sigma_t_ps": sigma * 1e3,
        "t0_ps": t0 * 1e3,
        "decay_time_ps": decay * 1e3,
        "bunch_amp": bunch_amp,
        "bunch_time_ns": bunch_time,
    }


def g2_fit(
    t_ns: np.ndarray,
    counts: np.ndarray,
    rep_rate_hz: float = DEFAULT_REP_RATE_HZ,
) -> G2FitResult:
    """Weighted least-squares fit of the correlation model to a histogram.

    Parameters
    ----------
    t_ns : array
        Bin centers in ns; must span at least +-100 ns and contain at
        least 10 side-peak periods.
    counts : array
        Counts per bin; Poisson weights with a floor of one count.
    rep_rate_hz : float
        Fixed system repetition rate (not fitted).

    Returns
    -------
    G2FitResult with fitted parameters, their standard errors from the fit
    covariance, and g2(0) = amp_center/amp_side.
    """
    t = np.asarray(t_ns, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if t.ndim != 1 or t.shape != counts.shape or t.size < 10:
        raise ParameterError("t_ns and counts must be 1-d arrays of equal length")
    if t.min() > -100.0 or t.max() < 100.0:
        raise ParameterError("correlation histogram must span at least +-100 ns")
    period = 1e9 / rep_rate_hz
    if (t.max() - t.min()) / period < 10.0:
        raise ParameterError("correlation histogram must contain >= 10 side peaks")

    guess = _initial_guess(t, counts, period)
    half_period_ps = period * 1e3 / 2.0
    p0 = [guess[f] for f in _FIT_FIELDS]
    lower = [1e-12, 0.0, 1.0, guess["t0_ps"] - half_period_ps, 1.0, 0.0, 0.5]
    upper = [np.inf, np.inf, period * 1e3, guess["t0_ps"] + half_period_ps, period * 1e3, 10.0, 1e5]
    p0 = [min(max(p, lo), hi) for p, lo, hi in zip(p0, lower, upper)]

    sigma = np.sqrt(np.clip(counts, 1.0, None))

    def model(tt, amp_side, amp_center, sigma_t_ps, t0_ps, decay_time_ps, bunch_amp, bunch_time_ns):
        p = G2FitParams(
            amp_side=amp_side,
            amp_center=amp_center,
            sigma_t_ps=sigma_t_ps,
            t0_ps=t0_ps,
            decay_time_ps=decay_time_ps,
            bunch_amp=bunch_amp,
            bunch_time_ns=bunch_time_ns,
            rep_rate_hz=rep_rate_hz,
        )
        return g2_model(tt, p)

    try:
        popt, pcov = curve_fit(
            model,
            t,
            counts,
            p0=p0,
            sigma=sigma,
            absolute_sigma=True,
            bounds=(lower, upper),
            method="trf",
            x_scale="jac",
            max_nfev=5000,
        )
    except RuntimeError as exc:
        resid = counts - model(t, *p0)
        raise FitFailureError(
            f"correlation fit did not converge: {exc}",
            diagnostics={
                "residual_rms": float(np.sqrt(np.mean(resid**2))),
                "initial_guess": dict(zip(_FIT_FIELDS, p0)),
            },
        ) from exc

    params = G2FitParams(*popt, rep_rate_hz=rep_rate_hz)
    stderr = {f: float(math.sqrt(max(pcov[i, i], 0.0))) for i, f in enumerate(_FIT_FIELDS)}
    a_s, a_c = popt[0], popt[1]
    var_ratio = (
        pcov[1, 1] / a_s**2
        + (a_c**2 / a_s**4) * pcov[0, 0]
        - 2.0 * (a_c / a_s**3) * pcov[0, 1]
    )
    resid = (counts - model(t, *popt)) / sigma
    dof = max(t.size - len(popt), 1)
    return G2FitResult(
        params=params,
        stderr=stderr,
        g2_zero=a_c / a_s,
        g2_zero_stderr=float(math.sqrt(max(var_ratio, 0.0))),
        covariance=pcov,
        reduced_chi2=float(np.sum(resid**2) / dof),
        n_points=int(t.size),
    )


def save_histogram_csv(path, t_ns: np.ndarray, counts: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(G2_CSV_HEADER)
        writer.writerows((f"{tt:.6f}", int(cc)) for tt, cc in zip(t_ns, counts))


def load_histogram_csv(path) -> tuple[np.ndarray, np.ndarray]:
    ts, cs = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != G2_CSV_HEADER:
            raise ConfigError(f"unexpected g2 histogram header {header!r} in {path}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ts.append(float(row[0]))
                cs.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ConfigError(
                    f"malformed histogram row at line {lineno} of {path}: {row!r}"
                ) from exc
    return np.asarray(ts), np.asarray(cs)
