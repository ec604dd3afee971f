"""Estimators run after (or during) a simulation.

Three fits chained together reconstruct the blow-up picture from data:
exponential decay rates of the high-k3 energy marginal, their linear
trend in time (whose zero crossing estimates the critical time), and the
power-law exponent of a diverging total against that estimate.  All are
ordinary least squares; synthetic data from the fitted model family must
be recovered to machine precision, which the tests enforce.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .diagnostics import MarginalProfile
from .errors import EstimationError

__all__ = [
    "DecayFit",
    "fit_decay_rate",
    "CriticalTimeEstimate",
    "estimate_critical_time",
    "PowerLawFit",
    "fit_power_law",
    "local_maxima",
]

_MIN_MAXIMA = 5


def local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of strict three-point local maxima.

    A plateau flanked by strictly smaller values counts once, at its
    leftmost point; array endpoints never qualify.  Deterministic by
    construction (no tolerance, no tie randomness).
    """
    v = np.asarray(values)
    if v.ndim != 1:
        raise ValueError("profile values must be 1-D")
    out = []
    i = 1
    n = len(v)
    while i < n - 1:
        if v[i] > v[i - 1]:
            j = i
            while j + 1 < n and v[j + 1] == v[i]:
                j += 1
            if j + 1 < n and v[j + 1] < v[i]:
                out.append(i)
            i = j + 1
        else:
            i += 1
    return np.asarray(out, dtype=int)


@dataclass(frozen=True)
class DecayFit:
    """Log-linear fit through the local maxima of a spectral marginal."""

    t: float
    slope: float
    intercept: float
    r_squared: float
    stderr: float
    n_points: int


def fit_decay_rate(profile: MarginalProfile, k3_lo: float) -> DecayFit:
    """Exponential decay rate of a marginal beyond ``k3_lo``.

    Takes the strict local maxima of the profile restricted to
    abscissa >= k3_lo and regresses their logarithm on the abscissa.
    The maxima ride on top of the lobe oscillation, so the fitted slope
    tracks the envelope rather than the oscillation itself.

    Far enough out the lobes widen and merge, leaving a smooth monotone
    tail with no interior maxima at all; there the curve is its own
    envelope, so the regression falls back to every positive point in
    the window.
    """
    if profile.space != "spectral":
        raise EstimationError("decay fit expects a spectral marginal")
    keep = profile.abscissa >= k3_lo
    if not np.any(keep):
        raise EstimationError(f"no profile points at or beyond k3 = {k3_lo}")
    x = profile.abscissa[keep]
    y = profile.values[keep]
    peaks = local_maxima(y)
    if len(peaks) >= _MIN_MAXIMA:
        px, py = x[peaks], y[peaks]
        if np.any(py <= 0.0):
            raise EstimationError("non-positive local maxima; cannot take logs")
    else:
        pos = y > 0.0
        if int(np.count_nonzero(pos)) < _MIN_MAXIMA:
            raise EstimationError(
                f"only {int(np.count_nonzero(pos))} positive points beyond "
                f"k3 = {k3_lo}; need {_MIN_MAXIMA}"
            )
        px, py = x[pos], y[pos]
    res = stats.linregress(px, np.log(py))
    return DecayFit(
        t=profile.t,
        slope=float(res.slope),
        intercept=float(res.intercept),
        r_squared=float(res.rvalue) ** 2,
        stderr=float(res.stderr),
        n_points=int(len(px)),
    )


@dataclass(frozen=True)
class CriticalTimeEstimate:
    """Zero crossing of the decay-slope trend.

    ``overestimate`` is always True: the finite grid loses enstrophy to
    truncation near blow-up, which flattens late slopes and pushes the
    intercept past the true critical time.
    """

    tau_star: float
    stderr: float
    t_min: float
    t_max: float
    n_fits: int
    overestimate: bool = True


def estimate_critical_time(fits: Sequence[DecayFit]) -> CriticalTimeEstimate:
    """Extrapolate decay slopes linearly in t to their vanishing point."""
    if len(fits) < 3:
        raise EstimationError("critical-time fit needs at least 3 decay fits")
    t = np.asarray([f.t for f in fits], dtype=float)
    m = np.asarray([f.slope for f in fits], dtype=float)
    if len(np.unique(t)) != len(t):
        raise EstimationError("decay fits must be at distinct times")
    if np.any(m >= 0.0):
        raise EstimationError("decay slopes must all be negative")
    res = stats.linregress(t, m)
    beta, alpha = float(res.slope), float(res.intercept)
    if beta <= 0.0:
        raise EstimationError("slopes are not trending to zero; no intercept ahead")
    tau_star = -alpha / beta
    if tau_star <= float(np.max(t)):
        raise EstimationError(
            f"slope trend crosses zero at t = {tau_star:.3e}, inside the data window"
        )
    # delta method for tau = -alpha/beta; cov(alpha, beta) = -mean(t) se_beta^2
    se_b = float(res.stderr)
    se_a = float(res.intercept_stderr)
    cov = -float(np.mean(t)) * se_b**2
    var = (
        se_a**2 / beta**2
        + (alpha * se_b / beta**2) ** 2
        + 2.0 * (-1.0 / beta) * (alpha / beta**2) * cov
    )
    return CriticalTimeEstimate(
        tau_star=float(tau_star),
        stderr=float(np.sqrt(max(var, 0.0))),
        t_min=float(np.min(t)),
        t_max=float(np.max(t)),
        n_fits=len(fits),
    )


@dataclass(frozen=True)
class PowerLawFit:
    """Slope of log S against log 1/(tau_star - t)."""

    alpha: float
    stderr: float
    r_squared: float
    t_min: float
    t_max: float
    n_points: int


def fit_power_law(
    times: Sequence[float],
    values: Sequence[float],
    tau_star: float,
    window: tuple[float, float] | None = None,
) -> PowerLawFit:
    """Power-law exponent of a diverging total near the critical time."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise EstimationError("times and values must be matching 1-D sequences")
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, v = t[keep], v[keep]
    if len(t) < 3:
        raise EstimationError("power-law fit needs at least 3 points in the window")
    if np.any(t >= tau_star):
        raise EstimationError("all fit times must lie strictly before tau_star")
    if np.any(v <= 0.0):
        raise EstimationError("power-law fit needs positive values")
    x = -np.log(tau_star - t)
    if np.ptp(x) == 0.0:
        raise EstimationError("degenerate regression: no spread in log(tau_star - t)")
    res = stats.linregress(x, np.log(v))
    return PowerLawFit(
        alpha=float(res.slope),
        stderr=float(res.stderr),
        r_squared=float(res.rvalue) ** 2,
        t_min=float(np.min(t)),
        t_max=float(np.max(t)),
        n_points=int(len(t)),
    )
