from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special
from scipy.optimize import curve_fit

from config.log_config import app_logger
from .t2_model import FitConvergenceError

N_MIN, N_MAX = 0.5, 4.0
MIN_POINTS = 8
# Relative drop between the first and last eighth of the data below which nothing decays
MIN_DECAY = 0.1


class EchoFitError(ValueError):
    pass


@dataclass
class EchoDecay:
    """Echo amplitude against the total delay 2tau (s)."""
    delays: np.ndarray
    amplitude: np.ndarray
    T2: Optional[float] = None
    n: Optional[float] = None


@dataclass
class EchoFit:
    T2: float
    n: float
    T2_err: float
    n_err: float
    scale: float
    baseline: float
    rms_residual: float
    noise: float = 0.0
    magnitude: bool = False

    def to_dict(self):
        return {
            "T2_s": self.T2,
            "n": self.n,
            "T2_err_s": self.T2_err,
            "n_err": self.n_err,
            "scale": self.scale,
            "baseline": self.baseline,
            "rms_residual": self.rms_residual,
            "noise": self.noise,
            "magnitude": self.magnitude,
        }


def stretched_exp(t, scale, T2, n, baseline):
    return scale * np.exp(-np.power(t / T2, n)) + baseline


def rice_mean(signal, noise):
    """Mean of |signal + complex Gaussian noise| with per-quadrature standard deviation noise."""
    signal = np.abs(np.asarray(signal, dtype=float))
    if noise <= 0:
        return signal
    z = signal ** 2 / (4 * noise ** 2)
    # Exponentially scaled Bessel functions keep large z finite
    return noise * np.sqrt(np.pi / 2) * ((1 + 2 * z) * special.i0e(z) + 2 * z * special.i1e(z))


def magnitude_stretched_exp(t, scale, T2, n, noise):
    return rice_mean(scale * np.exp(-np.power(t / T2, n)), noise)


def _check_shape(T2, n):
    if not np.isfinite(T2) or T2 <= 0:
        raise ValueError(f"T2 must be positive, got {T2}")
    if not N_MIN <= n <= N_MAX:
        raise ValueError(f"Stretch exponent must lie in [{N_MIN}, {N_MAX}], got {n}")


def simulate_echo_decay(
    T2: float,
    n: float,
    delays,
    noise: float = 0.0,
    magnitude: bool = False,
    seed: Optional[int] = None,
) -> EchoDecay:
    """exp(-(2tau/T2)^n) with optional Gaussian noise.

    With magnitude=True the noise is complex and the modulus is returned, which
    leaves the positive noise floor a magnitude-detected echo shows at long delays.
    """
    _check_shape(T2, n)
    delays = np.asarray(delays, dtype=float)
    if np.any(delays < 0):
        raise ValueError("Echo delays must be non-negative")
    amplitude = stretched_exp(delays, 1.0, T2, n, 0.0)
    if noise > 0:
        rng = np.random.default_rng(seed)
        if magnitude:
            amplitude = np.abs(amplitude + noise * (rng.standard_normal(len(delays)) + 1j * rng.standard_normal(len(delays))))
        else:
            amplitude = amplitude + noise * rng.standard_normal(len(delays))
    return EchoDecay(delays=delays, amplitude=amplitude, T2=T2, n=n)


def _initial_guess(t, y):
    scale0 = float(y[0]) if y[0] > 0 else float(y.max())
    ratio = y / scale0
    usable = (t > 0) & (ratio > 0.05) & (ratio < 0.95)
    if usable.sum() >= 2:
        # log(-log(y)) is linear in log(t) with slope n
        slope, intercept = np.polyfit(np.log(t[usable]), np.log(-np.log(ratio[usable])), 1)
        n0 = float(np.clip(slope, N_MIN, N_MAX))
        T2_0 = float(np.exp(-intercept / slope)) if slope > 0 else float(np.median(t))
    else:
        n0 = 1.0
        below = np.flatnonzero(ratio < np.exp(-1))
        T2_0 = float(t[below[0]]) if len(below) else float(t.max())
    return [scale0, max(T2_0, 1e-6 * t.max()), n0, 0.0]


def fit_echo_decay(delays, amplitude=None, magnitude: bool = False) -> EchoFit:
    """Fit a stretched exponential exp(-(t/T2)^n); T2 is the 1/e time of the decaying part.

    Phase-detected data take a constant baseline. With magnitude=True the model is
    the mean modulus of the decay plus complex noise, which sets the floor at long delays.
    """
    if isinstance(delays, EchoDecay):
        delays, amplitude = delays.delays, delays.amplitude
    t = np.asarray(delays, dtype=float)
    y = np.asarray(amplitude, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise EchoFitError("Delays and amplitudes must be 1-D arrays of equal length")
    if len(t) < MIN_POINTS:
        raise EchoFitError(f"At least {MIN_POINTS} points are needed, got {len(t)}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise EchoFitError("Echo data contains non-finite values")
    if np.any(y < 0):
        raise EchoFitError("Negative echo amplitudes; supply magnitude-detected data")

    order = np.argsort(t, kind="stable")
    t, y = t[order], y[order]
    edge = max(2, len(t) // 8)
    head, tail = y[:edge].mean(), y[-edge:].mean()
    if head <= 0 or (head - tail) / head < MIN_DECAY:
        raise EchoFitError("No decay detected in the echo data")

    # Fit in units of the longest delay so every parameter is of order one
    t_scale = float(t.max())
    tau = t / t_scale
    p0 = _initial_guess(tau, y)
    upper = float(y.max())
    p0[0] = min(max(p0[0], 1e-12), 2 * upper)
    if magnitude:
        model = magnitude_stretched_exp
        p0[3] = float(np.clip(tail / np.sqrt(np.pi / 2), 1e-3 * upper, 0.5 * upper))
    else:
        model = stretched_exp
    bounds = ([0.0, 1e-9, N_MIN, 0.0], [2 * upper, np.inf, N_MAX, upper])
    try:
        params, covariance = curve_fit(model, tau, y, p0=p0, bounds=bounds, method="trf", maxfev=20000)
    except (RuntimeError, ValueError) as e:
        app_logger.error(f"Echo decay fit failed: {e}")
        raise FitConvergenceError(f"Echo decay fit did not converge: {e}") from e

    errors = np.sqrt(np.clip(np.diag(covariance), 0, None)) if np.all(np.isfinite(covariance)) else np.full(4, np.nan)
    scale, T2, n, last = params
    residual = y - model(tau, *params)
    if magnitude:
        noise, baseline = float(last), float(rice_mean(0.0, last))
    else:
        noise, baseline = 0.0, float(last)
    fit = EchoFit(
        T2=float(T2 * t_scale),
        n=float(n),
        T2_err=float(errors[1] * t_scale),
        n_err=float(errors[2]),
        scale=float(scale),
        baseline=baseline,
        rms_residual=float(np.sqrt(np.mean(residual ** 2))),
        noise=noise,
        magnitude=magnitude,
    )
    app_logger.info(f"Echo decay: T2={fit.T2:.6g} s, n={fit.n:.4g}")
    return fit
