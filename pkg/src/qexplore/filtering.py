"""Filtering of the latent OU drift from observations of ``Y``.

The observation model is ``dY_n = A_n dt + sigma dW_n`` with
``A_{n+1} = exp(-kappa dt) A_n + eta dW2_n``.  The error variance sequence is
observation independent, so it is computed once per grid and cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidGrid, NumericalError


@dataclass(frozen=True)
class OUParams:
    kappa: float
    eta: float
    sigma: float
    A0_mean: float = 0.0
    Sigma0: float = 1.0

    def __post_init__(self):
        vals = (self.kappa, self.eta, self.sigma, self.A0_mean, self.Sigma0)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("OU parameters must be finite")
        if self.sigma <= 0:
            raise ValueError(f"observation volatility must be positive, got {self.sigma}")
        if self.kappa < 0 or self.eta < 0 or self.Sigma0 < 0:
            raise ValueError("kappa, eta and Sigma0 must be nonnegative")


@dataclass(frozen=True)
class FilterState:
    n: int
    A_hat: float
    Sigma: float


def initial_state(params: OUParams) -> FilterState:
    return FilterState(0, params.A0_mean, params.Sigma0)


def _gain(Sigma, sigma, dt, decay):
    return decay * Sigma / (sigma * sigma + Sigma * dt)


def _next_sigma(Sigma, params: OUParams, dt: float) -> float:
    decay2 = math.exp(-2.0 * params.kappa * dt)
    s2 = params.sigma * params.sigma
    # decay2 * Sigma * s2 / (s2 + Sigma dt) is the same update without cancellation
    return decay2 * Sigma * s2 / (s2 + Sigma * dt) + params.eta ** 2 * dt


def filter_step(state: FilterState, dY: float, params: OUParams, dt: float) -> FilterState:
    """One update of the posterior mean and error variance after observing ``dY``."""
    if not dt > 0:
        raise InvalidGrid(f"time step must be positive, got {dt!r}")
    decay = math.exp(-params.kappa * dt)
    gain = _gain(state.Sigma, params.sigma, dt, decay)
    a_next = decay * state.A_hat + gain * (dY - state.A_hat * dt)
    return FilterState(state.n + 1, a_next, _next_sigma(state.Sigma, params, dt))


@lru_cache(maxsize=64)
def _sigma_sequence(params: OUParams, dt: float, N: int) -> tuple:
    out = [params.Sigma0]
    for _ in range(N):
        out.append(_next_sigma(out[-1], params, dt))
    return tuple(out)


def sigma_sequence(params: OUParams, dt: float, N: int) -> np.ndarray:
    """Error variances ``Sigma_0 .. Sigma_N`` on a grid of ``N`` steps of size ``dt``."""
    if not dt > 0:
        raise InvalidGrid(f"time step must be positive, got {dt!r}")
    if N < 0:
        raise InvalidGrid(f"number of steps must be nonnegative, got {N}")
    return np.array(_sigma_sequence(params, float(dt), int(N)))


def gain_sequence(params: OUParams, dt: float, N: int) -> np.ndarray:
    """Kalman gains ``g_n`` so that ``A_hat_{n+1} = e^{-kappa dt} A_hat_n + g_n (dY_n - A_hat_n dt)``."""
    sig = sigma_sequence(params, dt, N)[:-1]
    return _gain(sig, params.sigma, dt, math.exp(-params.kappa * dt))


def run_filter(dY: np.ndarray, params: OUParams, dt: float) -> np.ndarray:
    """Filter a batch of observation increments.

    Parameters
    ----------
    dY : array, shape (..., N)
        Increments ``Y_{n+1} - Y_n`` along the last axis.

    Returns
    -------
    array, shape (..., N + 1)
        Posterior means ``A_hat_0 .. A_hat_N``.
    """
    dY = np.asarray(dY, dtype=float)
    N = dY.shape[-1]
    gains = gain_sequence(params, dt, N)
    decay = math.exp(-params.kappa * dt)
    out = np.empty(dY.shape[:-1] + (N + 1,))
    out[..., 0] = params.A0_mean
    for n in range(N):
        a = out[..., n]
        out[..., n + 1] = decay * a + gains[n] * (dY[..., n] - a * dt)
    return out


def sigma_continuous(t, params: OUParams):
    """Closed-form continuous-time error variance ``Sigma_t`` of the OU drift filter.

    Evaluated in a form divided through by ``exp(xi t)`` so large ``t`` does not
    overflow.  Requires ``eta > 0``.
    """
    kappa, eta, sigma, S0 = params.kappa, params.eta, params.sigma, params.Sigma0
    if eta <= 0:
        raise NumericalError("closed-form error variance needs eta > 0")
    root = math.sqrt(sigma * sigma * kappa * kappa + eta * eta)
    a_plus = (-sigma * kappa + root) / (sigma * eta * eta)
    a_minus = (-sigma * kappa - root) / (sigma * eta * eta)
    xi = root / sigma
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidGrid("time must be nonnegative")
    e = np.exp(-2.0 * xi * t)
    num = (1.0 + a_plus * S0) - (1.0 + a_minus * S0) * e
    den = -a_minus * (1.0 + a_plus * S0) + a_plus * (1.0 + a_minus * S0) * e
    if np.any(den <= 0):
        raise NumericalError("closed-form error variance denominator is not positive")
    out = num / den
    return out if out.ndim else float(out)


def sigma_steady_state(params: OUParams) -> float:
    """Limit of ``sigma_continuous`` as ``t -> inf``."""
    s, k, eta = params.sigma, params.kappa, params.eta
    return s * eta * eta / (s * k + math.sqrt(s * s * k * k + eta * eta))
