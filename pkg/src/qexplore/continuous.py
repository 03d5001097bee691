"""Closed-form continuous-time coefficients for constant model coefficients.

``h2_t`` solves ``dh2/dt = C - (2 gamma h2 + D)^2 / (4K)`` with ``h2_T = -B``
and ``h1_t = coef(t) * A_hat_t`` where ``coef`` solves
``dcoef/dt = kappa coef - 2 h2 - gamma coef (2 gamma h2 + D) / (2K)``,
``coef(T) = 0``.  Exponentials are scaled by ``exp(-|omega| (T-t))`` before
evaluation so long horizons do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateParameters, InvalidGrid, NumericalError
from .qgaussian import is_shannon, normalizer_psi


@dataclass(frozen=True)
class ClosedFormSolution:
    B: float
    C: float
    D: float
    K: float
    gamma: float
    T: float

    def __post_init__(self):
        if not self.K > 0:
            raise DegenerateParameters("closed form needs K > 0")
        if not self.C > 0:
            raise DegenerateParameters("closed form needs C > 0")
        if self.gamma == 0:
            raise DegenerateParameters("closed form needs gamma != 0")
        if not self.T > 0:
            raise InvalidGrid("horizon T must be positive")

    @property
    def omega(self) -> float:
        return self.gamma * math.sqrt(self.C / self.K)

    @property
    def psi_plus(self) -> float:
        return math.sqrt(2 * self.C) + math.sqrt(2 / self.K) * self.gamma * self.B - self.D / math.sqrt(2 * self.K)

    @property
    def psi_minus(self) -> float:
        return math.sqrt(2 * self.C) - math.sqrt(2 / self.K) * self.gamma * self.B + self.D / math.sqrt(2 * self.K)

    def _tau(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.T + 1e-12):
            raise InvalidGrid(f"time outside [0, {self.T}]")
        return np.clip(self.T - t, 0.0, None)

    def _scaled_parts(self, tau):
        """``exp(-w tau) * s`` and ``exp(w tau) * s`` with ``s = exp(-|w| tau)``, plus ``s``."""
        w = self.omega
        s = np.exp(-abs(w) * tau)
        lo = np.exp(-(w + abs(w)) * tau)
        hi = np.exp((w - abs(w)) * tau)
        den = self.psi_minus * lo + self.psi_plus * hi
        scale = abs(self.psi_minus) * lo + abs(self.psi_plus) * hi
        if np.any(np.abs(den) < 1e-14 * np.maximum(scale, 1.0)):
            raise NumericalError("closed-form denominator vanishes on [0, T]")
        return lo, hi, den, s


def h2_closed(t, sol: ClosedFormSolution):
    tau = sol._tau(t)
    lo, hi, den, _ = sol._scaled_parts(tau)
    root_ck = math.sqrt(sol.C * sol.K)
    out = root_ck / sol.gamma * (sol.psi_minus * lo - sol.psi_plus * hi) / den - sol.D / (2 * sol.gamma)
    return out if out.ndim else float(out)


def h1_coefficient(t, sol: ClosedFormSolution, kappa: float):
    """``h1_t / A_hat_t``; vanishes at ``t = T``."""
    w = sol.omega
    if abs(w - kappa) < 1e-12 or abs(w + kappa) < 1e-12:
        raise DegenerateParameters(f"omega={w} coincides with +/-kappa={kappa}")
    tau = sol._tau(t)
    lo, hi, den, s = sol._scaled_parts(tau)
    root_ck = math.sqrt(sol.C * sol.K)
    decay = np.exp(-kappa * tau) * s
    first = sol.psi_minus * (2 * root_ck - sol.D) * (decay - lo) / ((w - kappa) * den)
    second = sol.psi_plus * (2 * root_ck + sol.D) * (decay - hi) / ((w + kappa) * den)
    out = (first + second) / sol.gamma
    return out if out.ndim else float(out)


def h1_closed(t, a_hat, sol: ClosedFormSolution, kappa: float):
    return h1_coefficient(t, sol, kappa) * a_hat


def classical_control_continuous(t, x, a_hat, sol: ClosedFormSolution, kappa: float):
    """Feedback ``(gamma h1_t + (2 gamma h2_t + D) x) / (2K)``."""
    h1 = h1_closed(t, a_hat, sol, kappa)
    h2 = h2_closed(t, sol)
    return (sol.gamma * h1 + (2 * sol.gamma * h2 + sol.D) * x) / (2 * sol.K)


def alpha_q(t, q: float, lam: float, K_t) -> float:
    """Running exploration adjustment: the continuous value is ``H0 - int_t^T alpha_q``.

    ``-alpha_q`` equals the optimal per-unit-time value of
    ``lam * S_q[pi] - K E[(v - mu)^2]``.  ``t`` is accepted for signature
    symmetry with time-varying ``K``; pass ``K_t`` already evaluated.
    """
    del t
    if is_shannon(q):
        return -lam * math.log(math.sqrt(math.pi * lam / K_t))
    psi = normalizer_psi(q, lam, K_t)
    if q > 1:
        return -lam / (q - 1) + psi * (q + 1) / (3 * q - 1)
    return -lam / (q - 1) - psi * (q + 1) / (3 * q - 1)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def integrated_alpha(t: float, T: float, q: float, lam: float, K) -> float:
    """``int_t^T alpha_q(u) du`` by 64-point Gauss-Legendre; ``K`` is a constant or a callable of time."""
    if T < t:
        raise InvalidGrid("need t <= T")
    if not callable(K):
        return (T - t) * alpha_q(t, q, lam, float(K))
    half = 0.5 * (T - t)
    nodes = t + half * (_GL_NODES + 1.0)
    vals = np.array([alpha_q(u, q, lam, float(K(u))) for u in nodes])
    return float(half * np.dot(_GL_WEIGHTS, vals))
