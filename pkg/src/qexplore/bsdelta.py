"""Backward recursions for the discrete-time value-function coefficients.

``h2`` is the deterministic quadratic coefficient; the linear coefficient is
``h1_n = phi_n * A_hat_n`` for the OU latent factor, with ``phi`` solved
backwards alongside ``h2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvexityViolation, InvalidGrid


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LQCoefficients:
    """Per-step model coefficients on ``n = 0 .. N-1``; ``B`` is the terminal penalty."""

    B: float
    C: np.ndarray
    D: np.ndarray
    K: np.ndarray
    gamma: np.ndarray
    dt: float

    def __post_init__(self):
        for name in ("C", "D", "K", "gamma"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.C.shape
        if len(n) != 1 or any(getattr(self, k).shape != n for k in ("D", "K", "gamma")):
            raise InvalidGrid("coefficient sequences must be 1-d and of equal length")
        if n[0] < 1:
            raise InvalidGrid("need at least one time step")
        if not self.dt > 0:
            raise InvalidGrid(f"time step must be positive, got {self.dt!r}")
        if np.any(self.K <= 0):
            raise ConvexityViolation("action penalty K must be positive", n=int(np.argmax(self.K <= 0)))
        if self.B < 0:
            raise ValueError("terminal penalty B must be nonnegative")

    @property
    def N(self) -> int:
        return self.C.shape[0]

    @property
    def T(self) -> float:
        return self.N * self.dt

    @classmethod
    def constant(cls, B, C, D, K, gamma, T, N) -> "LQCoefficients":
        if N < 1:
            raise InvalidGrid(f"N must be a positive integer, got {N}")
        ones = np.ones(int(N))
        return cls(float(B), C * ones, D * ones, K * ones, gamma * ones, T / N)

    def is_constant(self) -> bool:
        return all(np.all(getattr(self, k) == getattr(self, k)[0]) for k in ("C", "D", "K", "gamma"))


@dataclass(frozen=True, eq=False)
class BackwardSolution:
    """``h2`` and ``phi`` on ``n = 0 .. N``; ``qfactor`` on ``n = 0 .. N-1``."""

    h2: np.ndarray
    phi: np.ndarray
    qfactor: np.ndarray

    def __post_init__(self):
        for name in ("h2", "phi", "qfactor"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def N(self) -> int:
        return self.qfactor.shape[0]


def solve_h2(coeffs: LQCoefficients) -> np.ndarray:
    """Quadratic coefficient, backwards from ``h2_N = -B``.

    Raises ConvexityViolation naming the first (largest) index whose
    ``K_n - h2_{n+1} gamma_n^2 dt`` is not positive.
    """
    N, dt = coeffs.N, coeffs.dt
    C, D, K, g = (coeffs.C.tolist(), coeffs.D.tolist(), coeffs.K.tolist(), coeffs.gamma.tolist())
    h2 = [0.0] * (N + 1)
    h2[N] = -coeffs.B
    for n in range(N - 1, -1, -1):
        nxt = h2[n + 1]
        qf = K[n] - nxt * g[n] * g[n] * dt
        if not qf > 0:
            raise ConvexityViolation(f"K - h2 gamma^2 dt = {qf!r} <= 0 at n={n}", n=n)
        lin = 2.0 * nxt * g[n] + D[n]
        h2[n] = nxt - C[n] * dt + lin * lin / (4.0 * qf) * dt
    return np.array(h2)


def qfactors(coeffs: LQCoefficients, h2: np.ndarray) -> np.ndarray:
    qf = coeffs.K - h2[1:] * coeffs.gamma ** 2 * coeffs.dt
    bad = np.flatnonzero(~(qf > 0))
    if bad.size:
        n = int(bad[-1])
        raise ConvexityViolation(f"K - h2 gamma^2 dt <= 0 at n={n}", n=n)
    return qf


def solve_phi(coeffs: LQCoefficients, h2: np.ndarray, kappa: float) -> np.ndarray:
    """Linear-coefficient multiplier ``phi`` (``h1_n = phi_n A_hat_n``), ``phi_N = 0``."""
    N, dt = coeffs.N, coeffs.dt
    h2 = np.asarray(h2, dtype=float)
    if h2.shape != (N + 1,):
        raise InvalidGrid(f"h2 must have length N+1={N + 1}")
    qf = qfactors(coeffs, h2)
    b = coeffs.gamma * (2.0 * h2[1:] * coeffs.gamma + coeffs.D) / (2.0 * qf)
    a = 2.0 * h2[1:] * (1.0 + b * dt)
    growth = ((1.0 + b * dt) * math.exp(-kappa * dt)).tolist()
    a = a.tolist()
    phi = [0.0] * (N + 1)
    for n in range(N - 1, -1, -1):
        phi[n] = a[n] * dt + growth[n] * phi[n + 1]
    return np.array(phi)


def solve(coeffs: LQCoefficients, kappa: float) -> BackwardSolution:
    h2 = solve_h2(coeffs)
    return BackwardSolution(h2, solve_phi(coeffs, h2, kappa), qfactors(coeffs, h2))


def classical_control(n, x, a_hat, sol: BackwardSolution, coeffs: LQCoefficients, kappa: float):
    """Optimal non-randomised action at step ``n`` given state ``x`` and filter ``a_hat``.

    Works elementwise on arrays of ``x`` / ``a_hat``.  This is also the
    location of the optimal exploratory density.
    """
    if not 0 <= n < sol.N:
        raise InvalidGrid(f"step index {n} outside 0..{sol.N - 1}")
    dt = coeffs.dt
    g, d = coeffs.gamma[n], coeffs.D[n]
    h2n, qf = sol.h2[n + 1], sol.qfactor[n]
    expected_h1 = math.exp(-kappa * dt) * sol.phi[n + 1] * a_hat
    return (expected_h1 * g + 2.0 * h2n * a_hat * g * dt + (2.0 * h2n * g + d) * x) / (2.0 * qf)
