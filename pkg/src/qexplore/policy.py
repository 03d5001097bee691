"""Optimal exploratory policy evaluators.

A policy maps ``(time, x, a_hat)`` to a :class:`~qexplore.qgaussian.QGaussian`
action law.  It never sees the latent drift itself; all path state lives in
the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bsdelta, continuous
from .bsdelta import BackwardSolution, LQCoefficients
from .continuous import ClosedFormSolution
from .errors import InvalidGrid
from .qgaussian import QGaussian, is_shannon

DISCRETE = "discrete"
CONTINUOUS = "continuous"


@dataclass(frozen=True, eq=False)
class ExploratoryPolicy:
    mode: str
    q: float
    lam: float
    kappa: float
    coeffs: LQCoefficients | None = None
    solution: BackwardSolution | None = None
    closed: ClosedFormSolution | None = None
    _std_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def discrete(cls, coeffs: LQCoefficients, q: float, lam: float, kappa: float,
                 solution: BackwardSolution | None = None) -> "ExploratoryPolicy":
        if solution is None:
            solution = bsdelta.solve(coeffs, kappa)
        return cls(DISCRETE, q, lam, kappa, coeffs=coeffs, solution=solution)

    @classmethod
    def continuous(cls, closed: ClosedFormSolution, q: float, lam: float, kappa: float) -> "ExploratoryPolicy":
        return cls(CONTINUOUS, q, lam, kappa, closed=closed)

    def qfactor(self, n_or_t) -> float:
        if self.mode == DISCRETE:
            return float(self.solution.qfactor[n_or_t])
        return self.closed.K

    def location(self, n_or_t, x, a_hat):
        """Centre of the action law; identical to the classical optimal control."""
        if self.mode == DISCRETE:
            return bsdelta.classical_control(n_or_t, x, a_hat, self.solution, self.coeffs, self.kappa)
        return continuous.classical_control_continuous(n_or_t, x, a_hat, self.closed, self.kappa)

    def standard_law(self, n_or_t) -> QGaussian:
        """Action law centred at zero; cached per time index."""
        key = n_or_t if self.mode == DISCRETE else float(n_or_t)
        law = self._std_cache.get(key)
        if law is None:
            law = QGaussian.from_penalty(self.q, 0.0, self.lam, self.qfactor(n_or_t))
            self._std_cache[key] = law
        return law

    def distribution(self, n_or_t, x: float, a_hat: float) -> QGaussian:
        return self.standard_law(n_or_t).shifted(float(self.location(n_or_t, x, a_hat)))


def exploratory_policy(pol: ExploratoryPolicy, n_or_t, x: float, a_hat: float) -> QGaussian:
    return pol.distribution(n_or_t, x, a_hat)


def closed_form_as_discrete(closed: ClosedFormSolution, N: int, kappa: float) -> BackwardSolution:
    """Discrete-grid coefficients taken from the continuous closed forms at ``t_n``.

    Substituting these into the discrete policy gives the closed-form
    approximation of the discrete optimum.
    """
    if N < 1:
        raise InvalidGrid("N must be positive")
    t = np.linspace(0.0, closed.T, N + 1)
    h2 = np.asarray(continuous.h2_closed(t, closed))
    phi = np.asarray(continuous.h1_coefficient(t, closed, kappa))
    dt = closed.T / N
    qf = closed.K - h2[1:] * closed.gamma ** 2 * dt
    if np.any(qf <= 0):
        n = int(np.flatnonzero(qf <= 0)[-1])
        raise bsdelta.ConvexityViolation(f"approximate penalty not positive at n={n}", n=n)
    return BackwardSolution(h2, phi, qf)


def optimal_inner_value(q: float, lam: float, qfactor: float) -> float:
    """``lam S_q[pi*] - Q Var[pi*]``: per-unit-time gain of exploring optimally (quadrature)."""
    law = QGaussian.from_penalty(q, 0.0, lam, qfactor)
    return lam * law.entropy() - qfactor * law.variance()


def exploration_bonus(pol: ExploratoryPolicy) -> float:
    """Exact discrete gap between the exploratory (entropy-rewarded) and classical optimal values."""
    if pol.mode != DISCRETE:
        raise ValueError("exploration_bonus is defined on the discrete grid")
    dt = pol.coeffs.dt
    return float(sum(optimal_inner_value(pol.q, pol.lam, qf) * dt for qf in pol.solution.qfactor))


# ---------------------------------------------------------------------------
# brute-force pointwise optimality check


def _trapz(y, x):
    return float(np.trapezoid(y, x)) if hasattr(np, "trapezoid") else float(np.trapz(y, x))


def grid_entropy(f: np.ndarray, grid: np.ndarray, q: float) -> float:
    if is_shannon(q):
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(f > 0, -f * np.log(np.where(f > 0, f, 1.0)), 0.0)
        return _trapz(integrand, grid)
    return (1.0 - _trapz(f ** q, grid)) / (q - 1.0)


def step_objective(f: np.ndarray, grid: np.ndarray, L: float, Q: float, lam: float, q: float) -> float:
    """``L E[v] - Q E[v^2] + lam S_q`` for a density tabulated on ``grid`` (renormalised there)."""
    f = np.clip(f, 0.0, None)
    f = f / _trapz(f, grid)
    m1 = _trapz(grid * f, grid)
    m2 = _trapz(grid * grid * f, grid)
    return L * m1 - Q * m2 + lam * grid_entropy(f, grid, q)


@dataclass
class OptimalityReport:
    objective: float
    best_candidate: float
    margin: float
    n_candidates: int
    worst_kind: str
    losses: dict


def verify_pointwise_optimality(pol: ExploratoryPolicy, n_or_t, x: float, a_hat: float,
                                candidates: int = 200, nodes: int = 2001, seed: int = 0,
                                width: float = 6.0) -> OptimalityReport:
    """Compare the returned law with perturbed laws on a quadrature grid.

    Perturbations cycle through location shifts, scale changes and asymmetric
    two-component mixtures.  ``margin > 0`` means the returned law won.
    """
    law = pol.distribution(n_or_t, x, a_hat)
    Q = pol.qfactor(n_or_t)
    mu = law.mu
    L = 2.0 * Q * mu
    unit = math.sqrt(law.variance())
    grid = np.linspace(mu - width * unit, mu + width * unit, nodes)
    base = step_objective(law.pdf(grid), grid, L, Q, pol.lam, law.q)

    rng = np.random.default_rng(seed)
    best, worst_kind = -math.inf, ""
    losses: dict[str, float] = {}
    kinds = ("shift", "scale", "mixture")
    for i in range(candidates):
        kind = kinds[i % 3]
        sign = 1.0 if rng.random() < 0.5 else -1.0
        if kind == "shift":
            f = law.pdf(grid - sign * rng.uniform(0.1, 1.0) * unit)
        elif kind == "scale":
            c = rng.uniform(1.15, 2.0) if sign > 0 else rng.uniform(0.5, 0.85)
            f = law.pdf(mu + (grid - mu) / c) / c
        else:
            eps = rng.uniform(0.1, 0.5)
            f = (1.0 - eps) * law.pdf(grid) + eps * law.pdf(grid - sign * rng.uniform(0.25, 1.5) * unit)
        val = step_objective(f, grid, L, Q, pol.lam, law.q)
        losses[kind] = min(losses.get(kind, math.inf), base - val)
        if val > best:
            best, worst_kind = val, kind
    return OptimalityReport(base, best, base - best, candidates, worst_kind, losses)
