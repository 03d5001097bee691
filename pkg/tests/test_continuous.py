import math

import numpy as np
import pytest
from scipy import integrate

from qexplore.continuous import (ClosedFormSolution, alpha_q, classical_control_continuous, h1_closed,
                                 h1_coefficient, h2_closed, integrated_alpha)
from qexplore.errors import DegenerateParameters, InvalidGrid
from qexplore.params import DEFAULT_PARAMS
from qexplore.qgaussian import QGaussian

CLOSED = DEFAULT_PARAMS.closed_form()
KAPPA = DEFAULT_PARAMS.kappa


def test_terminal_values():
    assert abs(h2_closed(CLOSED.T, CLOSED) + CLOSED.B) < 1e-12
    assert abs(h1_closed(CLOSED.T, 3.0, CLOSED, KAPPA)) < 1e-12


def test_h2_solves_riccati_ode():
    t = np.linspace(0.0, 0.999, 100)
    h = 1e-6
    d = (h2_closed(t + h, CLOSED) - h2_closed(np.clip(t - h, 0, None), CLOSED)) / (t + h - np.clip(t - h, 0, None))
    h2 = h2_closed(t, CLOSED)
    resid = d + (2 * CLOSED.gamma * h2 + CLOSED.D) ** 2 / (4 * CLOSED.K) - CLOSED.C
    assert np.max(np.abs(resid)) < 1e-6


def test_h1_coefficient_solves_linear_ode():
    t = np.linspace(0.001, 0.999, 100)
    h = 1e-6
    d = (h1_coefficient(t + h, CLOSED, KAPPA) - h1_coefficient(t - h, CLOSED, KAPPA)) / (2 * h)
    phi = h1_coefficient(t, CLOSED, KAPPA)
    h2 = h2_closed(t, CLOSED)
    g, D, K = CLOSED.gamma, CLOSED.D, CLOSED.K
    resid = d - (KAPPA * phi - 2 * h2 - g * phi * (2 * g * h2 + D) / (2 * K))
    assert np.max(np.abs(resid)) < 1e-6


def test_matches_numerical_ode_integration():
    g, D, K, C = CLOSED.gamma, CLOSED.D, CLOSED.K, CLOSED.C

    def rhs(t, y):
        h2, phi = y
        return [C - (2 * g * h2 + D) ** 2 / (4 * K), KAPPA * phi - 2 * h2 - g * phi * (2 * g * h2 + D) / (2 * K)]

    ts = np.linspace(1.0, 0.0, 21)
    sol = integrate.solve_ivp(rhs, (1.0, 0.0), [-CLOSED.B, 0.0], t_eval=ts, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(sol.y[0], h2_closed(ts, CLOSED), atol=1e-8)
    np.testing.assert_allclose(sol.y[1], h1_coefficient(ts, CLOSED, KAPPA), atol=1e-8)


def test_long_horizon_does_not_overflow():
    long = ClosedFormSolution(1.0, 1.0, 1.0, 0.1, 1.0, 500.0)
    v = h2_closed(np.array([0.0, 250.0, 500.0]), long)
    assert np.all(np.isfinite(v))
    assert np.all(np.isfinite(h1_coefficient(np.array([0.0, 499.0]), long, 1.0)))


def test_classical_feedback_form():
    t, x, a = 0.3, 0.8, -0.4
    expected = (CLOSED.gamma * h1_coefficient(t, CLOSED, KAPPA) * a
                + (2 * CLOSED.gamma * h2_closed(t, CLOSED) + CLOSED.D) * x) / (2 * CLOSED.K)
    assert classical_control_continuous(t, x, a, CLOSED, KAPPA) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("q", [0.5, 0.9, 1.0, 1.5, 2.0, 4.0])
@pytest.mark.parametrize("lam,K", [(0.5, 0.1), (2.0, 1.0)])
def test_alpha_is_minus_optimal_exploration_gain(q, lam, K):
    law = QGaussian.from_penalty(q, 0.0, lam, K)
    gain = lam * law.entropy() - K * law.variance()
    assert alpha_q(0.0, q, lam, K) == pytest.approx(-gain, rel=1e-9, abs=1e-12)


def test_alpha_continuous_across_shannon():
    lam, K = 0.5, 0.1
    assert alpha_q(0.0, 1.0 + 1e-4, lam, K) == pytest.approx(alpha_q(0.0, 1.0, lam, K), abs=1e-3)
    assert alpha_q(0.0, 1.0 - 1e-4, lam, K) == pytest.approx(alpha_q(0.0, 1.0, lam, K), abs=1e-3)


def test_integrated_alpha():
    assert integrated_alpha(0.2, 1.0, 2.0, 0.5, 0.1) == pytest.approx(0.8 * alpha_q(0, 2.0, 0.5, 0.1))
    val = integrated_alpha(0.0, 1.0, 2.0, 0.5, lambda u: 0.1 + u)
    ref = integrate.quad(lambda u: alpha_q(u, 2.0, 0.5, 0.1 + u), 0, 1)[0]
    assert val == pytest.approx(ref, rel=1e-10)


def test_validation():
    with pytest.raises(DegenerateParameters):
        ClosedFormSolution(1, 1, 1, 0.0, 1, 1)
    with pytest.raises(DegenerateParameters):
        ClosedFormSolution(1, 1, 1, 0.1, 0.0, 1)
    with pytest.raises(InvalidGrid):
        h2_closed(1.5, CLOSED)
    omega = CLOSED.omega
    with pytest.raises(DegenerateParameters):
        h1_coefficient(0.0, CLOSED, omega)
    with pytest.raises(InvalidGrid):
        integrated_alpha(1.0, 0.0, 2.0, 0.5, 0.1)
    assert math.isfinite(omega)
