import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from qexplore.errors import ConvexityViolation, InvalidDistribution
from qexplore.qgaussian import (QGaussian, normalizer_psi, tsallis_entropy_discrete,
                                tsallis_entropy_continuous, variance)

Q_GRID = [0.34, 0.4, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0, 3.0, 5.0]
LAM_GRID = [0.01, 0.5, 10.0]
QF_GRID = [0.01, 0.1, 10.0]


def brute_mass(law):
    lo, hi = law.support
    if math.isinf(lo):
        return integrate.quad(law.pdf, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12, limit=500)[0]
    return integrate.quad(law.pdf, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=500)[0]


def oracle_variance(q, lam, qf):
    """Closed-form second moments of the two shape families (test oracle only)."""
    if q == 1.0:
        return lam / (2 * qf)
    w2 = normalizer_psi(q, lam, qf) / qf
    if q > 1:
        return w2 / (2 / (q - 1) + 3)
    k = (1 + q) / (1 - q)
    return w2 / (k - 2)


@pytest.mark.parametrize("q", Q_GRID)
@pytest.mark.parametrize("lam", LAM_GRID)
@pytest.mark.parametrize("qf", QF_GRID)
def test_density_integrates_to_one(q, lam, qf):
    law = QGaussian.from_penalty(q, 0.3, lam, qf)
    assert abs(law.total_mass() - 1.0) < 1e-8


@pytest.mark.parametrize("q,lam,qf", [(0.5, 1.0, 0.1), (2.0, 0.5, 1.0), (1.0, 2.0, 0.1), (3.0, 0.1, 0.1)])
def test_mass_matches_independent_quadrature(q, lam, qf):
    assert brute_mass(QGaussian.from_penalty(q, -1.0, lam, qf)) == pytest.approx(1.0, abs=1e-8)


def test_psi_at_q2_has_closed_form():
    # at q = 2 the density is a parabola, so unit mass gives psi = (1.5 lam sqrt(Q))^(2/3)
    for lam, qf in [(1.0, 0.1), (0.5, 2.0), (3.0, 0.01)]:
        expected = (1.5 * lam * math.sqrt(qf)) ** (2.0 / 3.0)
        assert normalizer_psi(2.0, lam, qf) == pytest.approx(expected, rel=1e-13)
    law = QGaussian.from_penalty(2.0, 0.0, 1.0, 0.1)
    assert law.psi == pytest.approx(0.608220, abs=1e-6)
    assert law.support[1] == pytest.approx(2.4662, abs=1e-4)


@pytest.mark.parametrize("q", [0.4, 0.5, 0.8, 1.0, 1.2, 2.0, 4.0])
@pytest.mark.parametrize("lam,qf", [(0.5, 0.1), (2.0, 3.0)])
def test_variance_matches_shape_oracle(q, lam, qf):
    law = QGaussian.from_penalty(q, 5.0, lam, qf)
    np.testing.assert_allclose(variance(law), oracle_variance(q, lam, qf), rtol=1e-9)


def test_gaussian_branch():
    law = QGaussian.from_penalty(1.0, 0.7, 0.5, 0.1)
    assert law.variance() == pytest.approx(2.5, rel=1e-10)
    x = np.linspace(-3, 4, 9)
    np.testing.assert_allclose(law.pdf(x), stats.norm(0.7, math.sqrt(2.5)).pdf(x), rtol=1e-12)
    assert law.entropy() == pytest.approx(0.5 * math.log(2 * math.pi * math.e * 2.5), rel=1e-10)


@pytest.mark.parametrize("q", [1 - 1e-3, 1 + 1e-3])
def test_near_shannon_is_close_to_gaussian(q):
    lam, qf = 0.5, 0.1
    law = QGaussian.from_penalty(q, 0.0, lam, qf)
    gauss = QGaussian.from_penalty(1.0, 0.0, lam, qf)
    x = np.linspace(-6, 6, 201)
    assert np.max(np.abs(law.pdf(x) - gauss.pdf(x))) < 1e-2
    assert law.variance() == pytest.approx(gauss.variance(), rel=1e-2)


@pytest.mark.parametrize("q", [0.5, 1.0, 1.5, 3.0])
def test_cdf_matches_integrated_density(q):
    law = QGaussian.from_penalty(q, 0.2, 1.0, 0.5)
    for x in [-2.0, -0.1, 0.2, 1.3]:
        lo = law.support[0]
        start = lo if math.isfinite(lo) else -np.inf
        ref = integrate.quad(law.pdf, start, x, epsabs=1e-13, epsrel=1e-12, limit=500)[0] if x > start else 0.0
        assert law.cdf(x) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("q", [0.4, 0.5, 1.0, 2.0, 6.0])
def test_ppf_inverts_cdf(q):
    law = QGaussian.from_penalty(q, -0.4, 0.3, 0.2)
    u = np.linspace(1e-6, 1 - 1e-6, 57)
    np.testing.assert_allclose(law.cdf(law.ppf(u)), u, atol=1e-11)


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0])
def test_sampler_ks(q):
    law = QGaussian.from_penalty(q, 1.0, 0.5, 0.1)
    draws = law.sample(np.random.default_rng(11), 100_000)
    assert stats.kstest(draws, law.cdf).statistic < 0.01


def test_compact_support_above_one():
    law = QGaussian.from_penalty(2.5, 1.0, 1.0, 0.3)
    lo, hi = law.support
    assert law.pdf(lo - 1e-9) == 0.0 and law.pdf(hi + 1e-9) == 0.0
    assert law.pdf(1.0) > 0
    draws = law.sample(np.random.default_rng(0), 10_000)
    assert draws.min() >= lo and draws.max() <= hi


def test_heavy_tail_below_one():
    law = QGaussian.from_penalty(0.5, 0.0, 1.0, 1.0)
    gauss = QGaussian.from_penalty(1.0, 0.0, 1.0, 1.0)
    assert law.pdf(30.0) > 0
    assert law.pdf(30.0) / law.pdf(0.0) > gauss.pdf(30.0) / gauss.pdf(0.0)


@pytest.mark.parametrize("bad_q", [1 / 3, 0.2, -1.0, float("nan")])
def test_rejects_q_at_or_below_one_third(bad_q):
    with pytest.raises(InvalidDistribution):
        QGaussian.from_penalty(bad_q, 0.0, 1.0, 1.0)


def test_rejects_nonpositive_penalty_and_weight():
    with pytest.raises(ConvexityViolation):
        QGaussian.from_penalty(2.0, 0.0, 1.0, 0.0)
    with pytest.raises(InvalidDistribution):
        QGaussian.from_penalty(2.0, 0.0, 0.0, 1.0)
    with pytest.raises(InvalidDistribution):
        normalizer_psi(1.0, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(q=st.floats(0.36, 6.0), lam=st.floats(0.05, 5.0), qf=st.floats(0.05, 5.0), mu=st.floats(-10, 10))
def test_density_symmetric_and_nonnegative(q, lam, qf, mu):
    law = QGaussian.from_penalty(q, mu, lam, qf)
    d = np.linspace(0, 2.9, 12) * law.scale  # keeps off the support edge, where rounding is amplified
    left, right = law.pdf(mu - d), law.pdf(mu + d)
    assert np.all(left >= 0)
    np.testing.assert_allclose(left, right, rtol=1e-9, atol=1e-12 * law.pdf(mu))
    assert np.all(np.diff(right) <= 1e-15)


@settings(max_examples=40, deadline=None)
@given(q=st.floats(1.05, 6.0), lam1=st.floats(0.05, 5.0), ratio=st.floats(1.01, 3.0))
def test_psi_increasing_in_lam_above_one(q, lam1, ratio):
    assert normalizer_psi(q, lam1 * ratio, 0.1) > normalizer_psi(q, lam1, 0.1)


def test_variance_structure_grid():
    qs, lams = [0.5, 1.0, 2.0, 4.0], [0.1, 0.5, 1.0, 2.0]
    v = np.array([[QGaussian.from_penalty(q, 0, lam, 0.1).variance() for lam in lams] for q in qs])
    assert np.all(np.diff(v, axis=1) > 0)
    assert np.all(np.diff(v, axis=0) < 0)


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 3.0])
def test_discrete_entropy_uniform_and_point_mass(q):
    m = 4
    expected = math.log(m) if q == 1.0 else (1 - m ** (1 - q)) / (q - 1)
    assert tsallis_entropy_discrete(np.full(m, 1 / m), q) == pytest.approx(expected, rel=1e-13)
    assert tsallis_entropy_discrete([1.0, 0.0, 0.0], q) == 0.0


def test_discrete_entropy_validation():
    with pytest.raises(InvalidDistribution):
        tsallis_entropy_discrete([0.5, 0.4], 2.0)
    with pytest.raises(InvalidDistribution):
        tsallis_entropy_discrete([1.5, -0.5], 2.0)


@pytest.mark.parametrize("q", [0.5, 2.0])
def test_continuous_entropy_matches_brute_force(q):
    law = QGaussian.from_penalty(q, 0.0, 0.7, 0.4)
    lo, hi = law.support
    lo, hi = (lo, hi) if math.isfinite(lo) else (-np.inf, np.inf)
    ipq = integrate.quad(lambda v: law.pdf(v) ** q, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=500)[0]
    assert tsallis_entropy_continuous(law) == pytest.approx((1 - ipq) / (q - 1), abs=1e-9)


def test_variance_of_a_million_draws():
    law = QGaussian.from_penalty(2.0, 0.0, 1.0, 0.1)
    draws = law.sample(np.random.default_rng(1), 1_000_000)
    assert draws.var() == pytest.approx(law.variance(), rel=0.01)


@pytest.mark.parametrize("q", [1 - 1e-3, 1 + 1e-3])
def test_near_shannon_pointwise_and_entropy(q):
    law = QGaussian.from_penalty(q, 0.5, 0.5, 0.1)
    gauss = QGaussian.from_penalty(1.0, 0.5, 0.5, 0.1)
    s = math.sqrt(gauss.sigma2)
    pts = np.array([0.5 - s, 0.5, 0.5 + s])
    np.testing.assert_allclose(law.pdf(pts), gauss.pdf(pts), rtol=1e-2)
    assert law.entropy() == pytest.approx(gauss.entropy(), rel=1e-2)


def test_density_vanishes_continuously_at_support_edge():
    law = QGaussian.from_penalty(1.5, 0.0, 1.0, 0.1)
    edge = law.support[1]
    assert law.pdf(edge * (1 - 1e-8)) < 1e-6 * law.pdf(0.0)
    assert law.pdf(edge) == 0.0


def test_translation_leaves_variance_unchanged():
    law = QGaussian.from_penalty(0.7, 0.0, 1.0, 0.3)
    assert law.shifted(12.0).variance() == pytest.approx(law.variance(), rel=1e-12)
