"""q-Gaussian action densities and Tsallis entropy.

The optimal exploratory density at a decision point is characterised by the
entropy index ``q``, a location ``mu``, the exploration weight ``lam`` and the
quadratic action penalty ``qfactor`` (``Q``)::

    q > 1      pi(v) = ((q-1)/(lam q))^p  (psi - Q (v-mu)^2)_+^p
    q = 1      Gaussian with variance lam / (2 Q)
    1/3<q<1    pi(v) = ((1-q)/(lam q))^p  (psi + Q (v-mu)^2)^p

with ``p = 1/(q-1)`` and ``psi`` the normaliser.  Writing ``v = mu + w y`` with
``w = sqrt(psi/Q)`` the standardised shape is ``(1 - y^2)_+^p`` (a symmetric
Beta law on [-1, 1]) or ``(1 + y^2)^p`` (a rescaled Student-t with
``(1+q)/(1-q)`` degrees of freedom).  The CDF and its inverse use that
reduction; moments and entropies are computed by adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import ConvexityViolation, InvalidDistribution, NumericalError

Q_ONE_TOL = 1e-9
Q_MIN = 1.0 / 3.0

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=400)


def is_shannon(q: float) -> bool:
    return abs(q - 1.0) < Q_ONE_TOL


def _check_q(q: float) -> None:
    if not np.isfinite(q) or q <= Q_MIN:
        raise InvalidDistribution(f"entropy index q={q!r} must exceed 1/3")


def _log_psi_closed(q: float, lam: float, qfactor: float) -> float:
    p = 1.0 / (q - 1.0)
    if q > 1.0:
        log_ratio = special.gammaln(p + 1.5) - special.gammaln(p + 1.0)
        log_base = math.log(lam * q / (q - 1.0))
    else:
        r = 1.0 / (1.0 - q)
        log_ratio = special.gammaln(r) - special.gammaln(r - 0.5)
        log_base = math.log(lam * q / (1.0 - q))
    inner = log_ratio - 0.5 * math.log(math.pi) + p * log_base + 0.5 * math.log(qfactor)
    return inner / (p + 0.5)


def _shape_mass(q: float) -> float:
    """Integral of the standardised shape over the real line."""
    p = 1.0 / (q - 1.0)
    if q > 1.0:
        return math.sqrt(math.pi) * math.exp(special.gammaln(p + 1.0) - special.gammaln(p + 1.5))
    r = 1.0 / (1.0 - q)
    return math.sqrt(math.pi) * math.exp(special.gammaln(r - 0.5) - special.gammaln(r))


def _log_psi_by_normalization(q: float, lam: float, qfactor: float) -> float:
    # Fallback: solve total mass = 1 in log(psi) with the shape integral done by quadrature.
    p = 1.0 / (q - 1.0)
    c = abs(q - 1.0) / (lam * q)
    if q > 1.0:
        shape = 2.0 * integrate.quad(lambda y: (1.0 + y) ** p, 0.0, 1.0, weight="alg", wvar=(0.0, p))[0]
    else:
        shape = 2.0 * integrate.quad(lambda y: (1.0 + y * y) ** p, 0.0, np.inf, **_QUAD_OPTS)[0]

    def log_mass(log_psi):
        return p * (math.log(c) + log_psi) + 0.5 * (log_psi - math.log(qfactor)) + math.log(shape)

    return optimize.brentq(log_mass, -700.0, 700.0, xtol=1e-14)


def normalizer_psi(q: float, lam: float, qfactor: float) -> float:
    """Normaliser ``psi`` making the q-Gaussian density integrate to one.

    Raises
    ------
    ConvexityViolation
        If ``qfactor <= 0``.
    InvalidDistribution
        For ``q == 1`` (no normaliser in the Gaussian branch) or ``q <= 1/3``.
    """
    _check_q(q)
    if is_shannon(q):
        raise InvalidDistribution("psi is undefined for the Shannon branch q=1")
    if not lam > 0:
        raise InvalidDistribution(f"exploration weight must be positive, got {lam!r}")
    if not qfactor > 0:
        raise ConvexityViolation(f"quadratic action penalty {qfactor!r} is not positive")
    log_psi = _log_psi_closed(q, lam, qfactor)
    if not np.isfinite(log_psi):
        log_psi = _log_psi_by_normalization(q, lam, qfactor)
    return math.exp(log_psi)


@dataclass(frozen=True)
class QGaussian:
    """Optimal exploratory action law; immutable.

    Build with :meth:`from_penalty`; ``sigma2 = lam / (2 qfactor)`` and ``psi``
    are derived there.  ``psi`` is ``nan`` for ``q == 1``.
    """

    q: float
    mu: float
    sigma2: float
    lam: float
    psi: float
    qfactor: float
    _log_peak: float = field(default=0.0, repr=False, compare=False)

    @classmethod
    def from_penalty(cls, q: float, mu: float, lam: float, qfactor: float) -> "QGaussian":
        _check_q(q)
        if not lam > 0:
            raise InvalidDistribution(f"exploration weight must be positive, got {lam!r}")
        if not qfactor > 0:
            raise ConvexityViolation(f"quadratic action penalty {qfactor!r} is not positive")
        sigma2 = lam / (2.0 * qfactor)
        if is_shannon(q):
            return cls(1.0, float(mu), sigma2, lam, math.nan, qfactor,
                       -0.5 * math.log(2.0 * math.pi * sigma2))
        psi = normalizer_psi(q, lam, qfactor)
        p = 1.0 / (q - 1.0)
        log_peak = p * math.log(abs(q - 1.0) * psi / (lam * q))
        return cls(float(q), float(mu), sigma2, lam, psi, qfactor, log_peak)

    def shifted(self, mu: float) -> "QGaussian":
        return QGaussian(self.q, float(mu), self.sigma2, self.lam, self.psi, self.qfactor, self._log_peak)

    @property
    def shannon(self) -> bool:
        return is_shannon(self.q)

    @property
    def scale(self) -> float:
        """``sqrt(psi/Q)`` for q != 1 (support half-width when q > 1), ``sigma`` for q == 1."""
        if self.shannon:
            return math.sqrt(self.sigma2)
        return math.sqrt(self.psi / self.qfactor)

    @property
    def support(self) -> tuple[float, float]:
        if self.q > 1.0 and not self.shannon:
            w = self.scale
            return self.mu - w, self.mu + w
        return -math.inf, math.inf

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def _p(self) -> float:
        return 1.0 / (self.q - 1.0)

    def _shape(self, y):
        y = np.asarray(y, dtype=float)
        if self.shannon:
            return np.exp(-0.5 * y * y)
        if self.q > 1.0:
            base = np.clip(1.0 - y * y, 0.0, None)
            with np.errstate(divide="ignore"):
                return np.where(base > 0.0, np.exp(self._p * np.log(np.where(base > 0.0, base, 1.0))), 0.0)
        return np.exp(self._p * np.log1p(y * y))

    def pdf(self, nu):
        y = (np.asarray(nu, dtype=float) - self.mu) / self.scale
        out = math.exp(self._log_peak) * self._shape(y)
        return out if out.ndim else float(out)

    def cdf(self, nu):
        y = (np.asarray(nu, dtype=float) - self.mu) / self.scale
        if self.shannon:
            out = special.ndtr(y)
        elif self.q > 1.0:
            a = self._p + 1.0
            out = special.betainc(a, a, np.clip(0.5 * (y + 1.0), 0.0, 1.0))
        else:
            k = (1.0 + self.q) / (1.0 - self.q)
            out = special.stdtr(k, y * math.sqrt(k))
        return out if out.ndim else float(out)

    def standard_ppf(self, u):
        """Inverse CDF of the law centred at 0 with unit ``scale``; independent of ``mu``, ``lam``, ``qfactor``."""
        u = np.asarray(u, dtype=float)
        if self.shannon:
            return special.ndtri(u)
        if self.q > 1.0:
            a = self._p + 1.0
            return 2.0 * special.betaincinv(a, a, u) - 1.0
        k = (1.0 + self.q) / (1.0 - self.q)
        return special.stdtrit(k, u) / math.sqrt(k)

    def ppf(self, u):
        out = self.mu + self.scale * self.standard_ppf(u)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, size=None):
        """Exact draw(s) by inverting the CDF at ``rng.random(size)``."""
        return self.ppf(rng.random(size))

    def _integrate_power(self, power: float, y_power: int = 0) -> float:
        """Integral of ``y^y_power * shape(y)^power`` over the real line (standardised units)."""
        if self.shannon:
            log_shape = lambda y: -0.5 * power * y * y  # noqa: E731
            width = 1.0 / math.sqrt(power)
            upper = math.inf
        else:
            p = self._p * power
            width = 1.0 / math.sqrt(abs(p)) if abs(p) > 1.0 else 1.0
            if self.q > 1.0:
                if p < 1.0:
                    # endpoint factor (1 - y)^p goes to the algebraic weight
                    val = integrate.quad(lambda y: y ** y_power * (1.0 + y) ** p, 0.0, 1.0,
                                         weight="alg", wvar=(0.0, p), **_QUAD_OPTS)[0]
                    return 2.0 * val
                log_shape = lambda y: p * np.log1p(-y * y)  # noqa: E731
                upper = 1.0
            else:
                log_shape = lambda y: p * np.log1p(y * y)  # noqa: E731
                upper = math.inf

        def fn(y):
            return y ** y_power * math.exp(log_shape(y))

        split = min(8.0 * width, 0.5 * upper)
        val = integrate.quad(fn, 0.0, split, **_QUAD_OPTS)[0]
        val += integrate.quad(fn, split, upper, **_QUAD_OPTS)[0]
        return 2.0 * val

    def total_mass(self) -> float:
        return self.scale * math.exp(self._log_peak) * self._integrate_power(1.0)

    def variance(self) -> float:
        w = self.scale
        val = w ** 3 * math.exp(self._log_peak) * self._integrate_power(1.0, 2)
        if not np.isfinite(val):
            raise NumericalError(f"variance quadrature diverged for q={self.q}")
        return val

    def entropy(self) -> float:
        """Tsallis entropy (Shannon for q == 1) by quadrature."""
        w = self.scale
        if self.shannon:
            log_peak = self._log_peak
            # -int pi log pi = -log_peak - E[log shape] with log shape = -y^2/2
            e_y2 = w * math.exp(log_peak) * self._integrate_power(1.0, 2)
            val = -log_peak + 0.5 * e_y2
        else:
            int_pq = w * math.exp(self.q * self._log_peak) * self._integrate_power(self.q)
            val = (1.0 - int_pq) / (self.q - 1.0)
        if not np.isfinite(val):
            raise NumericalError(f"entropy quadrature failed for q={self.q}")
        return val


def density(dist: QGaussian, nu):
    return dist.pdf(nu)


def sample(dist: QGaussian, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)


def variance(dist: QGaussian) -> float:
    return dist.variance()


def tsallis_entropy_continuous(dist: QGaussian) -> float:
    return dist.entropy()


def tsallis_entropy_discrete(weights, q: float) -> float:
    """Tsallis entropy of a probability vector; Shannon (with 0 log 0 = 0) at q == 1."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidDistribution("weights must be a non-empty 1-d vector")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidDistribution("weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > 1e-12:
        raise InvalidDistribution(f"weights sum to {w.sum()!r}, not 1")
    if not q > 0:
        raise InvalidDistribution(f"entropy index q={q!r} must be positive")
    return _tsallis_discrete_unchecked(w, q)


def _tsallis_discrete_unchecked(w: np.ndarray, q: float) -> float:
    if is_shannon(q):
        nz = w[w > 0]
        return float(-np.sum(nz * np.log(nz)))
    nz = w[w > 0]
    return float((1.0 - np.sum(nz ** q)) / (q - 1.0))
