"""Seeded Monte Carlo engine for controlled paths under partial information.

Every path owns counter-based random streams keyed by ``(seed, channel, sub)``
with the path index in the counter, so results do not depend on how paths are
batched or how many worker threads run them.  Latent channels (initial drift,
observation noise, drift noise) are shared by every mode; only exploratory
modes read the uniforms channel, which gives common random numbers across
strategies.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import continuous
from .bsdelta import LQCoefficients
from .errors import InvalidGrid
from .filtering import OUParams, run_filter
from .params import ModelParams
from .policy import ExploratoryPolicy, closed_form_as_discrete

CH_A0, CH_W1, CH_W2, CH_U = 0, 1, 2, 3

EXPLORATORY = "exploratory"
CLASSICAL = "classical"
MEAN_ACTION = "mean-action"
APPROX = "approx-continuous"
MODES = (EXPLORATORY, CLASSICAL, MEAN_ACTION, APPROX)
LATENT_SCHEMES = ("euler", "exact")

_MASK64 = (1 << 64) - 1


def stream(seed: int, path: int, channel: int, sub: int = 0) -> np.random.Generator:
    key = np.array([seed & _MASK64, ((channel & 0xFFFFFFFF) << 32) | (sub & 0xFFFFFFFF)], dtype=np.uint64)
    counter = np.array([0, 0, 0, path & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def uniforms(seed: int, path_ids: Sequence[int], N: int, sub: int | None = None) -> np.ndarray:
    """Action uniforms ``u_0 .. u_{N-1}`` for each path; ``sub`` defaults to ``N``."""
    sub = N if sub is None else sub
    return np.stack([stream(seed, int(p), CH_U, sub).random(N) for p in path_ids])


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams = field(default_factory=ModelParams)
    q: tuple = (2.0,)
    lam: tuple = (0.5,)
    N: tuple = (10,)
    n_paths: int = 100
    seed: int = 0
    modes: tuple = (EXPLORATORY, CLASSICAL)
    latent_scheme: str = "euler"
    reference_steps: int = 20000
    threads: int = 1
    chunk_size: int = 1000

    def __post_init__(self):
        for name in ("q", "lam", "N", "modes"):
            val = tuple(getattr(self, name))
            if not val:
                raise ValueError(f"{name} list must be nonempty")
            object.__setattr__(self, name, val)
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if any(int(n) != n or n < 1 for n in self.N):
            raise InvalidGrid(f"grid sizes must be positive integers, got {self.N}")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown modes {bad}; choose from {MODES}")
        if self.latent_scheme not in LATENT_SCHEMES:
            raise ValueError(f"latent_scheme must be one of {LATENT_SCHEMES}")


@dataclass
class LatentPaths:
    """Latent drift and observations for a block of paths on one grid."""

    path_ids: np.ndarray
    t: np.ndarray
    A: np.ndarray
    dY: np.ndarray
    x0: float

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def N(self) -> int:
        return self.dY.shape[1]

    @property
    def Y(self) -> np.ndarray:
        # accumulate from x0 in the same order as the state recursion
        Y = np.empty(self.A.shape)
        Y[:, 0] = self.x0
        Y[:, 1:] = self.dY
        return np.cumsum(Y, axis=1)

    def coarsen(self, factor: int) -> "LatentPaths":
        if factor < 1 or self.N % factor:
            raise InvalidGrid(f"cannot coarsen {self.N} steps by {factor}")
        P, M = self.dY.shape[0], self.N // factor
        dY = self.dY.reshape(P, M, factor).sum(axis=2)
        return LatentPaths(self.path_ids, self.t[::factor].copy(), self.A[:, ::factor].copy(), dY, self.x0)


def draw_latent(model: ModelParams, N: int, path_ids: Sequence[int], seed: int,
                scheme: str = "euler") -> LatentPaths:
    """Simulate the latent drift and observation increments on an ``N``-step grid."""
    if scheme not in LATENT_SCHEMES:
        raise ValueError(f"unknown latent scheme {scheme!r}")
    dt = model.T / N
    ids = np.asarray(path_ids, dtype=np.int64)
    P = ids.size
    z0 = np.empty(P)
    w1 = np.empty((P, N))
    w2 = np.empty((P, N))
    for i, p in enumerate(ids.tolist()):
        z0[i] = stream(seed, p, CH_A0).standard_normal()
        w1[i] = stream(seed, p, CH_W1).standard_normal(N)
        w2[i] = stream(seed, p, CH_W2).standard_normal(N)
    decay = math.exp(-model.kappa * dt)
    if scheme == "exact" and model.kappa > 0:
        drift_sd = model.eta * math.sqrt(-math.expm1(-2.0 * model.kappa * dt) / (2.0 * model.kappa))
    else:
        drift_sd = model.eta * math.sqrt(dt)
    A = np.empty((P, N + 1))
    A[:, 0] = model.A0_mean + math.sqrt(model.Sigma0) * z0
    for n in range(N):
        A[:, n + 1] = decay * A[:, n] + drift_sd * w2[:, n]
    dY = A[:, :-1] * dt + model.sigma * math.sqrt(dt) * w1
    return LatentPaths(ids, np.linspace(0.0, model.T, N + 1), A, dY, model.x0)


@dataclass
class PathBatch:
    """Simulated paths for one ``(mode, q, lam, N)`` setting; arrays are indexed ``[path, n]``."""

    mode: str
    q: float
    lam: float
    N: int
    seed: int
    path_ids: np.ndarray
    t: np.ndarray
    A: np.ndarray
    Y: np.ndarray
    A_hat: np.ndarray
    X: np.ndarray
    nu: np.ndarray

    def record(self, i: int) -> "PathRecord":
        return PathRecord(int(self.path_ids[i]), self.t, self.A[i], self.Y[i],
                          self.A_hat[i], self.X[i], self.nu[i], self.seed)

    def records(self):
        return [self.record(i) for i in range(self.path_ids.size)]


@dataclass(frozen=True, eq=False)
class PathRecord:
    path_id: int
    t: np.ndarray
    A: np.ndarray
    Y: np.ndarray
    A_hat: np.ndarray
    X: np.ndarray
    nu: np.ndarray
    seed: int


def run_policy(latent: LatentPaths, pol: ExploratoryPolicy, mode: str, ou: OUParams,
               u: np.ndarray | None = None, shape_draws: np.ndarray | None = None):
    """Drive the controlled state with ``pol``.  Returns ``(A_hat, X, nu)``.

    The policy sees only ``(n, X_n, A_hat_n)``; the filter sees only ``dY``.
    Exploratory modes need the uniforms ``u`` or, to skip the inverse-CDF
    work, ``shape_draws`` already mapped through the unit-scale quantile.
    """
    dt, N = latent.dt, latent.N
    coeffs = pol.coeffs
    A_hat = run_filter(latent.dY, ou, dt)
    P = latent.dY.shape[0]
    X = np.empty((P, N + 1))
    X[:, 0] = latent.x0
    nu = np.empty((P, N))
    explore = mode in (EXPLORATORY, APPROX)
    if explore and shape_draws is None:
        if u is None:
            raise ValueError("exploratory modes need action uniforms")
        shape_draws = pol.standard_law(0).standard_ppf(u)
    for n in range(N):
        mu = pol.location(n, X[:, n], A_hat[:, n])
        if explore:
            act = mu + pol.standard_law(n).scale * shape_draws[:, n]
        elif mode == MEAN_ACTION:
            act = mu + pol.standard_law(n).mean
        else:
            act = mu
        nu[:, n] = act
        X[:, n + 1] = X[:, n] + latent.dY[:, n] + coeffs.gamma[n] * act * dt
    return A_hat, X, nu


def _chunks(n_paths: int, size: int):
    return [np.arange(s, min(s + size, n_paths)) for s in range(0, n_paths, size)]


def _map_chunks(fn, cfg: ExperimentConfig):
    chunks = _chunks(cfg.n_paths, cfg.chunk_size)
    if cfg.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            return list(ex.map(fn, chunks))
    return [fn(c) for c in chunks]


def _policy(cfg: ExperimentConfig, N: int, mode: str, q: float, lam: float) -> ExploratoryPolicy:
    coeffs = cfg.model.coefficients(N)
    if mode == APPROX:
        sol = closed_form_as_discrete(cfg.model.closed_form(), N, cfg.model.kappa)
        return ExploratoryPolicy.discrete(coeffs, q, lam, cfg.model.kappa, solution=sol)
    return ExploratoryPolicy.discrete(coeffs, q, lam, cfg.model.kappa)


def _settings(cfg: ExperimentConfig):
    for N in cfg.N:
        for mode in cfg.modes:
            if mode == CLASSICAL:
                yield mode, math.nan, math.nan, int(N)
                continue
            for q in cfg.q:
                for lam in cfg.lam:
                    yield mode, float(q), float(lam), int(N)


def simulate_paths(cfg: ExperimentConfig) -> list[PathBatch]:
    """All ``(mode, q, lam, N)`` settings of ``cfg`` under common random numbers."""
    ou = cfg.model.ou()
    out = []
    for mode, q, lam, N in _settings(cfg):
        # the classical policy does not depend on (q, lam); any valid pair gives the same location
        pol = _policy(cfg, N, mode, 2.0 if mode == CLASSICAL else q, 1.0 if mode == CLASSICAL else lam)

        def run(ids, pol=pol, mode=mode, N=N):
            latent = draw_latent(cfg.model, N, ids, cfg.seed, cfg.latent_scheme)
            u = uniforms(cfg.seed, ids, N) if mode in (EXPLORATORY, APPROX) else None
            A_hat, X, nu = run_policy(latent, pol, mode, ou, u)
            return latent, A_hat, X, nu

        parts = _map_chunks(run, cfg)
        latent0 = parts[0][0]
        out.append(PathBatch(
            mode, q, lam, N, cfg.seed,
            np.concatenate([p[0].path_ids for p in parts]), latent0.t,
            np.concatenate([p[0].A for p in parts]), np.concatenate([p[0].Y for p in parts]),
            np.concatenate([p[1] for p in parts]), np.concatenate([p[2] for p in parts]),
            np.concatenate([p[3] for p in parts]),
        ))
    return out


# ---------------------------------------------------------------------------
# objectives


def step_entropies(pol: ExploratoryPolicy) -> np.ndarray:
    """Tsallis entropy of the optimal action law at each step (observation independent)."""
    return np.array([pol.standard_law(n).entropy() for n in range(pol.solution.N)])


def objective(X: np.ndarray, nu: np.ndarray, coeffs: LQCoefficients,
              entropy_bonus: np.ndarray | None = None) -> np.ndarray:
    """Per-path realised performance; adds ``sum_n entropy_bonus_n dt`` when given."""
    dt = coeffs.dt
    Xn = X[:, :-1]
    running = (coeffs.D * Xn * nu - coeffs.C * Xn * Xn - coeffs.K * nu * nu).sum(axis=1) * dt
    val = -coeffs.B * X[:, -1] ** 2 + running
    if entropy_bonus is not None:
        val = val + float(np.sum(entropy_bonus)) * dt
    return val


# ---------------------------------------------------------------------------
# discrete -> continuous convergence


def reference_steps(Ns: Sequence[int], minimum: int) -> int:
    base = math.lcm(*(int(n) for n in Ns))
    return base * max(1, math.ceil(minimum / base))


def continuous_classical_path(latent: LatentPaths, model: ModelParams) -> np.ndarray:
    """Classical continuous-time optimal state on a fine grid, closed-form feedback."""
    closed = model.closed_form()
    ou = model.ou()
    dt = latent.dt
    A_hat = run_filter(latent.dY, ou, dt)
    h2 = np.asarray(continuous.h2_closed(latent.t, closed))
    coef = np.asarray(continuous.h1_coefficient(latent.t, closed, model.kappa))
    g, D, K = closed.gamma, closed.D, closed.K
    X = np.empty(latent.A.shape)
    X[:, 0] = latent.x0
    for i in range(latent.N):
        act = (g * coef[i] * A_hat[:, i] + (2.0 * g * h2[i] + D) * X[:, i]) / (2.0 * K)
        X[:, i + 1] = X[:, i] + latent.dY[:, i] + g * act * dt
    return X


@dataclass
class StudyRow:
    q: float
    lam: float
    N: int
    median: float
    p90: float
    mean: float


@dataclass
class ConvergenceResult:
    rows: list
    errors: dict  # (q, lam, N) -> per-path sup errors
    reference_N: int

    def row(self, q, lam, N) -> StudyRow:
        for r in self.rows:
            if r.q == q and r.lam == lam and r.N == N:
                return r
        raise KeyError((q, lam, N))


def convergence_study(cfg: ExperimentConfig) -> ConvergenceResult:
    """Sup-norm distance between discrete exploratory paths and the continuous classical path.

    Every grid is a coarsening of one fine grid, so all resolutions see the
    same latent outcome.  Action uniforms depend on ``(path, N)`` only and are
    shared across ``(q, lam)``.
    """
    model, ou = cfg.model, cfg.model.ou()
    Ns = sorted(int(n) for n in cfg.N)
    n_ref = reference_steps(Ns, cfg.reference_steps)
    pols = {(q, lam, N): _policy(cfg, N, EXPLORATORY, q, lam)
            for q in cfg.q for lam in cfg.lam for N in Ns}

    def run(ids):
        fine = draw_latent(model, n_ref, ids, cfg.seed, "exact")
        x_ref = continuous_classical_path(fine, model)
        errs = {}
        for N in Ns:
            f = n_ref // N
            coarse = fine.coarsen(f)
            u = uniforms(cfg.seed, ids, N)
            for q in cfg.q:
                draws = pols[(q, cfg.lam[0], N)].standard_law(0).standard_ppf(u)
                for lam in cfg.lam:
                    _, X, _ = run_policy(coarse, pols[(q, lam, N)], EXPLORATORY, ou, shape_draws=draws)
                    errs[(q, lam, N)] = np.abs(X - x_ref[:, ::f]).max(axis=1)
        return errs

    parts = _map_chunks(run, cfg)
    errors = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    rows = [StudyRow(q, lam, N, float(np.median(e)), float(np.quantile(e, 0.9)), float(e.mean()))
            for (q, lam, N), e in errors.items()]
    return ConvergenceResult(rows, errors, n_ref)


# ---------------------------------------------------------------------------
# closed-form approximation of the discrete optimum


@dataclass
class ApproxResult:
    N: int
    q: float
    lam: float
    diff: np.ndarray  # X_opt - X_approx, shape (paths, N + 1)

    @property
    def mean_abs_by_step(self) -> np.ndarray:
        return np.abs(self.diff).mean(axis=0)

    @property
    def mean_abs(self) -> float:
        return float(np.abs(self.diff).mean())


def approximation_study(cfg: ExperimentConfig) -> list[ApproxResult]:
    """Pair the discrete optimum with its closed-form approximation under common uniforms."""
    ou = cfg.model.ou()
    results = []
    for N in cfg.N:
        for q in cfg.q:
            for lam in cfg.lam:
                opt = _policy(cfg, N, EXPLORATORY, q, lam)
                approx = _policy(cfg, N, APPROX, q, lam)

                def run(ids, opt=opt, approx=approx, N=N):
                    latent = draw_latent(cfg.model, N, ids, cfg.seed, cfg.latent_scheme)
                    u = uniforms(cfg.seed, ids, N)
                    _, x_opt, _ = run_policy(latent, opt, EXPLORATORY, ou, u)
                    _, x_apx, _ = run_policy(latent, approx, APPROX, ou, u)
                    return x_opt - x_apx

                diff = np.concatenate(_map_chunks(run, cfg))
                results.append(ApproxResult(int(N), float(q), float(lam), diff))
    return results


# ---------------------------------------------------------------------------
# objective comparison


@dataclass
class ObjectiveComparison:
    """Per-path differences under common random numbers.

    ``raw_gap`` is classical minus exploratory without entropy;
    ``regularised_gap`` is exploratory minus classical with the entropy reward
    (classical actions are point masses and earn none).
    """

    raw_gap: np.ndarray
    regularised_gap: np.ndarray

    @staticmethod
    def _summary(x):
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))

    @property
    def raw(self):
        return self._summary(self.raw_gap)

    @property
    def regularised(self):
        return self._summary(self.regularised_gap)


def objective_comparison(cfg: ExperimentConfig, q: float, lam: float, N: int) -> ObjectiveComparison:
    ou = cfg.model.ou()
    pol = _policy(cfg, N, EXPLORATORY, q, lam)
    bonus = lam * step_entropies(pol)

    def run(ids):
        latent = draw_latent(cfg.model, N, ids, cfg.seed, cfg.latent_scheme)
        u = uniforms(cfg.seed, ids, N)
        _, x_e, nu_e = run_policy(latent, pol, EXPLORATORY, ou, u)
        _, x_c, nu_c = run_policy(latent, pol, CLASSICAL, ou)
        raw_e = objective(x_e, nu_e, pol.coeffs)
        raw_c = objective(x_c, nu_c, pol.coeffs)
        reg_e = objective(x_e, nu_e, pol.coeffs, bonus)
        return raw_c - raw_e, reg_e - raw_c

    parts = _map_chunks(run, cfg)
    return ObjectiveComparison(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


# ---------------------------------------------------------------------------
# CSV output

PATH_COLUMNS = ("path_id", "n", "t", "A", "Y", "A_hat", "X", "nu", "mode", "q", "lambda", "N")


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_paths_csv(batches: Sequence[PathBatch], path) -> Path:
    """All batches in one long-format file; ``nu`` is empty at ``n = N``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PATH_COLUMNS)
        for b in batches:
            for i, pid in enumerate(b.path_ids.tolist()):
                for n in range(b.N + 1):
                    nu = _fmt(b.nu[i, n]) if n < b.N else ""
                    w.writerow([pid, n, _fmt(b.t[n]), _fmt(b.A[i, n]), _fmt(b.Y[i, n]), _fmt(b.A_hat[i, n]),
                                _fmt(b.X[i, n]), nu, b.mode, _fmt(b.q), _fmt(b.lam), b.N])
    return path


def write_summary_csv(rows: Sequence[StudyRow], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("q", "lambda", "N", "median", "p90", "mean"))
        for r in sorted(rows, key=lambda r: (r.q, r.lam, r.N)):
            w.writerow([_fmt(r.q), _fmt(r.lam), r.N, _fmt(r.median), _fmt(r.p90), _fmt(r.mean)])
    return path


def write_approx_csv(results: Sequence[ApproxResult], path) -> Path:
    """Mean and mean-absolute ``X_opt - X_approx`` per step."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("q", "lambda", "N", "n", "t", "mean_diff", "mean_abs_diff"))
        for r in results:
            mean = r.diff.mean(axis=0)
            mabs = r.mean_abs_by_step
            for n in range(r.N + 1):
                w.writerow([_fmt(r.q), _fmt(r.lam), r.N, n, _fmt(n / r.N), _fmt(mean[n]), _fmt(mabs[n])])
    return path
