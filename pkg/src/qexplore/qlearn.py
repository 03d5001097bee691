"""Tsallis-regularised soft Q machinery on finite MDPs.

The per-state policy maximises ``sum_a pi_a Q_a + lam S_q[pi]`` over the
simplex.  For ``q != 1`` the maximiser is a q-exponential of ``Q`` shifted by
a normaliser found by bracketing root search; ``q > 1`` can put exactly zero
mass on poor actions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import softmax

from .errors import NonConvergence, NumericalError
from .qgaussian import _tsallis_discrete_unchecked, is_shannon


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """``P[x, a, x']`` transition kernel, ``r[x, x', a]`` rewards, discount ``zeta``."""

    P: np.ndarray
    r: np.ndarray
    zeta: float

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        r = np.array(self.r, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"P must have shape (S, A, S), got {P.shape}")
        S, A, _ = P.shape
        if S < 1 or A < 1:
            raise ValueError("need at least one state and one action")
        if r.shape != (S, S, A):
            raise ValueError(f"r must have shape {(S, S, A)}, got {r.shape}")
        bad = np.argwhere((np.abs(P.sum(axis=2) - 1.0) > 1e-12) | np.any(P < 0, axis=2))
        if bad.size:
            x, a = bad[0]
            raise ValueError(f"transition row (x={x}, a={a}) is not a probability vector")
        if not np.all(np.isfinite(r)):
            raise ValueError("rewards must be finite")
        if not 0.0 < self.zeta < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.zeta}")
        P.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "r", r)

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]

    def expected_reward(self) -> np.ndarray:
        """``sum_x' P(x'|x,a) r(x,x',a)`` as an ``(S, A)`` array."""
        return np.einsum("xay,xya->xa", self.P, self.r)

    @classmethod
    def random(cls, rng: np.random.Generator, n_states: int, n_actions: int, zeta: float = 0.9) -> "TabularMDP":
        P = rng.random((n_states, n_actions, n_states))
        P /= P.sum(axis=2, keepdims=True)
        P[..., -1] = 1.0 - P[..., :-1].sum(axis=2)
        return cls(P, rng.normal(size=(n_states, n_states, n_actions)), zeta)


@dataclass(frozen=True)
class SoftQTable:
    Q: np.ndarray
    V: np.ndarray
    iterations: int
    residuals: tuple


def tsallis_policy(qrow, q: float, lam: float) -> np.ndarray:
    """Maximiser of ``pi . qrow + lam S_q[pi]`` on the simplex."""
    qrow = np.asarray(qrow, dtype=float)
    if qrow.ndim != 1 or qrow.size == 0:
        raise ValueError("qrow must be a nonempty vector")
    if not np.all(np.isfinite(qrow)):
        raise ValueError("qrow must be finite")
    if not lam > 0:
        raise ValueError("lam must be positive")
    if not q > 0:
        raise ValueError("q must be positive")
    if is_shannon(q):
        return softmax(qrow / lam)
    m = qrow.size
    z = qrow - qrow.max()
    p = 1.0 / (q - 1.0)
    if q > 1:
        c = (q - 1.0) / (lam * q)

        def weights(psi):
            return np.power(np.clip(c * (psi + z), 0.0, None), p)

        # total mass is >= 1 at psi = 1/c and <= 1 at m^{-(q-1)}/c
        lo, hi = m ** (-(q - 1.0)) / c, 1.0 / c
    else:
        c = (1.0 - q) / (lam * q)

        def weights(psi):
            return np.power(c * (psi - z), p)

        # total mass is decreasing in psi: >= 1 at 1/c, <= 1 at m^{1-q}/c
        lo, hi = 1.0 / c, m ** (1.0 - q) / c
    if lo == hi:
        return np.full(m, 1.0 / m)

    sign = 1.0 if q > 1 else -1.0

    def excess(psi):
        # increasing in psi for either branch
        return sign * (weights(psi).sum() - 1.0)

    # the analytic bracket can miss by rounding when actions nearly tie; widen geometrically
    f_lo, f_hi = excess(lo), excess(hi)
    for _ in range(64):
        if f_lo <= 0.0 <= f_hi:
            break
        if f_hi < 0:
            hi *= 2.0
            f_hi = excess(hi)
        if f_lo > 0:
            lo *= 0.5
            f_lo = excess(lo)
    else:
        raise NumericalError(f"normaliser not bracketed: f({lo})={f_lo}, f({hi})={f_hi}")
    if f_lo == 0.0:
        psi = lo
    elif f_hi == 0.0:
        psi = hi
    else:
        psi = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    w = weights(psi)
    return w / w.sum()


def _regularised_values(Q: np.ndarray, q: float, lam: float):
    pis = np.array([tsallis_policy(row, q, lam) for row in Q])
    ent = np.array([_tsallis_discrete_unchecked(pi, q) for pi in pis])
    return (pis * Q).sum(axis=1) + lam * ent, pis


def soft_value_iteration(mdp: TabularMDP, q: float, lam: float, tol: float = 1e-10,
                         max_iters: int = 10000, V0=None) -> SoftQTable:
    """Synchronous regularised Bellman iteration; stops when the sup-norm change is below ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    R = mdp.expected_reward()
    V = np.zeros(mdp.n_states) if V0 is None else np.array(V0, dtype=float)
    residuals = []
    for it in range(1, max_iters + 1):
        Q = R + mdp.zeta * mdp.P @ V
        V_new, _ = _regularised_values(Q, q, lam)
        res = float(np.max(np.abs(V_new - V)))
        residuals.append(res)
        V = V_new
        if res < tol:
            return SoftQTable(R + mdp.zeta * mdp.P @ V, V, it, tuple(residuals))
    raise NonConvergence(f"no convergence in {max_iters} iterations (residual {residuals[-1]:.3e})",
                         residual=residuals[-1], iterations=max_iters)


def greedy_value_iteration(mdp: TabularMDP, tol: float = 1e-12, max_iters: int = 100000) -> np.ndarray:
    """Unregularised optimal values."""
    R = mdp.expected_reward()
    V = np.zeros(mdp.n_states)
    for _ in range(max_iters):
        V_new = (R + mdp.zeta * mdp.P @ V).max(axis=1)
        if np.max(np.abs(V_new - V)) < tol:
            return V_new
        V = V_new
    raise NonConvergence("greedy value iteration did not converge")


@dataclass(frozen=True)
class StateReport:
    state: int
    support: int
    entropy: float
    greedy_action: int
    mode_action: int

    @property
    def argmax_agrees(self) -> bool:
        return self.greedy_action == self.mode_action


def policy_entropy_report(table: SoftQTable, q: float, lam: float, zero_tol: float = 0.0) -> list[StateReport]:
    out = []
    for x, row in enumerate(table.Q):
        pi = tsallis_policy(row, q, lam)
        out.append(StateReport(x, int(np.sum(pi > zero_tol)), _tsallis_discrete_unchecked(pi, q),
                               int(np.argmax(row)), int(np.argmax(pi))))
    return out


def soft_q_learning(mdp: TabularMDP, q: float, lam: float, steps: int, rng: np.random.Generator,
                    start_state: int = 0) -> np.ndarray:
    """Sample-based soft Q-learning with learning rate ``1/visits``.

    Actions are drawn from the current Tsallis policy, so exploration needs no
    separate epsilon schedule.
    """
    S, A = mdp.n_states, mdp.n_actions
    Q = np.zeros((S, A))
    visits = np.zeros((S, A))
    x = start_state
    for _ in range(steps):
        a = int(rng.choice(A, p=tsallis_policy(Q[x], q, lam)))
        y = int(rng.choice(S, p=mdp.P[x, a]))
        pi_y = tsallis_policy(Q[y], q, lam)
        v_y = float(pi_y @ Q[y]) + lam * _tsallis_discrete_unchecked(pi_y, q)
        visits[x, a] += 1.0
        Q[x, a] += (mdp.r[x, y, a] + mdp.zeta * v_y - Q[x, a]) / visits[x, a]
        x = y
    return Q


# ---------------------------------------------------------------------------
# text formats


def read_mdp(path) -> TabularMDP:
    """Whitespace-separated text: ``n_states n_actions discount`` then ``x a x' prob reward`` lines.

    Blank lines and ``#`` comments are ignored; unlisted transitions have zero probability.
    """
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows or len(rows[0]) != 3:
        raise ValueError("header must be 'n_states n_actions discount'")
    S, A, zeta = int(rows[0][0]), int(rows[0][1]), float(rows[0][2])
    P = np.zeros((S, A, S))
    r = np.zeros((S, S, A))
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 5:
            raise ValueError(f"line {k}: expected 'x a x_next prob reward'")
        x, a, y = int(row[0]), int(row[1]), int(row[2])
        if not (0 <= x < S and 0 <= a < A and 0 <= y < S):
            raise ValueError(f"line {k}: index out of range")
        P[x, a, y] += float(row[3])
        r[x, y, a] = float(row[4])
    return TabularMDP(P, r, zeta)


def write_mdp(mdp: TabularMDP, path) -> Path:
    path = Path(path)
    lines = [f"{mdp.n_states} {mdp.n_actions} {mdp.zeta!r}"]
    for x, a, y in np.argwhere(mdp.P > 0):
        lines.append(f"{x} {a} {y} {float(mdp.P[x, a, y])!r} {float(mdp.r[x, y, a])!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_table_csv(table: SoftQTable, q: float, lam: float, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("state", "action", "Q", "pi"))
        for x, row in enumerate(table.Q):
            pi = tsallis_policy(row, q, lam)
            for a in range(row.size):
                w.writerow([x, a, repr(float(row[a])), repr(float(pi[a]))])
    return path


def write_report_csv(report: list[StateReport], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("state", "support", "entropy", "greedy_action", "mode_action", "argmax_agrees"))
        for s in report:
            w.writerow([s.state, s.support, repr(float(s.entropy)), s.greedy_action, s.mode_action,
                        int(s.argmax_agrees)])
    return path


def simplex_search(qrow, q: float, lam: float, n: int, rng: np.random.Generator) -> float:
    """Best ``pi . qrow + lam S_q[pi]`` over ``n`` uniform simplex draws plus all vertices."""
    qrow = np.asarray(qrow, dtype=float)
    pts = np.vstack([rng.dirichlet(np.ones(qrow.size), size=n), np.eye(qrow.size)])
    if is_shannon(q):
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = -np.where(pts > 0, pts * np.log(np.where(pts > 0, pts, 1.0)), 0.0).sum(axis=1)
    else:
        ent = (1.0 - np.power(pts, q).sum(axis=1)) / (q - 1.0)
    return float(np.max(pts @ qrow + lam * ent))


def policy_objective(pi, qrow, q: float, lam: float) -> float:
    return float(np.dot(pi, qrow) + lam * _tsallis_discrete_unchecked(np.asarray(pi, dtype=float), q))


__all__ = [
    "TabularMDP", "SoftQTable", "StateReport", "tsallis_policy", "soft_value_iteration",
    "greedy_value_iteration", "policy_entropy_report", "soft_q_learning", "read_mdp", "write_mdp",
    "write_table_csv", "write_report_csv", "simplex_search", "policy_objective",
]
