import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qexplore.errors import NonConvergence
from qexplore.qlearn import (TabularMDP, greedy_value_iteration, policy_entropy_report, policy_objective,
                             read_mdp, simplex_search, soft_q_learning, soft_value_iteration, tsallis_policy,
                             write_mdp, write_report_csv, write_table_csv)

rows = st.lists(st.floats(-20, 20), min_size=1, max_size=8)
qs = st.sampled_from([0.4, 0.5, 0.8, 1.0, 1.3, 2.0, 3.0, 6.0])
lams = st.floats(1e-3, 1e3)


@pytest.mark.parametrize("qrow,q,lam,expected", [
    ([1.0, 0.0], 1.0, 1.0, [math.e / (1 + math.e), 1 / (1 + math.e)]),
    ([1.0, 0.0], 2.0, 1.0, [0.75, 0.25]),
    ([1.0, -10.0], 2.0, 1.0, [1.0, 0.0]),
])
def test_hand_derived_examples(qrow, q, lam, expected):
    np.testing.assert_allclose(tsallis_policy(qrow, q, lam), expected, atol=1e-6)


def test_sparse_example_is_exactly_zero():
    assert tsallis_policy([1.0, -10.0], 2.0, 1.0)[1] == 0.0


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 4.0])
@pytest.mark.parametrize("lam", [1e-3, 1.0, 1e3])
def test_equal_entries_give_uniform(q, lam):
    np.testing.assert_allclose(tsallis_policy([2.5] * 5, q, lam), 0.2, rtol=1e-12)


@settings(max_examples=300, deadline=None)
@given(qrow=rows, q=qs, lam=lams)
def test_policy_is_a_distribution(qrow, q, lam):
    pi = tsallis_policy(qrow, q, lam)
    assert np.all(pi >= 0)
    assert abs(pi.sum() - 1.0) < 1e-10


@settings(max_examples=200, deadline=None)
@given(qrow=rows, q=qs, lam=st.floats(1e-2, 1e2))
def test_mode_is_an_argmax(qrow, q, lam):
    pi = tsallis_policy(qrow, q, lam)
    qrow = np.asarray(qrow)
    best = np.flatnonzero(qrow == qrow.max())
    # entries closer than rounding to the max may legitimately share the top probability
    assert qrow[int(np.argmax(pi))] >= qrow.max() - 1e-12 * max(1.0, abs(qrow.max()))
    np.testing.assert_allclose(pi[best], pi[best[0]], rtol=1e-9)


@settings(max_examples=200, deadline=None)
@given(qrow=st.lists(st.floats(-5, 5), min_size=2, max_size=6), q=qs, lam=st.floats(0.05, 10),
       bump=st.floats(1e-3, 3), idx=st.integers(0, 5))
def test_monotone_in_own_value(qrow, q, lam, bump, idx):
    idx %= len(qrow)
    up = list(qrow)
    up[idx] += bump
    assert tsallis_policy(up, q, lam)[idx] >= tsallis_policy(qrow, q, lam)[idx] - 1e-12


def test_q_one_is_boltzmann():
    qrow = np.array([0.3, -1.0, 2.0])
    expected = np.exp(qrow / 0.7) / np.exp(qrow / 0.7).sum()
    np.testing.assert_allclose(tsallis_policy(qrow, 1.0, 0.7), expected, rtol=1e-14)


@pytest.mark.parametrize("q", [0.5, 1.0, 1.5, 2.0, 3.0])
def test_beats_simplex_search(q):
    rng = np.random.default_rng(int(q * 10))
    for _ in range(5):
        qrow = rng.normal(size=3)
        lam = rng.uniform(0.1, 2.0)
        pi = tsallis_policy(qrow, q, lam)
        assert policy_objective(pi, qrow, q, lam) - simplex_search(qrow, q, lam, 200_000, rng) >= -1e-6


def test_input_validation():
    for bad in ([], [np.nan], [[1.0]]):
        with pytest.raises(ValueError):
            tsallis_policy(bad, 2.0, 1.0)
    with pytest.raises(ValueError):
        tsallis_policy([1.0], 2.0, 0.0)
    with pytest.raises(ValueError):
        tsallis_policy([1.0], 0.0, 1.0)


def one_state(reward=1.0, zeta=0.8):
    return TabularMDP(np.ones((1, 1, 1)), np.full((1, 1, 1), reward), zeta)


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0])
def test_single_state_geometric_series(q):
    t = soft_value_iteration(one_state(), q, 0.7, tol=1e-13)
    assert t.V[0] == pytest.approx(1 / (1 - 0.8), rel=1e-11)


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_small_lambda_matches_greedy(q, seed):
    mdp = TabularMDP.random(np.random.default_rng(seed), 5, 3, 0.9)
    t = soft_value_iteration(mdp, q, 1e-8, tol=1e-11)
    np.testing.assert_allclose(t.V, greedy_value_iteration(mdp), atol=1e-4)


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0])
def test_contraction_rate(q):
    mdp = TabularMDP.random(np.random.default_rng(7), 5, 3, 0.9)
    r = np.array(soft_value_iteration(mdp, q, 0.5, tol=1e-12).residuals)
    # above the rounding floor every step contracts by at most zeta
    ok = r[:-1] > 1e-4
    assert np.all(r[1:][ok] / r[:-1][ok] <= 0.9 + 1e-9)


def test_converged_table_is_fixed_point():
    mdp = TabularMDP.random(np.random.default_rng(3), 4, 3, 0.7)
    t = soft_value_iteration(mdp, 2.0, 0.3, tol=1e-13)
    for x in range(4):
        pi = tsallis_policy(t.Q[x], 2.0, 0.3)
        assert policy_objective(pi, t.Q[x], 2.0, 0.3) == pytest.approx(t.V[x], abs=1e-11)


def test_nonconvergence_reports_residual():
    mdp = TabularMDP.random(np.random.default_rng(0), 3, 2, 0.99)
    with pytest.raises(NonConvergence) as info:
        soft_value_iteration(mdp, 2.0, 0.5, tol=1e-12, max_iters=5)
    assert info.value.residual > 0 and info.value.iterations == 5


def test_entropy_report_limits():
    mdp = TabularMDP.random(np.random.default_rng(4), 5, 3, 0.9)
    big = soft_value_iteration(mdp, 2.0, 1e6, tol=1e-6)  # values are ~1e7, so absolute tol is loose
    for s in policy_entropy_report(big, 2.0, 1e6):
        assert s.support == 3
    np.testing.assert_allclose(tsallis_policy(big.Q[0], 2.0, 1e6), 1 / 3, atol=1e-5)
    tiny = soft_value_iteration(mdp, 2.0, 1e-8)
    rep = policy_entropy_report(tiny, 2.0, 1e-8)
    assert all(s.support == 1 and s.argmax_agrees for s in rep)
    heavy = soft_value_iteration(mdp, 0.5, 1e-3)
    assert all(s.support == 3 for s in policy_entropy_report(heavy, 0.5, 1e-3))


def test_mdp_validation():
    with pytest.raises(ValueError):
        TabularMDP(np.full((2, 1, 2), 0.6), np.zeros((2, 2, 1)), 0.9)
    with pytest.raises(ValueError):
        TabularMDP(np.ones((1, 1, 1)), np.zeros((1, 1, 1)), 1.0)
    with pytest.raises(ValueError):
        TabularMDP(np.ones((1, 1, 1)), np.zeros((1, 2, 1)), 0.5)


def test_mdp_text_round_trip(tmp_path):
    mdp = TabularMDP.random(np.random.default_rng(9), 3, 2, 0.85)
    back = read_mdp(write_mdp(mdp, tmp_path / "m.txt"))
    np.testing.assert_array_equal(back.P, mdp.P)
    np.testing.assert_array_equal(back.r, mdp.r)
    assert back.zeta == mdp.zeta


def test_mdp_reader_rejects_non_stochastic(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("1 1 0.9\n0 0 0 0.5 1.0\n")
    with pytest.raises(ValueError):
        read_mdp(f)


def test_csv_outputs(tmp_path):
    mdp = TabularMDP.random(np.random.default_rng(1), 2, 2, 0.5)
    t = soft_value_iteration(mdp, 2.0, 0.5)
    lines = write_table_csv(t, 2.0, 0.5, tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "state,action,Q,pi" and len(lines) == 5
    rep = write_report_csv(policy_entropy_report(t, 2.0, 0.5), tmp_path / "r.csv").read_text().splitlines()
    assert len(rep) == 3


def test_sample_based_learning_approaches_planning():
    mdp = TabularMDP.random(np.random.default_rng(2), 3, 2, 0.5)
    planned = soft_value_iteration(mdp, 1.0, 1.0, tol=1e-12)
    learned = soft_q_learning(mdp, 1.0, 1.0, 60_000, np.random.default_rng(0))
    np.testing.assert_allclose(learned, planned.Q, atol=0.25)
