"""Analytic gradient against central finite differences of the objective.

The finite-difference probes re-solve the fixed point per perturbation
with the same noise pool (common random numbers), so the comparison is
between two deterministic functions.  The estimator design makes the
sampled gradient the exact derivative of the sampled objective, which is
why the tolerances here can sit far below the acceptance threshold.
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import macprecode as mp

from conftest import random_feasible_precoders, random_system, scalar_system


def fd_gradient(system, precoders, opts, user, step=1e-4):
    """Central differences of the objective in conj(B_user), scaled like
    the analytic output (twice the conjugate derivative)."""
    n = system.users[user].n_tx
    fd = np.zeros((n, n), dtype=complex)

    def value(mat):
        return mp.wsr_objective(system, precoders.replace_matrix(user, mat), opts).value

    b = precoders.matrices[user]
    for m in range(n):
        for q in range(n):
            em = np.zeros((n, n))
            em[m, q] = 1.0
            d_re = (value(b + step * em) - value(b - step * em)) / (2 * step)
            d_im = (value(b + 1j * step * em) - value(b - 1j * step * em)) / (2 * step)
            fd[m, q] = d_re + 1j * d_im  # = 2 d/d conj(B)
    return fd


@given(st.integers(min_value=1, max_value=5))
def test_commutation_matrix_swaps_vec(n):
    k = mp.commutation_matrix(n)
    assert np.array_equal(k @ k, np.eye(n * n))
    rng = np.random.default_rng(n)
    a = rng.normal(size=(n, n))
    assert np.allclose(k @ a.reshape(-1, order="F"), a.T.reshape(-1, order="F"))


def test_gradient_matches_fd_scalar_bpsk():
    system = scalar_system("bpsk", 2, g=1.3)
    ps = mp.PrecoderSet(
        matrices=[np.array([[0.8 + 0.2j]], dtype=complex)],
        powers=[1.0],
        weights=[1.0],
    )
    opts = mp.SolveOptions(n_noise=300, seed=13)
    grad = mp.wsr_gradient(system, ps, opts)[0]
    fd = fd_gradient(system, ps, opts, 0)
    assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) < 1e-5


def test_gradient_matches_fd_two_users():
    system = random_system(21, 2, "qpsk", 4)
    ps = random_feasible_precoders(21, system, [3.0, 3.0], [1.0, 0.6])
    opts = mp.SolveOptions(n_noise=250, seed=14)
    grads = mp.wsr_gradient(system, ps, opts)
    for user in range(2):
        fd = fd_gradient(system, ps, opts, user)
        rel = np.linalg.norm(grads[user] - fd) / np.linalg.norm(fd)
        assert rel < 1e-4, f"user {user}: rel {rel:.2e}"


def test_gradient_scales_linearly_with_weights():
    system = random_system(22, 2, "bpsk", 2)
    ps1 = random_feasible_precoders(22, system, [2.0, 2.0], [1.0, 0.4])
    ps3 = mp.PrecoderSet(
        matrices=[b.copy() for b in ps1.matrices],
        powers=list(ps1.powers),
        weights=[3.0, 1.2],
    )
    opts = mp.SolveOptions(n_noise=150, seed=15)
    g1 = mp.wsr_gradient(system, ps1, opts)
    g3 = mp.wsr_gradient(system, ps3, opts)
    for a, b in zip(g1, g3):
        assert np.allclose(3.0 * a, b, rtol=1e-12, atol=1e-12)


def test_zero_weights_give_zero_gradient():
    system = random_system(23, 2, "bpsk", 2)
    ps = random_feasible_precoders(23, system, [2.0, 2.0], [0.0, 0.0])
    grads = mp.wsr_gradient(system, ps, mp.SolveOptions(n_noise=80, seed=16))
    for g in grads:
        assert np.allclose(g, 0.0)


def test_group_terms_interaction_structure():
    """Cross-user terms cancel except through the shared receive covariance.

    For a user t different from the perturbed user l, the two
    compensation terms coincide (their difference is what a converged
    fixed point makes vanish), while the own-user terms differ by the
    direct contribution.
    """
    system = random_system(24, 2, "qpsk", 4)
    ps = random_feasible_precoders(24, system, [3.0, 3.0], [1.0, 1.0])
    res = mp.wsr_objective(system, ps, mp.SolveOptions(n_noise=200, seed=17))
    state = res.states[1]
    ws = mp.build_workspace(system, ps, state, user=0)
    for t in state.subset:
        t1, t2, t3 = mp.theta_terms(ws, system, t, 0, 1)
        if t != 0:
            assert np.allclose(t1, t2, atol=1e-14)
        else:
            assert not np.allclose(t1, t2)


def test_gradient_reuses_precomputed_result():
    system = random_system(25, 1, "qpsk", 4)
    ps = random_feasible_precoders(25, system, [2.0], [1.0])
    opts = mp.SolveOptions(n_noise=120, seed=18)
    res = mp.wsr_objective(system, ps, opts)
    a = mp.wsr_gradient(system, ps, opts, result=res)
    b = mp.wsr_gradient(system, ps, opts)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
