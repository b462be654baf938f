"""Fixed-point solver: degenerate cases, invariants, and a scalar oracle."""

import numpy as np
import pytest

import macprecode as mp

from conftest import random_feasible_precoders, random_system, scalar_system
from test_equivalent import quadrature_bpsk_mse


def _zero_set(system, powers, weights):
    mats = [np.zeros((s.n_tx, s.n_tx), dtype=complex) for s in system.users]
    return mp.PrecoderSet(matrices=mats, powers=powers, weights=weights)


def test_zero_precoder_state(twouser_system):
    system = twouser_system
    ps = _zero_set(system, [2.0, 2.0], [1.0, 1.0])
    state = mp.solve_fixed_point(
        system, ps, (0, 1), mp.SolveOptions(n_noise=50, seed=1)
    )
    assert state.converged and state.residual <= 1e-6
    for j, t in enumerate(state.subset):
        stats = system.users[t]
        assert np.allclose(state.rx_gain[j], 1.0, atol=1e-9)
        assert np.allclose(state.tx_mse[j], 0.0, atol=1e-9)
        r_t, _ = mp.correlation_matrices(stats)
        assert np.allclose(state.gram[j], r_t, atol=1e-9)


def test_gamma_within_unit_interval():
    for seed in (1, 2, 3):
        system = random_system(seed, 2, "qpsk", 4)
        ps = random_feasible_precoders(seed, system, [4.0, 4.0], [1.0, 1.0])
        state = mp.solve_fixed_point(
            system, ps, (0, 1), mp.SolveOptions(n_noise=200, seed=seed)
        )
        assert state.converged
        for gam in state.rx_gain:
            assert np.all(gam > 0.0)
            assert np.all(gam <= 1.0 + 1e-12)


def test_solver_deterministic():
    system = random_system(9, 2, "bpsk", 2)
    ps = random_feasible_precoders(9, system, [3.0, 3.0], [1.0, 0.5])
    opts = mp.SolveOptions(n_noise=150, seed=5)
    a = mp.solve_fixed_point(system, ps, (0, 1), opts)
    b = mp.solve_fixed_point(system, ps, (0, 1), opts)
    for x, y in zip(a.rx_gain, b.rx_gain):
        assert np.array_equal(x, y)
    for x, y in zip(a.tx_mse, b.tx_mse):
        assert np.array_equal(x, y)
    assert a.residual == b.residual and a.iterations == b.iterations


def test_warm_start_agrees_with_cold():
    system = random_system(10, 2, "qpsk", 4)
    ps = random_feasible_precoders(10, system, [4.0, 4.0], [1.0, 1.0])
    opts = mp.SolveOptions(n_noise=200, seed=6)
    cold = mp.solve_fixed_point(system, ps, (0, 1), opts)
    warm = mp.solve_fixed_point(system, ps, (0, 1), opts, warm_start=cold)
    assert warm.converged
    assert warm.iterations <= cold.iterations
    for x, y in zip(cold.rx_gain, warm.rx_gain):
        assert np.allclose(x, y, atol=5e-5)


def test_scalar_bpsk_fixed_point_matches_quadrature():
    """Independent scalar oracle: gamma solves g(1) = 1/(1 + g|b|^2 E(gain)).

    For one antenna the update pair collapses to a 1-D equation in gamma
    with E the quadrature error power of a BPSK channel at gain
    sqrt(g * gamma) * |b|.  Bisection on that equation gives the oracle.
    """
    g = 1.7
    b = 0.9
    system = scalar_system("bpsk", 2, g=np.sqrt(g))

    def gap(gamma):
        gain = np.sqrt(g * gamma) * b
        e = quadrature_bpsk_mse(gain)
        return 1.0 / (1.0 + g * b * b * e) - gamma

    lo, hi = 1e-6, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0:
            lo = mid
        else:
            hi = mid
    oracle = 0.5 * (lo + hi)

    ps = mp.PrecoderSet(
        matrices=[np.array([[b]], dtype=complex)], powers=[1.0], weights=[1.0]
    )
    state = mp.solve_fixed_point(
        system, ps, (0,), mp.SolveOptions(n_noise=40000, seed=7)
    )
    assert state.converged
    assert state.rx_gain[0][0] == pytest.approx(oracle, abs=5e-3)


def test_asymptotic_mi_zero_precoder(twouser_system):
    ps = _zero_set(twouser_system, [2.0, 2.0], [1.0, 1.0])
    res = mp.wsr_objective(twouser_system, ps, mp.SolveOptions(n_noise=50, seed=8))
    assert res.value == pytest.approx(0.0, abs=1e-9)


def test_wsr_objective_skips_flat_weight_groups(twouser_system):
    ps = random_feasible_precoders(11, twouser_system, [2.0, 2.0], [1.0, 1.0])
    res = mp.wsr_objective(twouser_system, ps, mp.SolveOptions(n_noise=80, seed=9))
    assert res.states[0] is None  # equal weights: first nested group has delta 0
    assert res.states[1] is not None
    assert res.value == pytest.approx(res.group_mi[1])


def test_wsr_objective_weighted_groups(twouser_system):
    ps = random_feasible_precoders(12, twouser_system, [2.0, 2.0], [1.0, 0.25])
    res = mp.wsr_objective(twouser_system, ps, mp.SolveOptions(n_noise=80, seed=10))
    assert res.states[0] is not None and res.states[1] is not None
    expected = 0.75 * res.group_mi[0] + 0.25 * res.group_mi[1]
    assert res.value == pytest.approx(expected)


def test_solver_subset_validation(twouser_system):
    ps = _zero_set(twouser_system, [2.0, 2.0], [1.0, 1.0])
    with pytest.raises(mp.ValidationError):
        mp.solve_fixed_point(
            twouser_system, ps, (), mp.SolveOptions(n_noise=10, seed=1)
        )
    with pytest.raises(mp.ValidationError):
        mp.solve_fixed_point(
            twouser_system, ps, (0, 0), mp.SolveOptions(n_noise=10, seed=1)
        )


def test_solve_options_validation():
    with pytest.raises(mp.ValidationError):
        mp.SolveOptions(damping=0.0)
    with pytest.raises(mp.ValidationError):
        mp.SolveOptions(tol=-1.0)


def test_distinct_initializations_agree(twouser_system):
    """Mid-SNR uniqueness: three far-apart starting points land on the
    same solution, so the objective built on the solver is unambiguous
    there."""
    import dataclasses

    powers = [mp.snr_to_power(10.0, stats) for stats in twouser_system.users]
    ps = mp.PrecoderSet(
        matrices=[mp.baseline_np(2, p) for p in powers],
        powers=powers,
        weights=[1.0, 1.0],
    )
    opts = mp.SolveOptions(n_noise=1000, seed=9, max_iter=1000)
    cold = mp.solve_fixed_point(twouser_system, ps, (0, 1), opts)
    assert cold.converged
    for gamma0, psi0 in ((0.05, 3.0), (0.5, 0.5)):
        seeded = dataclasses.replace(
            cold,
            rx_gain=tuple(np.full(2, gamma0) for _ in range(2)),
            tx_mse=tuple(np.full(2, psi0) for _ in range(2)),
        )
        st = mp.solve_fixed_point(
            twouser_system, ps, (0, 1), opts, warm_start=seeded
        )
        assert st.converged
        for a, b in zip(cold.rx_gain + cold.tx_mse, st.rx_gain + st.tx_mse):
            assert np.allclose(a, b, atol=1e-4)
