"""Channel statistics, sampling moments, powers, and precoder containers."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import macprecode as mp

from conftest import random_stats, random_unitary


def test_coupling_is_squared_amplitudes():
    gt = np.array([[1.5, 0.2], [0.3, 2.0]])
    assert np.allclose(mp.coupling_matrix(gt), gt**2)


def test_unitary_validation_rejects():
    with pytest.raises(mp.ValidationError):
        mp.UserStatistics(u_t=[[1.0, 0.0], [0.5, 1.0]], u_r=np.eye(2), gtilde=np.ones((2, 2)))
    with pytest.raises(mp.ValidationError):
        mp.UserStatistics(u_t=np.eye(2), u_r=np.eye(2), gtilde=-np.ones((2, 2)))
    with pytest.raises(mp.ValidationError):
        mp.UserStatistics(u_t=np.eye(2), u_r=np.eye(3), gtilde=np.ones((3, 3)))


def test_orthonormalize_rounded_bases(twouser_config):
    for stats in twouser_config.users:
        for u in (stats.u_t, stats.u_r):
            err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
            assert err < 1e-12


def test_sample_channel_mean_energy():
    rng = mp.rng_for(3, "t")
    stats = random_stats(rng, 2, 2, "e")
    h = mp.sample_channel(stats, 4000, seed=11)
    energy = np.mean(np.einsum("dij,dij->d", h, h.conj()).real)
    assert energy == pytest.approx(stats.coupling_sum, rel=0.05)


def test_sample_channel_eigenmode_couplings():
    rng = mp.rng_for(4, "t")
    stats = random_stats(rng, 2, 2, "w")
    h = mp.sample_channel(stats, 8000, seed=12)
    proj = np.einsum("ri,dij,jt->drt", stats.u_r.conj().T, h, stats.u_t)
    second = np.mean(np.abs(proj) ** 2, axis=0)
    assert np.allclose(second, stats.coupling, rtol=0.15, atol=0.02)


def test_sample_channel_deterministic():
    rng = mp.rng_for(5, "t")
    stats = random_stats(rng, 2, 3, "d")
    a = mp.sample_channel(stats, 7, seed=42, tag="x")
    b = mp.sample_channel(stats, 7, seed=42, tag="x")
    c = mp.sample_channel(stats, 7, seed=42, tag="y")
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_snr_to_power_definition():
    rng = mp.rng_for(6, "t")
    stats = random_stats(rng, 2, 2, "p")
    p = mp.snr_to_power(7.0, stats)
    lin = stats.coupling_sum * p / (stats.n_tx * stats.n_rx)
    assert 10 * np.log10(lin) == pytest.approx(7.0, abs=1e-12)


def test_correlation_matrices_share_bases():
    rng = mp.rng_for(7, "t")
    stats = random_stats(rng, 3, 2, "c")
    r_t, r_r = mp.correlation_matrices(stats)
    g = stats.coupling
    assert np.allclose(
        stats.u_t.conj().T @ r_t @ stats.u_t, np.diag(g.sum(axis=0)), atol=1e-12
    )
    assert np.allclose(
        stats.u_r.conj().T @ r_r @ stats.u_r, np.diag(g.sum(axis=1)), atol=1e-12
    )


def test_precoder_set_validation():
    eye = np.eye(2, dtype=complex)
    with pytest.raises(mp.ValidationError):
        mp.PrecoderSet(matrices=[2.0 * eye], powers=[1.0], weights=[1.0])
    with pytest.raises(mp.ValidationError):
        mp.PrecoderSet(matrices=[eye, eye], powers=[4.0, 4.0], weights=[0.5, 1.0])
    with pytest.raises(mp.ValidationError):
        mp.PrecoderSet(matrices=[eye], powers=[-1.0], weights=[1.0])
    with pytest.raises(mp.ValidationError):
        mp.PrecoderSet(matrices=[np.ones((2, 3))], powers=[9.0], weights=[1.0])
    ok = mp.PrecoderSet(matrices=[eye], powers=[2.0], weights=[1.0])
    assert ok.n_users == 1


def test_weight_deltas_trailing_zero():
    eye = np.eye(1, dtype=complex)
    ps = mp.PrecoderSet(
        matrices=[eye] * 3, powers=[2.0] * 3, weights=[3.0, 1.0, 1.0]
    )
    assert np.allclose(ps.weight_deltas(), [2.0, 0.0, 1.0])


def test_replace_matrix_revalidates():
    eye = np.eye(2, dtype=complex)
    ps = mp.PrecoderSet(matrices=[eye], powers=[2.0], weights=[1.0])
    with pytest.raises(mp.ValidationError):
        ps.replace_matrix(0, 5.0 * eye)
    out = ps.replace_matrix(0, 0.5 * eye)
    assert np.allclose(out.matrices[0], 0.5 * eye)
    assert np.allclose(ps.matrices[0], eye)  # original untouched


@given(st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=1, max_size=6))
def test_sort_users_descending_stable(weights):
    ordering = mp.sort_users(weights)
    out = ordering.permute(list(weights))
    assert all(a >= b for a, b in zip(out, out[1:]))
    assert ordering.restore(ordering.permute(list(range(len(weights))))) == list(
        range(len(weights))
    )
    # stability: equal weights keep input order
    pos = {i: ordering.order.index(i) for i in range(len(weights))}
    for i in range(len(weights)):
        for j in range(i + 1, len(weights)):
            if weights[i] == weights[j]:
                assert pos[i] < pos[j]


def test_random_unitary_helper():
    u = random_unitary(mp.rng_for(8, "t"), 4)
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-10)
