"""Shared fixtures: the bundled two-user setup and small random systems."""

from importlib import resources

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import macprecode as mp

settings.register_profile(
    "numerics",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numerics")


def bundled_config_path() -> str:
    ref = resources.files("macprecode") / "configs" / "twouser_weichselberger.yaml"
    return str(ref)


@pytest.fixture(scope="session")
def twouser_config() -> mp.ExperimentConfig:
    return mp.load_config(bundled_config_path())


@pytest.fixture(scope="session")
def twouser_system(twouser_config) -> mp.MacSystem:
    return twouser_config.system


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(mp.complex_normal(rng, (n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_stats(rng: np.random.Generator, n_tx: int, n_rx: int, name: str):
    gtilde = np.abs(rng.normal(scale=1.0, size=(n_rx, n_tx))) + 0.05
    gtilde *= np.sqrt(n_tx * n_rx / np.sum(gtilde**2))  # total coupling n_tx*n_rx
    return mp.UserStatistics(
        u_t=random_unitary(rng, n_tx),
        u_r=random_unitary(rng, n_rx),
        gtilde=gtilde,
        name=name,
    )


def random_system(seed: int, n_users: int, kind: str, order: int, n: int = 2):
    """A random n x n system with one shared constellation kind."""
    rng = mp.rng_for(seed, "test-system")
    stats = tuple(
        random_stats(rng, n, n, f"u{k}") for k in range(n_users)
    )
    alph = mp.vector_alphabet(mp.build_constellation(kind, order), n)
    return mp.MacSystem(users=stats, alphabets=(alph,) * n_users)


def random_feasible_precoders(seed: int, system, powers, weights):
    rng = mp.rng_for(seed, "test-precoders")
    mats = []
    for stats, p in zip(system.users, powers):
        b = mp.complex_normal(rng, (stats.n_tx, stats.n_tx))
        used = float(np.real(np.trace(b @ b.conj().T)))
        mats.append(b * np.sqrt(0.9 * p / used))
    return mp.PrecoderSet(matrices=mats, powers=list(powers), weights=list(weights))


def scalar_system(kind: str = "bpsk", order: int = 2, g: float = 1.0):
    stats = mp.UserStatistics(u_t=[[1.0]], u_r=[[1.0]], gtilde=[[g]], name="s")
    alph = mp.vector_alphabet(mp.build_constellation(kind, order), 1)
    return mp.MacSystem(users=(stats,), alphabets=(alph,))
