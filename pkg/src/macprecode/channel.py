"""Per-user channel statistics and precoder containers.

Each user's channel is drawn as H = U_r (Gtilde * W) U_t^H with W having
i.i.d. unit-variance complex Gaussian entries, so the second-order
statistics are fully described by the eigenbases (U_t, U_r) and the
entrywise coupling powers G = Gtilde * Gtilde.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .sampling import complex_normal, rng_for

# The published eigenbases are rounded to four decimals, so a loose default.
DEFAULT_UNITARY_TOL = 2e-2


def _as_complex(a) -> np.ndarray:
    return np.asarray(a, dtype=np.complex128)


def _orthonormalize(u: np.ndarray) -> np.ndarray:
    """Nearest unitary matrix (polar factor) of a nearly unitary input."""
    w, _, vh = np.linalg.svd(u)
    return w @ vh


def coupling_matrix(gtilde: np.ndarray) -> np.ndarray:
    """Entrywise power couplings G from the amplitude couplings Gtilde."""
    g = np.asarray(gtilde, dtype=np.float64)
    if np.any(g < 0):
        raise ValidationError("amplitude couplings must be nonnegative")
    return g * g


@dataclass(frozen=True)
class UserStatistics:
    """Second-order channel description of one user.

    u_t    : transmit eigenbasis, n_tx x n_tx, unitary within tolerance
    u_r    : receive eigenbasis, n_rx x n_rx, unitary within tolerance
    gtilde : nonnegative amplitude couplings, n_rx x n_tx
    name   : label used in reports
    """

    u_t: np.ndarray
    u_r: np.ndarray
    gtilde: np.ndarray
    name: str = "user"
    unitary_tol: float = DEFAULT_UNITARY_TOL
    orthonormalized: bool = False

    def __post_init__(self):
        u_t = _as_complex(self.u_t)
        u_r = _as_complex(self.u_r)
        gtilde = np.asarray(self.gtilde, dtype=np.float64)
        if u_t.ndim != 2 or u_t.shape[0] != u_t.shape[1]:
            raise ValidationError("u_t must be square")
        if u_r.ndim != 2 or u_r.shape[0] != u_r.shape[1]:
            raise ValidationError("u_r must be square")
        if gtilde.shape != (u_r.shape[0], u_t.shape[0]):
            raise ValidationError("gtilde must be n_rx x n_tx")
        if np.any(gtilde < 0):
            raise ValidationError("gtilde entries must be nonnegative")
        for label, u in (("u_t", u_t), ("u_r", u_r)):
            err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
            if err > self.unitary_tol:
                raise ValidationError(
                    f"{label} deviates from unitary by {err:.3g} "
                    f"(tolerance {self.unitary_tol:.3g})"
                )
        if self.orthonormalized:
            u_t = _orthonormalize(u_t)
            u_r = _orthonormalize(u_r)
        for arr in (u_t, u_r, gtilde):
            arr.setflags(write=False)
        object.__setattr__(self, "u_t", u_t)
        object.__setattr__(self, "u_r", u_r)
        object.__setattr__(self, "gtilde", gtilde)

    @property
    def n_tx(self) -> int:
        return self.u_t.shape[0]

    @property
    def n_rx(self) -> int:
        return self.u_r.shape[0]

    @property
    def coupling(self) -> np.ndarray:
        """Power couplings G (n_rx x n_tx)."""
        return coupling_matrix(self.gtilde)

    @property
    def coupling_sum(self) -> float:
        """Total coupled power, equal to E[tr(H H^H)]."""
        return float(self.coupling.sum())


def correlation_matrices(stats: UserStatistics) -> tuple[np.ndarray, np.ndarray]:
    """Transmit and receive correlation matrices implied by the couplings.

    The transmit correlation shares the u_t eigenbasis with eigenvalues
    given by column sums of G; the receive correlation shares u_r with
    row sums of G.
    """
    g = stats.coupling
    r_t = stats.u_t @ np.diag(g.sum(axis=0)) @ stats.u_t.conj().T
    r_r = stats.u_r @ np.diag(g.sum(axis=1)) @ stats.u_r.conj().T
    return r_t, r_r


def sample_channel(
    stats: UserStatistics, n_draws: int, seed: int, tag=""
) -> np.ndarray:
    """Draw n_draws channel realizations, shape (n_draws, n_rx, n_tx)."""
    rng = rng_for(seed, "channel", stats.name, tag)
    w = complex_normal(rng, (n_draws, stats.n_rx, stats.n_tx))
    return np.einsum(
        "ij,djk,lk->dil", stats.u_r, stats.gtilde * w, stats.u_t.conj()
    )


def snr_to_power(snr_db: float, stats: UserStatistics) -> float:
    """Per-user power budget that realizes the requested SNR.

    SNR is defined as E[tr(H H^H)] * P / (n_tx * n_rx) with unit noise
    variance, so P = 10^(snr/10) * n_tx * n_rx / sum(G).
    """
    lin = 10.0 ** (snr_db / 10.0)
    return lin * stats.n_tx * stats.n_rx / stats.coupling_sum


@dataclass
class PrecoderSet:
    """Per-user precoders with their power budgets and rate weights.

    Users must already be sorted by nonincreasing weight; `sort_users`
    produces that ordering from unsorted inputs.
    """

    matrices: list[np.ndarray]
    powers: list[float]
    weights: list[float]
    power_tol: float = 1e-9

    def __post_init__(self):
        self.matrices = [_as_complex(b) for b in self.matrices]
        self.powers = [float(p) for p in self.powers]
        self.weights = [float(w) for w in self.weights]
        k = len(self.matrices)
        if not (len(self.powers) == len(self.weights) == k) or k == 0:
            raise ValidationError("matrices, powers and weights must align")
        if any(w < 0 for w in self.weights):
            raise ValidationError("weights must be nonnegative")
        if any(
            self.weights[i] < self.weights[i + 1] - 1e-12 for i in range(k - 1)
        ):
            raise ValidationError("weights must be sorted in nonincreasing order")
        for i, (b, p) in enumerate(zip(self.matrices, self.powers)):
            if b.ndim != 2 or b.shape[0] != b.shape[1]:
                raise ValidationError(f"precoder {i} must be square")
            if p <= 0:
                raise ValidationError(f"power budget {i} must be positive")
            used = float(np.real(np.trace(b @ b.conj().T)))
            if used > p * (1.0 + self.power_tol):
                raise ValidationError(
                    f"precoder {i} uses power {used:.6g} above budget {p:.6g}"
                )

    @property
    def n_users(self) -> int:
        return len(self.matrices)

    def weight_deltas(self) -> np.ndarray:
        """Successive weight differences, with an implicit trailing zero weight."""
        mu = np.asarray(self.weights + [0.0])
        return mu[:-1] - mu[1:]

    def replace_matrix(self, index: int, matrix: np.ndarray) -> "PrecoderSet":
        mats = list(self.matrices)
        mats[index] = matrix
        return PrecoderSet(
            matrices=mats,
            powers=list(self.powers),
            weights=list(self.weights),
            power_tol=self.power_tol,
        )


@dataclass(frozen=True)
class UserOrdering:
    """Mapping between input order and decoding-priority order."""

    order: tuple  # order[i] = input index of the user at sorted position i

    def permute(self, items: list) -> list:
        return [items[i] for i in self.order]

    def restore(self, items: list) -> list:
        out = [None] * len(self.order)
        for pos, idx in enumerate(self.order):
            out[idx] = items[pos]
        return out


def sort_users(weights: list[float]) -> UserOrdering:
    """Sort users by descending weight; ties keep input order (stable)."""
    order = sorted(range(len(weights)), key=lambda i: (-float(weights[i]), i))
    return UserOrdering(order=tuple(order))
