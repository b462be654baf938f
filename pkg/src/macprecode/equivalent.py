"""The per-user equivalent transmit-side channel z = Tsqrt B d + v.

Under the large-system analysis each user sees a deterministic square
channel Tsqrt B driven by its own finite-alphabet vector d and unit
complex Gaussian noise.  This module evaluates the quantities the rest
of the package needs from that channel: the mutual information between
d and the observation, the error covariance of the posterior-mean
estimate, the sensitivity of the pool mutual information to the channel
matrix, and posterior fourth-moment blocks for the gradient machinery.
All of them enumerate the alphabet exactly and average the noise over a
frozen pool, so results are deterministic functions of (channel, pool),
and all are built from one posterior kernel evaluated at z = s_m + v.
That shared kernel matters: derivatives of the pool mutual information
then agree with the pool estimates of the other quantities identically,
not just in expectation.
"""

from dataclasses import dataclass

import numpy as np

from .channel import UserStatistics
from .constellation import VectorAlphabet
from .errors import ValidationError
from .sampling import noise_pool

LOG2E = np.log2(np.e)

_HERM_TOL = 1e-10
_EIG_FLOOR = 1e-12
# Guard against log(0) in the stabilized sum; unreachable at sane SNR.
_SUM_FLOOR = 1e-300
# Own-point exponent below which the shared column stabilizer would
# underflow the dominant term; such entries are recomputed exactly.
_SHIFT_GAP = -600.0
# Noise chunking keeps the (M, M, chunk) posterior tensor within ~64 MB.
_CHUNK_ENTRIES = 4_000_000


def sqrt_T(stats: UserStatistics, gamma: np.ndarray) -> np.ndarray:
    """Hermitian square root of the effective transmit gram matrix.

    The gram matrix shares the transmit eigenbasis and has eigenvalues
    G^T gamma; negative dust from Monte Carlo noise is clamped to zero
    before the square root.
    """
    lam = stats.coupling.T @ np.asarray(gamma, dtype=np.float64)
    lam = np.maximum(lam, 0.0)
    return stats.u_t @ np.diag(np.sqrt(lam)) @ stats.u_t.conj().T


def tx_gram(stats: UserStatistics, gamma: np.ndarray) -> np.ndarray:
    """Effective transmit gram matrix for the given receive-side gains."""
    lam = np.maximum(stats.coupling.T @ np.asarray(gamma, dtype=np.float64), 0.0)
    return stats.u_t @ np.diag(lam) @ stats.u_t.conj().T


@dataclass(frozen=True)
class EquivalentChannel:
    """Deterministic channel Tsqrt @ B driving one user's alphabet."""

    gram_sqrt: np.ndarray
    precoder: np.ndarray
    alphabet: VectorAlphabet

    def __post_init__(self):
        g = np.asarray(self.gram_sqrt, dtype=np.complex128)
        b = np.asarray(self.precoder, dtype=np.complex128)
        n = g.shape[0]
        if g.shape != (n, n) or b.shape != (n, n):
            raise ValidationError("gram_sqrt and precoder must be square and match")
        if self.alphabet.vectors.shape[1] != n:
            raise ValidationError("alphabet antenna count must match the precoder")
        if np.max(np.abs(g - g.conj().T)) > _HERM_TOL:
            raise ValidationError("gram_sqrt must be Hermitian")
        if np.min(np.linalg.eigvalsh(g)) < -_HERM_TOL:
            raise ValidationError("gram_sqrt must be positive semidefinite")
        object.__setattr__(self, "gram_sqrt", g)
        object.__setattr__(self, "precoder", b)

    @property
    def n_tx(self) -> int:
        return self.gram_sqrt.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """The composite channel Tsqrt @ B."""
        return self.gram_sqrt @ self.precoder

    def effective_points(self) -> np.ndarray:
        """All M transmitted points Tsqrt B a_j, shape (M, n_tx)."""
        return self.alphabet.vectors @ self.matrix.T


@dataclass(frozen=True)
class MmseResult:
    """Estimation-theoretic summaries of the equivalent channel over a pool.

    inner_mse   : E[(d - dhat)(d - dhat)^H], Hermitian, 0 <= . <= I
    omega       : B inner_mse B^H
    sensitivity : W0 with  d(pool MI)/dB* = log2(e) * Tsqrt @ W0^H;  its
                  expectation over the noise is inner_mse @ B^H @ Tsqrt
    samples     : number of noise draws averaged
    seed        : seed of the pool, or None when an explicit pool was given
    """

    inner_mse: np.ndarray
    omega: np.ndarray
    sensitivity: np.ndarray
    samples: int
    seed: int | None = None


def _pair_sq_dists(points: np.ndarray) -> np.ndarray:
    """d2[m, p] = || points[p] - points[m] ||^2."""
    diff = points[None, :, :] - points[:, None, :]
    return np.einsum("mpt,mpt->mp", diff, diff.conj()).real


def _noise_overlap(points: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """r[j, i] = 2 Re <points[j], noise[i]>, shape (M, n)."""
    return 2.0 * (points.conj() @ noise.T).real


def posterior_chunks(chan: EquivalentChannel, noise: np.ndarray):
    """Posterior weights and means for every (transmitted vector, noise draw).

    Yields (w, dhat, v) chunks where w[m, j, i] is the posterior weight of
    candidate j given z = s_m + v_i, dhat[m, i, :] the posterior mean, and
    v the noise rows of the chunk.  Enumerates all M transmitted vectors
    against each noise draw in the pool.
    """
    alphabet = chan.alphabet.vectors
    points = chan.effective_points()
    m_size = points.shape[0]
    d2 = _pair_sq_dists(points)
    chunk = max(1, _CHUNK_ENTRIES // (m_size * m_size))
    for lo in range(0, noise.shape[0], chunk):
        v = noise[lo : lo + chunk]
        r = _noise_overlap(points, v)  # (M, c)
        # Posterior log-weights of candidate j given z = s_m + v_i.
        logits = -d2[:, :, None] + r[None, :, :]  # (m, j, i)
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        w /= w.sum(axis=1, keepdims=True)
        dhat = np.einsum("mji,jt->mit", w, alphabet)
        yield w, dhat, v


def posterior_mean_errors(chan: EquivalentChannel, noise: np.ndarray):
    """Estimation errors d - dhat, yielded as ((M * chunk, n_tx), count)."""
    alphabet = chan.alphabet.vectors
    for w, dhat, v in posterior_chunks(chan, noise):
        err = alphabet[:, None, :] - dhat
        yield err.reshape(-1, chan.n_tx), v.shape[0]


def mmse_estimate(chan: EquivalentChannel, observations: np.ndarray) -> np.ndarray:
    """Posterior mean of d for each observation row (n, n_tx) -> (n, n_tx)."""
    z = np.atleast_2d(np.asarray(observations, dtype=np.complex128))
    points = chan.effective_points()
    # log weight of candidate j: -||z - s_j||^2, up to z-only terms
    sq = np.abs(z[:, None, :] - points[None, :, :]) ** 2
    logits = -sq.sum(axis=2)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    return w @ chan.alphabet.vectors


def mse_matrix_from_pool(chan: EquivalentChannel, noise: np.ndarray) -> MmseResult:
    """Error covariance and MI sensitivity over an explicit noise pool.

    One pass accumulates both E[(d - dhat)(d - dhat)^H] and the matrix
    W0 = E[M2 Ht^H - dhat z^H + d ehat^H] with M2 the posterior second
    moment, Ht = Tsqrt B, z = s_m + v and ehat = z - Ht dhat.  W0 is the
    exact derivative of the pool mutual information with respect to the
    composite channel: d(pool MI)/dHt, transposed; in expectation it
    equals inner_mse @ B^H @ Tsqrt.
    """
    n = chan.n_tx
    alphabet = chan.alphabet.vectors
    points = chan.effective_points()
    ht = chan.matrix
    m_size = chan.alphabet.size
    acc = np.zeros((n, n), dtype=np.complex128)
    wsum = np.zeros(m_size)
    dz = np.zeros((n, n), dtype=np.complex128)
    ad = np.zeros((n, n), dtype=np.complex128)
    vsum = np.zeros(n, dtype=np.complex128)
    total = 0
    for w, dhat, v in posterior_chunks(chan, noise):
        err = alphabet[:, None, :] - dhat
        acc += np.einsum("mit,miu->tu", err, err.conj())
        wsum += w.sum(axis=(0, 2))
        dz += np.einsum("mia,mb->ab", dhat, points.conj())
        dz += np.einsum("mia,ib->ab", dhat, v.conj())
        ad += np.einsum("ma,mib->ab", alphabet, dhat.conj())
        vsum += v.sum(axis=0)
        total += v.shape[0] * m_size
    inner = acc / total
    inner = 0.5 * (inner + inner.conj().T)
    b = chan.precoder
    omega = b @ inner @ b.conj().T
    omega = 0.5 * (omega + omega.conj().T)
    w0 = np.einsum("j,ja,jb->ab", wsum / total, alphabet, points.conj())
    w0 -= dz / total
    w0 += (alphabet.T @ points.conj()) / m_size
    w0 += np.outer(alphabet.sum(axis=0), vsum.conj()) / total
    w0 -= (ad / total) @ ht.conj().T
    return MmseResult(
        inner_mse=inner,
        omega=omega,
        sensitivity=w0,
        samples=noise.shape[0],
        seed=None,
    )


def mse_matrix(chan: EquivalentChannel, n_noise: int, seed: int) -> MmseResult:
    """Error covariance and MI sensitivity with a pool drawn from (seed)."""
    pool = noise_pool(seed, n_noise, chan.n_tx, "mse")
    res = mse_matrix_from_pool(chan, pool)
    return MmseResult(
        inner_mse=res.inner_mse,
        omega=res.omega,
        sensitivity=res.sensitivity,
        samples=n_noise,
        seed=seed,
    )


def mi_from_points(points: np.ndarray, noise: np.ndarray) -> float:
    """Mutual information in bits of a uniform discrete input over points.

    Averages  log2 M - E[ log2  sum_p exp(-(||z - s_p||^2 - ||v||^2)) ]
    with z = s_m + v over the enumerated points, so the Gibbs kernel is
    evaluated at the same observations as the posterior-mean path.  The
    inner sum is a column-stabilized matrix product, which keeps large
    alphabets cheap; entries whose own-point term the shared stabilizer
    would underflow (point clouds far wider than the noise) are redone
    with an exact per-entry log-sum-exp.  Works for any point dimension,
    so it serves both the equivalent channel and realized multi-user
    channels.
    """
    m_size = points.shape[0]
    d2 = _pair_sq_dists(points)
    gain = np.exp(-d2)  # (m, p); unit diagonal
    acc = 0.0
    total = 0
    chunk = max(1, _CHUNK_ENTRIES // (m_size * m_size))
    for lo in range(0, noise.shape[0], chunk):
        v = noise[lo : lo + chunk]
        r = _noise_overlap(points, v)  # (p, i)
        shift = r.max(axis=0)  # per-noise column stabilizer
        inner = gain @ np.exp(r - shift[None, :])
        logsum = np.log(np.maximum(inner, _SUM_FLOOR)) + shift[None, :] - r
        for m, i in zip(*np.nonzero(r - shift[None, :] <= _SHIFT_GAP)):
            expo = -d2[m] + r[:, i] - r[m, i]
            expo[m] = -np.inf  # own point enters as the 1 in log1p
            logsum[m, i] = np.log1p(np.exp(expo).sum())
        acc += float(logsum.sum())
        total += r.size
    bits = np.log2(m_size) - (acc / total) * LOG2E
    return float(np.clip(bits, 0.0, np.log2(m_size)))


def mi_from_pool(chan: EquivalentChannel, noise: np.ndarray) -> float:
    """Mutual information in bits between d and z over an explicit noise pool."""
    return mi_from_points(chan.effective_points(), noise)


def finite_alphabet_mi(chan: EquivalentChannel, n_noise: int, seed: int) -> float:
    """Mutual information in bits with a pool drawn freshly from (seed)."""
    pool = noise_pool(seed, n_noise, chan.n_tx, "mi")
    return mi_from_pool(chan, pool)


def fourth_moment_blocks(
    chan: EquivalentChannel, noise: np.ndarray, right: np.ndarray
):
    """Posterior fourth-moment Kronecker blocks for the MSE derivative.

    With Phi(z) = Cov(d | z) and Psi(z) = E[(d - dhat)(d - dhat)^T | z]
    (conditional covariance and pseudo-covariance of the posterior),
    returns the pair of pool averages

        A1 = E[ Phi  kron (Phi^T @ right) ]
        A2 = E[ Psi* kron (Psi  @ right) ]

    each of shape (n_tx^2, n_tx^2) in standard Kronecker layout.  The
    observation average runs over z = s_m + v for the enumerated alphabet
    and the given pool, matching the posterior kernel used everywhere
    else in this module.
    """
    n = chan.n_tx
    alphabet = chan.alphabet.vectors
    a1 = np.zeros((n, n, n, n), dtype=np.complex128)
    a2 = np.zeros((n, n, n, n), dtype=np.complex128)
    total = 0
    for w, dhat, v in posterior_chunks(chan, noise):
        m2 = np.einsum("mji,ja,jb->miab", w, alphabet, alphabet.conj())
        phi = m2 - np.einsum("mia,mib->miab", dhat, dhat.conj())
        m2t = np.einsum("mji,ja,jb->miab", w, alphabet, alphabet)
        psi = m2t - np.einsum("mia,mib->miab", dhat, dhat)
        phi = phi.reshape(-1, n, n)
        psi = psi.reshape(-1, n, n)
        phi_tc = np.einsum("sxa,xb->sab", phi, right)
        psi_c = np.einsum("sax,xb->sab", psi, right)
        a1 += np.einsum("sij,sab->iajb", phi, phi_tc)
        a2 += np.einsum("sij,sab->iajb", psi.conj(), psi_c)
        total += phi.shape[0]
    nn = n * n
    return a1.reshape(nn, nn) / total, a2.reshape(nn, nn) / total
