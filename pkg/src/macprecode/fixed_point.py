"""Self-consistent large-system description of the multiple access channel.

For an ordered user subset the large-system analysis replaces the random
channels by two coupled families of vectors: per-receive-eigenmode gains
(one vector per user, entries in (0, 1]) and per-transmit-eigenmode
residual error energies.  Their defining equations are solved by damped
alternation; the converged state yields a deterministic equivalent
channel per user and an asymptotic conditional mutual information for
the subset, from which the weighted sum rate is assembled.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import PrecoderSet, UserStatistics
from .constellation import VectorAlphabet
from .equivalent import (
    LOG2E,
    EquivalentChannel,
    MmseResult,
    mi_from_pool,
    mse_matrix_from_pool,
    sqrt_T,
    tx_gram,
)
from .errors import ValidationError
from .sampling import noise_pool

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MacSystem:
    """Channel statistics and symbol alphabets of all users, decoding order."""

    users: tuple
    alphabets: tuple

    def __post_init__(self):
        if len(self.users) != len(self.alphabets) or not self.users:
            raise ValidationError("need one alphabet per user")
        for stats, alph in zip(self.users, self.alphabets):
            if alph.vectors.shape[1] != stats.n_tx:
                raise ValidationError("alphabet antenna count mismatch")
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "alphabets", tuple(self.alphabets))

    @property
    def n_users(self) -> int:
        return len(self.users)


@dataclass
class SolveOptions:
    """Controls for the damped fixed-point iteration and its Monte Carlo."""

    tol: float = 1e-6
    max_iter: int = 200
    damping: float = 0.5
    n_noise: int = 500
    mi_noise: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValidationError("damping must lie in (0, 1]")
        if self.tol <= 0 or self.max_iter < 1 or self.n_noise < 1:
            raise ValidationError("tol, max_iter and n_noise must be positive")

    @property
    def mi_samples(self) -> int:
        return self.n_noise if self.mi_noise is None else self.mi_noise


@dataclass(frozen=True)
class FixedPointState:
    """Converged (or best-effort) solution for one ordered user subset.

    Per user: rx_gain (length n_rx), tx_mse (length n_tx), the effective
    gram matrix with its Hermitian square root, and the receive-side
    covariance contribution.  rx_cov_sum collects all users in the
    subset.  residual is the largest relative self-consistency mismatch
    of the final iterate.
    """

    subset: tuple
    rx_gain: tuple
    tx_mse: tuple
    gram: tuple
    gram_sqrt: tuple
    rx_cov: tuple
    rx_cov_sum: np.ndarray
    mse: tuple
    residual: float
    iterations: int
    converged: bool
    seed: int
    n_noise: int

    def user_position(self, user: int) -> int:
        return self.subset.index(user)


def _user_pool(seed: int, n_noise: int, n_tx: int, user: int) -> np.ndarray:
    # One stream per (seed, user): the error-covariance and mutual-information
    # estimators draw from the same pool, so with equal sample counts they see
    # identical noise and the two estimates stay consistent term by term.
    return noise_pool(seed, n_noise, n_tx, "fp-noise", user)


# Floor for structurally unused transmit directions (zero coupling column);
# their error-energy entry is forced to zero rather than divided by zero.
_GAIN_FLOOR = 1e-12


def _psi_projection(
    stats: UserStatistics,
    gamma: np.ndarray,
    precoder: np.ndarray,
    sensitivity: np.ndarray,
) -> np.ndarray:
    """Per-transmit-eigenmode error energies from the MI sensitivity.

    psi_m = Re{ [U^H B W0 U]_mm } / sqrt(lambda_m) with lambda = G^T gamma,
    chosen so that the pool identity  d(pool MI)/dgamma_n = log2(e)(G psi)_n
    holds exactly, draw for draw.  In expectation this equals the usual
    transmit-basis projection of B E B^H.
    """
    lam = np.maximum(stats.coupling.T @ np.asarray(gamma, dtype=np.float64), 0.0)
    u = stats.u_t
    diag = np.einsum("mi,ij,jm->m", u.conj().T, precoder @ sensitivity, u).real
    psi = np.where(lam > _GAIN_FLOOR, diag / np.sqrt(np.maximum(lam, _GAIN_FLOOR)), 0.0)
    return np.maximum(psi, 0.0)


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    # Absolute-plus-relative scaling: blocks that vanish at the fixed
    # point (error energies at high SNR) converge absolutely instead of
    # chasing the relative jitter of numbers near zero.
    return float(
        np.max(np.abs(new - old)) / (1.0 + np.max(np.abs(old)))
    )


def solve_fixed_point(
    system: MacSystem,
    precoders: PrecoderSet,
    subset,
    opts: SolveOptions,
    warm_start: FixedPointState | None = None,
) -> FixedPointState:
    """Solve the coupled gain/error equations for an ordered user subset.

    The iteration alternates the error update (from the current gains)
    with the gain update (from the refreshed error energies), damping
    both moves.  The residual is the mismatch of the undamped update
    scaled by one plus the iterate's magnitude, so a converged state
    certifies self-consistency at `tol` on every block whatever its
    size.
    Noise pools are frozen per (seed, user), making the solve a
    deterministic function of the precoders.
    """
    subset = tuple(int(t) for t in subset)
    if len(set(subset)) != len(subset) or not subset:
        raise ValidationError("subset must be nonempty without repeats")
    stats = [system.users[t] for t in subset]
    pools = [
        _user_pool(opts.seed, opts.n_noise, s.n_tx, t)
        for t, s in zip(subset, stats)
    ]
    mats = [precoders.matrices[t] for t in subset]

    if warm_start is not None and warm_start.subset == subset:
        gamma = [np.array(g, dtype=np.float64) for g in warm_start.rx_gain]
        psi = [np.array(p, dtype=np.float64) for p in warm_start.tx_mse]
    else:
        gamma = [np.ones(s.n_rx) for s in stats]
        psi = None

    mse_results = [None] * len(subset)
    gram_sqrt = [None] * len(subset)
    residual = np.inf
    converged = False
    iterations = 0
    for iterations in range(1, opts.max_iter + 1):
        residual = 0.0
        # error update from the current gains
        psi_raw = []
        for j, (s, b) in enumerate(zip(stats, mats)):
            gram_sqrt[j] = sqrt_T(s, gamma[j])
            chan = EquivalentChannel(gram_sqrt[j], b, system.alphabets[subset[j]])
            mse_results[j] = mse_matrix_from_pool(chan, pools[j])
            psi_raw.append(
                _psi_projection(s, gamma[j], b, mse_results[j].sensitivity)
            )
        if psi is None:
            psi = psi_raw
        else:
            residual = max(
                residual,
                max(_rel_change(r, p) for r, p in zip(psi_raw, psi)),
            )
            psi = [
                (1.0 - opts.damping) * p + opts.damping * r
                for p, r in zip(psi, psi_raw)
            ]
        # gain update from the refreshed error energies
        rx_cov = [
            s.u_r @ np.diag(s.coupling @ p) @ s.u_r.conj().T
            for s, p in zip(stats, psi)
        ]
        rx_sum = np.sum(rx_cov, axis=0)
        shrink = np.linalg.inv(np.eye(rx_sum.shape[0]) + rx_sum)
        gamma_raw = []
        for s in stats:
            diag = np.einsum("ni,ij,jn->n", s.u_r.conj().T, shrink, s.u_r).real
            gamma_raw.append(np.maximum(diag, 0.0))
        residual = max(
            residual,
            max(_rel_change(r, g) for r, g in zip(gamma_raw, gamma)),
        )
        gamma = [
            (1.0 - opts.damping) * g + opts.damping * r
            for g, r in zip(gamma, gamma_raw)
        ]
        if residual <= opts.tol:
            converged = True
            break
    if not converged:
        log.debug(
            "fixed point stopped at residual %.3g after %d iterations",
            residual,
            iterations,
        )

    # final consistent snapshot at the last iterate
    gram = [tx_gram(s, g) for s, g in zip(stats, gamma)]
    gram_sqrt = [sqrt_T(s, g) for s, g in zip(stats, gamma)]
    for j, (s, b) in enumerate(zip(stats, mats)):
        chan = EquivalentChannel(gram_sqrt[j], b, system.alphabets[subset[j]])
        mse_results[j] = mse_matrix_from_pool(chan, pools[j])
    rx_cov = [
        s.u_r @ np.diag(s.coupling @ p) @ s.u_r.conj().T
        for s, p in zip(stats, psi)
    ]
    rx_sum = np.sum(rx_cov, axis=0)
    return FixedPointState(
        subset=subset,
        rx_gain=tuple(gamma),
        tx_mse=tuple(psi),
        gram=tuple(gram),
        gram_sqrt=tuple(gram_sqrt),
        rx_cov=tuple(rx_cov),
        rx_cov_sum=rx_sum,
        mse=tuple(mse_results),
        residual=float(residual),
        iterations=iterations,
        converged=converged,
        seed=opts.seed,
        n_noise=opts.n_noise,
    )


def asymptotic_conditional_mi(
    system: MacSystem,
    precoders: PrecoderSet,
    state: FixedPointState,
    mi_samples: int | None = None,
) -> float:
    """Asymptotic conditional mutual information of the subset, in bits.

    Sum of the per-user equivalent-channel informations, plus the
    log-determinant of the joint receive covariance, minus the coupling
    correction between gains and error energies.
    """
    n_samples = mi_samples if mi_samples is not None else state.n_noise
    total = 0.0
    for j, t in enumerate(state.subset):
        stats = system.users[t]
        chan = EquivalentChannel(
            state.gram_sqrt[j], precoders.matrices[t], system.alphabets[t]
        )
        pool = _user_pool(state.seed, n_samples, stats.n_tx, t)
        total += mi_from_pool(chan, pool)
        total -= LOG2E * float(
            state.rx_gain[j] @ stats.coupling @ state.tx_mse[j]
        )
    sign, logdet = np.linalg.slogdet(
        np.eye(state.rx_cov_sum.shape[0]) + state.rx_cov_sum
    )
    if sign.real <= 0:
        raise ValidationError("joint receive covariance lost positive definiteness")
    total += float(logdet) * LOG2E
    return total


@dataclass
class WsrResult:
    """Weighted sum rate with its per-group decomposition."""

    value: float
    group_mi: list = field(default_factory=list)
    states: list = field(default_factory=list)


def wsr_objective(
    system: MacSystem,
    precoders: PrecoderSet,
    opts: SolveOptions,
    warm_states: list | None = None,
) -> WsrResult:
    """Weighted sum rate over nested decoding groups.

    Group k covers the first k users in decoding-priority order and is
    weighted by the k-th successive weight difference; groups with a
    zero difference are skipped and carry no state.
    """
    deltas = precoders.weight_deltas()
    k_total = precoders.n_users
    states: list = [None] * k_total
    group_mi: list = [0.0] * k_total
    value = 0.0
    for k in range(1, k_total + 1):
        if deltas[k - 1] <= 0.0:
            continue
        warm = None
        if warm_states is not None and warm_states[k - 1] is not None:
            warm = warm_states[k - 1]
        state = solve_fixed_point(
            system, precoders, tuple(range(k)), opts, warm_start=warm
        )
        mi = asymptotic_conditional_mi(
            system, precoders, state, mi_samples=opts.mi_samples
        )
        states[k - 1] = state
        group_mi[k - 1] = mi
        value += float(deltas[k - 1]) * mi
    return WsrResult(value=value, group_mi=group_mi, states=states)
