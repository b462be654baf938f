"""Analytic ascent gradient of the asymptotic weighted sum rate.

The weighted sum rate is a sum over nested decoding groups, each a
function of the precoders both directly (through every user's
equivalent channel) and indirectly (through the solved gain/error fixed
point).  This module evaluates the full derivative with the Wirtinger
convention d/d(conj B), so the returned matrices are ascent directions:
B + u * grad increases the objective to first order in u.

At a converged fixed point the indirect chain contributions cancel
against each other, which this assembly reproduces term by term; the
chain machinery still matters away from convergence and is exposed for
inspection through the workspace.
"""

from dataclasses import dataclass

import numpy as np

from .channel import PrecoderSet
from .equivalent import LOG2E, EquivalentChannel, fourth_moment_blocks
from .errors import ValidationError
from .fixed_point import (
    FixedPointState,
    MacSystem,
    SolveOptions,
    WsrResult,
    _user_pool,
    wsr_objective,
)

def commutation_matrix(n: int) -> np.ndarray:
    """Permutation K with K vec(A) = vec(A^T) for n x n A (column-major vec)."""
    k = np.zeros((n * n, n * n))
    for a in range(n):
        for b in range(n):
            k[b + a * n, a + b * n] = 1.0
    return k


def xi_matrix(
    system: MacSystem,
    precoders: PrecoderSet,
    state: FixedPointState,
    user: int,
) -> np.ndarray:
    """Derivative kernel of the inner error covariance in one matrix.

    Column m + n*N of the returned (N^2, N^2) matrix, reshaped
    column-major to N x N, is d(inner_mse)/d(conj B[m, n]) for the given
    user's equivalent channel inside the state's decoding group.  Built
    from posterior conditional fourth moments over the state's frozen
    noise pool:

        Xi = -K (A1) - (A2),   A1 = E[Phi kron (Phi^T C)],
                               A2 = E[Psi* kron (Psi C)],

    with C = B^T conj(T), Phi/Psi the posterior conditional covariance
    and pseudo-covariance, and K the commutation matrix.
    """
    pos = state.user_position(user)
    stats = system.users[user]
    b = precoders.matrices[user]
    right = b.T @ state.gram[pos].conj()
    chan = EquivalentChannel(state.gram_sqrt[pos], b, system.alphabets[user])
    pool = _user_pool(state.seed, state.n_noise, stats.n_tx, user)
    a1, a2 = fourth_moment_blocks(chan, pool, right)
    k = commutation_matrix(stats.n_tx)
    return -k @ a1 - a2


@dataclass(frozen=True)
class GradientWorkspace:
    """Cached derivative chain of one (decoding group, user) pair.

    Holds everything needed to evaluate the three per-entry terms of the
    group's rate derivative with respect to conj(B) of the bound user:

    theta      : theta[i, m, n] = d(psi_i)/d(conj B[m, n])
    omega      : omega[t][r, m, n] = -d(gamma_{t, r})/d(conj B[m, n])
    direct     : direct[m, n], derivative of the user's own equivalent
                 channel information (bit factor excluded)
    gain_theta : coupling-weighted theta, G @ theta
    gamma_tilde: receive gains implied by the current joint covariance
    """

    state: FixedPointState
    user: int
    xi: np.ndarray
    theta: np.ndarray
    omega: dict
    direct: np.ndarray
    gain_theta: np.ndarray
    gamma_tilde: np.ndarray


def build_workspace(
    system: MacSystem,
    precoders: PrecoderSet,
    state: FixedPointState,
    user: int,
) -> GradientWorkspace:
    """Assemble the derivative chain for one user within one group state."""
    if user not in state.subset:
        raise ValidationError("user is not part of the state's decoding group")
    pos = state.user_position(user)
    stats = system.users[user]
    b = precoders.matrices[user]
    n = stats.n_tx

    xi = xi_matrix(system, precoders, state, user)
    # delta[i, j, m, q] = d(inner_mse[i, j]) / d(conj B[m, q])
    delta = xi.reshape(n, n, n, n, order="F")

    # theta: transmit-basis projection of the error-output derivative
    #   Q = B delta B^H + B E e_n e_m^H;  theta_i = u_i^H Q u_i
    u_t = stats.u_t
    p = u_t.conj().T @ b
    pe = p @ state.mse[pos].inner_mse
    theta = np.einsum("ia,abmq,ib->imq", p, delta, p.conj(), optimize=True)
    theta += np.einsum("iq,mi->imq", pe, u_t)

    gain_theta = np.einsum("rt,tmq->rmq", stats.coupling, theta)

    shrink = np.linalg.inv(
        np.eye(state.rx_cov_sum.shape[0]) + state.rx_cov_sum
    )
    gamma_tilde = np.einsum(
        "ri,ir->r", stats.u_r.conj().T @ shrink, stats.u_r
    ).real

    # omega[t]: negative gain derivative of each user in the group, through
    # the joint receive covariance
    omega = {}
    for j, t in enumerate(state.subset):
        other = system.users[t]
        y = stats.u_r.conj().T @ shrink @ other.u_r
        omega[t] = np.einsum("rn,rmq->nmq", np.abs(y) ** 2, gain_theta)

    direct = state.gram_sqrt[pos] @ state.mse[pos].sensitivity.conj().T
    return GradientWorkspace(
        state=state,
        user=user,
        xi=xi,
        theta=theta,
        omega=omega,
        direct=direct,
        gain_theta=gain_theta,
        gamma_tilde=gamma_tilde,
    )


def theta_terms(
    workspace: GradientWorkspace,
    system: MacSystem,
    t: int,
    m: int,
    n: int,
):
    """The three derivative terms of the group rate at entry (m, n).

    For user t of the workspace's group, with l the workspace user:

      term1: derivative of user t's equivalent-channel information,
             chain part -omega^T G psi plus the direct part when t = l
      term2: derivative of the gain/error coupling correction,
             -omega^T G psi plus gamma^T G theta when t = l
      term3: derivative of the joint log-determinant (depends on l only)

    All are in nats per unit conj(B[m, n]); term1 - term2 summed over t
    plus term3 gives the group's rate derivative up to the bit factor.
    """
    state = workspace.state
    l = workspace.user
    pos_t = state.user_position(t)
    stats_t = system.users[t]
    gpsi = stats_t.coupling @ state.tx_mse[pos_t]
    chain = -np.einsum("n,n->", workspace.omega[t][:, m, n], gpsi)
    term1 = chain
    term2 = chain
    if t == l:
        term1 = term1 + workspace.direct[m, n]
        pos_l = state.user_position(l)
        term2 = term2 + state.rx_gain[pos_l] @ workspace.gain_theta[:, m, n]
    term3 = workspace.gamma_tilde @ workspace.gain_theta[:, m, n]
    return term1, term2, term3


def _group_gradient(
    workspace: GradientWorkspace, system: MacSystem
) -> np.ndarray:
    """Full-matrix contribution of one group to the bound user's gradient."""
    state = workspace.state
    l = workspace.user
    pos_l = state.user_position(l)
    n = workspace.direct.shape[0]
    total = np.zeros((n, n), dtype=np.complex128)
    for t in state.subset:
        if t < l:
            continue
        pos_t = state.user_position(t)
        gpsi = system.users[t].coupling @ state.tx_mse[pos_t]
        chain = -np.einsum("nmq,n->mq", workspace.omega[t], gpsi)
        term1 = chain.copy()
        term2 = chain.copy()
        if t == l:
            term1 += workspace.direct
            term2 += np.einsum(
                "r,rmq->mq", state.rx_gain[pos_l], workspace.gain_theta
            )
        total += term1 - term2
    total += np.einsum("r,rmq->mq", workspace.gamma_tilde, workspace.gain_theta)
    return total


def wsr_gradient(
    system: MacSystem,
    precoders: PrecoderSet,
    opts: SolveOptions,
    result: WsrResult | None = None,
):
    """Ascent gradient of the weighted sum rate for every user.

    Returns a list of N_t x N_t complex matrices, one per user, in the
    d/d(conj B) convention scaled so that B_l + u * grad_l increases the
    objective to first order.  Reuses the group states of `result` when
    given (they must come from the same precoders and options); groups
    with zero weight difference contribute nothing and are skipped.
    """
    if result is None:
        result = wsr_objective(system, precoders, opts)
    deltas = precoders.weight_deltas()
    grads = [
        np.zeros((system.users[l].n_tx,) * 2, dtype=np.complex128)
        for l in range(precoders.n_users)
    ]
    for k_idx, state in enumerate(result.states):
        if deltas[k_idx] <= 0.0 or state is None:
            continue
        for l in state.subset:
            ws = build_workspace(system, precoders, state, l)
            grads[l] += deltas[k_idx] * _group_gradient(ws, system)
    return [2.0 * LOG2E * g for g in grads]
