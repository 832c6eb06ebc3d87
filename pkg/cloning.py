"""
Universal symmetric optimal N -> M qubit cloning.

Only single-clone marginals are modelled. Each receiver measures one clone per
cloning execution, so the entangled joint state of a clone group is never needed.
"""

from dataclasses import dataclass
import numpy as np
from numba import njit
from qstate import bloch_to_density, pure_state_vector, as_bloch_vector
from utils import DomainError

PURE_MESSAGE_TOL = 1e-9
ORACLE_MAX_M = 10 ** 6


def _check_counts(n_in, m_out):
    if int(n_in) != n_in or int(m_out) != m_out:
        raise DomainError(f'N and M must be integers, got N={n_in}, M={m_out}')
    if n_in < 1 or m_out < n_in:
        raise DomainError(f'cloning requires 1 <= N <= M, got N={n_in}, M={m_out}')


def shrinking_factor(n_in, m_out):
    """
    Factor eta(N, M) = (N / M) * ((M + 2) / (N + 2)) by which optimal cloning
    shrinks the message Bloch vector.
    """
    _check_counts(n_in, m_out)
    return (n_in / m_out) * ((m_out + 2) / (n_in + 2))


def optimal_fidelity(n_in, m_out):
    """Optimal single-clone fidelity F(N, M) = (MN + M + N) / (M (N + 2))."""
    _check_counts(n_in, m_out)
    return (m_out * n_in + m_out + n_in) / (m_out * (n_in + 2))


@dataclass(frozen=True)
class CloneParams:
    n_in: int
    m_out: int
    eta: float

    def __post_init__(self):
        _check_counts(self.n_in, self.m_out)
        if self.eta != shrinking_factor(self.n_in, self.m_out):
            raise DomainError(f'eta={self.eta} does not match the shrinking factor of N={self.n_in}, M={self.m_out}')

    @classmethod
    def create(cls, n_in, m_out):
        return cls(n_in=int(n_in), m_out=int(m_out), eta=shrinking_factor(n_in, m_out))


@dataclass(frozen=True, eq=False)
class GisinMassarWeights:
    m_out: int
    weights: np.ndarray


def gisin_massar_weights(m_out):
    """alpha_j^2 = 2 (M - j) / (M (M + 1)) for j = 0 .. M-1."""
    if m_out < 1:
        raise DomainError(f'M must be positive, got {m_out}')
    j = np.arange(m_out, dtype=np.float64)
    weights = 2.0 * (m_out - j) / (m_out * (m_out + 1.0))
    return GisinMassarWeights(m_out=int(m_out), weights=weights)


def _as_pure_message(message):
    message = as_bloch_vector(message)
    norm = np.linalg.norm(message)
    if abs(norm - 1) > PURE_MESSAGE_TOL:
        raise DomainError(f'message must be a pure state (norm 1), got norm {norm}')
    return message / norm


def emulate_clone_state(message, params):
    """
    Reduced state of a single clone: the message Bloch vector shrunk by eta.

    Args:
        message (np.ndarray): (3,) unit Bloch vector of the pure message.
        params (CloneParams): cloning channel.
    Returns:
        np.ndarray: (2, 2) density matrix of one clone.
    """
    message = _as_pure_message(message)
    return bloch_to_density(params.eta * message)


@njit(cache=True)
def _marginal_populations(weights):
    # sum over the symmetric-subspace terms, one j at a time (compensated, M can reach 10**6)
    m_out = weights.shape[0]
    p_message, c_message = 0.0, 0.0
    p_orthogonal, c_orthogonal = 0.0, 0.0
    for j in range(m_out):
        alpha_sq = weights[j]
        y = alpha_sq * (m_out - j) / m_out - c_message
        t = p_message + y
        c_message = (t - p_message) - y
        p_message = t
        y = alpha_sq * j / m_out - c_orthogonal
        t = p_orthogonal + y
        c_orthogonal = (t - p_orthogonal) - y
        p_orthogonal = t
    return p_message, p_orthogonal


def gisin_massar_single_clone_marginal(message, m_out):
    """
    Single-clone marginal of the optimal 1 -> M cloner, summed term by term over
    the symmetric-subspace decomposition

        rho_1 = sum_j alpha_j^2 [ (M-j)/M |psi><psi| + j/M |psi_perp><psi_perp| ].

    No shrinking-factor formula is used, so the result is an independent check
    on emulate_clone_state.

    Args:
        message (np.ndarray): (3,) unit Bloch vector.
        m_out (int): number of clones, 2 <= M <= 10**6.
    Returns:
        np.ndarray: (2, 2) density matrix.
    """
    message = _as_pure_message(message)
    if int(m_out) != m_out or m_out < 2 or m_out > ORACLE_MAX_M:
        raise DomainError(f'oracle supports 2 <= M <= {ORACLE_MAX_M}, got M={m_out}')
    psi = pure_state_vector(message)
    psi_perp = np.array([-np.conj(psi[1]), np.conj(psi[0])], dtype=np.complex128)
    p_message, p_orthogonal = _marginal_populations(gisin_massar_weights(int(m_out)).weights)
    return p_message * np.outer(psi, psi.conj()) + p_orthogonal * np.outer(psi_perp, psi_perp.conj())
