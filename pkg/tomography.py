"""
Pauli-basis single-qubit tomography: shot-noise sampling, linear inversion and
projection onto the Bloch ball.
"""

from dataclasses import dataclass
import numpy as np
from scipy.stats import binom
from qstate import density_to_bloch, as_bloch_vector

BASES = ('X', 'Y', 'Z')
# keeps binom.ppf away from its u = 0 branch (which returns -1)
_MIN_UNIFORM = np.finfo(np.float64).tiny


@dataclass(frozen=True, eq=False)
class PauliCounts:
    """
    Outcome tallies per Pauli basis.

    counts[k] = (n_plus, n_minus) for basis k in X, Y, Z; each row sums to
    shots_per_basis.
    """
    shots_per_basis: int
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        assert counts.shape == (3, 2), f'counts must be of shape (3, 2), got {counts.shape}'
        assert self.shots_per_basis >= 1, f'shots_per_basis must be positive, got {self.shots_per_basis}'
        assert np.all(counts >= 0), f'counts must be non-negative, got {counts}'
        assert np.all(counts.sum(axis=1) == self.shots_per_basis), f'each basis must sum to {self.shots_per_basis}, got {counts}'

    @property
    def total_shots(self):
        return 3 * self.shots_per_basis


@dataclass(frozen=True, eq=False)
class TomographyEstimate:
    raw: np.ndarray
    projected: np.ndarray
    was_projected: bool


def _counts_from_plus(n_plus, shots):
    n_plus = np.asarray(n_plus, dtype=np.int64)
    return PauliCounts(shots_per_basis=int(shots), counts=np.stack([n_plus, shots - n_plus], axis=1))


def sample_pauli_counts(state, shots, stream):
    """
    Measure `shots` copies of `state` in each Pauli basis.

    n_plus for basis k is Binomial(S, (1 + r_k) / 2), drawn by inverse CDF from
    one uniform per basis, so the result is fixed by the stream state.
    Args:
        state (np.ndarray): (2, 2) density matrix.
        shots (int): shots per basis S.
        stream (np.random.Generator): random stream, advanced by 3 draws.
    Returns:
        PauliCounts
    """
    assert shots >= 1, f'shots must be positive, got {shots}'
    r = density_to_bloch(state)
    p_plus = np.clip((1 + r) / 2, 0.0, 1.0)
    uniforms = np.clip(stream.random(3), _MIN_UNIFORM, None)
    n_plus = binom.ppf(uniforms, shots, p_plus)
    # eigenstates of a basis give deterministic outcomes
    n_plus = np.where(p_plus >= 1.0, shots, np.where(p_plus <= 0.0, 0, n_plus))
    return _counts_from_plus(np.rint(n_plus), shots)


def noiseless_pauli_counts(state, shots):
    """Expected counts rounded to integers; no shot noise."""
    assert shots >= 1, f'shots must be positive, got {shots}'
    r = density_to_bloch(state)
    n_plus = np.rint(np.clip((1 + r) / 2, 0.0, 1.0) * shots)
    return _counts_from_plus(n_plus, shots)


def estimate_bloch(counts):
    """Linear inversion r_k = (n_plus - n_minus) / S; may be non-physical."""
    c = np.asarray(counts.counts, dtype=np.float64)
    return (c[:, 0] - c[:, 1]) / counts.shots_per_basis


def project_physical(raw):
    """
    Maximum-likelihood physicality projection for one qubit.

    Clipping the negative eigenvalue of an unphysical estimate and renormalising
    is, for a qubit, radial projection of the Bloch vector onto the unit sphere.
    """
    raw = as_bloch_vector(raw)
    norm = np.linalg.norm(raw)
    if norm <= 1:
        return TomographyEstimate(raw=raw, projected=raw, was_projected=False)
    return TomographyEstimate(raw=raw, projected=raw / norm, was_projected=True)


def reconstruct_state(counts):
    return project_physical(estimate_bloch(counts))
