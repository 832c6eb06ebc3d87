"""
Single-qubit state representations, conversions and error metrics.

NOTE: a Bloch vector is a float64 array of shape (3,) ordered (x, y, z); a
density matrix is a complex128 array of shape (2, 2) ordered [[a, b], [c, d]].

NOTE: the inverse conversion uses z = Re(a - d). The literature formula
Re(d - a) contradicts the forward matrix (top-left entry 0.5 + 0.5z) and would
flip every state through the equator on a round trip.
"""

from dataclasses import dataclass
import numpy as np
from numba import njit
from utils import DomainError, DegenerateInputError, clamped_arccos

PHYSICAL_NORM_TOL = 1e-9
DEGENERATE_NORM = 1e-9
MATRIX_TOL = 1e-12
# |det| below this is rounding noise on a pure state
PURE_DET_TOL = 1e-15


@dataclass(frozen=True, eq=False)
class ExtrapolationResult:
    t: float
    point: np.ndarray
    degenerate: bool


def as_bloch_vector(v):
    """
    Validate and convert to a (3,) float64 Bloch vector.

    Raises:
        DomainError: wrong shape or non-finite components.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise DomainError(f'Bloch vector must have shape (3,), got {v.shape}')
    if not np.all(np.isfinite(v)):
        raise DomainError(f'Bloch vector has non-finite components: {v}')
    return v


def is_physical(v):
    return np.linalg.norm(v) <= 1 + PHYSICAL_NORM_TOL


def validate_density_matrix(rho):
    """
    Check the 2x2 density matrix invariants (Hermitian, unit trace, PSD) within 1e-12.

    Returns:
        np.ndarray: rho as a complex128 (2, 2) array.
    Raises:
        DomainError: any invariant violated.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (2, 2):
        raise DomainError(f'density matrix must have shape (2, 2), got {rho.shape}')
    if not np.all(np.isfinite(rho)):
        raise DomainError('density matrix has non-finite entries')
    if np.max(np.abs(rho - rho.conj().T)) > MATRIX_TOL:
        raise DomainError(f'density matrix is not Hermitian:\n{rho}')
    trace = np.trace(rho).real
    if abs(trace - 1) > MATRIX_TOL:
        raise DomainError(f'density matrix trace is {trace}, expected 1')
    eigvals = np.linalg.eigvalsh(rho)
    if eigvals[0] < -MATRIX_TOL:
        raise DomainError(f'density matrix is not PSD (eigenvalues {eigvals})')
    return rho


def bloch_to_density(v):
    """
    Convert Bloch coordinates to the density matrix
        [[0.5 + 0.5z, 0.5x - 0.5y i],
         [0.5x + 0.5y i, 0.5 - 0.5z]]

    Vectors whose norm exceeds 1 by at most 1e-9 are rescaled onto the sphere.

    Args:
        v (np.ndarray): (3,) Bloch vector.
    Returns:
        np.ndarray: (2, 2) complex density matrix.
    Raises:
        DomainError: norm(v) > 1 + 1e-9.
    """
    v = as_bloch_vector(v)
    norm = np.linalg.norm(v)
    if norm > 1 + PHYSICAL_NORM_TOL:
        raise DomainError(f'Bloch vector {v} has norm {norm} > 1 and is not a physical state')
    if norm > 1:
        v = v / norm
    x, y, z = v
    return np.array([
        [0.5 + 0.5 * z, 0.5 * x - 0.5j * y],
        [0.5 * x + 0.5j * y, 0.5 - 0.5 * z],
    ], dtype=np.complex128)


def density_to_bloch(rho):
    """
    Convert a density matrix [[a, b], [c, d]] to Bloch coordinates
    x = Re(c + b), y = Im(c - b), z = Re(a - d).

    Args:
        rho (np.ndarray): (2, 2) density matrix.
    Returns:
        np.ndarray: (3,) Bloch vector.
    Raises:
        DomainError: rho violates a density matrix invariant.
    """
    rho = validate_density_matrix(rho)
    a, b = rho[0]
    c, d = rho[1]
    return np.array([(c + b).real, (c - b).imag, (a - d).real], dtype=np.float64)


def fidelity(rho1, rho2):
    """
    Uhlmann fidelity F = Tr[sqrt(sqrt(rho1) rho2 sqrt(rho1))]^2 for qubits, via
    the closed form F = Tr(rho1 rho2) + 2 sqrt(det(rho1) det(rho2)).

    Returns:
        float: fidelity clipped to [0, 1].
    Raises:
        DomainError: either input is not a valid density matrix.
    """
    rho1 = validate_density_matrix(rho1)
    rho2 = validate_density_matrix(rho2)
    overlap = np.trace(rho1 @ rho2).real
    det1 = np.linalg.det(rho1).real
    det2 = np.linalg.det(rho2).real
    det1 = det1 if det1 > PURE_DET_TOL else 0.0
    det2 = det2 if det2 > PURE_DET_TOL else 0.0
    value = overlap + 2 * np.sqrt(det1 * det2)
    return float(np.clip(value, 0.0, 1.0))


def _psd_sqrt(rho):
    eigvals, eigvecs = np.linalg.eigh(rho)
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.conj().T


def fidelity_from_definition(rho1, rho2):
    """Fidelity evaluated from its definition by eigendecomposition; reference for the closed form."""
    rho1 = validate_density_matrix(rho1)
    rho2 = validate_density_matrix(rho2)
    sqrt_rho1 = _psd_sqrt(rho1)
    inner = sqrt_rho1 @ rho2 @ sqrt_rho1
    inner = 0.5 * (inner + inner.conj().T)
    eigvals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.clip(np.sum(np.sqrt(eigvals)) ** 2, 0.0, 1.0))


@njit(cache=True, fastmath=True)
def _unit_dot(v1, v2):
    n1 = np.sqrt(v1[0] * v1[0] + v1[1] * v1[1] + v1[2] * v1[2])
    n2 = np.sqrt(v2[0] * v2[0] + v2[1] * v2[1] + v2[2] * v2[2])
    return (v1[0] * v2[0] + v1[1] * v2[1] + v1[2] * v2[2]) / (n1 * n2)


def geodesic_distance(v1, v2):
    """
    Arc length on the Bloch sphere between the directions of v1 and v2.

    Both inputs are normalized to the sphere surface first and the cosine is
    clamped to [-1, 1] before arccos.

    Returns:
        float: distance in radians, in [0, pi].
    Raises:
        DegenerateInputError: an input has norm < 1e-9.
    """
    v1 = as_bloch_vector(v1)
    v2 = as_bloch_vector(v2)
    if np.linalg.norm(v1) < DEGENERATE_NORM or np.linalg.norm(v2) < DEGENERATE_NORM:
        raise DegenerateInputError(f'geodesic distance undefined for zero-norm input ({v1}, {v2})')
    return float(clamped_arccos(_unit_dot(v1, v2)))


def extrapolate_to_sphere(v):
    """
    Scale a Bloch vector out to the sphere surface.

    Solves (t x)^2 + (t y)^2 + (t z)^2 - 1 = 0 for t > 0, i.e. t = 1 / norm(v).

    Returns:
        ExtrapolationResult: t and the surface point; degenerate (t and point
        NaN) if norm(v) < 1e-9.
    """
    v = as_bloch_vector(v)
    norm = np.linalg.norm(v)
    if norm < DEGENERATE_NORM:
        return ExtrapolationResult(t=np.nan, point=np.full(3, np.nan), degenerate=True)
    t = 1.0 / norm
    return ExtrapolationResult(t=float(t), point=v / norm, degenerate=False)


def pure_state_vector(v):
    """
    Ket (cos(theta/2), e^{i phi} sin(theta/2)) whose Bloch vector points along v.

    Args:
        v (np.ndarray): (3,) non-zero direction.
    Returns:
        np.ndarray: (2,) complex state vector.
    """
    v = as_bloch_vector(v)
    norm = np.linalg.norm(v)
    if norm < DEGENERATE_NORM:
        raise DegenerateInputError('pure state direction undefined for zero-norm vector')
    x, y, z = v / norm
    theta = clamped_arccos(z)
    phi = np.arctan2(y, x)
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=np.complex128)


def random_pure_bloch(stream):
    """Uniformly random direction on the sphere."""
    v = stream.standard_normal(3)
    while np.linalg.norm(v) < DEGENERATE_NORM:
        v = stream.standard_normal(3)
    return v / np.linalg.norm(v)
