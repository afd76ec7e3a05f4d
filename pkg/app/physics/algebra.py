"""
Dense 2x2 complex linear algebra.

Operators are ``numpy`` arrays of shape ``(2, 2)`` (or stacks ``(..., 2, 2)``,
which every helper here broadcasts over). Basis order is ``|0> = excited``,
``|1> = ground``.
"""
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from app.core.exceptions import NonHermitianInput

Mat2 = npt.NDArray[np.complex128]
Vec2 = npt.NDArray[np.complex128]

HERMITIAN_TOL = 1e-9
DEGENERACY_TOL = 1e-10

IDENTITY = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
# sigma_+ sigma_- projects on the excited state
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=np.complex128)
EXCITED_PROJECTOR = SIGMA_PLUS @ SIGMA_MINUS


@dataclass(frozen=True)
class EigenPair2:
    """Eigen-decomposition of a Hermitian 2x2 matrix, eps1 >= eps2."""

    eps1: float
    eps2: float
    v1: Vec2
    v2: Vec2
    degenerate: bool = False

    @property
    def gap(self) -> float:
        return self.eps1 - self.eps2

    def reconstruct(self) -> Mat2:
        return (
            self.eps1 * np.outer(self.v1, self.v1.conj())
            + self.eps2 * np.outer(self.v2, self.v2.conj())
        )


def dagger(m: Mat2) -> Mat2:
    return np.conj(np.swapaxes(m, -1, -2))


def commutator(a: Mat2, b: Mat2) -> Mat2:
    """Return ``[A, B] = AB - BA``."""
    return a @ b - b @ a


def anticommutator(a: Mat2, b: Mat2) -> Mat2:
    """Return ``{A, B} = AB + BA``."""
    return a @ b + b @ a


def hermitize(m: Mat2) -> Mat2:
    return 0.5 * (m + dagger(m))


def hermiticity_defect(m: Mat2) -> float:
    """Frobenius norm of ``M - M^dagger`` (max over a stack)."""
    diff = np.asarray(m) - dagger(np.asarray(m))
    return float(np.max(np.sqrt(np.sum(np.abs(diff) ** 2, axis=(-2, -1)))))


def orthogonal_complement(v: Vec2) -> Vec2:
    return np.array([-np.conj(v[1]), np.conj(v[0])], dtype=np.complex128)


def eig_hermitian(m: Mat2) -> EigenPair2:
    """
    Closed-form eigen-decomposition of a Hermitian 2x2 matrix.

    The leading eigenvector is built from whichever matrix row avoids
    cancellation: ``(eps1 - d, b*)`` when ``a >= d``, ``(b, eps1 - a)`` otherwise.
    Exact degeneracy returns the computational basis with ``degenerate=True``;
    choosing a continuous vector there is left to the caller.

    Args:
        m: Hermitian matrix (within ``HERMITIAN_TOL``)

    Returns:
        EigenPair2: eigenvalues in descending order and unit eigenvectors

    Raises:
        NonHermitianInput: if ``||M - M^dagger|| > 1e-9``
    """
    m = np.asarray(m, dtype=np.complex128)
    defect = hermiticity_defect(m)
    if defect > HERMITIAN_TOL:
        raise NonHermitianInput(f"matrix is not Hermitian (defect {defect:.3e})", defect=defect)

    a = float(m[0, 0].real)
    d = float(m[1, 1].real)
    b = 0.5 * (m[0, 1] + np.conj(m[1, 0]))

    mean = 0.5 * (a + d)
    half_split = 0.5 * (a - d)
    radius = float(np.hypot(half_split, abs(b)))
    eps1 = mean + radius
    eps2 = mean - radius
    degenerate = radius < 0.5 * DEGENERACY_TOL

    if radius == 0.0:
        v1 = np.array([1.0, 0.0], dtype=np.complex128)
    elif a >= d:
        v1 = np.array([half_split + radius, np.conj(b)], dtype=np.complex128)
    else:
        v1 = np.array([b, radius - half_split], dtype=np.complex128)
    v1 = v1 / np.linalg.norm(v1)
    v2 = orthogonal_complement(v1)
    return EigenPair2(eps1=eps1, eps2=eps2, v1=v1, v2=v2, degenerate=degenerate)


def eigvalsh_stack(m: Mat2) -> npt.NDArray[np.float64]:
    """Closed-form eigenvalues ``(eps1, eps2)`` for a stack of Hermitian matrices."""
    m = np.asarray(m)
    a = m[..., 0, 0].real
    d = m[..., 1, 1].real
    b = 0.5 * (m[..., 0, 1] + np.conj(m[..., 1, 0]))
    mean = 0.5 * (a + d)
    radius = np.hypot(0.5 * (a - d), np.abs(b))
    return np.stack([mean + radius, mean - radius], axis=-1)
