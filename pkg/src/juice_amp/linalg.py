"""Hermitian / positive-semidefinite matrix kernels used throughout the package.

Thin, contract-enforcing wrappers around LAPACK (via numpy/scipy). All callers
work with explicit Hermitian covariances, so every routine symmetrizes its
input and fails loudly on non-finite or non-PSD data instead of propagating
garbage.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NotPsdError, SingularMatrixError

# Eigenvalues in [-PSD_CLAMP_REL * lambda_max, 0) are treated as roundoff and
# clamped to zero; anything below that is a genuine PSD violation.
PSD_CLAMP_REL = 1e-8


@dataclass
class HermitianSpectrum:
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.

    ``eigenvectors[:, k]`` is the unit eigenvector for ``eigenvalues[k]``;
    the matrix of eigenvectors is unitary and ``U diag(lam) U^H`` reconstructs
    the (symmetrized) input to machine precision.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def _check_square_finite(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a.astype(np.complex128, copy=False)


def hermitize(a: np.ndarray) -> np.ndarray:
    """Symmetrize: (A + A^H) / 2."""
    a = _check_square_finite(a)
    return 0.5 * (a + a.conj().T)


def eig_hermitian(a: np.ndarray) -> HermitianSpectrum:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    h = hermitize(a)
    lam, u = np.linalg.eigh(h)
    # eigh returns ascending order
    return HermitianSpectrum(eigenvalues=lam[::-1].copy(), eigenvectors=u[:, ::-1].copy())


def sqrt_psd(a: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root S with S @ S = A.

    Tiny negative eigenvalues (>= -PSD_CLAMP_REL * lambda_max) are clamped to
    zero; larger violations raise NotPsdError.
    """
    spec = eig_hermitian(a)
    lam = spec.eigenvalues
    lam_max = max(float(lam[0]), 0.0)
    floor = -PSD_CLAMP_REL * lam_max
    if np.any(lam < floor):
        raise NotPsdError(
            f"matrix is not PSD: min eigenvalue {lam.min():.3e} below {floor:.3e}"
        )
    lam = np.clip(lam, 0.0, None)
    u = spec.eigenvectors
    s = (u * np.sqrt(lam)) @ u.conj().T
    return 0.5 * (s + s.conj().T)


def logdet_psd(a: np.ndarray) -> float:
    """Natural-log determinant of a Hermitian positive-definite matrix.

    Uses a Cholesky factorization, so values never leave the log domain.
    """
    h = hermitize(a)
    try:
        chol = np.linalg.cholesky(h)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("matrix is not positive definite") from exc
    return float(2.0 * np.sum(np.log(np.real(np.diagonal(chol)))))


def solve_psd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for Hermitian positive-definite A."""
    h = hermitize(a)
    b = np.asarray(b, dtype=np.complex128)
    try:
        factor = cho_factor(h, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("matrix is not positive definite") from exc
    return cho_solve(factor, b, check_finite=False)
