"""Numerics Module
Dense linear algebra kernels shared by every other module: thin SVD, SPD
factorization and solve, general dense solve and the 2-norm condition number."""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.linalg as la
from scipy.linalg import lapack

from janus.constants import RANK_TOL, SINGULAR_TOL, SYMMETRY_TOL

Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]

SVD_DRIVERS = ("gesdd", "gesvd")


class NotSpdError(ValueError):
    """Raised when a Cholesky pivot is not positive."""

    def __init__(self, pivot: int, message: str | None = None) -> None:
        self.pivot = pivot
        super().__init__(message or f"Matrix is not SPD: non-positive pivot at index {pivot}")


class SvdConvergenceError(RuntimeError):
    """Raised when every LAPACK SVD driver fails to converge."""

    def __init__(self, attempts: int) -> None:
        self.attempts = attempts
        super().__init__(f"SVD did not converge after {attempts} driver attempts")


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD X = U diag(sigma) V^T."""

    u: Matrix
    sigma: Vector
    v: Matrix

    @property
    def rank(self) -> int:
        """Numerical rank with the relative tolerance used for POD."""
        return numerical_rank(self.sigma)


@dataclass(frozen=True)
class SpdFactorization:
    """Lower Cholesky factor of a symmetric positive definite matrix."""

    dimension: int
    factor: Matrix


@dataclass(frozen=True)
class LuFactorization:
    """Pivoted LU factors of a general square matrix."""

    dimension: int
    lu: Matrix
    piv: npt.NDArray[np.int32]


def as_matrix(a: npt.ArrayLike) -> Matrix:
    """Converts to a finite two dimensional float array."""
    matrix = np.atleast_2d(np.asarray(a, dtype=np.float64))
    if matrix.ndim != 2:
        raise ValueError(f"Expected a matrix, got an array with {matrix.ndim} dimensions")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("Matrix has non-finite entries")
    return matrix


def numerical_rank(sigma: Vector, tol: float = RANK_TOL) -> int:
    """Number of singular values above tol * sigma_max."""
    if sigma.size == 0 or sigma[0] <= 0.0:
        return 0
    return int(np.count_nonzero(sigma > tol * sigma[0]))


def svd_thin(x: npt.ArrayLike) -> SvdResult:
    """Thin singular value decomposition.

    Tries the divide and conquer driver first and falls back to the QR based
    one, which converges in cases where gesdd does not.
    """
    matrix = as_matrix(x)
    rows, cols = matrix.shape
    if rows == 0 or cols == 0:
        k = min(rows, cols)
        return SvdResult(np.zeros((rows, k)), np.zeros(k), np.zeros((cols, k)))

    for attempt, driver in enumerate(SVD_DRIVERS, start=1):
        try:
            u, sigma, vt = la.svd(
                matrix, full_matrices=False, lapack_driver=driver, check_finite=False
            )
            return SvdResult(u, sigma, vt.T)
        except la.LinAlgError:
            if attempt == len(SVD_DRIVERS):
                raise SvdConvergenceError(attempts=attempt) from None

    raise SvdConvergenceError(attempts=len(SVD_DRIVERS))


def symmetrize(a: npt.ArrayLike, tol: float = SYMMETRY_TOL) -> Matrix:
    """Returns (A + A^T) / 2 after checking A is symmetric to tol (relative)."""
    matrix = as_matrix(a)
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {matrix.shape}")
    scale = np.max(np.abs(matrix)) if matrix.size else 0.0
    asymmetry = np.max(np.abs(matrix - matrix.T)) if matrix.size else 0.0
    if asymmetry > tol * max(scale, np.finfo(float).tiny):
        raise ValueError(
            f"Matrix is not symmetric: max|A - A^T| = {asymmetry:.3e} (scale {scale:.3e})"
        )
    return 0.5 * (matrix + matrix.T)


def spd_factor(a: npt.ArrayLike, tol: float = SYMMETRY_TOL) -> SpdFactorization:
    """Cholesky factorization of a symmetric positive definite matrix.

    Raises NotSpdError with the 0-based index of the first non-positive pivot.
    """
    matrix = symmetrize(a, tol=tol)
    n = matrix.shape[0]
    if n == 0:
        return SpdFactorization(dimension=0, factor=np.zeros((0, 0)))

    factor, info = lapack.dpotrf(matrix, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotSpdError(pivot=info - 1)
    if info < 0:
        raise ValueError(f"Illegal argument {-info} passed to dpotrf")
    return SpdFactorization(dimension=n, factor=factor)


def spd_solve(f: SpdFactorization, b: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Solves A x = b with a Cholesky factorization (b may have several columns)."""
    rhs = np.asarray(b, dtype=np.float64)
    if rhs.shape[0] != f.dimension:
        raise ValueError(f"Right-hand side has {rhs.shape[0]} rows, expected {f.dimension}")
    if f.dimension == 0:
        return np.zeros_like(rhs)
    return la.cho_solve((f.factor, True), rhs, check_finite=False)


def lu_factor(a: npt.ArrayLike) -> LuFactorization:
    """Pivoted LU factorization for general (possibly indefinite) matrices."""
    matrix = as_matrix(a)
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {matrix.shape}")
    lu, piv = la.lu_factor(matrix, check_finite=False)
    return LuFactorization(dimension=matrix.shape[0], lu=lu, piv=piv)


def lu_solve(f: LuFactorization, b: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Solves A x = b with a pivoted LU factorization."""
    rhs = np.asarray(b, dtype=np.float64)
    if rhs.shape[0] != f.dimension:
        raise ValueError(f"Right-hand side has {rhs.shape[0]} rows, expected {f.dimension}")
    return la.lu_solve((f.lu, f.piv), rhs, check_finite=False)


def dense_solve(a: npt.ArrayLike, b: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """General dense solve."""
    return lu_solve(lu_factor(a), b)


def cond2(a: npt.ArrayLike) -> float:
    """2-norm condition number sigma_max / sigma_min (inf if numerically singular)."""
    matrix = as_matrix(a)
    if not np.any(matrix):
        raise ValueError("Condition number of a zero matrix is undefined")
    sigma = svd_thin(matrix).sigma
    if min(matrix.shape) < max(matrix.shape) or sigma[-1] < SINGULAR_TOL:
        return float("inf")
    return float(sigma[0] / sigma[-1])
