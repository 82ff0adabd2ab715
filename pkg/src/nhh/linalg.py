"""Dense complex linear-algebra kernels.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``; the
helpers here validate shape and finiteness once at the boundary and then work
on raw arrays. Unqualified norms are Frobenius norms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DefectiveMatrix,
    DimensionMismatch,
    NonFinite,
    NotHermitian,
    NotPositiveDefinite,
)

#: relative conditioning threshold used by :func:`eig_bi`
EIG_TOL = 1e-9
#: eigenvector condition number above which :func:`mat_exp` switches to
#: scaling-and-squaring
EXP_EIG_COND_MAX = 1e4


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite square complex128 array.

    Accepts anything exposing ``__array__`` (the operator wrappers in
    :mod:`nhh.metric` do).
    """
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return a


def as_vector(v, name: str = "vector") -> np.ndarray:
    a = np.asarray(v, dtype=np.complex128)
    if a.ndim != 1 or a.size < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 1-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return a


def fro(m) -> float:
    return float(np.linalg.norm(m))


def dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def rel_diff(a: np.ndarray, b: np.ndarray) -> float:
    """``‖a − b‖ / ‖b‖``, falling back to the absolute gap when ``b`` vanishes."""
    nb = fro(b)
    d = fro(a - b)
    return d / nb if nb > 0 else d


def herm_residual(m: np.ndarray) -> float:
    """Relative anti-Hermitian content ``‖m − m†‖ / ‖m‖`` (0 for the zero matrix)."""
    n = fro(m)
    return fro(m - dag(m)) / n if n > 0 else 0.0


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + dag(m))


def cond(m: np.ndarray) -> float:
    s = np.linalg.svd(m, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf


def right_divide(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a @ inv(b)`` without forming the inverse."""
    return np.linalg.solve(b.T, a.T).T


@dataclass(frozen=True)
class BiorthogonalEig:
    """Eigen-triple with ``left.conj().T @ right == I``."""

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.right * self.eigenvalues) @ dag(self.left)


def eig_bi(M, tol: float = EIG_TOL) -> BiorthogonalEig:
    """Biorthonormal eigendecomposition of a diagonalizable matrix.

    Columns of ``right`` are right eigenvectors of ``M``; columns of ``left``
    are eigenvectors of ``M†``. Hermitian inputs go through ``eigh`` so that
    degenerate subspaces come back orthonormal.

    Raises
    ------
    DefectiveMatrix
        If the column-normalized right eigenvector matrix has relative
        smallest singular value ``<= tol``.
    """
    M = as_matrix(M)
    if herm_residual(M) < 1e-14:
        w, v = np.linalg.eigh(hermitian_part(M))
        return BiorthogonalEig(w.astype(np.complex128), v, v.copy())

    w, r = np.linalg.eig(M)
    r = r / np.linalg.norm(r, axis=0)
    s = np.linalg.svd(r, compute_uv=False)
    if s[-1] <= tol * s[0]:
        raise DefectiveMatrix(
            f"matrix is not diagonalizable within tolerance "
            f"(eigenvector matrix singular value ratio {s[-1] / s[0]:.3e} <= {tol:.1e})"
        )
    # L† R = I fixes L = R^{-†}; its columns are eigenvectors of M† even
    # inside degenerate subspaces.
    left = dag(np.linalg.inv(r))
    return BiorthogonalEig(w, r, left)


class ExpMap:
    """Precomputed exponential family ``s -> e^{sM}``.

    The eigen-route is used when the eigenvector basis is well conditioned;
    otherwise every call goes to scipy's scaling-and-squaring Padé code.
    """

    def __init__(self, M):
        self.matrix = as_matrix(M)
        self._eig: BiorthogonalEig | None = None
        try:
            eig = eig_bi(self.matrix)
        except DefectiveMatrix:
            eig = None
        if eig is not None and cond(eig.right) <= EXP_EIG_COND_MAX:
            self._eig = eig

    @property
    def uses_eigenbasis(self) -> bool:
        return self._eig is not None

    def __call__(self, s: complex) -> np.ndarray:
        if not np.isfinite(s):
            raise NonFinite("exponent scalar is not finite")
        if self._eig is None:
            return sla.expm(s * self.matrix)
        e = self._eig
        return (e.right * np.exp(s * e.eigenvalues)) @ dag(e.left)


def mat_exp(M, s: complex = 1.0) -> np.ndarray:
    """Return ``e^{sM}``."""
    return ExpMap(M)(s)


def herm_sqrt(P, tol: float = EIG_TOL) -> np.ndarray:
    """Unique Hermitian positive-definite square root of ``P``.

    Raises
    ------
    NotHermitian
        If ``‖P − P†‖ / ‖P‖ > tol``.
    NotPositiveDefinite
        If the smallest eigenvalue is not above ``tol · ‖P‖₂``.
    """
    P = as_matrix(P)
    r = herm_residual(P)
    if r > tol:
        raise NotHermitian(f"matrix is not Hermitian (relative residual {r:.3e})", r)
    w, v = np.linalg.eigh(hermitian_part(P))
    if w[0] <= tol * max(abs(w[-1]), abs(w[0])):
        raise NotPositiveDefinite(f"matrix is not positive definite (min eigenvalue {w[0]:.6g})", float(w[0]))
    S = (v * np.sqrt(w)) @ dag(v)
    return hermitian_part(S)


def pd_min_eig(M) -> float:
    """Smallest eigenvalue of the Hermitian part ``(M + M†)/2``."""
    M = as_matrix(M)
    return float(np.linalg.eigvalsh(hermitian_part(M))[0])


def sorted_spectrum(w) -> np.ndarray:
    """Eigenvalues sorted by real part, then imaginary part."""
    w = np.asarray(w, dtype=np.complex128)
    return w[np.lexsort((w.imag, w.real))]
