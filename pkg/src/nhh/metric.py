"""Metrics, Dyson maps and the three Hilbert-space pictures.

Three spaces share the same finite dimension:

* **F**: the friendly space, where the non-Hermitian ``H`` lives and the
  naive inner product ``⟨ψ₁|ψ₂⟩`` is unphysical.
* **S**: the same kets as F but with the inner product ``⟨ψ₁|Θ|ψ₂⟩``. Here
  ``H`` is self-adjoint, i.e. ``H†Θ = ΘH``.
* **P**: the textbook space reached by the Dyson map ``φ = Ωψ`` with
  ``Θ = Ω†Ω``. The partner ``𝔥 = ΩHΩ⁻¹`` is Hermitian in the ordinary sense.

The wrappers below are thin frozen containers over complex arrays. All
functions also accept raw arrays wherever a wrapper is expected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import (
    BadWeights,
    ComplexSpectrum,
    DimensionMismatch,
    HermitizationFailed,
    InconsistentTriple,
    NotPositiveDefinite,
    SingularMap,
)
from .linalg import (
    as_matrix,
    as_vector,
    dag,
    eig_bi,
    fro,
    herm_residual,
    herm_sqrt,
    hermitian_part,
    pd_min_eig,
    rel_diff,
    right_divide,
    sorted_spectrum,
)

DysonMode = Literal["positive-root", "triangular"]
Picture = Literal["P", "F"]

#: real-spectrum tolerance relative to (spectral radius + 1)
SPECTRAL_TOL = 1e-9
SINGULAR_COND = 1e12
HERMITIZE_TOL = 1e-9


class _MatrixLike:
    def __array__(self, dtype=None, copy=None):
        m = self._matrix
        return m if dtype is None else m.astype(dtype)

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Hamiltonian(_MatrixLike):
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_matrix(self.matrix, "Hamiltonian"))

    @property
    def _matrix(self):
        return self.matrix


@dataclass(frozen=True, eq=False)
class MetricOperator(_MatrixLike):
    """Hermitian positive-definite metric ``Θ`` with its positivity certificate."""

    theta: np.ndarray
    min_eig: float = field(default=np.nan)

    def __post_init__(self):
        th = as_matrix(self.theta, "metric")
        r = herm_residual(th)
        if r > 1e-12:
            raise NotPositiveDefinite(f"metric is not Hermitian (relative residual {r:.3e})", np.nan)
        th = hermitian_part(th)
        object.__setattr__(self, "theta", th)
        lo = pd_min_eig(th)
        object.__setattr__(self, "min_eig", lo)
        if not lo > 0:
            raise NotPositiveDefinite(f"metric is not positive definite (min eigenvalue {lo:.6g})", lo)

    @property
    def _matrix(self):
        return self.theta


@dataclass(frozen=True, eq=False)
class DysonMap(_MatrixLike):
    omega: np.ndarray
    mode: str = "positive-root"

    def __post_init__(self):
        om = as_matrix(self.omega, "Dyson map")
        s = np.linalg.svd(om, compute_uv=False)
        if not s[-1] > 1e-12 * s[0]:
            raise SingularMap("Dyson map is not invertible")
        object.__setattr__(self, "omega", om)

    @property
    def _matrix(self):
        return self.omega

    @property
    def metric(self) -> np.ndarray:
        return dag(self.omega) @ self.omega


@dataclass(frozen=True, eq=False)
class PartnerHamiltonian(_MatrixLike):
    """P-space partner ``𝔥``; ``h`` is stored as computed (not symmetrized)."""

    h: np.ndarray

    @property
    def _matrix(self):
        return self.h

    @property
    def herm_residual(self) -> float:
        return herm_residual(self.h)


@dataclass(frozen=True, eq=False)
class Observable(_MatrixLike):
    matrix: np.ndarray
    picture: str = "P"

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_matrix(self.matrix, "observable"))
        if self.picture not in ("P", "F"):
            raise ValueError(f"picture must be 'P' or 'F', got {self.picture!r}")

    @property
    def _matrix(self):
        return self.matrix


@dataclass(frozen=True, eq=False)
class StateVector:
    entries: np.ndarray
    space: str = "F"

    def __post_init__(self):
        object.__setattr__(self, "entries", as_vector(self.entries, "state"))
        if self.space not in ("P", "F"):
            raise ValueError(f"space must be 'P' or 'F', got {self.space!r}")

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def dim(self) -> int:
        return self.entries.size


def _same_dim(*mats):
    dims = {m.shape[0] for m in mats}
    if len(dims) != 1:
        raise DimensionMismatch(f"dimension mismatch: {sorted(dims)}")


def solve_metric(H, weights: Sequence[float] | None = None, tol: float = SPECTRAL_TOL) -> MetricOperator:
    """Build a metric ``Θ = Σ cₙ |Lₙ⟩⟨Lₙ|`` satisfying ``H†Θ = ΘH``.

    ``Lₙ`` are the left eigenvectors of ``H`` normalized biorthogonally
    against the right ones, so unit weights reproduce the identity for a
    Hermitian ``H``. The weights ``cₙ`` (ordered as the eigenvalues sorted
    by real part) parameterize the non-unique choice of metric.

    Raises
    ------
    ComplexSpectrum
        If some eigenvalue has ``|Im λ| >= tol · (ρ(H) + 1)``.
    BadWeights
        On a count mismatch or a non-positive weight.
    """
    Hm = as_matrix(H, "Hamiltonian")
    eig = eig_bi(Hm)
    w = eig.eigenvalues
    bound = tol * (np.max(np.abs(w)) + 1.0)
    if np.any(np.abs(w.imag) >= bound):
        bad = sorted_spectrum(w[np.abs(w.imag) >= bound])
        raise ComplexSpectrum(
            "spectrum is not real (broken phase); offending eigenvalues: "
            + ", ".join(f"{z.real:.12g}{z.imag:+.12g}j" for z in bad),
            bad,
        )
    n = Hm.shape[0]
    if weights is None:
        c = np.ones(n)
    else:
        c = np.asarray(weights, dtype=float)
        if c.shape != (n,):
            raise BadWeights(f"expected {n} weights, got {c.size}")
        if not np.all(np.isfinite(c)) or np.any(c <= 0):
            raise BadWeights("metric weights must be finite and strictly positive")
    order = np.lexsort((w.imag, w.real))
    cw = np.empty(n)
    cw[order] = c
    L = eig.left
    theta = hermitian_part((L * cw) @ dag(L))
    return MetricOperator(theta)


def intertwining_residual(H, theta) -> float:
    """``‖H†Θ − ΘH‖ / ‖Θ‖``."""
    Hm, th = as_matrix(H), as_matrix(theta)
    return fro(dag(Hm) @ th - th @ Hm) / fro(th)


def dyson_from_metric(theta, mode: DysonMode = "positive-root") -> DysonMap:
    """Factor ``Θ = Ω†Ω``.

    ``positive-root`` returns the Hermitian square root; ``triangular``
    returns the upper-triangular Cholesky factor with positive diagonal.
    """
    th = as_matrix(theta, "metric")
    if mode == "positive-root":
        om = herm_sqrt(th)
    elif mode == "triangular":
        try:
            low = np.linalg.cholesky(hermitian_part(th))
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("metric is not positive definite", pd_min_eig(th)) from None
        om = dag(low)
    else:
        raise ValueError(f"unknown Dyson mode {mode!r}")
    return DysonMap(om, mode)


def _check_invertible(om: np.ndarray, t: float | None = None):
    s = np.linalg.svd(om, compute_uv=False)
    if not s[-1] * SINGULAR_COND > s[0]:
        where = "" if t is None else f" at t={t:.17g}"
        raise SingularMap(f"Dyson map lost invertibility{where} (condition number > {SINGULAR_COND:.0e})", t)


def hermitize(H, omega, tol: float = HERMITIZE_TOL) -> PartnerHamiltonian:
    """Partner Hamiltonian ``𝔥 = Ω H Ω⁻¹``.

    Raises
    ------
    SingularMap
        If ``Ω`` is numerically singular.
    HermitizationFailed
        If ``‖𝔥 − 𝔥†‖ / ‖𝔥‖ > tol``, i.e. ``Ω`` does not belong to a metric
        for which ``H`` is quasi-Hermitian.
    """
    Hm, om = as_matrix(H, "Hamiltonian"), as_matrix(omega, "Dyson map")
    _same_dim(Hm, om)
    _check_invertible(om)
    h = right_divide(om @ Hm, om)
    r = herm_residual(h)
    if r > tol:
        raise HermitizationFailed(f"partner Hamiltonian is not Hermitian (relative residual {r:.3e})", r)
    return PartnerHamiltonian(h)


def isospectrality_gap(H, h) -> float:
    """Max gap between sorted spectra of ``H`` and a Hermitian partner ``h``."""
    a = sorted_spectrum(np.linalg.eigvals(as_matrix(H)))
    b = np.linalg.eigvalsh(hermitian_part(as_matrix(h)))
    return float(np.max(np.abs(a - b)))


def s_inner(psi1, psi2, theta) -> complex:
    """S-space inner product ``⟨ψ₁|Θ|ψ₂⟩``."""
    a, b = as_vector(psi1), as_vector(psi2)
    th = as_matrix(theta, "metric")
    if not a.size == b.size == th.shape[0]:
        raise DimensionMismatch(f"dimensions {a.size}, {b.size} and metric {th.shape[0]} differ")
    return complex(np.vdot(a, th @ b))


def quasi_herm_residual(A, theta) -> float:
    """``‖A†Θ − ΘA‖ / (‖Θ‖·‖A‖ + 1e-300)``."""
    Am, th = as_matrix(A, "observable"), as_matrix(theta, "metric")
    _same_dim(Am, th)
    return fro(dag(Am) @ th - th @ Am) / (fro(th) * fro(Am) + 1e-300)


def to_f_space(a, omega) -> np.ndarray:
    """F-space image ``Ω⁻¹ 𝔞 Ω`` of a P-space operator."""
    am, om = as_matrix(a), as_matrix(omega)
    _same_dim(am, om)
    return np.linalg.solve(om, am @ om)


def to_p_space(psi, omega) -> StateVector:
    """Map an F-space ket to P-space, ``φ = Ωψ``."""
    v, om = as_vector(psi), as_matrix(omega, "Dyson map")
    if v.size != om.shape[0]:
        raise DimensionMismatch(f"state has dimension {v.size}, map has {om.shape[0]}")
    return StateVector(om @ v, "P")


def cross_picture_expectation(psi, A, a, theta, omega, tol: float = 1e-9) -> tuple[complex, complex]:
    """Normalized expectation of one observable evaluated in S and in P.

    Returns ``(⟨ψ|ΘA|ψ⟩/⟨ψ|Θ|ψ⟩, ⟨φ|𝔞|φ⟩/⟨φ|φ⟩)`` with ``φ = Ωψ``.

    Raises
    ------
    InconsistentTriple
        If ``A ≠ Ω⁻¹𝔞Ω`` or ``Θ ≠ Ω†Ω`` beyond tolerance.
    """
    v = as_vector(psi)
    Am, am = as_matrix(A), as_matrix(a)
    th, om = as_matrix(theta, "metric"), as_matrix(omega, "Dyson map")
    _same_dim(Am, am, th, om)
    if v.size != th.shape[0]:
        raise DimensionMismatch(f"state has dimension {v.size}, operators have {th.shape[0]}")
    r_theta = rel_diff(dag(om) @ om, th)
    if r_theta > 1e-10:
        raise InconsistentTriple(f"metric does not factor through the Dyson map (residual {r_theta:.3e})")
    image = to_f_space(am, om)
    r_obs = fro(Am - image) / max(fro(image), 1.0)
    if r_obs > tol:
        raise InconsistentTriple(f"F-space observable is not the image of the P-space one (residual {r_obs:.3e})")
    value_s = np.vdot(v, th @ (Am @ v)) / np.vdot(v, th @ v)
    phi = om @ v
    value_p = np.vdot(phi, am @ phi) / np.vdot(phi, phi)
    return complex(value_s), complex(value_p)
