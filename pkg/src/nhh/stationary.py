"""Stationary Heisenberg evolution with a time-independent non-Hermitian ``H``.

With a constant ``H`` the Dyson map equation ``i∂ₜΩ = ΩH`` integrates to
``Ω(t) = Ω(t₀) e^{−i(t−t₀)H}``. The metric ``Ω†Ω`` and the partner
``Ω H Ω⁻¹`` then stay constant even though ``Ω(t)`` itself moves, and an
observable's F-space image follows in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

from .errors import InconsistentTriple, InitialCouplingViolated, InitialObservabilityViolated, NotHermitian
from .integrate import TimeGrid, as_grid, rk4_grid
from .linalg import ExpMap, as_matrix, as_vector, dag, herm_residual, hermitian_part, rel_diff
from .metric import (
    DysonMap,
    Hamiltonian,
    MetricOperator,
    Observable,
    PartnerHamiltonian,
    dyson_from_metric,
    hermitize,
    intertwining_residual,
    quasi_herm_residual,
    solve_metric,
)

MatrixSchedule = Union[np.ndarray, Observable, Callable[[float], np.ndarray]]


@dataclass(frozen=True, eq=False)
class StationaryScenario:
    """Constant ``H`` with the Dyson map and metric fixed at ``t0``."""

    h_spec: Hamiltonian
    omega0: DysonMap
    theta0: MetricOperator
    t0: float = 0.0
    tol: float = 1e-10

    def __post_init__(self):
        if not isinstance(self.h_spec, Hamiltonian):
            object.__setattr__(self, "h_spec", Hamiltonian(self.h_spec))
        if not isinstance(self.omega0, DysonMap):
            object.__setattr__(self, "omega0", DysonMap(self.omega0))
        if not isinstance(self.theta0, MetricOperator):
            object.__setattr__(self, "theta0", MetricOperator(self.theta0))
        th = self.theta0.theta
        r = rel_diff(self.omega0.metric, th)
        if r > self.tol:
            raise InconsistentTriple(f"theta0 != omega0†·omega0 (relative residual {r:.3e})")
        r = intertwining_residual(self.h_spec.matrix, th)
        if r > self.tol:
            raise InitialObservabilityViolated(f"H is not quasi-Hermitian under theta0 (residual {r:.3e})")

    @classmethod
    def from_hamiltonian(cls, H, weights=None, mode: str = "positive-root", t0: float = 0.0) -> "StationaryScenario":
        Hh = H if isinstance(H, Hamiltonian) else Hamiltonian(H)
        theta = solve_metric(Hh.matrix, weights)
        return cls(Hh, dyson_from_metric(theta.theta, mode), theta, t0)

    @classmethod
    def from_dyson_map(cls, H, omega0, t0: float = 0.0) -> "StationaryScenario":
        om = omega0 if isinstance(omega0, DysonMap) else DysonMap(omega0)
        return cls(H, om, MetricOperator(om.metric), t0)

    @property
    def dim(self) -> int:
        return self.h_spec.dim

    @cached_property
    def _exp(self) -> ExpMap:
        return ExpMap(self.h_spec.matrix)

    def propagator(self, t: float) -> np.ndarray:
        """``e^{−i(t−t₀)H}``; exactly the identity at ``t₀``."""
        if t == self.t0:
            return np.eye(self.dim, dtype=np.complex128)
        return self._exp(-1j * (t - self.t0))

    def inverse_propagator(self, t: float) -> np.ndarray:
        if t == self.t0:
            return np.eye(self.dim, dtype=np.complex128)
        return self._exp(1j * (t - self.t0))

    @cached_property
    def partner0(self) -> PartnerHamiltonian:
        return hermitize(self.h_spec.matrix, self.omega0.omega)


def omega_at(sc: StationaryScenario, t: float) -> DysonMap:
    """Closed-form Dyson map ``Ω(t₀) e^{−i(t−t₀)H}``."""
    return DysonMap(sc.omega0.omega @ sc.propagator(t), sc.omega0.mode)


def theta_at(sc: StationaryScenario, t: float) -> MetricOperator:
    """Metric ``Ω(t)†Ω(t)`` formed from the explicit product at time ``t``."""
    om = sc.omega0.omega @ sc.propagator(t)
    return MetricOperator(hermitian_part(dag(om) @ om))


def partner_h_at(sc: StationaryScenario, t: float) -> PartnerHamiltonian:
    """Partner ``Ω(t) H Ω(t)⁻¹``."""
    return hermitize(sc.h_spec.matrix, sc.omega0.omega @ sc.propagator(t))


def _eval(a: MatrixSchedule, t: float, name: str) -> np.ndarray:
    if callable(a) and not isinstance(a, (np.ndarray, Observable)):
        a = a(t)
    return as_matrix(a, name)


def observable_at(sc: StationaryScenario, a: MatrixSchedule, t: float, herm_tol: float = 1e-12) -> Observable:
    """F-space observable ``e^{iτH} Ω₀⁻¹ 𝔞(t) Ω₀ e^{−iτH}``, ``τ = t − t₀``.

    ``a`` is a fixed Hermitian matrix or a callable returning ``𝔞(t)``.
    """
    am = _eval(a, t, "P-space observable")
    r = herm_residual(am)
    if r > herm_tol:
        raise NotHermitian(f"P-space observable is not Hermitian at t={t} (relative residual {r:.3e})", r)
    om = sc.omega0.omega
    A0 = np.linalg.solve(om, am @ om)
    return Observable(sc.inverse_propagator(t) @ A0 @ sc.propagator(t), "F")


@dataclass(frozen=True, eq=False)
class DriveTerm:
    """``K(t) = Ω(t)⁻¹ (i𝔞̇(t)) Ω(t)``."""

    matrix: np.ndarray
    t: float

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def drive_term(sc: StationaryScenario, a_dot: MatrixSchedule, t: float) -> DriveTerm:
    """Drive term from the P-space time derivative ``𝔞̇(t)``.

    ``a_dot`` returns ``𝔞̇`` itself; the factor ``i`` is applied here.
    """
    d = _eval(a_dot, t, "observable derivative")
    om = omega_at(sc, t).omega
    return DriveTerm(np.linalg.solve(om, (1j * d) @ om), float(t))


def integrate_eom(
    sc: StationaryScenario,
    A0,
    drive: Callable[[float], np.ndarray] | None = None,
    grid: TimeGrid | np.ndarray = None,
    dt: float = 1e-3,
    error_budget: float | None = None,
    coupling_tol: float = 1e-9,
) -> np.ndarray:
    """Integrate ``i∂ₜA = AH − HA + K(t)`` by RK4; returns ``A`` at the grid points.

    ``drive`` maps ``t`` to ``K(t)`` (an array or :class:`DriveTerm`);
    ``None`` means ``K = 0``.
    """
    grid = as_grid(grid)
    A0m = as_matrix(A0, "initial observable")
    r = quasi_herm_residual(A0m, sc.theta0.theta)
    if r > coupling_tol:
        raise InitialCouplingViolated(f"initial observable is not quasi-Hermitian under theta0 (residual {r:.3e})")
    H = sc.h_spec.matrix

    if drive is None:
        def f(t, A):
            return -1j * (A @ H - H @ A)
    else:
        def f(t, A):
            return -1j * (A @ H - H @ A + np.asarray(drive(t)))

    return rk4_grid(f, A0m, grid, dt, error_budget)


def p_space_expectations(sc: StationaryScenario, a, psi, times) -> np.ndarray:
    """Normalized ``⟨φ(t)|𝔞|φ(t)⟩`` with ``φ(t) = e^{−i𝔥(t−t₀)} Ω₀ψ``.

    Uses only the Hermitian partner at ``t₀`` and ``eigh``, so it serves as
    an oracle independent of the F-space closed forms.
    """
    am = as_matrix(a)
    w, v = np.linalg.eigh(hermitian_part(sc.partner0.h))
    phi0 = v.conj().T @ (sc.omega0.omega @ as_vector(psi))
    out = np.empty(len(times), dtype=np.complex128)
    for i, t in enumerate(times):
        phi = v @ (np.exp(-1j * w * (t - sc.t0)) * phi0)
        out[i] = np.vdot(phi, am @ phi) / np.vdot(phi, phi)
    return out
