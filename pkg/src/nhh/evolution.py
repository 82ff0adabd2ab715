"""Non-stationary Heisenberg machinery for a time-dependent ``H(t)``.

Requiring constant F-space kets forces the Coriolis term ``Σ = iΩ⁻¹Ω̇`` to
coincide with ``H(t)``, which turns the Dyson map into the solution of
``i∂ₜΩ = ΩH``. Observables that are manifestly time-independent in P-space
then obey the pair

    i∂ₜA  = A H  − H A
    i∂ₜA† = A† H† − H† A†

with ``A†Θ = ΘA`` imposed at ``t₀`` only. The metric follows
``i∂ₜΘ = ΘΣ − Σ†Θ``. Everything here is integrated with fixed-step RK4 on
dense matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatch,
    InitialCouplingViolated,
    InitialObservabilityViolated,
    InsufficientPoints,
    NotHermitian,
    PositivityLost,
)
from .integrate import TimeGrid, as_grid, rk4_grid
from .linalg import as_matrix, as_vector, dag, fro, herm_residual, hermitian_part
from .metric import Observable, _check_invertible, quasi_herm_residual
from .models import HamiltonianSchedule, as_schedule


@dataclass(frozen=True)
class EvolutionState:
    """One time slice of a trajectory; fields not integrated are ``None``."""

    t: float
    omega: np.ndarray | None
    theta: np.ndarray | None
    sigma: np.ndarray | None
    generator_g: np.ndarray | None
    a_op: np.ndarray | None
    a_dag_op: np.ndarray | None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stacked grid-point snapshots, each array shaped ``(n_points, d, d)``.

    ``residuals`` holds per-point scalar monitors keyed by name.
    """

    times: np.ndarray
    schedule: HamiltonianSchedule
    omega: np.ndarray | None = None
    theta: np.ndarray | None = None
    sigma: np.ndarray | None = None
    generator_g: np.ndarray | None = None
    a_op: np.ndarray | None = None
    a_dag_op: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, i: int) -> EvolutionState:
        def pick(x):
            return None if x is None else x[i]

        return EvolutionState(
            float(self.times[i]),
            pick(self.omega),
            pick(self.theta),
            pick(self.sigma),
            pick(self.generator_g),
            pick(self.a_op),
            pick(self.a_dag_op),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def _schedule_stack(H: HamiltonianSchedule, times) -> np.ndarray:
    return np.stack([H(float(t)) for t in times])


def _min_eigs(thetas: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(hermitian_part(thetas))[:, 0]


def _h_observability(hs: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    return np.array([quasi_herm_residual(h, th) for h, th in zip(hs, thetas)])


def generator(H_t, sigma) -> np.ndarray:
    """Wave-function generator ``G = H − Σ`` (zero in the Heisenberg setting)."""
    Hm, sm = as_matrix(H_t, "H"), as_matrix(sigma, "sigma")
    if Hm.shape != sm.shape:
        raise DimensionMismatch(f"H has shape {Hm.shape}, sigma has {sm.shape}")
    return Hm - sm


def integrate_dyson(
    omega0,
    H,
    grid,
    dt: float = 1e-3,
    obs_tol: float = 1e-9,
    error_budget: float | None = None,
) -> Trajectory:
    """Integrate ``i∂ₜΩ = Ω H(t)`` from ``Ω(t₀) = omega0``.

    ``H(t₀)`` must be quasi-Hermitian under ``Ω₀†Ω₀`` at the start. Later
    times are only monitored (``residuals["h_observability"]``).

    Raises
    ------
    InitialObservabilityViolated
        If the start-time intertwining residual exceeds ``obs_tol``.
    SingularMap
        If ``Ω(t)`` reaches condition number ``1e12`` at a grid point.
    """
    grid = as_grid(grid)
    H = as_schedule(H)
    om0 = as_matrix(omega0, "omega0")
    if om0.shape[0] != H.dim:
        raise DimensionMismatch(f"omega0 has dim {om0.shape[0]}, schedule has {H.dim}")
    _check_invertible(om0, grid.t0)
    th0 = dag(om0) @ om0
    r = quasi_herm_residual(H(grid.t0), th0)
    if r > obs_tol:
        raise InitialObservabilityViolated(f"H(t0) is not quasi-Hermitian under omega0†omega0 (residual {r:.3e})")

    def f(t, om):
        return -1j * (om @ H(t))

    def check(i, t, om):
        _check_invertible(om, t)

    omega = rk4_grid(f, om0, grid, dt, error_budget, check)
    theta = dag(omega) @ omega
    hs = _schedule_stack(H, grid.points)
    # Heisenberg constraint: the Coriolis term equals H(t)
    sigma = hs.copy()
    return Trajectory(
        grid.points,
        H,
        omega=omega,
        theta=theta,
        sigma=sigma,
        generator_g=hs - sigma,
        residuals={
            "theta_min_eig": _min_eigs(theta),
            "h_observability": _h_observability(hs, theta),
        },
    )


def coriolis_from_map(traj: Trajectory, index: int, mode: str = "exact") -> np.ndarray:
    """Coriolis term ``Σ = iΩ⁻¹Ω̇`` at one grid point.

    ``exact`` uses ``Ω̇ = −iΩH`` from the Dyson equation and so returns
    ``H(t)``. ``finite-difference`` differentiates the stored ``Ω``
    snapshots with a three-point stencil (one-sided at the ends), accurate
    to second order in the grid step.
    """
    n = len(traj)
    if not -n <= index < n:
        raise IndexError(f"grid index {index} out of range for {n} points")
    i = index % n
    t = traj.times
    if mode == "exact":
        return traj.schedule(float(t[i]))
    if mode != "finite-difference":
        raise ValueError(f"unknown Coriolis mode {mode!r}")
    if traj.omega is None or n < 3:
        raise InsufficientPoints("finite-difference Coriolis term needs an Omega trajectory with >= 3 points")
    om = traj.omega
    if i == 0:
        h1, h2 = t[1] - t[0], t[2] - t[1]
        d = (-(2 * h1 + h2) / (h1 * (h1 + h2)) * om[0]
             + (h1 + h2) / (h1 * h2) * om[1]
             - h1 / (h2 * (h1 + h2)) * om[2])
    elif i == n - 1:
        h1, h2 = t[-2] - t[-3], t[-1] - t[-2]
        d = (h2 / (h1 * (h1 + h2)) * om[-3]
             - (h1 + h2) / (h1 * h2) * om[-2]
             + (h1 + 2 * h2) / (h2 * (h1 + h2)) * om[-1])
    else:
        h1, h2 = t[i] - t[i - 1], t[i + 1] - t[i]
        d = (-h2 / (h1 * (h1 + h2)) * om[i - 1]
             + (h2 - h1) / (h1 * h2) * om[i]
             + h1 / (h2 * (h1 + h2)) * om[i + 1])
    return 1j * np.linalg.solve(om[i], d)


def make_compatible_initial(a, omega0, herm_tol: float = 1e-12) -> Observable:
    """F-space initial value ``Ω₀⁻¹ 𝔞 Ω₀``, quasi-Hermitian under ``Ω₀†Ω₀``."""
    am, om = as_matrix(a, "observable"), as_matrix(omega0, "omega0")
    if am.shape != om.shape:
        raise DimensionMismatch(f"observable has shape {am.shape}, omega0 has {om.shape}")
    r = herm_residual(am)
    if r > herm_tol:
        raise NotHermitian(f"P-space observable is not Hermitian (relative residual {r:.3e})", r)
    _check_invertible(om)
    return Observable(np.linalg.solve(om, am @ om), "F")


def integrate_heisenberg_pair(
    A0,
    theta0,
    H,
    grid,
    dt: float = 1e-3,
    coupling_tol: float = 1e-9,
    error_budget: float | None = None,
) -> Trajectory:
    """Integrate ``A`` and ``A†`` as two separate operator ODEs, with ``Θ`` alongside.

    The second equation is started from ``A0†`` and never derived from the
    first, so ``residuals["conj_consistency"] = ‖A(t)† − A†(t)‖`` is a
    genuine check. ``residuals["quasi_herm"]`` is
    :func:`~nhh.metric.quasi_herm_residual` of ``A(t)`` under ``Θ(t)``.

    Raises
    ------
    InitialCouplingViolated
        If ``A0†Θ₀ ≠ Θ₀A0`` beyond ``coupling_tol``.
    """
    grid = as_grid(grid)
    H = as_schedule(H)
    A0m, th0 = as_matrix(A0, "A0"), as_matrix(theta0, "theta0")
    if not A0m.shape == th0.shape == (H.dim, H.dim):
        raise DimensionMismatch("A0, theta0 and the schedule must share one dimension")
    r = quasi_herm_residual(A0m, th0)
    if r > coupling_tol:
        raise InitialCouplingViolated(f"A0†theta0 != theta0 A0 (residual {r:.3e})")

    def f(t, y):
        h = H(t)
        hd = dag(h)
        A, B, th = y
        return -1j * np.stack([A @ h - h @ A, B @ hd - hd @ B, th @ h - hd @ th])

    y = rk4_grid(f, np.stack([A0m, dag(A0m), th0]), grid, dt, error_budget)
    a_op, a_dag, theta = y[:, 0], y[:, 1], y[:, 2]
    sigma = _schedule_stack(H, grid.points)
    return Trajectory(
        grid.points,
        H,
        theta=theta,
        sigma=sigma,
        generator_g=sigma - sigma,
        a_op=a_op,
        a_dag_op=a_dag,
        residuals={
            "quasi_herm": np.array([quasi_herm_residual(a, th) for a, th in zip(a_op, theta)]),
            "conj_consistency": np.array([fro(dag(a) - b) for a, b in zip(a_op, a_dag)]),
            "theta_min_eig": _min_eigs(theta),
            "h_observability": _h_observability(sigma, theta),
        },
    )


def evolve_metric(theta0, H, grid, dt: float = 1e-3, error_budget: float | None = None) -> Trajectory:
    """Co-evolve the metric by ``i∂ₜΘ = ΘH − H†Θ``.

    Raises
    ------
    PositivityLost
        At the first grid time where ``Θ`` stops being positive definite.
    """
    grid = as_grid(grid)
    H = as_schedule(H)
    th0 = as_matrix(theta0, "theta0")
    if th0.shape != (H.dim, H.dim):
        raise DimensionMismatch(f"theta0 has shape {th0.shape}, schedule has dim {H.dim}")

    def f(t, th):
        h = H(t)
        return -1j * (th @ h - dag(h) @ th)

    def check(i, t, th):
        lo = float(np.linalg.eigvalsh(hermitian_part(th))[0])
        if not lo > 0:
            raise PositivityLost(f"metric lost positivity at t={t:.17g} (min eigenvalue {lo:.3e})", t, lo)

    theta = rk4_grid(f, th0, grid, dt, error_budget, check)
    sigma = _schedule_stack(H, grid.points)
    return Trajectory(
        grid.points,
        H,
        theta=theta,
        sigma=sigma,
        residuals={
            "herm": np.array([herm_residual(th) for th in theta]),
            "theta_min_eig": _min_eigs(theta),
            "h_observability": _h_observability(sigma, theta),
        },
    )


def schrodinger_f_space(
    psi0,
    psi_tilde0,
    G: Callable[[float], np.ndarray] | np.ndarray | None,
    grid,
    dt: float = 1e-3,
    error_budget: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate ``i∂ₜψ = Gψ`` and ``i∂ₜψ̃ = G†ψ̃``.

    ``G=None`` is the Heisenberg case: both kets stay put exactly.
    Returns ``(times, psi, psi_tilde)`` with state arrays shaped
    ``(n_points, d)``.
    """
    grid = as_grid(grid)
    p, q = as_vector(psi0), as_vector(psi_tilde0)
    if p.size != q.size:
        raise DimensionMismatch(f"psi has dim {p.size}, psi_tilde has {q.size}")
    if G is None:
        def f(t, y):
            return np.zeros_like(y)
    else:
        Gs = as_schedule(G)

        def f(t, y):
            g = Gs(t)
            return -1j * np.stack([g @ y[0], dag(g) @ y[1]])

    y = rk4_grid(f, np.stack([p, q]), grid, dt, error_budget)
    return grid.points, y[:, 0], y[:, 1]


def p_space_expectations(omega: np.ndarray, a, psi) -> np.ndarray:
    """Normalized ``⟨φ(t)|𝔞|φ(t)⟩`` with ``φ(t) = Ω(t)ψ`` along a Dyson trajectory."""
    am, v = as_matrix(a), as_vector(psi)
    phi = omega @ v
    num = np.einsum("ni,ij,nj->n", phi.conj(), am, phi)
    return num / np.einsum("ni,ni->n", phi.conj(), phi)


def s_space_expectations(theta: np.ndarray, a_op: np.ndarray, psi) -> np.ndarray:
    """Normalized ``⟨ψ|Θ(t)A(t)|ψ⟩ / ⟨ψ|Θ(t)|ψ⟩`` for a fixed ket."""
    v = as_vector(psi)
    num = np.einsum("i,nij,njk,k->n", v.conj(), theta, a_op, v)
    return num / np.einsum("i,nij,j->n", v.conj(), theta, v)
