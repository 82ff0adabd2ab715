"""Ready-made Hamiltonians, schedules and observables."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import BadParams, DimensionMismatch, UnknownPreset
from .linalg import as_matrix, herm_residual
from .metric import DysonMap, Hamiltonian, Observable


@dataclass(frozen=True, eq=False)
class HamiltonianSchedule:
    """Time-dependent generator ``t -> H(t)``.

    ``smoothness_hint`` is ``"constant"`` when the evaluator ignores ``t``;
    stationary code paths use that to accept a schedule.
    """

    evaluator: Callable[[float], np.ndarray]
    label: str = ""
    smoothness_hint: str = "smooth"
    dim: int = field(default=0)

    def __post_init__(self):
        if self.smoothness_hint not in ("constant", "smooth"):
            raise ValueError(f"smoothness_hint must be 'constant' or 'smooth', got {self.smoothness_hint!r}")
        if not self.dim:
            object.__setattr__(self, "dim", as_matrix(self.evaluator(0.0)).shape[0])

    def __call__(self, t: float) -> np.ndarray:
        m = as_matrix(self.evaluator(t), f"H({t})")
        if m.shape[0] != self.dim:
            raise DimensionMismatch(f"schedule changed dimension at t={t}: {m.shape[0]} != {self.dim}")
        return m

    @property
    def is_constant(self) -> bool:
        return self.smoothness_hint == "constant"

    @classmethod
    def constant(cls, H, label: str = "") -> "HamiltonianSchedule":
        m = as_matrix(H, "Hamiltonian")
        m.setflags(write=False)
        return cls(lambda t: m, label or getattr(H, "label", ""), "constant", m.shape[0])


def as_schedule(H) -> HamiltonianSchedule:
    """Wrap a fixed matrix as a constant schedule; pass schedules through."""
    if isinstance(H, HamiltonianSchedule):
        return H
    if callable(H):
        return HamiltonianSchedule(H)
    return HamiltonianSchedule.constant(H)


def pt_two_level(gamma: float, s: float) -> Hamiltonian:
    """``[[iγ, s], [s, −iγ]]``, eigenvalues ``±√(s² − γ²)``.

    Real spectrum iff ``|s| >= |γ|``. Broken-phase matrices are returned as
    well; metric construction is what rejects them.
    """
    if s == 0:
        raise BadParams("pt_two_level needs s != 0")
    H = np.array([[1j * gamma, s], [s, -1j * gamma]], dtype=np.complex128)
    return Hamiltonian(H, f"pt_two_level(gamma={gamma:g}, s={s:g})")


def asym_chain(N: int, hop: float, g: float) -> tuple[Hamiltonian, DysonMap]:
    """Open chain with asymmetric hopping and its diagonal Dyson map.

    Upper hopping is ``hop·(1+g)``, lower hopping ``hop·(1−g)``. With
    ``D = diag(r^k)``, ``r = √((1+g)/(1−g))``, the product ``D H D⁻¹`` is the
    Hermitian chain with hopping ``hop·√(1−g²)``, so the spectrum is real and
    ``D`` is returned as a reference Dyson map.
    """
    if int(N) != N or N < 2:
        raise BadParams(f"asym_chain needs an integer N >= 2, got {N}")
    if not abs(g) < 1:
        raise BadParams(f"asym_chain needs |g| < 1, got {g}")
    N = int(N)
    H = np.zeros((N, N), dtype=np.complex128)
    k = np.arange(N - 1)
    H[k, k + 1] = hop * (1 + g)
    H[k + 1, k] = hop * (1 - g)
    r = np.sqrt((1 + g) / (1 - g))
    D = np.diag(r ** np.arange(N)).astype(np.complex128)
    return Hamiltonian(H, f"asym_chain(N={N}, hop={hop:g}, g={g:g})"), DysonMap(D, "positive-root")


def driven_pt(gamma0: float, eps: float, omega_drive: float, s: float) -> HamiltonianSchedule:
    """PT two-level model with ``γ(t) = γ₀ + ε·sin(ω t)``.

    Requires ``|γ₀| + |ε| < |s|`` so the spectrum stays real at all times.
    """
    if not abs(gamma0) + abs(eps) < abs(s):
        raise BadParams(f"driven_pt leaves the unbroken phase: |gamma0| + |eps| = {abs(gamma0) + abs(eps)} >= |s| = {abs(s)}")

    def H(t: float) -> np.ndarray:
        g = gamma0 + eps * np.sin(omega_drive * t)
        return np.array([[1j * g, s], [s, -1j * g]], dtype=np.complex128)

    hint = "constant" if eps == 0 else "smooth"
    return HamiltonianSchedule(H, f"driven_pt(gamma0={gamma0:g}, eps={eps:g}, omega={omega_drive:g}, s={s:g})", hint, 2)


_SITE_RE = re.compile(r"^site_occupation\s*[\(:]\s*(\d+)\s*\)?$")


def preset_observable(name: str, dim: int = 2, matrix=None) -> Observable:
    """Named Hermitian P-space observable.

    ``sigma_x`` and ``sigma_z`` need ``dim == 2``. ``site_occupation(k)``
    is the projector on site ``k`` (1-based). ``custom`` wraps ``matrix``.
    """
    if name == "sigma_x" or name == "sigma_z":
        if dim != 2:
            raise DimensionMismatch(f"{name} is defined for dim 2, not {dim}")
        m = [[0, 1], [1, 0]] if name == "sigma_x" else [[1, 0], [0, -1]]
        return Observable(np.array(m, dtype=np.complex128), "P")
    mt = _SITE_RE.match(name)
    if mt:
        k = int(mt.group(1))
        if not 1 <= k <= dim:
            raise DimensionMismatch(f"site {k} outside 1..{dim}")
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[k - 1, k - 1] = 1
        return Observable(m, "P")
    if name == "custom":
        if matrix is None:
            raise UnknownPreset("custom observable needs a matrix")
        m = as_matrix(matrix, "observable")
        if m.shape[0] != dim:
            raise DimensionMismatch(f"custom observable has dim {m.shape[0]}, model has {dim}")
        if herm_residual(m) > 1e-12:
            raise BadParams("custom P-space observable must be Hermitian")
        return Observable(m, "P")
    raise UnknownPreset(f"unknown observable preset {name!r}")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    dim: int | None = None
    matrix: object = None


_REQUIRED = {
    "pt_two_level": ("gamma", "s"),
    "asym_chain": ("N", "hop", "g"),
    "driven_pt": ("gamma0", "eps", "omega_drive", "s"),
    "custom_matrix": (),
}


def build_model(spec: ModelSpec) -> tuple[HamiltonianSchedule, DysonMap | None]:
    """Instantiate a model; returns the schedule and a reference map if known."""
    if spec.kind not in _REQUIRED:
        raise BadParams(f"unknown model kind {spec.kind!r}")
    p = dict(spec.params)
    missing = [k for k in _REQUIRED[spec.kind] if k not in p]
    extra = sorted(set(p) - set(_REQUIRED[spec.kind]))
    if missing or extra:
        raise BadParams(f"model {spec.kind}: missing params {missing}, unexpected params {extra}")
    ref = None
    if spec.kind == "pt_two_level":
        H = pt_two_level(p["gamma"], p["s"])
        sched = HamiltonianSchedule.constant(H.matrix, H.label)
    elif spec.kind == "asym_chain":
        H, ref = asym_chain(p["N"], p["hop"], p["g"])
        sched = HamiltonianSchedule.constant(H.matrix, H.label)
    elif spec.kind == "driven_pt":
        sched = driven_pt(p["gamma0"], p["eps"], p["omega_drive"], p["s"])
    else:
        if spec.matrix is None:
            raise BadParams("custom_matrix model needs a matrix")
        sched = HamiltonianSchedule.constant(spec.matrix, "custom_matrix")
    if spec.dim is not None and spec.dim != sched.dim:
        raise BadParams(f"model dim {spec.dim} inconsistent with constructed dimension {sched.dim}")
    return sched, ref
