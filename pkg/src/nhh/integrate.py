"""Time grids and the fixed-step RK4 driver for operator ODEs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StepRejected


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing output times; ``points[0]`` is ``t0``."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("time grid needs at least one point")
        if not np.all(np.isfinite(p)):
            raise ValueError("time grid contains non-finite values")
        if np.any(np.diff(p) <= 0):
            raise ValueError("time grid must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def uniform(cls, t0: float, t_end: float, step: float) -> "TimeGrid":
        """Equally spaced grid from ``t0`` to ``t_end`` with spacing ``<= step``."""
        if not t_end > t0:
            raise ValueError("t_end must exceed t0")
        if not step > 0:
            raise ValueError("grid step must be positive")
        n = max(1, math.ceil((t_end - t0) / step - 1e-9))
        return cls(np.linspace(t0, t_end, n + 1))

    @property
    def t0(self) -> float:
        return float(self.points[0])

    def __len__(self) -> int:
        return self.points.size

    def __iter__(self):
        return iter(self.points)


def as_grid(grid) -> TimeGrid:
    return grid if isinstance(grid, TimeGrid) else TimeGrid(grid)


def rk4_step(f, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_grid(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    grid: TimeGrid,
    dt: float,
    error_budget: float | None = None,
    on_point: Callable[[int, float, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Integrate ``y' = f(t, y)`` and return snapshots at the grid points.

    Each grid interval is split into the smallest number of equal substeps
    not exceeding ``dt``. With ``error_budget`` set, every substep is
    repeated as two half steps and the step-doubling estimate
    ``‖y_half − y_full‖ / 15`` (relative to ``‖y‖``) must stay within the
    budget; the half-step result is kept.

    ``on_point(i, t, y)`` is called at every grid point, including the first,
    and may raise to abort the run.
    """
    if not dt > 0:
        raise ValueError("integrator dt must be positive")
    grid = as_grid(grid)
    pts = grid.points
    y = np.array(y0, dtype=np.complex128)
    out = np.empty((pts.size,) + y.shape, dtype=np.complex128)
    out[0] = y
    if on_point is not None:
        on_point(0, float(pts[0]), y)
    for i in range(1, pts.size):
        a, b = float(pts[i - 1]), float(pts[i])
        m = max(1, math.ceil((b - a) / dt - 1e-9))
        h = (b - a) / m
        for j in range(m):
            t = a + j * h
            if error_budget is None:
                y = rk4_step(f, t, y, h)
                continue
            full = rk4_step(f, t, y, h)
            half = rk4_step(f, t + 0.5 * h, rk4_step(f, t, y, 0.5 * h), 0.5 * h)
            err = np.linalg.norm(half - full) / 15.0 / max(np.linalg.norm(half), 1e-300)
            if err > error_budget:
                raise StepRejected(f"local error estimate {err:.3e} exceeds budget {error_budget:.1e} at t={t:.17g}", t, err)
            y = half
        out[i] = y
        if on_point is not None:
            on_point(i, b, y)
    return out
