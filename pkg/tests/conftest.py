import numpy as np
import pytest
from scipy.stats import unitary_group


def random_hermitian(rng, d, scale=1.0):
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (x + x.conj().T)


def random_well_conditioned(rng, d, smin=0.5, smax=2.0):
    """Invertible map with singular values in [smin, smax]."""
    u = unitary_group.rvs(d, random_state=rng)
    v = unitary_group.rvs(d, random_state=rng)
    return (u * rng.uniform(smin, smax, d)) @ v


def random_quasi_hermitian(rng, d):
    """Returns (H, h, Omega) with H = Omega^-1 h Omega."""
    h = random_hermitian(rng, d)
    om = random_well_conditioned(rng, d)
    return np.linalg.solve(om, h @ om), h, om


def random_state(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def rk4_reference(f, y0, t0, t1, dt):
    """Plain textbook RK4, kept separate from the library integrator."""
    n = int(round((t1 - t0) / dt))
    h = (t1 - t0) / n
    y = np.array(y0, dtype=complex)
    for k in range(n):
        t = t0 + k * h
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
