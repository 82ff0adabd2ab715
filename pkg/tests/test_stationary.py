import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from nhh.errors import InconsistentTriple, InitialCouplingViolated, InitialObservabilityViolated, NotHermitian, StepRejected
from nhh.integrate import TimeGrid
from nhh.linalg import herm_residual
from nhh.metric import hermitize, quasi_herm_residual
from nhh.models import pt_two_level
from nhh.stationary import (
    StationaryScenario,
    drive_term,
    integrate_eom,
    observable_at,
    omega_at,
    p_space_expectations,
    partner_h_at,
    theta_at,
)

from conftest import SZ, random_hermitian, random_quasi_hermitian, random_state, rk4_reference


@pytest.fixture
def sc():
    return StationaryScenario.from_hamiltonian(pt_two_level(0.5, 1.0), t0=0.3)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_scenario_invariants_enforced(sc):
    with pytest.raises(InconsistentTriple):
        StationaryScenario(sc.h_spec, sc.omega0, 2 * sc.theta0.theta)
    with pytest.raises(InitialObservabilityViolated):
        StationaryScenario.from_dyson_map(sc.h_spec, np.eye(2))


def test_omega_at_t0(sc):
    np.testing.assert_array_equal(omega_at(sc, sc.t0).omega, sc.omega0.omega)


def test_omega_at_zero_hamiltonian():
    sc0 = StationaryScenario.from_hamiltonian(np.zeros((2, 2)))
    for t in (-3.0, 0.0, 7.5):
        np.testing.assert_allclose(omega_at(sc0, t).omega, sc0.omega0.omega, atol=1e-15)


def test_omega_at_matches_rk4_oracle(sc):
    H = sc.h_spec.matrix
    ref = rk4_reference(lambda t, om: -1j * om @ H, sc.omega0.omega, sc.t0, sc.t0 + 1.0, 1e-4)
    assert np.max(np.abs(omega_at(sc, sc.t0 + 1.0).omega - ref)) < 1e-7


def test_theta_at(sc):
    np.testing.assert_allclose(theta_at(sc, sc.t0).theta, sc.theta0.theta, atol=1e-15)
    for tau in (0.5, 1.0, 5.0):
        assert rel(theta_at(sc, sc.t0 + tau).theta, sc.theta0.theta) < 1e-9


def test_theta_at_unitary_case(rng):
    H = random_hermitian(rng, 3)
    U = sla.expm(1j * random_hermitian(rng, 3))
    sch = StationaryScenario.from_dyson_map(H, U)
    for t in (0.7, 4.0):
        np.testing.assert_allclose(theta_at(sch, t).theta, np.eye(3), atol=1e-12)


def test_partner_h_at(sc, rng):
    np.testing.assert_allclose(partner_h_at(sc, sc.t0).h, hermitize(sc.h_spec, sc.omega0).h, atol=1e-15)
    assert np.linalg.norm(partner_h_at(sc, sc.t0 + 2).h - partner_h_at(sc, sc.t0).h) < 1e-9
    H = random_hermitian(rng, 3)
    sch = StationaryScenario.from_dyson_map(H, np.eye(3))
    for t in (1.0, 6.0):
        np.testing.assert_allclose(partner_h_at(sch, t).h, H, atol=1e-12)


def test_observable_at_identity(sc):
    for t in (0.0, 1.0, 9.0):
        np.testing.assert_allclose(observable_at(sc, np.eye(2), t).matrix, np.eye(2), atol=1e-12)


def test_observable_at_partner_gives_h_spec(sc):
    h = 0.5 * (sc.partner0.h + sc.partner0.h.conj().T)
    for t in (0.3, 1.7, 6.0):
        np.testing.assert_allclose(observable_at(sc, h, t).matrix, sc.h_spec.matrix, atol=1e-12)


def test_observable_at_quasi_hermitian(sc):
    A = observable_at(sc, SZ, 1.0)
    assert A.picture == "F"
    assert quasi_herm_residual(A, sc.theta0) < 1e-9


def test_observable_at_rejects_non_hermitian(sc):
    with pytest.raises(NotHermitian):
        observable_at(sc, 1j * SZ, 1.0)


def test_observable_at_schedule(sc):
    A = observable_at(sc, lambda t: np.cos(t) * SZ, 1.0)
    np.testing.assert_allclose(A.matrix, np.cos(1.0) * observable_at(sc, SZ, 1.0).matrix, atol=1e-14)


def test_drive_term_trivial(sc):
    np.testing.assert_array_equal(drive_term(sc, np.zeros((2, 2)), 1.0).matrix, 0)
    sid = StationaryScenario.from_dyson_map(np.zeros((2, 2)), np.eye(2))
    K = drive_term(sid, lambda t: -np.sin(t) * SZ, 1.0)
    np.testing.assert_allclose(K.matrix, -1j * np.sin(1.0) * SZ, atol=1e-15)
    assert K.t == 1.0


def test_drive_term_finite_difference_oracle(sc):
    a = lambda t: np.cos(t) * SZ
    a_dot = lambda t: -np.sin(t) * SZ
    H = sc.h_spec.matrix
    h = 1e-4
    A = lambda t: observable_at(sc, a, t).matrix
    dA = (A(1 + h) - A(1 - h)) / (2 * h)
    # K = i∂A − (AH − HA) from the closed form
    K_fd = 1j * dA - (A(1) @ H - H @ A(1))
    assert np.max(np.abs(drive_term(sc, a_dot, 1.0).matrix - K_fd)) < 1e-6


def test_integrate_eom_trivial(sc):
    grid = TimeGrid.uniform(0.0, 2.0, 0.1)
    out = integrate_eom(sc, np.eye(2), None, grid, 1e-2)
    np.testing.assert_allclose(out, np.broadcast_to(np.eye(2), out.shape), atol=1e-14)
    H = sc.h_spec.matrix
    out = integrate_eom(sc, H, None, grid, 1e-2)
    np.testing.assert_allclose(out, np.broadcast_to(H, out.shape), atol=1e-13)


def test_integrate_eom_with_drive_matches_closed_form(sc):
    a = lambda t: np.cos(t) * SZ
    a_dot = lambda t: -np.sin(t) * SZ
    grid = TimeGrid.uniform(0.0, 2.0, 1e-3)
    A0 = observable_at(sc, a, 0.0)
    out = integrate_eom(sc, A0, lambda t: drive_term(sc, a_dot, t), grid, 1e-3)
    closed = np.stack([observable_at(sc, a, t).matrix for t in grid.points])
    assert np.max(np.linalg.norm(out - closed, axis=(1, 2))) < 1e-6


def test_integrate_eom_coupling_and_step_control(sc):
    with pytest.raises(InitialCouplingViolated):
        integrate_eom(sc, 1j * SZ, None, [0.0, 1.0])
    A0 = observable_at(sc, SZ, 0.0)
    with pytest.raises(StepRejected):
        integrate_eom(sc, A0, None, [0.0, 1.0], dt=0.5, error_budget=1e-12)
    out = integrate_eom(sc, A0, None, [0.0, 1.0], dt=1e-2, error_budget=1e-8)
    assert np.linalg.norm(out[-1] - observable_at(sc, SZ, 1.0).matrix) < 1e-9


def _sup_over_grid(sc, T, n=200):
    ts = sc.t0 + np.linspace(0, T, n)
    r_theta = max(rel(theta_at(sc, t).theta, sc.theta0.theta) for t in ts)
    h0 = sc.partner0.h
    r_h = max(rel(partner_h_at(sc, t).h, h0) for t in ts)
    return r_theta, r_h


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 16))
def test_props_on_random_scenarios(seed, d):
    rng = np.random.default_rng(seed)
    H, _, _ = random_quasi_hermitian(rng, d)
    sc = StationaryScenario.from_hamiltonian(H)
    T = 20 / np.linalg.norm(H)
    r_theta, r_h = _sup_over_grid(sc, T)
    assert r_theta < 1e-8
    assert r_h < 1e-8


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 8))
def test_observable_spectrum_and_expectation(seed, d):
    rng = np.random.default_rng(seed)
    H, _, _ = random_quasi_hermitian(rng, d)
    sc = StationaryScenario.from_hamiltonian(H)
    a = random_hermitian(rng, d)
    psi = random_state(rng, d)
    ref = np.linalg.eigvalsh(a)
    h = 0.5 * (sc.partner0.h + sc.partner0.h.conj().T)
    phi0 = sc.omega0.omega @ psi
    for t in np.linspace(0, 5, 6):
        A = observable_at(sc, a, t).matrix
        w = np.linalg.eigvals(A)
        np.testing.assert_allclose(np.sort(w.real), ref, atol=1e-9)
        assert np.max(np.abs(w.imag)) < 1e-9
        # P-space Heisenberg value via scipy expm
        U = sla.expm(-1j * h * t)
        heis = U.conj().T @ a @ U
        oracle = np.vdot(phi0, heis @ phi0) / np.vdot(phi0, phi0)
        value = np.vdot(psi, sc.theta0.theta @ A @ psi) / np.vdot(psi, sc.theta0.theta @ psi)
        assert abs(value - oracle) < 1e-8


def test_p_space_expectations_matches_expm(sc, rng):
    psi = random_state(rng, 2)
    ts = [0.3, 1.0, 4.0]
    vals = p_space_expectations(sc, SZ, psi, ts)
    h = sc.partner0.h
    for v, t in zip(vals, ts):
        phi = sla.expm(-1j * h * (t - sc.t0)) @ sc.omega0.omega @ psi
        assert v == pytest.approx(np.vdot(phi, SZ @ phi) / np.vdot(phi, phi), abs=1e-12)
    assert herm_residual(h) < 1e-12
