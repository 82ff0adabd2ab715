import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nhh.errors import DefectiveMatrix, NonFinite, NotHermitian, NotPositiveDefinite
from nhh.linalg import ExpMap, eig_bi, herm_sqrt, mat_exp, pd_min_eig
from nhh.metric import solve_metric
from nhh.models import pt_two_level

from conftest import SX


def taylor_exp(M, terms=30):
    out = np.eye(M.shape[0], dtype=complex)
    term = np.eye(M.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


def test_exp_of_zero_is_identity():
    np.testing.assert_array_equal(mat_exp(np.zeros((3, 3)), 2.5 - 1j), np.eye(3))


def test_exp_of_diagonal():
    d = np.array([0.3, -1.2 + 0.5j])
    s = 0.7 - 0.2j
    np.testing.assert_allclose(mat_exp(np.diag(d), s), np.diag(np.exp(s * d)), rtol=1e-14)


def test_exp_sigma_x_quarter_turn_against_taylor():
    s = -1j * math.pi / 2
    oracle = taylor_exp(s * SX)
    np.testing.assert_allclose(oracle, -1j * SX, atol=1e-14)
    assert np.max(np.abs(mat_exp(SX, s) - oracle)) < 1e-12


def test_exp_falls_back_on_jordan_block():
    J = np.array([[0.0, 1.0], [0.0, 0.0]])
    e = ExpMap(J)
    assert not e.uses_eigenbasis
    np.testing.assert_allclose(e(2.0), [[1, 2], [0, 1]], atol=1e-15)


def test_exp_rejects_nan():
    with pytest.raises(NonFinite):
        mat_exp(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(NonFinite):
        mat_exp(SX, np.inf)


def _random_matrix(seed, d, norm):
    r = np.random.default_rng(seed)
    m = r.standard_normal((d, d)) + 1j * r.standard_normal((d, d))
    return m * (norm / np.linalg.norm(m))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 16), norm=st.floats(0.01, 5.0),
       s=st.complex_numbers(max_magnitude=1.0), u=st.complex_numbers(max_magnitude=1.0))
def test_exp_group_property(seed, d, norm, s, u):
    M = _random_matrix(seed, d, norm)
    e = ExpMap(M)
    lhs = e(s) @ e(u)
    rhs = e(s + u)
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-10
    inv = e(s) @ e(-s)
    assert np.linalg.norm(inv - np.eye(d)) / math.sqrt(d) < 1e-10


def test_eig_bi_diagonal():
    e = eig_bi(np.diag([1.0, 2.0]))
    np.testing.assert_allclose(np.sort(e.eigenvalues.real), [1, 2])
    np.testing.assert_allclose(np.abs(e.right), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(np.abs(e.left), np.eye(2), atol=1e-15)


def test_eig_bi_sigma_x_biorthogonal():
    e = eig_bi(SX)
    np.testing.assert_allclose(np.sort(e.eigenvalues.real), [-1, 1], atol=1e-15)
    assert np.max(np.abs(e.left.conj().T @ e.right - np.eye(2))) < 1e-12


def test_eig_bi_jordan_block_is_defective():
    with pytest.raises(DefectiveMatrix):
        eig_bi(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_eig_bi_degenerate_non_hermitian():
    # degenerate eigenvalue, still diagonalizable
    S = np.array([[1, 2, 0], [0, 1, 1], [1, 0, 1]], dtype=complex)
    M = S @ np.diag([2.0, 2.0, -1.0]) @ np.linalg.inv(S)
    e = eig_bi(M)
    assert np.max(np.abs(e.left.conj().T @ e.right - np.eye(3))) < 1e-10
    assert np.max(np.abs(M.conj().T @ e.left - e.left * e.eigenvalues.conj())) < 1e-10


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 16))
def test_eig_bi_reconstruction(seed, d):
    M = _random_matrix(seed, d, 3.0)
    e = eig_bi(M)
    assert np.linalg.norm(e.reconstruct() - M) < 1e-9 * np.linalg.norm(M)
    assert np.linalg.norm(e.left.conj().T @ e.right - np.eye(d)) < 1e-9 * d


def test_herm_sqrt_examples():
    np.testing.assert_allclose(herm_sqrt(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(herm_sqrt(np.diag([4.0, 1.0])), np.diag([2.0, 1.0]), atol=1e-15)
    with pytest.raises(NotPositiveDefinite) as exc:
        herm_sqrt(np.diag([1.0, -1.0]))
    assert exc.value.min_eig == pytest.approx(-1.0)
    with pytest.raises(NotHermitian):
        herm_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))


@settings(max_examples=50, deadline=None)
@given(A=arrays(np.complex128, (5, 5), elements=st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)))
def test_herm_sqrt_property(A):
    P = A @ A.conj().T + 0.1 * np.eye(5)
    S = herm_sqrt(P)
    assert np.linalg.norm(S @ S - P) / np.linalg.norm(P) < 1e-10
    assert np.max(np.abs(S - S.conj().T)) < 1e-12 * max(1.0, np.max(np.abs(S)))
    assert np.linalg.eigvalsh(S)[0] > 0


def test_pd_min_eig():
    assert pd_min_eig(np.eye(4)) == pytest.approx(1.0)
    assert pd_min_eig(np.diag([3.0, -2.0])) == pytest.approx(-2.0)
    theta = solve_metric(pt_two_level(0.5, 1.0)).theta
    oracle = np.linalg.eigvalsh(theta).min()
    assert pd_min_eig(theta) == pytest.approx(oracle, rel=1e-14)
    assert pd_min_eig(theta) > 0
