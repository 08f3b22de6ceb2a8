"""Density-matrix container and entanglement metrics, checked against
independent oracles and closed forms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tbsim.qcore import (BELL_PHI_PLUS, DensityMatrix, concurrence,
                         fidelity_to_state, hermitian_eigensystem, purity)


def random_physical_rho(seed: int, dim: int = 4) -> np.ndarray:
    """Random density matrix via a Ginibre matrix: A A† / tr."""
    g = np.random.default_rng(seed)
    a = g.normal(size=(dim, dim)) + 1j * g.normal(size=(dim, dim))
    m = a @ a.conj().T
    return m / m.trace()


def charpoly_eigenvalues(m: np.ndarray) -> np.ndarray:
    """Eigenvalue oracle: Faddeev-LeVerrier characteristic polynomial
    coefficients, roots via the companion matrix (np.roots)."""
    n = m.shape[0]
    coeffs = [1.0]
    mk = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        mk = m @ mk
        c = -mk.trace() / k
        coeffs.append(c)
        mk = mk + c * np.eye(n)
    roots = np.roots(np.array(coeffs))
    return np.sort(roots.real)[::-1]


def werner_state(p: float) -> np.ndarray:
    """p |Phi+><Phi+| + (1-p) I/4."""
    proj = np.outer(BELL_PHI_PLUS, BELL_PHI_PLUS.conj())
    return p * proj + (1.0 - p) * np.eye(4) / 4.0


# --- eigensystem ------------------------------------------------------------

def test_eigensystem_against_charpoly_oracle():
    for seed in range(20):
        rho = random_physical_rho(seed)
        vals, vecs = hermitian_eigensystem(rho)
        want = charpoly_eigenvalues(rho)
        assert np.allclose(np.sort(vals)[::-1], want, atol=1e-9)
        # eigen-equation and orthonormality
        for i in range(4):
            assert np.allclose(rho @ vecs[:, i], vals[i] * vecs[:, i], atol=1e-10)
        assert np.allclose(vecs.conj().T @ vecs, np.eye(4), atol=1e-10)


def test_eigensystem_descending_order():
    vals, _ = hermitian_eigensystem(random_physical_rho(99))
    assert np.all(np.diff(vals) <= 0)


def test_eigensystem_rejects_non_hermitian():
    m = np.eye(4, dtype=complex)
    m[0, 1] = 0.5
    with pytest.raises(ValueError):
        hermitian_eigensystem(m)


# --- DensityMatrix container -------------------------------------------------

def test_density_matrix_validation():
    DensityMatrix(np.eye(4) / 4.0)
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(3) / 3.0)
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(4) / 2.0)  # trace 2
    m = np.eye(4, dtype=complex) / 4.0
    m[0, 1] = 0.2  # not Hermitian
    with pytest.raises(ValueError):
        DensityMatrix(m)
    neg = np.diag([0.6, 0.5, -0.05, -0.05]).astype(complex)
    with pytest.raises(ValueError):
        DensityMatrix(neg)


def test_density_matrix_json_roundtrip_bit_exact():
    rho = DensityMatrix(random_physical_rho(7))
    again = DensityMatrix.from_json(rho.to_json())
    assert np.array_equal(rho.matrix, again.matrix)


# --- metrics ------------------------------------------------------------------

def test_concurrence_bell_state():
    rho = np.outer(BELL_PHI_PLUS, BELL_PHI_PLUS.conj())
    assert concurrence(rho) == pytest.approx(1.0, abs=1e-12)


def test_concurrence_product_state():
    ket = np.zeros(4)
    ket[0] = 1.0
    assert concurrence(np.outer(ket, ket)) == pytest.approx(0.0, abs=1e-12)


def test_werner_closed_forms():
    # C = max(0, (3p-1)/2), F = (3p+1)/4, purity = p^2 + (1-p^2)/4
    for p in (0.0, 0.2, 1.0 / 3.0, 0.5, 0.8, 1.0):
        rho = werner_state(p)
        assert concurrence(rho) == pytest.approx(max(0.0, (3 * p - 1) / 2), abs=1e-10)
        assert fidelity_to_state(rho, BELL_PHI_PLUS) == pytest.approx(
            (3 * p + 1) / 4, abs=1e-12)
        assert purity(rho) == pytest.approx(p**2 + (1 - p**2) / 4, abs=1e-12)


def test_timebin_density_metrics():
    # rho = (|ee><ee| + |ll><ll|)/2 + (V/2)(|ee><ll| + h.c.): C = V, F = (1+V)/2
    for v in (0.0, 0.4, 0.7, 1.0):
        m = np.zeros((4, 4), dtype=complex)
        m[0, 0] = m[3, 3] = 0.5
        m[0, 3] = m[3, 0] = v / 2.0
        assert concurrence(m) == pytest.approx(v, abs=1e-10)
        assert fidelity_to_state(m, BELL_PHI_PLUS) == pytest.approx(
            (1 + v) / 2, abs=1e-12)


def test_concurrence_local_unitary_invariance():
    rho = random_physical_rho(3)
    g = np.random.default_rng(5)
    a = g.normal(size=(2, 2)) + 1j * g.normal(size=(2, 2))
    u, _ = np.linalg.qr(a)
    big_u = np.kron(u, np.eye(2))
    rotated = big_u @ rho @ big_u.conj().T
    assert concurrence(rotated) == pytest.approx(concurrence(rho), abs=1e-9)


@given(st.integers(min_value=0, max_value=10**6))
@settings(max_examples=60, deadline=None)
def test_property_metric_bounds(seed):
    rho = random_physical_rho(seed)
    c = concurrence(rho)
    p = purity(rho)
    f = fidelity_to_state(rho, BELL_PHI_PLUS)
    assert 0.0 <= c <= 1.0 + 1e-12
    assert 0.25 - 1e-12 <= p <= 1.0 + 1e-12
    assert 0.0 <= f <= 1.0 + 1e-12


@given(st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=50, deadline=None)
def test_property_mixing_reduces_purity(p):
    rho = werner_state(p)
    assert purity(rho) <= 1.0 + 1e-12
    assert purity(rho) >= 0.25 - 1e-12
