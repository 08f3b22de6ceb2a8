"""Two-qubit linear algebra and entanglement metrics.

Basis order for the two-photon time-bin space is fixed globally as
(early,early), (early,late), (late,early), (late,late).  All density
matrices in the package use this ordering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-9

BASIS_LABELS = ("ee", "el", "le", "ll")

SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_YY = np.kron(SIGMA_Y, SIGMA_Y)

# (|ee> + |ll>)/sqrt(2), the maximally entangled target
BELL_PHI_PLUS = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0)


def hermiticity_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T)))


def hermitian_eigensystem(m: np.ndarray, tol: float = 1e-10):
    """Eigenvalues (descending) and matching eigenvector columns.

    Rejects matrices that are not Hermitian within `tol`, reporting the
    offending defect norm.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] > 8:
        raise ValueError(f"dimension {m.shape[0]} exceeds the supported maximum 8")
    defect = hermiticity_defect(m)
    if defect > tol:
        raise ValueError(f"matrix is not Hermitian: max |m - m^dagger| = {defect:.3e}")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


@dataclass(frozen=True)
class DensityMatrix:
    """4x4 Hermitian, unit-trace, positive matrix over the time-bin basis."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"density matrix must be 4x4, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("density matrix has non-finite entries")
        defect = hermiticity_defect(m)
        if defect > HERMITICITY_TOL:
            raise ValueError(f"density matrix not Hermitian: defect {defect:.3e}")
        tr = m.trace().real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr!r} != 1")
        evals = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if evals.min() < EIGENVALUE_FLOOR:
            raise ValueError(f"density matrix not positive: min eigenvalue {evals.min():.3e}")
        object.__setattr__(self, "matrix", m)

    def to_json(self) -> str:
        return json.dumps(
            {"re": self.matrix.real.tolist(), "im": self.matrix.imag.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        obj = json.loads(text)
        return cls(np.array(obj["re"]) + 1j * np.array(obj["im"]))


@dataclass(frozen=True)
class TwoQubitState:
    """Normalized pure state over the time-bin basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(4)
        norm2 = float(np.sum(np.abs(a) ** 2))
        if abs(norm2 - 1.0) > 1e-12:
            raise ValueError(f"state norm^2 {norm2!r} != 1")
        object.__setattr__(self, "amplitudes", a)

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def concurrence(rho) -> float:
    """Wootters concurrence C = max(0, l1 - l2 - l3 - l4)."""
    m = _as_matrix(rho)
    r = m @ _YY @ m.conj() @ _YY
    evals = np.linalg.eigvals(r)
    lam = np.sqrt(np.abs(np.real(evals)))
    lam.sort()
    return float(max(0.0, lam[3] - lam[2] - lam[1] - lam[0]))


def fidelity_to_state(rho, target) -> float:
    """Overlap <target| rho |target>."""
    m = _as_matrix(rho)
    psi = target.amplitudes if isinstance(target, TwoQubitState) else np.asarray(target, dtype=complex)
    val = psi.conj() @ m @ psi
    if abs(val.imag) > 1e-10:
        raise ValueError(f"fidelity has non-negligible imaginary part {val.imag:.3e}")
    return float(val.real)


def purity(rho) -> float:
    """Tr(rho^2)."""
    m = _as_matrix(rho)
    return float(np.trace(m @ m).real)
