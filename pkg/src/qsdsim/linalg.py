"""Exact small-dimension complex linear algebra (2x2 and 3x3).

Every state manipulation in the package goes through these helpers.  The
eigensolver is hand-rolled (analytic for 2x2, cyclic Jacobi for 3x3) so that
eigenvalue ordering and eigenvector phases are bit-reproducible across runs:
eigenvalues ascending, each eigenvector rotated so its first non-negligible
component is real and positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HermitianSpectrum",
    "check_matrix",
    "matmul",
    "dagger",
    "trace",
    "hermitian_defect",
    "hermitian_eigen",
]

#: convergence target for the Jacobi sweep (off-diagonal Frobenius norm)
JACOBI_TOL = 1e-13
_MAX_SWEEPS = 60


@dataclass(frozen=True)
class HermitianSpectrum:
    """Eigendecomposition of a Hermitian matrix.

    Attributes
    ----------
    eigenvalues : (d,) float array, ascending.
    eigenvectors : (d, d) complex array, orthonormal columns; column i pairs
        with ``eigenvalues[i]`` and has its first component of magnitude
        above 1e-8 real positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def check_matrix(a: np.ndarray) -> np.ndarray:
    """Validate and return a square 2x2 or 3x3 complex matrix."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {a.shape[0]}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError("matrix entries must be finite")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = check_matrix(a)
    b = check_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b


def dagger(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.complex128).conj().T)


def trace(a: np.ndarray) -> complex:
    return complex(np.trace(np.asarray(a, dtype=np.complex128)))


def hermitian_defect(a: np.ndarray) -> float:
    """Max-entry deviation of ``a`` from its own adjoint."""
    a = np.asarray(a, dtype=np.complex128)
    return float(np.abs(a - a.conj().T).max())


def _fix_phases(values: np.ndarray, vectors: np.ndarray) -> HermitianSpectrum:
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    for i in range(vectors.shape[1]):
        col = vectors[:, i]
        idx = np.argmax(np.abs(col) > 1e-8)
        pivot = col[idx]
        phase = pivot / abs(pivot)
        vectors[:, i] = col / phase
        # scrub the rounding residue so the pivot is exactly real
        vectors[idx, i] = abs(vectors[idx, i])
    return HermitianSpectrum(values, vectors)


def _eigen2(a: np.ndarray) -> HermitianSpectrum:
    p = a[0, 0].real
    q = a[1, 1].real
    b = a[0, 1]
    if abs(b) == 0.0:
        values = np.array([p, q])
        vectors = np.eye(2, dtype=np.complex128)
        return _fix_phases(values, vectors)
    half = 0.5 * (p + q)
    rad = np.hypot(0.5 * (p - q), abs(b))
    lo, hi = half - rad, half + rad
    vectors = np.empty((2, 2), dtype=np.complex128)
    for i, lam in enumerate((lo, hi)):
        # (a - lam) v = 0; pick the better-conditioned null-vector form
        v1 = np.array([b, lam - p])
        v2 = np.array([lam - q, np.conj(b)])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        vectors[:, i] = v / np.linalg.norm(v)
    return _fix_phases(np.array([lo, hi]), vectors)


def _eigen3(a: np.ndarray) -> HermitianSpectrum:
    # cyclic complex Jacobi; rotation order fixed, so the result is
    # deterministic for a given input
    m = a.copy()
    v = np.eye(3, dtype=np.complex128)
    scale = max(np.abs(m).max(), 1.0)
    for _ in range(_MAX_SWEEPS):
        off = np.sqrt(
            abs(m[0, 1]) ** 2 + abs(m[0, 2]) ** 2 + abs(m[1, 2]) ** 2
        )
        if off <= JACOBI_TOL * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = m[p, q]
            if abs(apq) <= 1e-300:
                continue
            phase = apq / abs(apq)
            tau = (m[q, q].real - m[p, p].real) / (2.0 * abs(apq))
            t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
            c = 1.0 / np.hypot(1.0, t)
            s = t * c
            # plane rotation J: J[p,p]=c, J[q,q]=c, J[p,q]=s*phase,
            # J[q,p]=-s*conj(phase); m <- J^dag m J annihilates m[p,q]
            rp = m[:, p].copy()
            rq = m[:, q].copy()
            m[:, p] = c * rp - s * np.conj(phase) * rq
            m[:, q] = s * phase * rp + c * rq
            rp = m[p, :].copy()
            rq = m[q, :].copy()
            m[p, :] = c * rp - s * phase * rq
            m[q, :] = s * np.conj(phase) * rp + c * rq
            rp = v[:, p].copy()
            rq = v[:, q].copy()
            v[:, p] = c * rp - s * np.conj(phase) * rq
            v[:, q] = s * phase * rp + c * rq
    return _fix_phases(np.diag(m).real.copy(), v)


def hermitian_eigen(a: np.ndarray) -> HermitianSpectrum:
    """Eigendecomposition of a Hermitian 2x2 or 3x3 matrix.

    Raises ``ValueError`` when the input deviates from Hermiticity by more
    than 1e-10 (max entry).  The input is symmetrized before solving so the
    rotation arithmetic sees an exactly Hermitian matrix.
    """
    a = check_matrix(a)
    if hermitian_defect(a) > 1e-10:
        raise ValueError("matrix is not Hermitian within 1e-10")
    h = 0.5 * (a + a.conj().T)
    if h.shape[0] == 2:
        return _eigen2(h)
    return _eigen3(h)
