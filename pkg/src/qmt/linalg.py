"""Hermitian eigendecomposition.

A cyclic Jacobi solver handles the matrix sizes this package actually works
with (atom matrices up to 64x64).  Larger Hermitian matrices, which occur
only for augmented screening spaces, fall back to numpy's LAPACK wrapper;
the test suite cross-checks the two against each other.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, InvalidMeasure

JACOBI_MAX_SWEEPS = 100
JACOBI_MAX_SIZE = 64


def hermitian_eigen(matrix, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.

    Returns (w, U) with matrix ~ U @ diag(w) @ U^dagger.  Raises
    InvalidMeasure for non-Hermitian input and ConvergenceError if the
    Jacobi sweep cap is exceeded.
    """
    M = np.asarray(matrix, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidMeasure("matrix must be square")
    scale = float(np.abs(M).max(initial=0.0))
    herm_tol = 1e-10 * max(1.0, scale)
    if np.abs(M - M.conj().T).max(initial=0.0) > herm_tol:
        raise InvalidMeasure("matrix is not Hermitian")
    n = M.shape[0]
    if n > JACOBI_MAX_SIZE:
        w, U = np.linalg.eigh(M)
        return w, U
    # Work on the exactly Hermitian average so roundoff in the input cannot bias one triangle.
    B = 0.5 * (M + M.conj().T)
    V = np.eye(n, dtype=complex)
    eps = 1e-14 * max(1.0, scale)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = B[p, q]
                if abs(g) <= eps:
                    continue
                rotated = True
                _rotate(B, V, p, q)
        if not rotated:
            break
    else:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.real(np.diag(B)).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _rotate(B: np.ndarray, V: np.ndarray, p: int, q: int) -> None:
    """One complex Jacobi rotation annihilating B[p, q], applied in place."""
    g = B[p, q]
    absg = abs(g)
    phase = g / absg
    alpha = B[p, p].real
    beta = B[q, q].real
    tau = (beta - alpha) / (2.0 * absg)
    if tau >= 0:
        t = -1.0 / (tau + np.sqrt(1.0 + tau * tau))
    else:
        t = 1.0 / (-tau + np.sqrt(1.0 + tau * tau))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    # column update: B <- B J, with J[p,p]=J[q,q]=c, J[q,p]=s/phase, J[p,q]=-s*phase
    Bp = B[:, p].copy()
    Bq = B[:, q].copy()
    B[:, p] = c * Bp + s * np.conj(phase) * Bq
    B[:, q] = -s * phase * Bp + c * Bq
    # row update: B <- J^dagger B
    Rp = B[p, :].copy()
    Rq = B[q, :].copy()
    B[p, :] = c * Rp + s * phase * Rq
    B[q, :] = -s * np.conj(phase) * Rp + c * Rq
    B[p, q] = 0.0
    B[q, p] = 0.0
    B[p, p] = B[p, p].real
    B[q, q] = B[q, q].real
    Vp = V[:, p].copy()
    Vq = V[:, q].copy()
    V[:, p] = c * Vp + s * np.conj(phase) * Vq
    V[:, q] = -s * phase * Vp + c * Vq


def eigen_zero_tol(matrix_or_scale, base: float = 1e-10) -> float:
    """Zero-classification tolerance: base * max(1, largest entry magnitude)."""
    if np.isscalar(matrix_or_scale):
        scale = float(matrix_or_scale)
    else:
        scale = float(np.abs(np.asarray(matrix_or_scale)).max(initial=0.0))
    return base * max(1.0, scale)


def signature_counts(eigenvalues, tol: float) -> tuple[int, int, int]:
    """(n_negative, n_zero, n_positive) with |lambda| <= tol counted as zero."""
    w = np.asarray(eigenvalues, dtype=float)
    n_neg = int((w < -tol).sum())
    n_pos = int((w > tol).sum())
    return n_neg, len(w) - n_neg - n_pos, n_pos
