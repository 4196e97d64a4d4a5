"""Small symmetric-matrix helpers (sizes up to 8x8)."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateStatisticError, NotPSDError

PSD_TOL = 1e-12


def _symmetric(M) -> np.ndarray:
    M = np.array(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(float(np.abs(M).max(initial=0.0)), 1e-300)
    if np.abs(M - M.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (M + M.T)


def jacobi_eigh(M, tol: float = 1e-15, max_sweeps: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors by cyclic Jacobi rotations."""
    A = _symmetric(M)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * max(np.sqrt(np.sum(A * A)), 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q] = s
                R[q, p] = -s
                A = R.T @ A @ R
                V = V @ R
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def _psd_eigen(M):
    w, V = jacobi_eigh(M)
    floor = -PSD_TOL * max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.size and w[0] < floor:
        raise NotPSDError(f"matrix is indefinite (smallest eigenvalue {w[0]:.3e})")
    return np.clip(w, 0.0, None), V


def symmetric_sqrt(M) -> np.ndarray:
    """Principal square root of a PSD matrix; tiny negative eigenvalues are clamped."""
    w, V = _psd_eigen(M)
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def solve_spd(M, b) -> np.ndarray:
    M = _symmetric(M)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPSDError("matrix is not positive definite") from exc
    y = np.linalg.solve(L, np.asarray(b, dtype=np.float64))
    return np.linalg.solve(L.T, y)


def quad_form_inverse(M, v) -> float:
    """v' M^-1 v using an LU solve with partial pivoting."""
    M = _symmetric(M)
    v = np.asarray(v, dtype=np.float64)
    try:
        x = np.linalg.solve(M, v)
    except np.linalg.LinAlgError as exc:
        raise DegenerateStatisticError("singular covariance in quadratic form") from exc
    return float(v @ x)


def pinv_psd(M, rtol: float = 1e-10) -> tuple[np.ndarray, int]:
    """Pseudo-inverse of a PSD matrix and its numerical rank."""
    w, V = _psd_eigen(M)
    top = float(w.max(initial=0.0))
    keep = w > rtol * top if top > 0 else np.zeros_like(w, dtype=bool)
    inv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    P = (V * inv) @ V.T
    return 0.5 * (P + P.T), int(keep.sum())
