"""Dense symmetric-matrix helpers shared by the solver modules.

All routines operate on plain ndarrays.  ``svec``/``smat`` use the isometric
half-vectorization (off-diagonal entries scaled by sqrt(2)) so that Frobenius
inner products of symmetric matrices equal Euclidean inner products of their
vectorizations; the projection code relies on this.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import NumericalFailure

ROOT2 = np.sqrt(2.0)


def symmetrize(M: np.ndarray) -> np.ndarray:
    """Return (M + M^T)/2."""
    return 0.5 * (M + M.T)


def spec_norm(M: np.ndarray) -> float:
    """Spectral (operator 2-) norm."""
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def min_eigval(M: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(symmetrize(M))[0])


def eigh_sym(M: np.ndarray):
    """Eigendecomposition of a (nearly) symmetric matrix, symmetrized first."""
    try:
        return np.linalg.eigh(symmetrize(M))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh on sym rarely fails
        raise NumericalFailure(f"symmetric eigendecomposition failed: {exc}") from exc


def sym_sqrt(M: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Symmetric square root with eigenvalues clamped at ``floor``."""
    w, U = eigh_sym(M)
    w = np.clip(w, floor, None)
    return (U * np.sqrt(w)) @ U.T


def sym_inv_sqrt(M: np.ndarray) -> np.ndarray:
    """Inverse symmetric square root; requires M positive definite."""
    w, U = eigh_sym(M)
    if w[0] <= 0.0:
        raise NumericalFailure("matrix is not positive definite")
    return (U / np.sqrt(w)) @ U.T


def psd_clip(M: np.ndarray, floor: float = 0.0) -> tuple[np.ndarray, float]:
    """Clamp eigenvalues of a symmetric matrix at ``floor``.

    Returns the clipped matrix and the magnitude of the largest clamp applied
    (0 when no eigenvalue was below the floor).
    """
    w, U = eigh_sym(M)
    clipped = np.clip(w, floor, None)
    mag = float(np.max(clipped - w)) if w.size else 0.0
    return (U * clipped) @ U.T, mag


@lru_cache(maxsize=64)
def _svec_index(n: int):
    rows, cols = np.triu_indices(n)
    scale = np.where(rows == cols, 1.0, ROOT2)
    return rows, cols, scale


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def svec(M: np.ndarray) -> np.ndarray:
    """Isometric half-vectorization of a symmetric n x n matrix."""
    n = M.shape[0]
    rows, cols, scale = _svec_index(n)
    return M[rows, cols] * scale


def smat(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`svec`."""
    rows, cols, scale = _svec_index(n)
    M = np.zeros((n, n))
    vals = v / scale
    M[rows, cols] = vals
    M[cols, rows] = vals
    return M


def project_capped_simplex(x: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection of ``x`` onto {y : y >= 0, sum(y) <= cap}."""
    clipped = np.clip(x, 0.0, None)
    if clipped.sum() <= cap:
        return clipped
    # The sum constraint is active: water-fill x onto {y >= 0, sum(y) = cap}.
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - cap
    idx = np.arange(1, x.size + 1)
    rho = idx[u - css / idx > 0][-1]
    theta = css[rho - 1] / rho
    return np.clip(x - theta, 0.0, None)
