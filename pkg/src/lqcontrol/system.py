"""Noisy linear dynamics, quadratic costs, and steady-state covariances.

The model is a discrete-time system ``x' = A x + B u + w`` with Gaussian
process noise ``w ~ N(0, W)``, controlled by (possibly randomized) linear
feedback ``u ~ N(K x, V)``, and charged quadratic per-round costs
``x^T Q x + u^T R u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ContractViolation, NumericalFailure, UnstablePolicy
from .linalg import min_eigval, sym_sqrt, symmetrize

SYM_TOL = 1e-9
EIG_FLOOR = -1e-10
STABILITY_MARGIN = 1e-12
FIXED_POINT_RTOL = 1e-9


def _matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-d matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return M


def _vector(x, size: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (size,):
        raise DimensionMismatch(f"{name} must have length {size}, got shape {x.shape}")
    return x


def _check_symmetric(M: np.ndarray, name: str):
    if np.max(np.abs(M - M.T), initial=0.0) > SYM_TOL * max(1.0, np.max(np.abs(M), initial=0.0)):
        raise ContractViolation(f"{name} is not symmetric within tolerance")


def _check_psd(M: np.ndarray, name: str, floor: float = EIG_FLOOR):
    if min_eigval(M) < floor:
        raise ContractViolation(f"{name} has eigenvalues below {floor}")


@dataclass
class LinearSystem:
    """Time-invariant dynamics ``x' = A x + B u + w`` with ``w ~ N(0, W)``.

    Parameters
    ----------
    A : (d, d) array
        State transition matrix.
    B : (d, k) array
        Control map.
    W : (d, d) array
        Noise covariance; symmetric positive semidefinite.
    """

    A: np.ndarray
    B: np.ndarray
    W: np.ndarray
    _w_sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.A = _matrix(self.A, "A")
        self.B = _matrix(self.B, "B")
        self.W = _matrix(self.W, "W")
        d = self.A.shape[0]
        if self.A.shape != (d, d):
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != d:
            raise DimensionMismatch(f"B must have {d} rows, got {self.B.shape}")
        if self.W.shape != (d, d):
            raise DimensionMismatch(f"W must be {d}x{d}, got {self.W.shape}")
        _check_symmetric(self.W, "W")
        _check_psd(self.W, "W")
        # W may be rank deficient; sampling uses the clamped symmetric root.
        self._w_sqrt = sym_sqrt(self.W, floor=0.0)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.B.shape[1]

    def noise_sqrt(self) -> np.ndarray:
        return self._w_sqrt


@dataclass
class CostPair:
    """One round's cost matrices: ``Q`` on the state, ``R`` on the control."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.Q = _matrix(self.Q, "Q")
        self.R = _matrix(self.R, "R")
        if self.Q.shape[0] != self.Q.shape[1]:
            raise DimensionMismatch(f"Q must be square, got {self.Q.shape}")
        if self.R.shape[0] != self.R.shape[1]:
            raise DimensionMismatch(f"R must be square, got {self.R.shape}")
        _check_symmetric(self.Q, "Q")
        _check_symmetric(self.R, "R")
        _check_psd(self.Q, "Q")
        _check_psd(self.R, "R")


@dataclass
class GaussianPolicy:
    """Linear-Gaussian control law ``u ~ N(K x, V)``."""

    K: np.ndarray
    V: np.ndarray
    _v_sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.K = _matrix(self.K, "K")
        self.V = _matrix(self.V, "V")
        k = self.K.shape[0]
        if self.V.shape != (k, k):
            raise DimensionMismatch(f"V must be {k}x{k}, got {self.V.shape}")
        _check_symmetric(self.V, "V")
        _check_psd(self.V, "V")
        self._v_sqrt = sym_sqrt(self.V, floor=0.0)

    @classmethod
    def deterministic(cls, K) -> "GaussianPolicy":
        K = _matrix(K, "K")
        return cls(K, np.zeros((K.shape[0], K.shape[0])))

    @property
    def k(self) -> int:
        return self.K.shape[0]

    @property
    def d(self) -> int:
        return self.K.shape[1]

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw ``u ~ N(K x, V)``."""
        return self.K @ x + self._v_sqrt @ rng.standard_normal(self.k)


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    M = _matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {M.shape}")
    try:
        return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue computation failed: {exc}") from exc


def closed_loop(sys: LinearSystem, K: np.ndarray) -> np.ndarray:
    """Closed-loop transition matrix ``A + B K``."""
    if K.shape != (sys.k, sys.d):
        raise DimensionMismatch(f"K must be {sys.k}x{sys.d}, got {K.shape}")
    return sys.A + sys.B @ K


def step(sys: LinearSystem, x, u, rng: np.random.Generator) -> np.ndarray:
    """Advance the system one round: ``A x + B u + w`` with fresh noise."""
    x = _vector(x, sys.d, "x")
    u = _vector(u, sys.k, "u")
    w = sys.noise_sqrt() @ rng.standard_normal(sys.d)
    return sys.A @ x + sys.B @ u + w


def instantaneous_cost(cost: CostPair, x, u) -> float:
    """Quadratic cost ``x^T Q x + u^T R u`` for one round."""
    x = _vector(x, cost.Q.shape[0], "x")
    u = _vector(u, cost.R.shape[0], "u")
    return float(x @ cost.Q @ x + u @ cost.R @ u)


def propagate_covariance(sys: LinearSystem, pol: GaussianPolicy, Xhat) -> np.ndarray:
    """One step of the closed-loop covariance recursion.

    Maps ``Xhat`` to ``(A+BK) Xhat (A+BK)^T + B V B^T + W``, symmetrized.
    """
    Xhat = _matrix(Xhat, "Xhat")
    if Xhat.shape != (sys.d, sys.d):
        raise DimensionMismatch(f"Xhat must be {sys.d}x{sys.d}, got {Xhat.shape}")
    M = closed_loop(sys, pol.K)
    return symmetrize(M @ Xhat @ M.T + sys.B @ pol.V @ sys.B.T + sys.W)


def _steady_state_doubling(M: np.ndarray, S: np.ndarray) -> np.ndarray:
    # Doubling (Smith) iteration for X = M X M^T + S; quadratic convergence
    # and well behaved when the direct vectorized solve is ill conditioned.
    X = S.copy()
    Mp = M.copy()
    for _ in range(128):
        X = symmetrize(X + Mp @ X @ Mp.T)
        Mp = Mp @ Mp
        if np.max(np.abs(Mp), initial=0.0) ** 2 * np.max(np.abs(X), initial=0.0) < 1e-18:
            break
    return X


def solve_steady_state(sys: LinearSystem, pol: GaussianPolicy) -> np.ndarray:
    """Steady-state covariance of the closed loop under ``pol``.

    Solves ``X = (A+BK) X (A+BK)^T + B V B^T + W`` by a vectorized linear
    solve, falling back to a doubling iteration when that is ill conditioned.

    Raises
    ------
    UnstablePolicy
        If the closed-loop spectral radius is not strictly below one.
    """
    M = closed_loop(sys, pol.K)
    rho = spectral_radius(M)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise UnstablePolicy(f"closed-loop spectral radius {rho:.6g} >= 1")
    S = symmetrize(sys.B @ pol.V @ sys.B.T + sys.W)
    d = sys.d

    X = None
    try:
        lhs = np.eye(d * d) - np.kron(M, M)
        X = symmetrize(np.linalg.solve(lhs, S.ravel()).reshape(d, d))
    except np.linalg.LinAlgError:
        X = None

    def residual(Xc):
        return np.linalg.norm(Xc - (M @ Xc @ M.T + S), "fro")

    tol = FIXED_POINT_RTOL * max(1.0, np.linalg.norm(X, "fro") if X is not None else 1.0)
    if X is None or residual(X) > tol:
        X = _steady_state_doubling(M, S)
        tol = FIXED_POINT_RTOL * max(1.0, np.linalg.norm(X, "fro"))
        if residual(X) > tol:
            raise NumericalFailure(
                f"steady-state solve residual {residual(X):.3e} exceeds tolerance {tol:.3e}"
            )
    return X


def steady_state_cost(sys: LinearSystem, pol: GaussianPolicy, cost: CostPair) -> float:
    """Long-run average cost of a stable policy.

    Equals ``(Q + K^T R K) . X + R . V`` where ``X`` is the steady-state
    covariance and ``.`` is the trace inner product; the second term charges
    the policy's own control noise.
    """
    if cost.Q.shape[0] != sys.d or cost.R.shape[0] != sys.k:
        raise DimensionMismatch("cost dimensions do not match the system")
    X = solve_steady_state(sys, pol)
    state_part = float(np.sum((cost.Q + pol.K.T @ cost.R @ pol.K) * X))
    return state_part + float(np.sum(cost.R * pol.V))
