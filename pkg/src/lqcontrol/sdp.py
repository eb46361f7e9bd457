"""Semidefinite relaxation of steady-state LQ control.

The decision variable is a joint state/control second-moment matrix

    Sigma = [[Sigma_xx, Sigma_xu],
             [Sigma_xu^T, Sigma_uu]]

constrained to the set

    S = { Sigma >= 0, trace(Sigma) <= nu,
          Sigma_xx = [A B] Sigma [A B]^T + W }.

Every point of S corresponds to a strongly stable linear policy: the gain is
recovered as ``K = Sigma_xu^T Sigma_xx^{-1}`` and the leftover control noise
as the Schur complement ``V = Sigma_uu - K Sigma_xx K^T``.  This module
provides the Frobenius projection onto S (Dykstra's alternating projections
between the affine constraint and the PSD/trace spectrahedron), policy
extraction and lifting, and a projected-gradient solver used as the
steady-state cost oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractViolation,
    DimensionMismatch,
    InfeasibleSet,
    NonConvergence,
    SingularBlock,
    UnstablePolicy,
)
from .linalg import (
    min_eigval,
    project_capped_simplex,
    smat,
    spec_norm,
    svec,
    svec_dim,
    sym_inv_sqrt,
    sym_sqrt,
    symmetrize,
)
from .stability import StabilityCertificate
from .system import CostPair, GaussianPolicy, LinearSystem, closed_loop, solve_steady_state

SYM_TOL = 1e-9


@dataclass
class JointCovariance:
    """Symmetric (d+k) x (d+k) matrix with named state/control blocks."""

    mat: np.ndarray
    d: int
    k: int

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=float)
        n = self.d + self.k
        if self.mat.shape != (n, n):
            raise DimensionMismatch(f"expected {n}x{n} matrix, got {self.mat.shape}")
        if np.max(np.abs(self.mat - self.mat.T), initial=0.0) > SYM_TOL * max(
            1.0, np.max(np.abs(self.mat), initial=0.0)
        ):
            raise ContractViolation("joint covariance is not symmetric within tolerance")
        self.mat = symmetrize(self.mat)

    @classmethod
    def from_blocks(cls, xx, xu, uu) -> "JointCovariance":
        xx = np.asarray(xx, dtype=float)
        xu = np.asarray(xu, dtype=float)
        uu = np.asarray(uu, dtype=float)
        top = np.hstack([xx, xu])
        bot = np.hstack([xu.T, uu])
        return cls(np.vstack([top, bot]), xx.shape[0], uu.shape[0])

    @property
    def xx(self) -> np.ndarray:
        return self.mat[: self.d, : self.d]

    @property
    def xu(self) -> np.ndarray:
        return self.mat[: self.d, self.d :]

    @property
    def uu(self) -> np.ndarray:
        return self.mat[self.d :, self.d :]

    def trace(self) -> float:
        return float(np.trace(self.mat))


@dataclass
class SdpProblem:
    """Feasible set S for one system and trace budget, plus solver tolerances.

    The projection onto the affine constraint subspace is precomputed once as
    a dense linear operator on the free coordinates of symmetric matrices, so
    a constructed problem is immutable and cheap to project against repeatedly.
    """

    sys: LinearSystem
    nu: float
    feas_tol: float = 1e-6
    psd_tol: float = 1e-8
    proj_tol: float = 1e-7
    max_iter: int = 5000
    stop_tol: float = 1e-9
    _aff_proj: np.ndarray = field(init=False, repr=False)
    _aff_off: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nu <= 0:
            raise ContractViolation("nu must be positive")
        tr_w = float(np.trace(self.sys.W))
        if self.nu < tr_w - 1e-12:
            raise InfeasibleSet(
                f"trace budget nu={self.nu:.6g} below trace(W)={tr_w:.6g}; the set is empty"
            )
        self._build_affine_projector()

    @property
    def n(self) -> int:
        return self.sys.d + self.sys.k

    def _build_affine_projector(self):
        # Constraint map G(Sigma) = Sigma_xx - F Sigma F^T with F = [A B];
        # the feasible subspace is {G(Sigma) = W}.  Assemble G column by
        # column over the svec basis of symmetric n x n matrices.
        d, n = self.sys.d, self.n
        F = np.hstack([self.sys.A, self.sys.B])
        m = svec_dim(n)
        md = svec_dim(d)
        G = np.empty((md, m))
        basis = np.zeros(m)
        for j in range(m):
            basis[j] = 1.0
            E = smat(basis, n)
            basis[j] = 0.0
            G[:, j] = svec(E[:d, :d] - F @ E @ F.T)
        G_pinv = np.linalg.pinv(G)
        self._aff_proj = np.eye(m) - G_pinv @ G
        self._aff_off = G_pinv @ svec(self.sys.W)

    def project_affine(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection (in svec coordinates) onto the equality constraint."""
        return self._aff_proj @ v + self._aff_off

    def project_spectrahedron(self, v: np.ndarray) -> np.ndarray:
        """Projection onto {Sigma >= 0, trace(Sigma) <= nu} via eigenvalues."""
        w, U = np.linalg.eigh(smat(v, self.n))
        w = project_capped_simplex(w, self.nu)
        return svec((U * w) @ U.T)

    def wrap(self, mat: np.ndarray) -> JointCovariance:
        return JointCovariance(mat, self.sys.d, self.sys.k)


def objective(cost: CostPair, Sigma: JointCovariance) -> float:
    """Linear SDP objective ``Q . Sigma_xx + R . Sigma_uu``."""
    if cost.Q.shape[0] != Sigma.d or cost.R.shape[0] != Sigma.k:
        raise DimensionMismatch("cost dimensions do not match Sigma blocks")
    return float(np.sum(cost.Q * Sigma.xx) + np.sum(cost.R * Sigma.uu))


def feasibility_residuals(prob: SdpProblem, Sigma: JointCovariance) -> dict:
    """Residuals of the three constraints defining S."""
    F = np.hstack([prob.sys.A, prob.sys.B])
    eq = np.linalg.norm(Sigma.xx - F @ Sigma.mat @ F.T - prob.sys.W, "fro")
    psd = max(0.0, -min_eigval(Sigma.mat))
    trace_excess = max(0.0, Sigma.trace() - prob.nu)
    return {"equality": float(eq), "psd": float(psd), "trace": float(trace_excess)}


def is_feasible(prob: SdpProblem, Sigma: JointCovariance) -> tuple[bool, dict]:
    """Evaluate all constraint residuals against the problem tolerances."""
    res = feasibility_residuals(prob, Sigma)
    ok = (
        res["equality"] <= prob.feas_tol
        and res["psd"] <= prob.psd_tol
        and res["trace"] <= prob.psd_tol
    )
    return bool(ok), res


def project(prob: SdpProblem, Sigma0) -> JointCovariance:
    """Frobenius-norm projection of a symmetric matrix onto S.

    Dykstra's alternating projections between the affine equality subspace
    (closed-form, cached on the problem) and the PSD/trace spectrahedron
    (eigenvalue projection).  The returned point lies in the spectrahedron
    exactly and satisfies the equality constraint within ``feas_tol``.

    Raises
    ------
    NonConvergence
        If the iteration cap is reached; the best iterate is attached.
    InfeasibleSet
        If the alternating distance stalls above tolerance.
    """
    if isinstance(Sigma0, JointCovariance):
        Sigma0 = Sigma0.mat
    Sigma0 = symmetrize(np.asarray(Sigma0, dtype=float))
    n = prob.n
    if Sigma0.shape != (n, n):
        raise DimensionMismatch(f"expected {n}x{n} matrix, got {Sigma0.shape}")

    x = svec(Sigma0)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    gap_history = []
    for it in range(prob.max_iter):
        a = prob.project_affine(x + p)
        p = x + p - a
        b = prob.project_spectrahedron(a + q)
        q = a + q - b
        gap = np.linalg.norm(a - b)
        move = np.linalg.norm(b - x)
        x = b
        if gap <= prob.stop_tol and move <= prob.stop_tol:
            return prob.wrap(smat(x, n))
        gap_history.append(gap)
        if len(gap_history) >= 200 and it % 50 == 0:
            recent, older = gap_history[-1], gap_history[-150]
            stalled = abs(older - recent) <= 1e-12 + 1e-9 * recent
            if stalled and recent > 10.0 * prob.feas_tol:
                raise InfeasibleSet(
                    f"alternating projections stalled at distance {recent:.3e}; "
                    "the constraint set appears empty"
                )
    result = prob.wrap(smat(x, n))
    _, res = is_feasible(prob, result)
    raise NonConvergence(
        f"projection did not converge in {prob.max_iter} iterations "
        f"(last gap {gap:.3e}, residuals {res})",
        best=result,
        residual=res,
    )


def extract(Sigma: JointCovariance) -> np.ndarray:
    """Recover the feedback gain ``K = Sigma_xu^T Sigma_xx^{-1}``.

    Raises
    ------
    SingularBlock
        If ``Sigma_xx`` is numerically singular.
    """
    w = np.linalg.eigvalsh(symmetrize(Sigma.xx))
    if w[0] < 1e-12 * max(w[-1], 1e-300):
        raise SingularBlock(
            f"Sigma_xx is numerically singular (eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}])"
        )
    return np.linalg.solve(symmetrize(Sigma.xx), Sigma.xu).T


def lift(sys: LinearSystem, K, V=None) -> JointCovariance:
    """Joint second-moment matrix of the stationary policy ``u ~ N(Kx, V)``.

    Computes the steady-state covariance ``X`` of the closed loop (including
    the control-noise term) and assembles ``[[X, XK^T], [KX, KXK^T + V]]``.
    """
    K = np.asarray(K, dtype=float)
    if V is None:
        V = np.zeros((K.shape[0], K.shape[0]))
    pol = GaussianPolicy(K, V)
    X = solve_steady_state(sys, pol)
    XKt = X @ K.T
    return JointCovariance.from_blocks(X, XKt, symmetrize(K @ XKt) + pol.V)


def gaussian_excess(Sigma: JointCovariance, K, return_clip: bool = False):
    """Control noise left over after the linear part: ``Sigma_uu - K Sigma_xx K^T``.

    The Schur complement of a PSD matrix is PSD, so negative eigenvalues can
    only come from roundoff; they are clamped at zero and the clamp magnitude
    is returned when ``return_clip`` is set.
    """
    K = np.asarray(K, dtype=float)
    raw = symmetrize(Sigma.uu - K @ Sigma.xx @ K.T)
    w, U = np.linalg.eigh(raw)
    clip = max(0.0, float(-w[0]))
    V = (U * np.clip(w, 0.0, None)) @ U.T
    if return_clip:
        return V, clip
    return V


def strong_stability_certificate(
    sys: LinearSystem, Sigma: JointCovariance, nu: float, sigma: float
) -> StabilityCertificate:
    """Certificate for the gain extracted from a feasible point.

    Valid whenever ``W >= sigma^2 I`` and ``Sigma`` is feasible for budget
    ``nu``: with ``X = Sigma_xx`` the factorization ``H = X^{1/2}``,
    ``L = X^{-1/2} (A + BK) X^{1/2}`` certifies
    ``(kappa, 1/(2 kappa^2))``-strong stability for ``kappa = sqrt(nu)/sigma``.
    """
    if sigma <= 0:
        raise ContractViolation("sigma must be positive")
    if min_eigval(sys.W) < sigma**2 - 1e-9:
        raise ContractViolation("W is not bounded below by sigma^2 I")
    K = extract(Sigma)
    X = symmetrize(Sigma.xx)
    H = sym_sqrt(X)
    H_inv = sym_inv_sqrt(X)
    L = H_inv @ closed_loop(sys, K) @ H
    kappa = np.sqrt(nu) / sigma
    gamma = 1.0 / (2.0 * kappa**2)
    return StabilityCertificate(
        H, L, float(kappa), float(gamma), alpha=float(sigma), beta=float(np.sqrt(nu)), K=K
    )


@dataclass
class SdpSolution:
    """Result of the projected-gradient SDP solve."""

    Sigma: JointCovariance
    K: np.ndarray
    objective: float
    iterations: int
    converged: bool
    trace_value: float
    trace_binding: bool
    lifted_trace: float


def solve(
    prob: SdpProblem,
    cost: CostPair,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    warm_start=None,
    patience: int = 25,
) -> SdpSolution:
    """Minimize the linear cost over S by projected gradient descent.

    The step size is the reciprocal of the objective's Lipschitz constant
    (the Frobenius norm of the gradient block matrix), so each raw step moves
    a unit Frobenius distance before projection.  Halts once the best
    objective has not improved by more than ``tol`` for ``patience``
    consecutive iterations.

    Raises
    ------
    NonConvergence
        If the iteration cap is reached first; the best iterate is attached.
    """
    d, k = prob.sys.d, prob.sys.k
    if cost.Q.shape[0] != d or cost.R.shape[0] != k:
        raise DimensionMismatch("cost dimensions do not match the problem")
    grad = np.zeros((prob.n, prob.n))
    grad[:d, :d] = cost.Q
    grad[d:, d:] = cost.R
    lip = np.linalg.norm(grad, "fro")

    start = warm_start.mat if isinstance(warm_start, JointCovariance) else warm_start
    if start is None:
        start = np.eye(prob.n)
    Sigma = project(prob, start)
    best = Sigma
    best_obj = objective(cost, Sigma)
    if lip == 0.0:
        return _finalize(prob, best, best_obj, 0, True)

    step = 1.0 / lip
    stall = 0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        Sigma = project(prob, Sigma.mat - step * grad)
        obj = objective(cost, Sigma)
        if obj < best_obj - tol:
            best, best_obj, stall = Sigma, obj, 0
        else:
            if obj < best_obj:
                best, best_obj = Sigma, obj
            stall += 1
        if stall >= patience:
            return _finalize(prob, best, best_obj, iterations, True)
    raise NonConvergence(
        f"oracle projected gradient did not settle in {max_iter} iterations",
        best=_finalize(prob, best, best_obj, iterations, False),
    )


def _finalize(prob, Sigma, obj, iterations, converged) -> SdpSolution:
    K = extract(Sigma)
    lifted = lift(prob.sys, K)
    trace_value = Sigma.trace()
    return SdpSolution(
        Sigma=Sigma,
        K=K,
        objective=obj,
        iterations=iterations,
        converged=converged,
        trace_value=trace_value,
        trace_binding=bool(trace_value >= prob.nu * (1.0 - 1e-6) - 1e-9),
        lifted_trace=lifted.trace(),
    )


def oracle(
    sys: LinearSystem,
    Q,
    R,
    nu: float,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    prob: SdpProblem | None = None,
    warm_start=None,
) -> np.ndarray:
    """Gain minimizing steady-state cost subject to the trace budget ``nu``.

    Solves the SDP by projected gradient and extracts the gain from the
    optimizer.  The returned gain's stationary second moment stays within the
    trace budget (up to 1e-4), which follows from feasibility of the lifted
    point.
    """
    cost = CostPair(np.asarray(Q, dtype=float), np.asarray(R, dtype=float))
    if prob is None:
        prob = SdpProblem(sys, nu)
    sol = solve(prob, cost, tol=tol, max_iter=max_iter, warm_start=warm_start)
    if sol.lifted_trace > nu + 1e-4:
        raise NonConvergence(
            f"oracle result exceeds trace budget: {sol.lifted_trace:.6g} > {nu:.6g} + 1e-4",
            best=sol,
        )
    return sol.K
