"""Quantitative stability certificates and mixing/trace bound evaluators.

A gain ``K`` is (kappa, gamma)-strongly stable when ``A + B K = H L H^{-1}``
with ``||L|| <= 1 - gamma``, ``||H|| ||H^{-1}|| <= kappa`` and ``||K|| <=
kappa``.  Certificates witness this factorization explicitly, which turns
stability into something that can be checked, composed over policy sequences,
and converted into covariance mixing rates and steady-state trace bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractViolation, DimensionMismatch, NumericalFailure, UnstablePolicy
from .linalg import spec_norm, sym_inv_sqrt, sym_sqrt, symmetrize
from .system import LinearSystem, closed_loop, spectral_radius

CERT_TOL = 1e-9
RECON_TOL = 1e-8


@dataclass
class StabilityCertificate:
    """Witness of strong stability for one gain matrix.

    Fields
    ------
    H, L : arrays with ``H L H^{-1} = A + B K``.
    kappa : conditioning bound, ``||H|| ||H^{-1}|| <= kappa`` and ``||K|| <= kappa``.
    gamma : contraction margin, ``||L|| <= 1 - gamma``.
    alpha, beta : per-factor norm bounds with ``||H|| <= beta``,
        ``||H^{-1}|| <= 1/alpha`` and ``kappa = beta/alpha``; used when
        checking sequences of certificates.
    K : the certified gain (kept for sequence checks).
    """

    H: np.ndarray
    L: np.ndarray
    kappa: float
    gamma: float
    alpha: float
    beta: float
    K: np.ndarray | None = None
    _H_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.L = np.asarray(self.L, dtype=float)
        try:
            self._H_inv = np.linalg.inv(self.H)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("certificate H is singular") from exc
        if spec_norm(self.L) > 1.0 - self.gamma + CERT_TOL:
            raise ContractViolation("certificate violates ||L|| <= 1 - gamma")
        if spec_norm(self.H) * spec_norm(self._H_inv) > self.kappa + CERT_TOL:
            raise ContractViolation("certificate violates ||H|| ||H^-1|| <= kappa")
        if abs(self.kappa - self.beta / self.alpha) > CERT_TOL * max(1.0, self.kappa):
            raise ContractViolation("certificate violates kappa = beta/alpha")

    @property
    def H_inv(self) -> np.ndarray:
        return self._H_inv

    def reconstruction(self) -> np.ndarray:
        """The closed-loop matrix this certificate encodes, ``H L H^{-1}``."""
        return self.H @ self.L @ self._H_inv


@dataclass
class ControllabilityReport:
    """Reachability summary for a k-step horizon.

    ``C_k = [B, AB, ..., A^{k-1} B]`` and ``kappa_ctrl = ||(C_k^T C_k)^+||``
    (pseudo-inverse norm, 0 when the matrix is identically zero).
    """

    k_steps: int
    C_k: np.ndarray
    kappa_ctrl: float
    rank: int


def certify(sys: LinearSystem, K) -> StabilityCertificate:
    """Construct a strong-stability certificate for a stable gain.

    Solves the discrete Lyapunov equation ``M^T P M = (1-g)^2 (P - I)`` for
    ``M = A + B K`` with ``g = (1 - rho(M))/2`` (half the stability margin,
    which keeps the underlying series convergent), then factors
    ``H = P^{-1/2}``, ``L = P^{1/2} M P^{-1/2}``.

    Raises
    ------
    UnstablePolicy
        If ``rho(A + B K) >= 1``.
    NumericalFailure
        If the Lyapunov solve or the factorization fails.
    """
    K = np.asarray(K, dtype=float)
    M = closed_loop(sys, K)
    rho = spectral_radius(M)
    if rho >= 1.0:
        raise UnstablePolicy(f"closed-loop spectral radius {rho:.6g} >= 1")
    g = 0.5 * (1.0 - rho)
    scaled = M / (1.0 - g)
    try:
        P = scipy.linalg.solve_discrete_lyapunov(scaled.T, np.eye(sys.d))
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise NumericalFailure(f"Lyapunov solve failed: {exc}") from exc
    P = symmetrize(P)
    w = np.linalg.eigvalsh(P)
    if w[0] <= 0.0 or not np.all(np.isfinite(w)):
        raise NumericalFailure("Lyapunov solution is not positive definite")

    H = sym_inv_sqrt(P)          # P^{-1/2}
    P_sqrt = sym_sqrt(P)
    L = P_sqrt @ M @ H
    norm_L = spec_norm(L)
    if norm_L >= 1.0:
        raise NumericalFailure(f"certificate contraction failed, ||L|| = {norm_L:.6g}")
    gamma = 1.0 - norm_L

    cond = np.sqrt(w[-1] / w[0])          # ||H|| ||H^-1|| for H = P^{-1/2}
    kappa = max(cond, spec_norm(K))
    beta = 1.0 / np.sqrt(w[0])            # ||H||
    alpha = 1.0 / np.sqrt(w[-1])          # 1/||H^-1||
    if kappa > cond:
        # Inflate the ||H|| bound so beta/alpha matches the certified kappa.
        beta *= kappa / cond
    return StabilityCertificate(H, L, float(kappa), float(gamma), float(alpha), float(beta), K=K)


def check_certificate(
    cert: StabilityCertificate,
    sys: LinearSystem,
    K,
    kappa_req: float,
    gamma_req: float,
    k_norm: str = "spectral",
) -> bool:
    """Check a certificate against requested (kappa, gamma) requirements.

    ``k_norm`` selects which norm of ``K`` is held to the kappa bound
    ("spectral" or "frobenius"; the Frobenius check is the stronger claim).
    """
    K = np.asarray(K, dtype=float)
    if k_norm == "spectral":
        norm_K = spec_norm(K)
    elif k_norm == "frobenius":
        norm_K = float(np.linalg.norm(K, "fro"))
    else:
        raise ContractViolation(f"unknown k_norm {k_norm!r}")
    M = closed_loop(sys, K)
    recon_ok = (
        np.linalg.norm(cert.reconstruction() - M, "fro")
        <= RECON_TOL * max(1.0, np.linalg.norm(M, "fro"))
    )
    return bool(
        norm_K <= kappa_req + CERT_TOL
        and spec_norm(cert.L) <= 1.0 - gamma_req + CERT_TOL
        and spec_norm(cert.H) * spec_norm(cert.H_inv) <= kappa_req + CERT_TOL
        and recon_ok
    )


def check_sequential(certs: list[StabilityCertificate], gamma: float) -> bool:
    """Check that a certificate sequence is sequentially strongly stable.

    Uses the shared bounds ``beta = max_t beta_t``, ``alpha = min_t alpha_t``
    and ``kappa = beta/alpha``, and requires for every ``t``:

    (i)   ``||L_t|| <= 1 - gamma`` and ``||K_t|| <= kappa``;
    (ii)  ``||H_t|| <= beta`` and ``||H_t^{-1}|| <= 1/alpha``;
    (iii) ``||H_{t+1}^{-1} H_t|| <= 1 + gamma/2``.
    """
    if not certs:
        raise ContractViolation("empty certificate sequence")
    shape = certs[0].H.shape
    if any(c.H.shape != shape for c in certs):
        raise DimensionMismatch("certificates have inconsistent dimensions")
    beta = max(c.beta for c in certs)
    alpha = min(c.alpha for c in certs)
    kappa = beta / alpha
    for c in certs:
        if spec_norm(c.L) > 1.0 - gamma + CERT_TOL:
            return False
        if c.K is not None and spec_norm(c.K) > kappa + CERT_TOL:
            return False
        if spec_norm(c.H) > beta + CERT_TOL:
            return False
        if spec_norm(c.H_inv) > 1.0 / alpha + CERT_TOL:
            return False
    coupling_cap = 1.0 + gamma / 2.0 + CERT_TOL
    for prev, nxt in zip(certs[:-1], certs[1:]):
        if spec_norm(nxt.H_inv @ prev.H) > coupling_cap:
            return False
    return True


def mixing_bound(cert: StabilityCertificate, dist0: float, t: int) -> float:
    """Covariance mixing bound under a fixed certified gain.

    After ``t`` rounds the distance of the propagated covariance from the
    steady state is at most ``kappa^2 exp(-2 gamma t)`` times the initial
    distance ``dist0`` (valid for randomized policies as well).
    """
    if dist0 < 0 or t < 0:
        raise ContractViolation("dist0 and t must be nonnegative")
    return cert.kappa**2 * np.exp(-2.0 * cert.gamma * t) * dist0


def sequential_mixing_bound(kappa: float, gamma: float, dist1: float, eta: float, t: int) -> float:
    """Mixing bound when the certified gains drift by at most ``eta`` per round.

    ``kappa^2 exp(-gamma t) dist1 + 2 eta kappa^2 / gamma``.
    """
    if min(kappa, gamma, dist1, eta) < 0 or t < 0:
        raise ContractViolation("inputs must be nonnegative")
    return kappa**2 * np.exp(-gamma * t) * dist1 + 2.0 * eta * kappa**2 / gamma


def trace_bounds(cert: StabilityCertificate, W) -> tuple[float, float]:
    """Steady-state trace bounds for state and control covariances.

    Returns ``((kappa^2/gamma) tr(W), (kappa^4/gamma) tr(W))``.
    """
    tr_w = float(np.trace(np.asarray(W, dtype=float)))
    x_bound = cert.kappa**2 / cert.gamma * tr_w
    return x_bound, cert.kappa**2 * x_bound


def strong_controllability(sys: LinearSystem, k_steps: int) -> ControllabilityReport:
    """Assemble ``C_k = [B, AB, ..., A^{k-1}B]`` and its conditioning.

    ``kappa_ctrl`` is the norm of the pseudo-inverse of ``C_k^T C_k``,
    computed from the eigenvalues above a 1e-10 relative cutoff; the rank of
    ``C_k`` at that cutoff is reported alongside.
    """
    if k_steps < 1:
        raise ContractViolation("k_steps must be >= 1")
    blocks = [sys.B]
    for _ in range(k_steps - 1):
        blocks.append(sys.A @ blocks[-1])
    C_k = np.hstack(blocks)
    gram = symmetrize(C_k.T @ C_k)
    w = np.linalg.eigvalsh(gram)
    top = w[-1] if w.size else 0.0
    if top <= 0.0:
        return ControllabilityReport(k_steps, C_k, 0.0, 0)
    kept = w[w > 1e-10 * top]
    return ControllabilityReport(k_steps, C_k, float(1.0 / kept[0]), int(kept.size))
