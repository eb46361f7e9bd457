"""Online controller driven by projected gradient steps on the SDP.

Each round the controller extracts a gain and a control-noise covariance from
its current feasible point, plays a Gaussian control, and after seeing the
round's cost takes one projected gradient step on the linear SDP objective.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DimensionMismatch
from .linalg import sym_sqrt
from .sdp import JointCovariance, SdpProblem, extract, gaussian_excess, project
from .system import CostPair


@dataclass
class OgdState:
    """One controller round: the feasible iterate plus its extracted policy."""

    prob: SdpProblem
    eta: float
    Sigma: JointCovariance
    t: int
    K: np.ndarray = field(init=False)
    V: np.ndarray = field(init=False)
    _v_sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.K = extract(self.Sigma)
        self.V = gaussian_excess(self.Sigma, self.K)
        self._v_sqrt = sym_sqrt(self.V, floor=0.0)


def init(prob: SdpProblem, eta: float) -> OgdState:
    """Start the controller from the projection of the identity onto S.

    Projecting immediately (rather than starting from the raw identity, which
    generally violates the equality constraint) makes the first extraction
    well defined; from the second round on the iteration is the plain
    projected gradient step either way.
    """
    if eta < 0:
        raise ContractViolation("eta must be nonnegative")
    Sigma1 = project(prob, np.eye(prob.n))
    return OgdState(prob, eta, Sigma1, 1)


def act(state: OgdState, x, rng: np.random.Generator) -> np.ndarray:
    """Sample the round's control ``u ~ N(K_t x, V_t)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (state.prob.sys.d,):
        raise DimensionMismatch(f"state must have length {state.prob.sys.d}")
    return state.K @ x + state._v_sqrt @ rng.standard_normal(state.prob.sys.k)


def update(state: OgdState, cost: CostPair) -> OgdState:
    """Projected gradient step on the revealed cost: ``Pi_S[Sigma - eta diag(Q, R)]``."""
    d, k = state.prob.sys.d, state.prob.sys.k
    if cost.Q.shape[0] != d or cost.R.shape[0] != k:
        raise DimensionMismatch("cost dimensions do not match the controller")
    grad = np.zeros((state.prob.n, state.prob.n))
    grad[:d, :d] = cost.Q
    grad[d:, d:] = cost.R
    Sigma_next = project(state.prob, state.Sigma.mat - state.eta * grad)
    return OgdState(state.prob, state.eta, Sigma_next, state.t + 1)


def recommended_params(
    kappa: float, gamma: float, lambda_: float, sigma: float, C: float, T: int
) -> tuple[float, float]:
    """Trace budget and step size giving the sqrt-horizon regret guarantee.

    Returns ``nu = 2 kappa^4 lambda^2 / gamma`` and
    ``eta = sigma^3 / (2 C sqrt(nu T))``.  The guarantee needs
    ``T >= 8 kappa^4 lambda^2 / (gamma sigma^2)``; shorter horizons only
    trigger a warning since the controller itself remains well defined.
    """
    if min(kappa, gamma, lambda_, sigma, C) <= 0 or T <= 0:
        raise ContractViolation("all parameters must be positive")
    nu = 2.0 * kappa**4 * lambda_**2 / gamma
    eta = sigma**3 / (2.0 * C * np.sqrt(nu * T))
    t_min = 8.0 * kappa**4 * lambda_**2 / (gamma * sigma**2)
    if T < t_min:
        warnings.warn(
            f"horizon T={T} is below the guarantee threshold {t_min:.3g}; "
            "the regret bound may not apply",
            stacklevel=2,
        )
    return float(nu), float(eta)
