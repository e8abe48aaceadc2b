"""Weighted pseudo log posterior for quantile regression on a spline basis.

The likelihood contribution of each observation is exponentiated by its
normalized sampling weight; the prior couples the spline coefficients
through the difference penalty with a smoothing parameter, and both the
precision and smoothing parameters carry Gamma(1, 1) priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aldist import check_loss, check_loss_grad


@dataclass
class ModelState:
    theta: np.ndarray
    tau: float
    lam: float

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.lam > 0:
            raise ValueError("lam must be positive")


def pseudo_log_posterior(
    state: ModelState,
    y: np.ndarray,
    basis: np.ndarray,
    penalty: np.ndarray,
    weights: np.ndarray,
    q: float,
    ridge: float = 0.0,
    penalty_rank: int | None = None,
) -> float:
    """Weighted log likelihood plus log prior, up to an additive constant.

    The smoothing prior contributes -(lam/2) theta' (Q + ridge I) theta with
    normalizing exponent (rank(Q)/2) log lam; Gamma(1, 1) priors add -tau and
    -lam.
    """
    if len(y) != basis.shape[0] or len(weights) != len(y):
        raise ValueError("y, basis, and weights must have matching lengths")
    if penalty_rank is None:
        penalty_rank = int(np.linalg.matrix_rank(penalty))
    mu = basis @ state.theta
    w_tot = weights.sum()
    loglik = w_tot * (np.log(state.tau) + np.log(q) + np.log1p(-q))
    loglik -= state.tau * float(weights @ check_loss(y - mu, q))
    quad = float(state.theta @ (penalty @ state.theta) + ridge * state.theta @ state.theta)
    logprior = -0.5 * state.lam * quad + 0.5 * penalty_rank * np.log(state.lam)
    logprior += -state.tau - state.lam
    return float(loglik + logprior)


def pseudo_log_posterior_grad(
    state: ModelState,
    y: np.ndarray,
    basis: np.ndarray,
    penalty: np.ndarray,
    weights: np.ndarray,
    q: float,
    ridge: float = 0.0,
    penalty_rank: int | None = None,
):
    """Gradient in (theta, tau, lam); the check loss uses its subgradient."""
    if penalty_rank is None:
        penalty_rank = int(np.linalg.matrix_rank(penalty))
    mu = basis @ state.theta
    resid = y - mu
    w_tot = weights.sum()
    g_theta = state.tau * (basis.T @ (weights * check_loss_grad(resid, q)))
    g_theta -= state.lam * (penalty @ state.theta + ridge * state.theta)
    g_tau = w_tot / state.tau - float(weights @ check_loss(resid, q)) - 1.0
    quad = float(state.theta @ (penalty @ state.theta) + ridge * state.theta @ state.theta)
    g_lam = -0.5 * quad + 0.5 * penalty_rank / state.lam - 1.0
    return g_theta, float(g_tau), float(g_lam)
