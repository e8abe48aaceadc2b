"""Asymmetric Laplace distribution: check loss, density, inverse CDF, sampling.

The location parameter is the q-th quantile of the distribution, which is
what makes this family the working likelihood for Bayesian quantile
regression.
"""

from __future__ import annotations

import numpy as np


def check_loss(u, q: float):
    """Quantile check loss: q*|u| for u >= 0, (1-q)*|u| for u < 0."""
    u = np.asarray(u, dtype=float)
    return np.where(u >= 0, q * u, (q - 1.0) * u)


def check_loss_grad(u, q: float):
    """Subgradient of the check loss; the kink at 0 takes the value q."""
    u = np.asarray(u, dtype=float)
    return np.where(u >= 0, q, -(1.0 - q))


def _validate(tau: float, q: float) -> None:
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")


def al_logpdf(y, mu, tau: float, q: float):
    """Log density of the asymmetric Laplace with location mu, precision tau.

    log p(y) = log(tau) + log(q) + log(1-q) - tau * check_loss(y - mu).
    """
    _validate(tau, q)
    y = np.asarray(y, dtype=float)
    return np.log(tau) + np.log(q) + np.log1p(-q) - tau * check_loss(y - mu, q)


def al_cdf(y, mu, tau: float, q: float):
    _validate(tau, q)
    u = np.asarray(y, dtype=float) - mu
    lower = q * np.exp(tau * (1.0 - q) * np.minimum(u, 0.0))
    upper = 1.0 - (1.0 - q) * np.exp(-tau * q * np.maximum(u, 0.0))
    return np.where(u < 0, lower, upper)


def al_ppf(p, mu, tau: float, q: float):
    """Inverse CDF.  Piecewise exponential tails joined at the q-quantile mu."""
    _validate(tau, q)
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    below = mu + np.log(p / q) / (tau * (1.0 - q))
    above = mu - np.log((1.0 - p) / (1.0 - q)) / (tau * q)
    return np.where(p <= q, below, above)


def al_sample(mu, tau: float, q: float, rng: np.random.Generator, size=None):
    """Draw from the asymmetric Laplace by inversion of the CDF.

    Uniform variates are clipped away from {0, 1} so the transform stays
    finite.
    """
    _validate(tau, q)
    u = rng.random(size=size)
    u = np.clip(u, 1e-300, 1.0 - 1e-16)
    out = al_ppf(u, mu, tau, q)
    if size is None and np.ndim(mu) == 0:
        return float(out)
    return out
