"""MCMC for the weighted quantile-spline pseudo posterior.

The default sampler runs Hamiltonian proposals on the unconstrained
parametrization (theta, log tau, log lam) with dual-averaging step-size
adaptation and a diagonal mass matrix learned during warmup.  The target is
continuous and piecewise smooth; the check-loss kinks have measure zero and
are handled by the subgradient.  A random-walk Metropolis fallback targets
the identical density and exists to cross-validate the Hamiltonian results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .posterior import ModelState, pseudo_log_posterior, pseudo_log_posterior_grad
from .splines import BasisBundle

DIVERGENCE_ENERGY = 1000.0


class NonFiniteTargetError(RuntimeError):
    """Raised when the target density becomes non-finite; carries the state."""

    def __init__(self, message: str, state: np.ndarray):
        super().__init__(f"{message}; state dump: {np.array2string(state, precision=6)}")
        self.state = state


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 2
    warmup: int = 1000
    draws: int = 1000
    target_accept: float = 0.8
    algorithm: str = "hmc"  # or "rw"
    max_leapfrog: int = 64
    trajectory_length: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.chains < 2:
            raise ValueError("need at least 2 chains for split-chain diagnostics")
        if self.warmup < 10 or self.draws < 10:
            raise ValueError("warmup and draws must each be at least 10")
        if self.algorithm not in ("hmc", "rw"):
            raise ValueError("algorithm must be 'hmc' or 'rw'")


@dataclass
class PosteriorDraws:
    """Post-warmup draws per chain plus sampler health diagnostics."""

    theta: np.ndarray  # (chains, draws, n_basis)
    tau: np.ndarray  # (chains, draws)
    lam: np.ndarray  # (chains, draws)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return self.theta.shape[0]

    def stacked_theta(self) -> np.ndarray:
        return self.theta.reshape(-1, self.theta.shape[2])

    def stacked(self, name: str) -> np.ndarray:
        return getattr(self, name).reshape(-1)


def _unconstrained_target(y, bundle: BasisBundle, weights, q):
    basis, penalty = bundle.basis, bundle.penalty
    ridge, rank = bundle.ridge, bundle.penalty_rank
    m = bundle.n_basis
    # exp() stays finite and positive on this interval, so extreme leapfrog
    # excursions become -inf targets (rejections) instead of exceptions
    bound = 700.0

    def logp(z: np.ndarray) -> float:
        if not np.all(np.isfinite(z)) or np.any(np.abs(z[m:]) > bound):
            return -np.inf
        state = ModelState(z[:m], float(np.exp(z[m])), float(np.exp(z[m + 1])))
        lp = pseudo_log_posterior(state, y, basis, penalty, weights, q, ridge, rank)
        lp += z[m] + z[m + 1]  # Jacobian of the log transforms
        return lp if np.isfinite(lp) else -np.inf

    def grad(z: np.ndarray) -> np.ndarray:
        z = np.r_[z[:m], np.clip(z[m:], -bound, bound)]
        state = ModelState(z[:m], float(np.exp(z[m])), float(np.exp(z[m + 1])))
        g_theta, g_tau, g_lam = pseudo_log_posterior_grad(
            state, y, basis, penalty, weights, q, ridge, rank
        )
        return np.r_[g_theta, g_tau * state.tau + 1.0, g_lam * state.lam + 1.0]

    return logp, grad


def _initial_state(y, bundle: BasisBundle, weights, q, rng) -> np.ndarray:
    # Penalized weighted least squares warm start, jittered per chain.
    basis, penalty = bundle.basis, bundle.penalty
    m = bundle.n_basis
    wb = basis * weights[:, None]
    lhs = basis.T @ wb + penalty + (bundle.ridge + 1e-8) * np.eye(m)
    theta = np.linalg.solve(lhs, basis.T @ (weights * y))
    resid_scale = float(np.mean(np.abs(y - basis @ theta))) + 1e-6
    z = np.r_[theta, np.log(1.0 / resid_scale), 0.0]
    return z + 0.2 * rng.normal(size=m + 2)


def _find_step_size(z, logp, grad, inv_mass, rng) -> float:
    eps = 0.1
    lp0 = logp(z)
    if not np.isfinite(lp0):
        raise NonFiniteTargetError("non-finite target at initialization", z)
    p = rng.normal(size=len(z)) / np.sqrt(inv_mass)
    h0 = lp0 - 0.5 * float(p**2 @ inv_mass)
    z1, p1, lp1 = _leapfrog(z, p, eps, 1, grad, logp, inv_mass)[:3]
    h1 = lp1 - 0.5 * float(p1**2 @ inv_mass)
    direction = 1.0 if (h1 - h0) > np.log(0.5) else -1.0
    for _ in range(50):
        eps *= 2.0**direction
        z1, p1, lp1 = _leapfrog(z, p, eps, 1, grad, logp, inv_mass)[:3]
        h1 = lp1 - 0.5 * float(p1**2 @ inv_mass)
        if direction * (h1 - h0) <= direction * np.log(0.5):
            break
    return eps


def _leapfrog(z, p, eps, n_steps, grad, logp, inv_mass):
    z, p = z.copy(), p.copy()
    g = grad(z)
    for _ in range(n_steps):
        p = p + 0.5 * eps * g
        z = z + eps * inv_mass * p
        g = grad(z)
        p = p + 0.5 * eps * g
    lp = logp(z)
    return z, p, lp, g


def _run_hmc_chain(logp, grad, z0, config: SamplerConfig, rng):
    dim = len(z0)
    inv_mass = np.ones(dim)
    z = z0.copy()
    lp = logp(z)
    if not np.isfinite(lp):
        raise NonFiniteTargetError("non-finite target at initial state", z)

    warmup, draws = config.warmup, config.draws
    mass_window = (int(0.15 * warmup), int(0.9 * warmup)) if warmup >= 100 else None
    window_states = []

    eps = _find_step_size(z, logp, grad, inv_mass, rng)
    mu_da, log_eps_bar, h_bar = np.log(10 * eps), 0.0, 0.0
    da_count = 0

    out = np.empty((draws, dim))
    n_accept = 0
    n_divergent = 0

    for it in range(warmup + draws):
        adapting = it < warmup
        p = rng.normal(size=dim) / np.sqrt(inv_mass)
        h0 = lp - 0.5 * float(p**2 @ inv_mass)
        max_steps = max(1, min(config.max_leapfrog, int(config.trajectory_length / eps) + 1))
        n_steps = int(rng.integers(1, max_steps + 1))
        z_new, p_new, lp_new, _ = _leapfrog(z, p, eps, n_steps, grad, logp, inv_mass)
        h1 = lp_new - 0.5 * float(p_new**2 @ inv_mass)
        delta_h = h1 - h0
        divergent = not np.isfinite(delta_h) or delta_h < -DIVERGENCE_ENERGY
        accept_prob = 0.0 if divergent else min(1.0, float(np.exp(min(delta_h, 0.0))))
        if not divergent and rng.random() < accept_prob:
            z, lp = z_new, lp_new
            if not adapting:
                n_accept += 1
        if divergent and not adapting:
            n_divergent += 1

        if adapting:
            da_count += 1
            frac = 1.0 / (da_count + 10.0)
            h_bar = (1.0 - frac) * h_bar + frac * (config.target_accept - accept_prob)
            log_eps = mu_da - np.sqrt(da_count) / 0.05 * h_bar
            eta = da_count**-0.75
            log_eps_bar = (1.0 - eta) * log_eps_bar + eta * log_eps
            eps = float(np.exp(log_eps))
            if mass_window and mass_window[0] <= it < mass_window[1]:
                window_states.append(z.copy())
            if mass_window and it == mass_window[1] - 1 and len(window_states) >= 10:
                var = np.var(np.asarray(window_states), axis=0, ddof=1)
                inv_mass = np.clip(var, 1e-10, None)
                eps = _find_step_size(z, logp, grad, inv_mass, rng)
                mu_da, log_eps_bar, h_bar, da_count = np.log(10 * eps), 0.0, 0.0, 0
            if it == warmup - 1:
                eps = float(np.exp(log_eps_bar))
        else:
            out[it - warmup] = z

    return out, n_accept / draws, n_divergent


def _run_rw_chain(logp, z0, config: SamplerConfig, rng):
    dim = len(z0)
    z = z0.copy()
    lp = logp(z)
    if not np.isfinite(lp):
        raise NonFiniteTargetError("non-finite target at initial state", z)
    log_scale = np.log(2.38 / np.sqrt(dim))
    spread = np.ones(dim)
    history = []
    out = np.empty((config.draws, dim))
    n_accept = 0
    for it in range(config.warmup + config.draws):
        adapting = it < config.warmup
        step = np.exp(log_scale) * spread * rng.normal(size=dim)
        z_new = z + step
        lp_new = logp(z_new)
        accept = np.isfinite(lp_new) and np.log(rng.random()) < lp_new - lp
        if accept:
            z, lp = z_new, lp_new
            if not adapting:
                n_accept += 1
        if adapting:
            history.append(z.copy())
            log_scale += (it + 1) ** -0.6 * ((1.0 if accept else 0.0) - 0.3)
            if it >= 200 and it % 100 == 0:
                spread = np.std(np.asarray(history[len(history) // 2 :]), axis=0, ddof=1)
                spread = np.clip(spread, 1e-6, None)
        else:
            out[it - config.warmup] = z
    return out, n_accept / config.draws, 0


def run_mcmc(y, bundle: BasisBundle, weights, q: float, config: SamplerConfig) -> PosteriorDraws:
    """Sample the pseudo posterior with independent, separately seeded chains."""
    y = np.asarray(y, dtype=float)
    weights = np.asarray(weights, dtype=float)
    logp, grad = _unconstrained_target(y, bundle, weights, q)
    m = bundle.n_basis

    chains = []
    accept_rates = []
    divergences = 0
    for c in range(config.chains):
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(c,)))
        z0 = _initial_state(y, bundle, weights, q, rng)
        if config.algorithm == "hmc":
            draws, rate, n_div = _run_hmc_chain(logp, grad, z0, config, rng)
        else:
            draws, rate, n_div = _run_rw_chain(logp, z0, config, rng)
        chains.append(draws)
        accept_rates.append(rate)
        divergences += n_div

    z = np.asarray(chains)  # (chains, draws, dim)
    theta = z[:, :, :m]
    log_tau = z[:, :, m]
    log_lam = z[:, :, m + 1]

    params = np.concatenate([theta, log_tau[:, :, None], log_lam[:, :, None]], axis=2)
    names = [f"theta_{j}" for j in range(m)] + ["log_tau", "log_lam"]
    rhat = np.array([split_rhat(params[:, :, j]) for j in range(params.shape[2])])
    ess = np.array([effective_sample_size(params[:, :, j]) for j in range(params.shape[2])])

    divergence_rate = divergences / (config.chains * config.draws)
    flags = []
    if divergence_rate > 0.05:
        flags.append(f"divergence rate {divergence_rate:.1%} exceeds 5%")

    return PosteriorDraws(
        theta=theta,
        tau=np.exp(log_tau),
        lam=np.exp(log_lam),
        diagnostics={
            "accept_rate": accept_rates,
            "divergences": divergences,
            "divergence_rate": divergence_rate,
            "rhat": dict(zip(names, rhat.tolist())),
            "ess": dict(zip(names, ess.tolist())),
            "max_rhat": float(rhat.max()),
            "min_ess": float(ess.min()),
            "flags": flags,
            "algorithm": config.algorithm,
        },
    )


def _split_chains(chains: np.ndarray) -> np.ndarray:
    # (chains, draws) -> (2 * chains, draws // 2)
    n = chains.shape[1] // 2
    return np.concatenate([chains[:, :n], chains[:, n : 2 * n]], axis=0)


def split_rhat(chains: np.ndarray) -> float:
    """Potential scale reduction on split chains; 1.0 means no disagreement."""
    x = _split_chains(np.asarray(chains, dtype=float))
    n = x.shape[1]
    means = x.mean(axis=1)
    variances = x.var(axis=1, ddof=1)
    w = variances.mean()
    b = n * means.var(ddof=1)
    if w <= 0:
        return 1.0
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocorrelation(x: np.ndarray) -> np.ndarray:
    n = len(x)
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f))[:n].real / n
    if acov[0] <= 0:
        return np.zeros(n)
    return acov / acov[0]


def effective_sample_size(chains: np.ndarray) -> float:
    """ESS via per-chain autocorrelations with pairwise positive truncation."""
    x = _split_chains(np.asarray(chains, dtype=float))
    m, n = x.shape
    variances = x.var(axis=1, ddof=1)
    w = variances.mean()
    if w <= 0:
        return float(m * n)
    means = x.mean(axis=1)
    b = n * means.var(ddof=1)
    var_plus = (n - 1) / n * w + b / n
    rho_chain = np.asarray([_autocorrelation(x[i]) for i in range(m)])
    rho = 1.0 - (w - (variances[:, None] * rho_chain).mean(axis=0)) / var_plus

    # Initial positive, monotone sequence over lag pairs (rho_2k + rho_2k+1).
    tau = -1.0
    prev_pair = np.inf
    k = 0
    while 2 * k + 1 < n:
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair < 0:
            break
        pair = min(pair, prev_pair)
        tau += 2.0 * pair
        prev_pair = pair
        k += 1
    tau = max(tau, 1e-3)
    return float(min(m * n / tau, m * n))
