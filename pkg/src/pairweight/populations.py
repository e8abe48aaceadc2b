"""Synthetic three-level population: PSUs containing households of three people.

Each household holds one person per role (P1, P2, P3).  P1 and P3 draw their
covariates independently; P2's sampling covariate is drawn conditionally on
P1's, and P2's conditional-quantile surface switches regimes on whether the
household's P1 covariate sits above or below the population median.  That
coupling is what makes within-household pair selection informative for the
response of one member given the other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aldist import al_ppf

ROLE_LABELS = ("P1", "P2", "P3")


@dataclass(frozen=True)
class PopulationConfig:
    n_psu: int = 200
    hh_per_psu: int = 10
    persons_per_hh: int = 3
    tau: float = 8.0
    q: float = 0.5
    x2_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if min(self.n_psu, self.hh_per_psu, self.persons_per_hh) < 1:
            raise ValueError("all unit counts must be >= 1")
        if self.persons_per_hh != 3:
            raise ValueError("households carry exactly the roles P1, P2, P3")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if not self.x2_rate > 0:
            raise ValueError("x2_rate must be positive")


@dataclass(frozen=True)
class Person:
    psu_id: int
    hh_id: int
    role: str
    x1: float
    x2: float
    size: float
    mu: float
    y: float


@dataclass
class Population:
    """Column-oriented population frame.  Immutable once generated."""

    config: PopulationConfig
    psu_id: np.ndarray
    hh_id: np.ndarray  # household index within its PSU
    role: np.ndarray  # 1, 2, 3
    x1: np.ndarray
    x2: np.ndarray
    size: np.ndarray
    mu: np.ndarray
    y: np.ndarray
    median_x2_p1: float = field(default=float("nan"))

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_households(self) -> int:
        return self.config.n_psu * self.config.hh_per_psu

    def hh_index(self) -> np.ndarray:
        """Global household ordinal for every person."""
        return self.psu_id * self.config.hh_per_psu + self.hh_id

    def person(self, i: int) -> Person:
        return Person(
            psu_id=int(self.psu_id[i]),
            hh_id=int(self.hh_id[i]),
            role=ROLE_LABELS[self.role[i] - 1],
            x1=float(self.x1[i]),
            x2=float(self.x2[i]),
            size=float(self.size[i]),
            mu=float(self.mu[i]),
            y=float(self.y[i]),
        )


def lower_median(values) -> float:
    """Median that resolves even-length ties to the lower midpoint element."""
    values = np.sort(np.asarray(values, dtype=float))
    if len(values) == 0:
        raise ValueError("median of an empty collection")
    return float(values[(len(values) - 1) // 2])


def _household_rng(seed: int, psu: int, hh: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(psu, hh)))


def conditional_quantile_p13(x1, x2):
    """True conditional quantile surface for roles P1 and P3."""
    return 10.0 + x1 + 0.5 * x2 + 0.5 * x1 * x2 - x1**2


def conditional_quantile_p2(x1, x2, p1_above_median):
    """True conditional quantile surface for role P2.

    Two regimes keyed on the household's P1 covariate relative to the
    population median.  Only the lower regime carries a quadratic term; the
    regimes are intentionally not symmetric.
    """
    lower = 10.0 + x1 + 0.25 * x2 + 0.25 * x1 * x2 - 2.0 * x1**2
    upper = 10.0 + x1 + 0.75 * x2 + 0.75 * x1 * x2
    return np.where(p1_above_median, upper, lower)


def generate_population(config: PopulationConfig) -> Population:
    """Generate the full population deterministically from ``config.seed``.

    Every household owns an RNG stream named by (psu, hh), so the result is
    independent of generation order and the loop may be parallelized across
    households without changing the output.  Per household the draw order is
    (x1, x2) for P1, P2, P3, then one uniform per person that is mapped
    through the response quantile function once the population-wide size
    shift and P1-median are known.
    """
    n_psu, n_hh = config.n_psu, config.hh_per_psu
    n_households = n_psu * n_hh
    n = n_households * 3
    scale = 1.0 / config.x2_rate

    x1 = np.empty(n)
    x2 = np.empty(n)
    u = np.empty(n)
    for psu in range(n_psu):
        for hh in range(n_hh):
            rng = _household_rng(config.seed, psu, hh)
            base = (psu * n_hh + hh) * 3
            x1_p1 = rng.normal()
            x2_p1 = rng.exponential(scale)
            x1_p2 = rng.normal()
            x2_p2 = rng.exponential(x2_p1)
            x1_p3 = rng.normal()
            x2_p3 = rng.exponential(scale)
            x1[base : base + 3] = (x1_p1, x1_p2, x1_p3)
            x2[base : base + 3] = (x2_p1, x2_p2, x2_p3)
            u[base : base + 3] = np.clip(rng.random(3), 1e-300, 1.0 - 1e-16)

    psu_id = np.repeat(np.arange(n_psu), n_hh * 3)
    hh_id = np.tile(np.repeat(np.arange(n_hh), 3), n_psu)
    role = np.tile(np.array([1, 2, 3], dtype=np.int8), n_households)

    # Both the size shift and the regime threshold are finite-population
    # quantities, computed after every covariate draw is in hand.
    size = x2 - x2.min() + 1.0
    median_x2_p1 = lower_median(x2[role == 1])

    mu = np.empty(n)
    p13 = role != 2
    mu[p13] = conditional_quantile_p13(x1[p13], x2[p13])
    p2 = role == 2
    p1_x2_of_hh = x2[role == 1]  # household-ordered, aligned with P2 rows
    mu[p2] = conditional_quantile_p2(x1[p2], x2[p2], p1_x2_of_hh > median_x2_p1)

    y = al_ppf(u, mu, config.tau, config.q)

    return Population(
        config=config,
        psu_id=psu_id,
        hh_id=hh_id,
        role=role,
        x1=x1,
        x2=x2,
        size=size,
        mu=mu,
        y=y,
        median_x2_p1=median_x2_p1,
    )
