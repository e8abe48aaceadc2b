"""Replicated sampling experiments comparing weighting schemes.

One experiment fixes a population, draws repeated three-stage samples at each
ladder size, builds an analysis domain per scenario, fits the weighted
quantile-spline model under every requested scheme, and aggregates bias and
mean squared error of the fitted curves against a population reference fit.

Scenarios
---------
S1  every sampled person of the target role.
S2  target-role people whose co-sampled household partner has the
    conditioning role (the pair sub-sample).
S3  the S2 people whose partner's response passes a threshold test; the two
    branches (>= and <) partition the S2 sub-sample.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .designs import DesignConfig, SampleDraw, draw_sample
from .estimator import QuantileSplineRegressor
from .populations import Population, PopulationConfig, generate_population
from .weighting import SCHEMES, compute_weights, hh_pairwise_weights

SCENARIO_IDS = ("S1", "S2", "S3")


@dataclass(frozen=True)
class ScenarioSpec:
    id: str = "S1"
    target_role: int = 2
    conditioning_role: int = 1
    threshold: float = 10.0
    branch: str = "ge"  # S3 only: partner response >= or < threshold

    def __post_init__(self):
        if self.id not in SCENARIO_IDS:
            raise ValueError(f"scenario id must be one of {SCENARIO_IDS}")
        if self.branch not in ("ge", "lt"):
            raise ValueError("branch must be 'ge' or 'lt'")
        if self.target_role == self.conditioning_role:
            raise ValueError("target and conditioning roles must differ")

    def passes_threshold(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return values >= self.threshold if self.branch == "ge" else values < self.threshold


def sample_mask(scenario: ScenarioSpec, pop: Population, draw: SampleDraw) -> np.ndarray:
    """Analysis-domain indicator over the sampled persons."""
    mask = draw.role == scenario.target_role
    if scenario.id == "S1":
        return mask
    partner_role = pop.role[draw.partner_index]
    mask = mask & (partner_role == scenario.conditioning_role)
    if scenario.id == "S2":
        return mask
    return mask & scenario.passes_threshold(pop.y[draw.partner_index])


def population_domain(scenario: ScenarioSpec, pop: Population) -> np.ndarray:
    """Population analog of the analysis domain, used for the reference fit.

    S1 and S2 target the same sub-population (all target-role people); the
    S3 reference keeps households whose conditioning member's response
    passes the threshold.
    """
    mask = pop.role == scenario.target_role
    if scenario.id in ("S1", "S2"):
        return mask
    hh = pop.hh_index()
    cond_rows = pop.role == scenario.conditioning_role
    passes_by_hh = np.zeros(pop.n_households, dtype=bool)
    passes_by_hh[hh[cond_rows]] = scenario.passes_threshold(pop.y[cond_rows])
    return mask & passes_by_hh[hh]


def eligible_roster_count(scenario: ScenarioSpec, pop: Population) -> int:
    """Domain-eligible household roster size for the pair-weight divisor."""
    if scenario.id == "S1":
        return pop.config.persons_per_hh
    return 2  # the target-conditioning role pair


@dataclass(frozen=True)
class ExperimentConfig:
    population: PopulationConfig = PopulationConfig()
    scenario: ScenarioSpec = ScenarioSpec()
    n_psu_selected: tuple[int, ...] = (40,)
    n_hh_per_psu: int = 5
    schemes: tuple[str, ...] = ("equal", "marginal", "hh_pairwise")
    replications: int = 50
    rep_offset: int = 0
    quantile: float = 0.5
    n_knots: int = 5
    degree: int = 2
    chains: int = 2
    warmup: int = 500
    draws: int = 1000
    target_accept: float = 0.8
    algorithm: str = "hmc"
    grid_points: int = 101
    seed: int = 0
    fresh_population_per_rep: bool = False
    workers: int = 1
    max_failure_rate: float = 0.10

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if not self.schemes:
            raise ValueError("at least one weighting scheme is required")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes: {sorted(unknown)}")


@dataclass
class ScenarioReport:
    config: ExperimentConfig
    grid: np.ndarray
    reference: np.ndarray
    curves: dict  # (scheme, K) -> (M, grid) array, NaN rows for failed fits
    rep_indices: np.ndarray  # global replication ids, ascending
    failures: dict  # (scheme, K) -> list of (rep, message)

    def cells(self):
        return sorted(self.curves)

    def mean_curve(self, scheme: str, n_psu: int) -> np.ndarray:
        return np.nanmean(self.curves[(scheme, n_psu)], axis=0)

    def bias(self, scheme: str, n_psu: int) -> np.ndarray:
        return self.mean_curve(scheme, n_psu) - self.reference

    def mse(self, scheme: str, n_psu: int) -> np.ndarray:
        dev = self.curves[(scheme, n_psu)] - self.reference[None, :]
        return np.nanmean(dev**2, axis=0)

    def n_failures(self, scheme: str, n_psu: int) -> int:
        return len(self.failures.get((scheme, n_psu), []))

    def integrated_abs_bias(self, scheme: str, n_psu: int) -> float:
        return float(np.trapezoid(np.abs(self.bias(scheme, n_psu)), self.grid))

    def integrated_mse(self, scheme: str, n_psu: int) -> float:
        return float(np.trapezoid(self.mse(scheme, n_psu), self.grid))


def merge_reports(first: ScenarioReport, second: ScenarioReport) -> ScenarioReport:
    """Combine two runs of the same experiment over disjoint replication ids.

    Because aggregation is a pure function of the per-replication curves,
    merging two half runs reproduces the full run exactly.
    """
    key = lambda cfg: replace(cfg, replications=0, rep_offset=0, workers=0)
    if key(first.config) != key(second.config):
        raise ValueError("reports come from different experiment configurations")
    if set(first.rep_indices) & set(second.rep_indices):
        raise ValueError("replication ids overlap; refusing to double count")
    if first.cells() != second.cells():
        raise ValueError("reports cover different cells")
    order = np.argsort(np.r_[first.rep_indices, second.rep_indices])
    merged_curves = {
        cell: np.vstack([first.curves[cell], second.curves[cell]])[order]
        for cell in first.cells()
    }
    failures = {
        cell: sorted(first.failures.get(cell, []) + second.failures.get(cell, []))
        for cell in set(first.failures) | set(second.failures)
    }
    total = first.config.replications + second.config.replications
    offset = int(min(first.rep_indices.min(), second.rep_indices.min()))
    return ScenarioReport(
        config=replace(first.config, replications=total, rep_offset=offset),
        grid=first.grid,
        reference=first.reference,
        curves=merged_curves,
        rep_indices=np.sort(np.r_[first.rep_indices, second.rep_indices]),
        failures=failures,
    )


def _fit_seed(seed: int, namespace: tuple) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=namespace).generate_state(1)[0])


def _grid_and_range(pop: Population, scenario: ScenarioSpec, n_points: int):
    domain_x = pop.x1[population_domain(scenario, pop)]
    lo, hi = np.percentile(domain_x, [1.0, 99.0])
    grid = np.linspace(lo, hi, n_points)
    x_range = (float(pop.x1.min()), float(pop.x1.max()))
    return grid, x_range


def _make_estimator(cfg: ExperimentConfig, x_range, seed: int) -> QuantileSplineRegressor:
    return QuantileSplineRegressor(
        quantile=cfg.quantile,
        n_knots=cfg.n_knots,
        degree=cfg.degree,
        x_range=x_range,
        chains=cfg.chains,
        warmup=cfg.warmup,
        draws=cfg.draws,
        target_accept=cfg.target_accept,
        algorithm=cfg.algorithm,
        random_state=seed,
    )


def reference_curve(pop: Population, scenario: ScenarioSpec, cfg: ExperimentConfig, grid, x_range) -> np.ndarray:
    """Equal-weight model fit to the full population domain, evaluated on the grid."""
    domain = population_domain(scenario, pop)
    if not domain.any():
        raise ValueError("scenario population domain is empty")
    est = _make_estimator(cfg, x_range, _fit_seed(cfg.seed, (0,)))
    est.fit(pop.x1[domain][:, None], pop.y[domain])
    return est.predict(grid[:, None])


def _replication_population(cfg: ExperimentConfig, n_psu: int, rep: int) -> Population:
    if not cfg.fresh_population_per_rep:
        raise RuntimeError("only called in fresh-population mode")
    pop_seed = _fit_seed(cfg.population.seed, (4, n_psu, rep))
    return generate_population(replace(cfg.population, seed=pop_seed))


def _run_replication(args):
    cfg, pop, grid, n_psu, rep = args
    if cfg.fresh_population_per_rep:
        pop = _replication_population(cfg, n_psu, rep)
    x_range = (float(pop.x1.min()), float(pop.x1.max()))
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1, n_psu, rep)))
    design = DesignConfig(n_psu_selected=n_psu, n_hh_per_psu=cfg.n_hh_per_psu)
    results: dict[str, object] = {}
    try:
        draw = draw_sample(pop, design, rng=rng)
        mask = sample_mask(cfg.scenario, pop, draw)
    except Exception as exc:  # design-level failure hits every scheme
        return n_psu, rep, {scheme: ("error", f"draw failed: {exc}") for scheme in cfg.schemes}

    scheme_ids = {scheme: SCHEMES.index(scheme) for scheme in cfg.schemes}
    for scheme in cfg.schemes:
        try:
            if int(mask.sum()) < cfg.n_knots + cfg.degree:
                raise ValueError(f"analysis domain too small ({int(mask.sum())} persons)")
            if scheme == "hh_pairwise":
                weights = hh_pairwise_weights(
                    draw, mask=mask, eligible_roster=eligible_roster_count(cfg.scenario, pop)
                )
            else:
                weights = compute_weights(scheme, draw, mask=mask)
            rows = draw.person_index[mask]
            est = _make_estimator(
                cfg, x_range, _fit_seed(cfg.seed, (2, n_psu, rep, scheme_ids[scheme]))
            )
            est.fit(pop.x1[rows][:, None], pop.y[rows], sample_weight=weights.normalized[mask])
            results[scheme] = est.predict(grid[:, None])
        except Exception as exc:
            results[scheme] = ("error", str(exc))
    return n_psu, rep, results


def run_experiment(cfg: ExperimentConfig) -> ScenarioReport:
    """Run the full replication grid and aggregate bias/MSE per cell.

    Deterministic for a fixed config and seed: replications own RNG streams
    named by (ladder size, replication id, scheme), so neither the worker
    count nor completion order affects the result.  A cell whose failure
    rate exceeds ``max_failure_rate`` aborts the run.
    """
    pop = generate_population(cfg.population)
    grid, x_range = _grid_and_range(pop, cfg.scenario, cfg.grid_points)
    reference = reference_curve(pop, cfg.scenario, cfg, grid, x_range)

    reps = [cfg.rep_offset + r for r in range(cfg.replications)]
    jobs = [(cfg, pop, grid, n_psu, rep) for n_psu in cfg.n_psu_selected for rep in reps]

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_replication, jobs, chunksize=1))
    else:
        outcomes = [_run_replication(job) for job in jobs]

    curves = {
        (scheme, n_psu): np.full((cfg.replications, len(grid)), np.nan)
        for scheme in cfg.schemes
        for n_psu in cfg.n_psu_selected
    }
    failures: dict = {}
    for n_psu, rep, results in outcomes:
        row = rep - cfg.rep_offset
        for scheme, outcome in results.items():
            if isinstance(outcome, tuple) and outcome[0] == "error":
                failures.setdefault((scheme, n_psu), []).append((rep, outcome[1]))
            else:
                curves[(scheme, n_psu)][row] = outcome

    for cell, fails in failures.items():
        rate = len(fails) / cfg.replications
        if rate > cfg.max_failure_rate:
            raise RuntimeError(
                f"cell {cell} failed in {len(fails)}/{cfg.replications} replications: "
                f"{fails[0][1]}"
            )

    return ScenarioReport(
        config=cfg,
        grid=grid,
        reference=reference,
        curves=curves,
        rep_indices=np.asarray(reps),
        failures=failures,
    )
