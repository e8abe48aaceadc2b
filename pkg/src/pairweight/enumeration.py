"""Exact enumeration of small sampling designs and Monte Carlo counterparts.

Joint inclusion probabilities up to fourth order are the raw material for
both the design-condition diagnostics and the exact unbiasedness checks of
the pairwise weighting identities.  Designs small enough to enumerate get
exact tensors; anything larger falls back to Monte Carlo frequencies with
standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from math import comb, perm

import numpy as np

from .designs import (
    _brewer_step_probs,
    brewer_inclusion_probabilities,
    brewer_pps_select,
    pair_selection_probabilities,
    select_pair,
)

DEFAULT_CAP = 1_000_000


class EnumerationCapError(ValueError):
    """Raised when a design has too many sample points to enumerate.

    Callers should switch to ``monte_carlo_tensor`` for such designs.
    """


@dataclass(frozen=True)
class SrsworSpec:
    """Simple random sampling without replacement: n_draw out of n_units."""

    n_units: int
    n_draw: int

    def __post_init__(self):
        if not 1 <= self.n_draw <= self.n_units:
            raise ValueError("need 1 <= n_draw <= n_units")

    def describe(self) -> str:
        return f"srswor(N={self.n_units}, n={self.n_draw})"


@dataclass(frozen=True)
class StagedSpec:
    """Nested size frame for the three-stage design: PSU -> household -> person.

    Unit ids are global person indices in nested order.
    """

    sizes: tuple[tuple[tuple[float, ...], ...], ...]
    n_psu_selected: int
    n_hh_per_psu: int
    pair_per_hh: bool = True

    @classmethod
    def from_population(cls, pop, cfg) -> "StagedSpec":
        nested = []
        for psu in range(pop.config.n_psu):
            psu_rows = np.nonzero(pop.psu_id == psu)[0]
            hhs = []
            for hh in range(pop.config.hh_per_psu):
                rows = psu_rows[pop.hh_id[psu_rows] == hh]
                hhs.append(tuple(float(s) for s in pop.size[rows]))
            nested.append(tuple(hhs))
        return cls(
            sizes=tuple(nested),
            n_psu_selected=cfg.n_psu_selected,
            n_hh_per_psu=cfg.n_hh_per_psu,
            pair_per_hh=cfg.pair_per_hh,
        )

    @property
    def n_units(self) -> int:
        return sum(len(hh) for psu in self.sizes for hh in psu)

    def person_ids(self):
        """Mapping (psu, hh) -> tuple of global person ids."""
        ids = {}
        counter = 0
        for p, psu in enumerate(self.sizes):
            for h, hh in enumerate(psu):
                ids[(p, h)] = tuple(range(counter, counter + len(hh)))
                counter += len(hh)
        return ids

    def describe(self) -> str:
        return (
            f"staged({len(self.sizes)} PSUs, select {self.n_psu_selected}; "
            f"{self.n_hh_per_psu} HH/PSU; pair={self.pair_per_hh})"
        )


DesignSpec = SrsworSpec | StagedSpec


@dataclass
class JointInclusionTensor:
    """Sparse joint inclusion probabilities up to a maximum order.

    Keys are sorted index tuples; absent keys mean probability zero.  Monte
    Carlo tensors also carry the replication count so binomial standard
    errors can be attached to each entry.
    """

    description: str
    n_units: int
    orders: dict[int, dict[tuple[int, ...], float]]
    method: str  # "exact-enumeration" or "monte-carlo"
    n_reps: int | None = None
    expected_sample_size: float | None = None

    def pi(self, ids) -> float:
        """Joint inclusion probability of a set of units.

        Repeated indices collapse: the probability of including {i, k, k} is
        that of {i, k}.  The empty set has probability 1.
        """
        key = tuple(sorted(set(int(i) for i in ids)))
        if len(key) == 0:
            return 1.0
        if len(key) > self.max_order:
            raise KeyError(f"tensor only populated to order {self.max_order}")
        return self.orders.get(len(key), {}).get(key, 0.0)

    def se(self, ids) -> float:
        if self.method != "monte-carlo" or not self.n_reps:
            return 0.0
        p = self.pi(ids)
        return float(np.sqrt(p * (1.0 - p) / self.n_reps))

    @property
    def max_order(self) -> int:
        return max(self.orders) if self.orders else 0


@dataclass
class SampleSpace:
    """Exhaustive distribution over samples: frozenset of unit ids -> probability."""

    description: str
    n_units: int
    samples: dict[frozenset, float] = field(default_factory=dict)

    def total_probability(self) -> float:
        return float(sum(self.samples.values()))

    def expected_sample_size(self) -> float:
        return float(sum(p * len(s) for s, p in self.samples.items()))

    def marginals(self) -> np.ndarray:
        pi = np.zeros(self.n_units)
        for s, p in self.samples.items():
            for i in s:
                pi[i] += p
        return pi


def _enumerate_brewer_stage(sizes, n: int) -> list[tuple[frozenset, float]]:
    """All samples of Brewer's draw-by-draw procedure with exact probabilities."""
    pi = brewer_inclusion_probabilities(sizes, n, on_certainty="include")
    n_units = len(pi)
    certain = np.nonzero(pi >= 1.0 - 1e-12)[0].tolist()
    open_units = [i for i in range(n_units) if i not in certain]
    n_open = n - len(certain)
    if n_open == 0:
        return [(frozenset(certain), 1.0)]
    sub_pi = pi[open_units]
    out: dict[frozenset, float] = {}

    def recurse(selected: np.ndarray, prob: float, step: int):
        if step > n_open:
            key = frozenset(open_units[j] for j in np.nonzero(selected)[0]) | frozenset(certain)
            out[key] = out.get(key, 0.0) + prob
            return
        p = _brewer_step_probs(sub_pi, selected, n_open, step)
        for j in np.nonzero(p > 0)[0]:
            nxt = selected.copy()
            nxt[j] = True
            recurse(nxt, prob * p[j], step + 1)

    recurse(np.zeros(len(open_units), dtype=bool), 1.0, 1)
    return list(out.items())


def _enumeration_work(spec: DesignSpec) -> int:
    """Upper bound on enumerated sample points (ordered draws for PPS stages)."""
    if isinstance(spec, SrsworSpec):
        return comb(spec.n_units, spec.n_draw)
    work = perm(len(spec.sizes), spec.n_psu_selected)
    if spec.n_psu_selected == len(spec.sizes):
        work = 1
    per_psu = 1
    for psu in spec.sizes:
        hh_work = perm(len(psu), spec.n_hh_per_psu) if spec.n_hh_per_psu < len(psu) else 1
        pair_work = 1
        for hh in psu:
            pair_work *= comb(len(hh), 2) if spec.pair_per_hh else 1
        per_psu = max(per_psu, hh_work * pair_work)
    return work * per_psu**max(1, spec.n_psu_selected)


def enumerate_samples(spec: DesignSpec, cap: int = DEFAULT_CAP) -> SampleSpace:
    """Exhaustively enumerate every possible sample with its exact probability."""
    if _enumeration_work(spec) > cap:
        raise EnumerationCapError(
            f"design {spec.describe()} exceeds the enumeration cap ({cap}); "
            "use monte_carlo_tensor instead"
        )
    space = SampleSpace(description=spec.describe(), n_units=spec.n_units)
    if isinstance(spec, SrsworSpec):
        p = 1.0 / comb(spec.n_units, spec.n_draw)
        for s in combinations(range(spec.n_units), spec.n_draw):
            space.samples[frozenset(s)] = p
        return space

    ids = spec.person_ids()
    psu_stage = _enumerate_brewer_stage(
        [sum(sum(hh) for hh in psu) for psu in spec.sizes], spec.n_psu_selected
    )
    for psu_set, p_psu in psu_stage:
        per_psu_options = []
        for psu in sorted(psu_set):
            hh_stage = _enumerate_brewer_stage(
                [sum(hh) for hh in spec.sizes[psu]], spec.n_hh_per_psu
            )
            psu_options = []
            for hh_set, p_hh in hh_stage:
                hh_choices = []
                for hh in sorted(hh_set):
                    roster = ids[(psu, hh)]
                    if spec.pair_per_hh:
                        pairs, pair_probs, _ = pair_selection_probabilities(spec.sizes[psu][hh])
                        hh_choices.append(
                            [(frozenset(roster[a] for a in pr), float(q)) for pr, q in zip(pairs, pair_probs)]
                        )
                    else:
                        hh_choices.append([(frozenset(roster), 1.0)])
                for combo in product(*hh_choices):
                    units = frozenset().union(*(c[0] for c in combo))
                    prob = p_hh
                    for c in combo:
                        prob *= c[1]
                    psu_options.append((units, prob))
            per_psu_options.append(psu_options)
        for combo in product(*per_psu_options):
            units = frozenset().union(*(c[0] for c in combo))
            prob = p_psu
            for c in combo:
                prob *= c[1]
            space.samples[units] = space.samples.get(units, 0.0) + prob
    return space


def tensor_from_space(space: SampleSpace, max_order: int = 4) -> JointInclusionTensor:
    orders: dict[int, dict[tuple[int, ...], float]] = {r: {} for r in range(1, max_order + 1)}
    for s, p in space.samples.items():
        members = sorted(s)
        for r in range(1, min(max_order, len(members)) + 1):
            level = orders[r]
            for key in combinations(members, r):
                level[key] = level.get(key, 0.0) + p
    return JointInclusionTensor(
        description=space.description,
        n_units=space.n_units,
        orders=orders,
        method="exact-enumeration",
        expected_sample_size=space.expected_sample_size(),
    )


def enumerate_design(spec: DesignSpec, cap: int = DEFAULT_CAP, max_order: int = 4) -> JointInclusionTensor:
    """Exact joint inclusion tensor for a small enumerable design."""
    return tensor_from_space(enumerate_samples(spec, cap=cap), max_order=max_order)


def draw_units(spec: DesignSpec, rng: np.random.Generator) -> frozenset:
    """Draw one sample from the design, returning the set of included units."""
    if isinstance(spec, SrsworSpec):
        return frozenset(rng.choice(spec.n_units, size=spec.n_draw, replace=False).tolist())
    ids = spec.person_ids()
    units: set[int] = set()
    psu_sizes = [sum(sum(hh) for hh in psu) for psu in spec.sizes]
    selected_psus, _ = brewer_pps_select(psu_sizes, spec.n_psu_selected, rng, on_certainty="include")
    for psu in selected_psus:
        hh_sizes = [sum(hh) for hh in spec.sizes[psu]]
        selected_hhs, _ = brewer_pps_select(hh_sizes, spec.n_hh_per_psu, rng, on_certainty="include")
        for hh in selected_hhs:
            roster = ids[(psu, hh)]
            if spec.pair_per_hh:
                pair, _, _ = select_pair(spec.sizes[psu][hh], rng)
                units.update(roster[a] for a in pair)
            else:
                units.update(roster)
    return frozenset(units)


def monte_carlo_tensor(
    spec: DesignSpec,
    n_reps: int,
    max_order: int = 2,
    seed: int = 0,
) -> JointInclusionTensor:
    """Empirical joint inclusion frequencies over repeated draws.

    Entries carry binomial standard errors through ``JointInclusionTensor.se``.
    """
    if n_reps < 1_000:
        raise ValueError("need at least 1000 replications for stable frequencies")
    rng = np.random.default_rng(seed)
    counts: dict[int, dict[tuple[int, ...], int]] = {r: {} for r in range(1, max_order + 1)}
    size_total = 0.0
    for _ in range(n_reps):
        units = sorted(draw_units(spec, rng))
        size_total += len(units)
        for r in range(1, min(max_order, len(units)) + 1):
            level = counts[r]
            for key in combinations(units, r):
                level[key] = level.get(key, 0) + 1
    orders = {
        r: {key: c / n_reps for key, c in level.items()} for r, level in counts.items()
    }
    return JointInclusionTensor(
        description=spec.describe(),
        n_units=spec.n_units,
        orders=orders,
        method="monte-carlo",
        n_reps=n_reps,
        expected_sample_size=size_total / n_reps,
    )
