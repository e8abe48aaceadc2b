"""Three-stage informative sampling: PPS clusters, PPS households, one pair.

Stage 1 and 2 use Brewer's without-replacement PPS procedure, which attains
inclusion probabilities exactly proportional to size.  Stage 3 draws a single
unordered pair of people within each sampled household with probability
proportional to the pair's summed size.  Every stagewise selection
probability is recorded on the resulting draw so weight construction never
has to re-derive design quantities.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .populations import Population

_EPS = 1e-12


@dataclass(frozen=True)
class DesignConfig:
    n_psu_selected: int
    n_hh_per_psu: int = 5
    pair_per_hh: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_psu_selected < 1 or self.n_hh_per_psu < 1:
            raise ValueError("stage sample sizes must be >= 1")


@dataclass
class SampleDraw:
    """Columns over sampled persons, plus frame constants used by weighting."""

    person_index: np.ndarray  # row into the population
    psu_id: np.ndarray
    hh_id: np.ndarray
    role: np.ndarray
    pi_psu: np.ndarray
    pi_hh_given_psu: np.ndarray
    pi_person_given_hh: np.ndarray
    pi_pair_given_hh: np.ndarray
    partner_index: np.ndarray  # population row of the co-sampled household member
    n_psu_population: int
    hh_per_psu_population: int
    persons_per_hh: int

    def __len__(self) -> int:
        return len(self.person_index)

    def validate(self) -> None:
        for name in ("pi_psu", "pi_hh_given_psu", "pi_person_given_hh", "pi_pair_given_hh"):
            p = getattr(self, name)
            if np.any((p <= 0) | (p > 1)):
                raise ValueError(f"{name} must lie in (0, 1]")
        partner_of_partner = {int(i): int(j) for i, j in zip(self.person_index, self.partner_index)}
        for i, j in partner_of_partner.items():
            if partner_of_partner.get(j) != i:
                raise ValueError("pair partners must reference each other")


def brewer_inclusion_probabilities(sizes, n: int, on_certainty: str = "error") -> np.ndarray:
    """Target inclusion probabilities of PPS selection of ``n`` units.

    The naive target is n * size / sum(size).  A unit whose target reaches 1
    is a certainty unit; by default that is an error because it means the
    requested design is infeasible as stated.  With ``on_certainty="include"``
    certainty units get probability exactly 1 and the remaining draws are
    re-targeted over the rest of the frame, recursively, which is the
    standard certainty treatment and keeps every recorded probability exact.
    """
    sizes = np.asarray(sizes, dtype=float)
    if np.any(sizes <= 0):
        raise ValueError("sizes must be strictly positive")
    if n > len(sizes):
        raise ValueError(f"cannot select {n} of {len(sizes)} units")
    if on_certainty not in ("error", "include"):
        raise ValueError("on_certainty must be 'error' or 'include'")
    if n == len(sizes):
        return np.ones(len(sizes))
    pi = np.zeros(len(sizes))
    active = np.ones(len(sizes), dtype=bool)
    remaining = n
    while True:
        if remaining == 0:
            break
        if remaining == int(active.sum()):
            pi[active] = 1.0
            break
        targets = remaining * sizes[active] / sizes[active].sum()
        over = targets >= 1.0 - _EPS
        if not over.any():
            pi[active] = targets
            break
        if on_certainty == "error":
            raise ValueError(
                "certainty unit: a target inclusion probability reaches 1; "
                "this design is rejected rather than silently altered"
            )
        idx = np.nonzero(active)[0][over]
        pi[idx] = 1.0
        active[idx] = False
        remaining -= len(idx)
    if remaining == 0 and active.any():
        raise ValueError("certainty units absorb every draw; remaining units can never be sampled")
    return pi


def _brewer_step_probs(pi: np.ndarray, selected: np.ndarray, n: int, step: int) -> np.ndarray:
    # Working probabilities of the draw-by-draw procedure; step is 1-based.
    a = pi[selected].sum()
    remaining = n - step + 1
    p = np.zeros(len(pi))
    free = ~selected
    num = pi[free] * ((n - a) - pi[free])
    den = (n - a) - pi[free] * remaining
    p[free] = np.clip(num / den, 0.0, None)
    total = p.sum()
    if not np.isfinite(total) or total <= 0:
        raise RuntimeError("degenerate working probabilities in PPS draw")
    return p / total


def _brewer_draw(pi: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    selected = np.zeros(len(pi), dtype=bool)
    for step in range(1, n + 1):
        p = _brewer_step_probs(pi, selected, n, step)
        j = int(np.searchsorted(np.cumsum(p), rng.random()))
        selected[min(j, len(pi) - 1)] = True
    return selected


def brewer_pps_select(sizes, n: int, rng: np.random.Generator, on_certainty: str = "error"):
    """Draw a without-replacement PPS sample of size ``n``.

    Returns (sorted selected indices, inclusion probabilities for all units).
    The draw-by-draw procedure attains the targets exactly.  Selecting every
    unit is a census and all probabilities are 1; certainty units follow the
    ``on_certainty`` policy of :func:`brewer_inclusion_probabilities`.
    """
    pi = brewer_inclusion_probabilities(sizes, n, on_certainty=on_certainty)
    certain = pi >= 1.0 - _EPS
    selected = certain.copy()
    n_open = n - int(certain.sum())
    if n_open > 0:
        sub_pi = pi[~certain]
        sub_selected = _brewer_draw(sub_pi, n_open, rng)
        selected[np.nonzero(~certain)[0][sub_selected]] = True
    return np.nonzero(selected)[0], pi


def pair_selection_probabilities(person_sizes):
    """All unordered-pair probabilities and the implied person marginals.

    A pair's size is the sum of its members' sizes and selection is
    proportional to pair size, so with m people of total size S the pair
    (i, j) has probability (s_i + s_j) / ((m - 1) S).  Person marginals are
    sums over the pairs containing that person and always add up to 2.
    """
    sizes = np.asarray(person_sizes, dtype=float)
    if np.any(sizes <= 0):
        raise ValueError("person sizes must be strictly positive")
    m = len(sizes)
    if m < 2:
        raise ValueError("pair selection needs at least 2 people")
    pairs = list(combinations(range(m), 2))
    pair_sizes = np.array([sizes[i] + sizes[j] for i, j in pairs])
    pair_probs = pair_sizes / pair_sizes.sum()
    marginals = np.zeros(m)
    for (i, j), p in zip(pairs, pair_probs):
        marginals[i] += p
        marginals[j] += p
    return pairs, pair_probs, marginals


def select_pair(person_sizes, rng: np.random.Generator):
    """Draw one unordered pair proportional to summed size.

    Returns (pair index tuple, {pair: probability}, person marginals).
    """
    pairs, pair_probs, marginals = pair_selection_probabilities(person_sizes)
    j = int(np.searchsorted(np.cumsum(pair_probs), rng.random()))
    j = min(j, len(pairs) - 1)
    return pairs[j], dict(zip(pairs, pair_probs)), marginals


def draw_sample(pop: Population, cfg: DesignConfig, rng: np.random.Generator | None = None) -> SampleDraw:
    """Draw one three-stage sample and record every stagewise probability.

    Households are selected independently across PSUs, and pairs
    independently across households, so the stagewise records multiply into
    marginal inclusion probabilities.
    """
    if cfg.n_psu_selected > pop.config.n_psu:
        raise ValueError("more PSUs requested than the population holds")
    if cfg.n_hh_per_psu > pop.config.hh_per_psu:
        raise ValueError("more households per PSU requested than the population holds")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    psu_sizes = np.bincount(pop.psu_id, weights=pop.size, minlength=pop.config.n_psu)
    selected_psus, pi_psu_all = brewer_pps_select(
        psu_sizes, cfg.n_psu_selected, rng, on_certainty="include"
    )

    rows: list[tuple] = []
    for psu in selected_psus:
        psu_rows = np.nonzero(pop.psu_id == psu)[0]
        hh_sizes = np.bincount(
            pop.hh_id[psu_rows], weights=pop.size[psu_rows], minlength=pop.config.hh_per_psu
        )
        selected_hhs, pi_hh_all = brewer_pps_select(
            hh_sizes, cfg.n_hh_per_psu, rng, on_certainty="include"
        )
        for hh in selected_hhs:
            hh_rows = psu_rows[pop.hh_id[psu_rows] == hh]
            if cfg.pair_per_hh:
                pair, pair_probs, marginals = select_pair(pop.size[hh_rows], rng)
                i, j = pair
                p_pair = pair_probs[pair]
                members = [(i, j), (j, i)]
            else:
                # whole-roster take: every member enters with certainty
                marginals = np.ones(len(hh_rows))
                p_pair = 1.0
                members = [(k, k) for k in range(len(hh_rows))]
            for local, partner_local in members:
                rows.append(
                    (
                        hh_rows[local],
                        psu,
                        hh,
                        pop.role[hh_rows[local]],
                        pi_psu_all[psu],
                        pi_hh_all[hh],
                        marginals[local],
                        p_pair,
                        hh_rows[partner_local],
                    )
                )

    cols = list(zip(*rows))
    draw = SampleDraw(
        person_index=np.array(cols[0], dtype=int),
        psu_id=np.array(cols[1], dtype=int),
        hh_id=np.array(cols[2], dtype=int),
        role=np.array(cols[3], dtype=np.int8),
        pi_psu=np.array(cols[4], dtype=float),
        pi_hh_given_psu=np.array(cols[5], dtype=float),
        pi_person_given_hh=np.array(cols[6], dtype=float),
        pi_pair_given_hh=np.array(cols[7], dtype=float),
        partner_index=np.array(cols[8], dtype=int),
        n_psu_population=pop.config.n_psu,
        hh_per_psu_population=pop.config.hh_per_psu,
        persons_per_hh=pop.config.persons_per_hh,
    )
    draw.validate()
    return draw
