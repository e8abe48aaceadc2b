"""Sampling-weight construction: marginal, pairwise, and stagewise schemes.

All schemes produce raw inverse-probability weights from the stagewise
records on a :class:`~pairweight.designs.SampleDraw`, then a two-step
normalization rescales the weights over the analysis domain so they sum to
the domain sample size.  Because the second step is scale-free, schemes that
differ only by a constant divisor (for example the roster-pair conventions
of the household pairwise weights) yield identical normalized weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .designs import SampleDraw

SCHEMES = ("equal", "marginal", "full_pairwise", "hh_pairwise", "stagewise")


@dataclass(frozen=True)
class WeightVector:
    scheme: str
    raw: np.ndarray
    mask: np.ndarray
    normalized: np.ndarray | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if np.any(self.raw <= 0):
            raise ValueError("raw weights must be strictly positive")
        if self.mask.shape != self.raw.shape:
            raise ValueError("mask and weights must align")


def _full_mask(draw_or_n, mask) -> np.ndarray:
    n = len(draw_or_n) if not isinstance(draw_or_n, (int, np.integer)) else int(draw_or_n)
    if mask is None:
        return np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise ValueError("mask length must match the sample")
    return mask


def normalize(weights: WeightVector, mask=None) -> WeightVector:
    """Rescale the masked weights to sum exactly to the masked count.

    Idempotent, order preserving, and invariant to global rescaling of the
    raw weights.  Summation is compensated (``math.fsum``) so the normalized
    total matches the count to well under 1e-10 * n.
    """
    mask = weights.mask if mask is None else _full_mask(len(weights.raw), mask)
    n_domain = int(mask.sum())
    if n_domain == 0:
        raise ValueError("cannot normalize over an empty domain")
    total = math.fsum(weights.raw[mask])
    normalized = np.zeros_like(weights.raw)
    normalized[mask] = weights.raw[mask] * (n_domain / total)
    return replace(weights, mask=mask, normalized=normalized)


def equal_weights(draw: SampleDraw, mask=None) -> WeightVector:
    """Baseline scheme: every sampled person counts the same."""
    mask = _full_mask(draw, mask)
    return normalize(WeightVector("equal", np.ones(len(draw)), mask))


def marginal_weights(draw: SampleDraw, mask=None) -> WeightVector:
    """First-order weights: inverse product of the stagewise probabilities."""
    _check_positive(draw)
    raw = 1.0 / (draw.pi_psu * draw.pi_hh_given_psu * draw.pi_person_given_hh)
    return normalize(WeightVector("marginal", raw, _full_mask(draw, mask)))


def hh_pairwise_weights(
    draw: SampleDraw,
    mask=None,
    eligible_roster=None,
    pair_divisor: str = "roster_minus_one",
) -> WeightVector:
    """Last-stage pair weights, treating each household roster as a population.

    ``eligible_roster`` is the count of domain-eligible people on the
    household roster (scalar or per-person array); it defaults to the full
    roster size.  ``pair_divisor`` chooses between dividing by roster - 1
    (default) and by the roster pair count; the two differ by a constant and
    are indistinguishable after normalization.
    """
    _check_positive(draw)
    if eligible_roster is None:
        eligible_roster = draw.persons_per_hh
    roster = np.broadcast_to(np.asarray(eligible_roster, dtype=float), (len(draw),))
    if np.any(roster < 2):
        raise ValueError("household pair weights need at least 2 eligible roster members")
    if pair_divisor == "roster_minus_one":
        divisor = roster - 1.0
    elif pair_divisor == "pair_count":
        divisor = roster * (roster - 1.0) / 2.0
    else:
        raise ValueError("pair_divisor must be 'roster_minus_one' or 'pair_count'")
    raw = 1.0 / (draw.pi_psu * draw.pi_hh_given_psu * draw.pi_pair_given_hh) / divisor
    return normalize(WeightVector("hh_pairwise", raw, _full_mask(draw, mask)))


def pairwise_weight_matrix(draw: SampleDraw) -> np.ndarray:
    """Inverse joint inclusion weights for every sampled pair.

    Three regimes, depending on where the two people sit: different PSUs
    (independent selections, so the product of their marginal weights), same
    PSU but different households (one shared PSU factor), same household
    (one shared PSU, household, and pair factor).  The diagonal is zero.
    """
    _check_positive(draw)
    a = 1.0 / draw.pi_psu  # PSU factor
    bc = 1.0 / (draw.pi_hh_given_psu * draw.pi_person_given_hh)
    w1 = a * bc
    same_psu = draw.psu_id[:, None] == draw.psu_id[None, :]
    same_hh = same_psu & (draw.hh_id[:, None] == draw.hh_id[None, :])
    w2 = np.outer(w1, w1)
    w2[same_psu] = np.outer(w1, bc)[same_psu]  # count the shared PSU factor once
    hh_term = a / (draw.pi_hh_given_psu * draw.pi_pair_given_hh)
    w2[same_hh] = np.broadcast_to(hh_term[:, None], w2.shape)[same_hh]
    np.fill_diagonal(w2, 0.0)
    return w2


def full_pairwise_weights(
    draw: SampleDraw, mask=None, population_size: float | None = None
) -> WeightVector:
    """Second-order weights summed over every co-sampled partner.

    Each person's raw weight is the sum of inverse pairwise inclusion
    probabilities over all other sampled people, divided by N - 1 for the
    size N of the target population.  When N is unknown it is estimated by
    the sum of the marginal weights.
    """
    if population_size is None:
        _check_positive(draw)
        population_size = math.fsum(
            1.0 / (draw.pi_psu * draw.pi_hh_given_psu * draw.pi_person_given_hh)
        )
    if population_size <= 1:
        raise ValueError("target population size must exceed 1")
    w2 = pairwise_weight_matrix(draw)
    raw = w2.sum(axis=1) / (population_size - 1.0)
    return normalize(WeightVector("full_pairwise", raw, _full_mask(draw, mask)))


def stagewise_weights(
    draw: SampleDraw,
    mask=None,
    psu_pair_probs: dict | None = None,
    hh_pair_probs: dict | None = None,
    marginal_fallback: bool = True,
) -> WeightVector:
    """Per-stage second-order weights multiplied across the three stages.

    The last-stage factor is always the scaled inverse pair probability.
    For the two PPS stages, explicit within-stage joint probabilities can be
    supplied (``psu_pair_probs`` keyed by PSU id pairs, ``hh_pair_probs``
    keyed by (psu, (hh, hh'))); without them the stages are treated as
    independent samples and their factors collapse to the marginal stage
    weights, which reproduces the household pairwise weights exactly.
    """
    _check_positive(draw)
    n_stage3 = 1.0 / draw.pi_pair_given_hh / (draw.persons_per_hh - 1.0)

    if psu_pair_probs is None:
        if not marginal_fallback:
            raise ValueError("stage-1 joint probabilities missing and fallback disabled")
        stage1 = 1.0 / draw.pi_psu
    else:
        n_psu_pop = draw.n_psu_population
        stage1 = np.empty(len(draw))
        selected_psus = sorted(set(draw.psu_id.tolist()))
        for idx, k in enumerate(draw.psu_id):
            total = 0.0
            for k2 in selected_psus:
                if k2 == k:
                    continue
                key = (min(k, k2), max(k, k2))
                if key not in psu_pair_probs:
                    raise ValueError(f"missing stage-1 joint probability for PSUs {key}")
                total += 1.0 / psu_pair_probs[key]
            stage1[idx] = total / (n_psu_pop - 1.0)

    if hh_pair_probs is None:
        if not marginal_fallback:
            raise ValueError("stage-2 joint probabilities missing and fallback disabled")
        stage2 = 1.0 / draw.pi_hh_given_psu
    else:
        n_hh_pop = draw.hh_per_psu_population
        stage2 = np.empty(len(draw))
        for idx, (k, j) in enumerate(zip(draw.psu_id, draw.hh_id)):
            hhs_in_psu = sorted(set(draw.hh_id[draw.psu_id == k].tolist()))
            total = 0.0
            for j2 in hhs_in_psu:
                if j2 == j:
                    continue
                key = (k, (min(j, j2), max(j, j2)))
                if key not in hh_pair_probs:
                    raise ValueError(f"missing stage-2 joint probability for {key}")
                total += 1.0 / hh_pair_probs[key]
            stage2[idx] = total / (n_hh_pop - 1.0)

    raw = stage1 * stage2 * n_stage3
    return normalize(WeightVector("stagewise", raw, _full_mask(draw, mask)))


def compute_weights(scheme: str, draw: SampleDraw, mask=None, **kwargs) -> WeightVector:
    """Dispatch by scheme tag; extra keyword arguments go to the scheme."""
    builders = {
        "equal": equal_weights,
        "marginal": marginal_weights,
        "full_pairwise": full_pairwise_weights,
        "hh_pairwise": hh_pairwise_weights,
        "stagewise": stagewise_weights,
    }
    if scheme not in builders:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return builders[scheme](draw, mask=mask, **kwargs)


def _check_positive(draw: SampleDraw) -> None:
    for name in ("pi_psu", "pi_hh_given_psu", "pi_person_given_hh", "pi_pair_given_hh"):
        if np.any(getattr(draw, name) <= 0):
            raise ValueError(f"{name} contains non-positive probabilities")
