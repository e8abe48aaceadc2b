"""Numerical checks of the design restrictions behind pairwise weighting.

Given exact (or Monte Carlo) joint inclusion tensors these functions compute
the finite-design constants whose boundedness the theory requires: the
largest inverse pairwise inclusion probability, the worst third-to-second
order probability ratio, the worst fourth-order factorization deviation, and
the sampling fraction.  Asymptotic statements are only meaningful along a
ladder of growing designs, so a helper tabulates the constants across sizes
and fits a decay slope instead of passing judgment at a single size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import pandas as pd
from scipy.integrate import quad

from .aldist import al_logpdf
from .enumeration import JointInclusionTensor


@dataclass
class ConditionReport:
    gamma: float  # sup of inverse pairwise inclusion probabilities
    pairwise_positive: bool  # every pair can be co-sampled
    c5: float  # max third-order / product-of-second-order ratio
    c4_dev: float  # N * max |fourth-order / product-of-pairs - 1|
    sampling_fraction: float
    n_units: int
    n_sample: float
    method: str
    c4_dev_cross_group: float | None = None
    uncertainty: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    passes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "gamma": self.gamma,
            "pairwise_positive": self.pairwise_positive,
            "c5": self.c5,
            "c4_dev": self.c4_dev,
            "sampling_fraction": self.sampling_fraction,
            "n_units": self.n_units,
            "n_sample": self.n_sample,
            "method": self.method,
        }
        if self.c4_dev_cross_group is not None:
            out["c4_dev_cross_group"] = self.c4_dev_cross_group
        if self.uncertainty:
            out["uncertainty"] = self.uncertainty
        if self.thresholds:
            out["thresholds"] = self.thresholds
            out["passes"] = self.passes
        return out


def check_conditions(
    tensor: JointInclusionTensor,
    n_sample: float | None = None,
    groups=None,
    thresholds: dict | None = None,
) -> ConditionReport:
    """Compute the design-condition constants by exhaustive scan of the tensor.

    A zero pairwise probability is reported as a violation (``gamma`` becomes
    infinite), not raised: excluding such designs is exactly what the bound
    is for.  ``groups`` optionally labels units (for example by household) so
    the fourth-order deviation can also be reported restricted to quadruples
    whose pairs straddle two groups.
    """
    if tensor.max_order < 4:
        raise ValueError("tensor must be populated to order 4")
    n_units = tensor.n_units
    if n_sample is None:
        n_sample = tensor.expected_sample_size
    if n_sample is None:
        raise ValueError("n_sample not provided and not recorded on the tensor")

    min_pair = math.inf
    for i, j in combinations(range(n_units), 2):
        min_pair = min(min_pair, tensor.pi((i, j)))
    pairwise_positive = min_pair > 0
    gamma = 1.0 / min_pair if pairwise_positive else math.inf

    c5 = 0.0
    for i in range(n_units):
        for k, ell in combinations(range(n_units), 2):
            if i in (k, ell):
                continue
            denom = tensor.pi((i, k)) * tensor.pi((i, ell))
            if denom == 0:
                c5 = math.inf
                continue
            c5 = max(c5, tensor.pi((i, k, ell)) / denom)

    groups = None if groups is None else np.asarray(groups)
    c4_dev = 0.0
    c4_cross = 0.0 if groups is not None else None
    for i in range(n_units):
        for j in range(n_units):
            if i == j:
                continue
            for k in range(n_units):
                if k == i:
                    continue
                for ell in range(n_units):
                    if ell == j:
                        continue
                    denom = tensor.pi((i, k)) * tensor.pi((j, ell))
                    if denom == 0:
                        c4_dev = math.inf
                        continue
                    dev = abs(tensor.pi((i, k, j, ell)) / denom - 1.0)
                    c4_dev = max(c4_dev, dev)
                    if groups is not None:
                        if groups[i] == groups[k] and groups[j] == groups[ell] and groups[i] != groups[j]:
                            c4_cross = max(c4_cross, dev)
    c4_dev *= n_units
    if c4_cross is not None:
        c4_cross *= n_units

    f = n_sample / n_units
    uncertainty = {}
    if tensor.method == "monte-carlo" and pairwise_positive and tensor.n_reps:
        se = math.sqrt(min_pair * (1.0 - min_pair) / tensor.n_reps)
        hi = 1.0 / max(min_pair - 4.0 * se, 1e-300)
        lo = 1.0 / (min_pair + 4.0 * se)
        uncertainty["gamma_band_4se"] = [lo, hi]

    report = ConditionReport(
        gamma=gamma,
        pairwise_positive=pairwise_positive,
        c5=c5,
        c4_dev=c4_dev,
        c4_dev_cross_group=c4_cross,
        sampling_fraction=f,
        n_units=n_units,
        n_sample=float(n_sample),
        method=tensor.method,
        uncertainty=uncertainty,
    )
    if thresholds:
        report.thresholds = dict(thresholds)
        checks = {
            "gamma": gamma <= thresholds.get("gamma", math.inf),
            "pairwise_positive": pairwise_positive,
            "c5": c5 <= thresholds.get("c5", math.inf),
            "c4_dev": c4_dev <= thresholds.get("c4_dev", math.inf),
        }
        report.passes = checks
    return report


def weighted_empirical(f_values, included, tensor: JointInclusionTensor) -> float:
    """Pair-weighted empirical mean of per-unit values over a realized sample.

    (1/N) sum_i (1/(N-1)) sum_{k != i} delta_i delta_k / pi_ik * f(i), which
    is design-unbiased for the plain population mean of f.
    """
    f_values = np.asarray(f_values, dtype=float)
    n_units = tensor.n_units
    if len(f_values) != n_units:
        raise ValueError("f_values must cover every population unit")
    included = sorted(int(i) for i in included)
    total = 0.0
    for i in included:
        inner = 0.0
        for k in included:
            if k == i:
                continue
            pi_ik = tensor.pi((i, k))
            if pi_ik == 0:
                raise ValueError(f"realized pair ({i}, {k}) has zero recorded probability")
            inner += 1.0 / pi_ik
        total += inner / (n_units - 1.0) * f_values[i]
    return total / n_units


def al_hellinger_sq(mu1, tau1, q1, mu2, tau2, q2, tol: float = 1e-9) -> float:
    """Squared Hellinger distance between two asymmetric Laplace densities.

    Adaptive quadrature of (sqrt(p1) - sqrt(p2))^2; no closed form assumed.
    """

    def integrand(t):
        return (
            np.exp(0.5 * al_logpdf(t, mu1, tau1, q1)) - np.exp(0.5 * al_logpdf(t, mu2, tau2, q2))
        ) ** 2

    lo = min(mu1 - 60.0 / tau1, mu2 - 60.0 / tau2)
    hi = max(mu1 + 60.0 / tau1, mu2 + 60.0 / tau2)
    kinks = sorted({mu1, mu2})
    value, _ = quad(integrand, lo, hi, points=kinks, epsabs=tol, limit=200)
    return float(value)


def pseudo_hellinger(d2_values, included, tensor: JointInclusionTensor, tol: float = 1e-6) -> float:
    """Pair-weighted average Hellinger distance from per-unit squared terms."""
    total = weighted_empirical(d2_values, included, tensor)
    if total < -tol:
        raise ValueError(f"weighted squared distance is negative beyond tolerance: {total}")
    return math.sqrt(max(total, 0.0))


def condition_ladder(entries) -> pd.DataFrame:
    """Tabulate condition constants across a ladder of design sizes.

    ``entries`` holds (tensor, n_sample, groups-or-None) triples.  Returns a
    frame with one row per design, ordered by population size.
    """
    rows = []
    for tensor, n_sample, groups in entries:
        rep = check_conditions(tensor, n_sample, groups=groups)
        rows.append(
            {
                "N": rep.n_units,
                "gamma": rep.gamma,
                "c5": rep.c5,
                "c4_dev": rep.c4_dev,
                "f": rep.sampling_fraction,
            }
        )
    return pd.DataFrame(rows).sort_values("N").reset_index(drop=True)


def fit_decay_slope(ladder: pd.DataFrame, column: str = "c4_dev") -> float:
    """Least-squares slope of log(column) on log(N); NaN if nothing positive."""
    frame = ladder[(ladder[column] > 0) & np.isfinite(ladder[column])]
    if len(frame) < 2:
        return float("nan")
    slope = np.polyfit(np.log(frame["N"]), np.log(frame[column]), 1)[0]
    return float(slope)
