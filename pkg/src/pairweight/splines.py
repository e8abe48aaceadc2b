"""Penalized B-spline basis with a difference-operator precision matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline


@dataclass(frozen=True)
class SplineSpec:
    """Basis with ``n_knots + degree`` columns and a penalty of rank ``n_knots``.

    Interior knots sit at equally spaced quantiles of the fitted x values;
    ``x_range`` fixes the boundary knots (defaulting to the data range) so
    that fits on subsamples share a common support with the evaluation grid.
    """

    n_knots: int = 5
    degree: int = 2
    x_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.n_knots < 2:
            raise ValueError("need at least 2 knots")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.x_range is not None and not self.x_range[0] < self.x_range[1]:
            raise ValueError("x_range must be an increasing pair")

    @property
    def n_basis(self) -> int:
        return self.n_knots + self.degree


@dataclass
class BasisBundle:
    basis: np.ndarray  # n x (n_knots + degree)
    penalty: np.ndarray  # symmetric PSD, rank n_knots
    ridge: float  # added to the prior precision inside the sampler only
    knots: np.ndarray  # full clamped knot vector
    degree: int
    x_range: tuple[float, float]
    penalty_rank: int

    @property
    def n_basis(self) -> int:
        return self.basis.shape[1]

    def design(self, x) -> np.ndarray:
        """Evaluate the basis at new points; extrapolation is rejected."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.x_range
        if np.any(x < lo) or np.any(x > hi):
            raise ValueError(f"x outside the basis support [{lo}, {hi}]")
        return BSpline.design_matrix(x, self.knots, self.degree).toarray()


def difference_penalty(n_basis: int, order: int) -> np.ndarray:
    """D'D for the discretized ``order``-th difference operator on the coefficients."""
    d = np.diff(np.eye(n_basis), n=order, axis=0)
    return d.T @ d


def build_basis(x, spec: SplineSpec) -> BasisBundle:
    """Construct the basis and penalty for observed x values.

    The penalty annihilates polynomial trends up to ``degree - 1`` and leaves
    the prior on the coefficients improper; the bundled ridge is the
    regularizer the sampler adds to keep its prior precision positive
    definite without touching the reported penalty.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be one-dimensional")
    if len(x) < spec.n_basis:
        raise ValueError(f"need at least {spec.n_basis} observations for this basis")
    if np.ptp(x) == 0:
        raise ValueError("degenerate x: all values identical")
    lo, hi = spec.x_range if spec.x_range is not None else (float(x.min()), float(x.max()))
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("observed x falls outside the declared x_range")

    levels = np.arange(1, spec.n_knots) / spec.n_knots
    interior = np.quantile(x, levels)
    knots = np.r_[np.full(spec.degree + 1, lo), interior, np.full(spec.degree + 1, hi)]
    if np.any(np.diff(knots[spec.degree : len(knots) - spec.degree]) <= 0):
        raise ValueError("degenerate x: quantile knots are not strictly increasing")

    basis = BSpline.design_matrix(x, knots, spec.degree).toarray()
    penalty = difference_penalty(spec.n_basis, spec.degree)
    ridge = 1e-8 * np.trace(penalty) / spec.n_basis
    return BasisBundle(
        basis=basis,
        penalty=penalty,
        ridge=float(ridge),
        knots=knots,
        degree=spec.degree,
        x_range=(lo, hi),
        penalty_rank=spec.n_knots,
    )
