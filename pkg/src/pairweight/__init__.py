"""Pairwise sampling-weighted pseudo-posterior inference for survey designs.

The package covers the full desk-scale pipeline: generate a synthetic
multi-stage population, draw informative three-stage samples, build marginal
and pairwise weighting schemes, fit a sampling-weighted Bayesian quantile
spline, verify the design conditions behind the method, and replicate the
whole cycle into bias/MSE comparisons.
"""

from .aldist import al_cdf, al_logpdf, al_ppf, al_sample, check_loss, check_loss_grad
from .conditions import (
    ConditionReport,
    al_hellinger_sq,
    check_conditions,
    condition_ladder,
    fit_decay_slope,
    pseudo_hellinger,
    weighted_empirical,
)
from .designs import (
    DesignConfig,
    SampleDraw,
    brewer_inclusion_probabilities,
    brewer_pps_select,
    draw_sample,
    pair_selection_probabilities,
    select_pair,
)
from .enumeration import (
    EnumerationCapError,
    JointInclusionTensor,
    SampleSpace,
    SrsworSpec,
    StagedSpec,
    enumerate_design,
    enumerate_samples,
    monte_carlo_tensor,
    tensor_from_space,
)
from .estimator import QuantileSplineRegressor, fitted_curve
from .experiment import (
    ExperimentConfig,
    ScenarioReport,
    ScenarioSpec,
    eligible_roster_count,
    merge_reports,
    population_domain,
    reference_curve,
    run_experiment,
    sample_mask,
)
from .populations import (
    Person,
    Population,
    PopulationConfig,
    generate_population,
    lower_median,
)
from .posterior import ModelState, pseudo_log_posterior, pseudo_log_posterior_grad
from .sampler import (
    NonFiniteTargetError,
    PosteriorDraws,
    SamplerConfig,
    effective_sample_size,
    run_mcmc,
    split_rhat,
)
from .splines import BasisBundle, SplineSpec, build_basis, difference_penalty
from .weighting import (
    SCHEMES,
    WeightVector,
    compute_weights,
    equal_weights,
    full_pairwise_weights,
    hh_pairwise_weights,
    marginal_weights,
    normalize,
    pairwise_weight_matrix,
    stagewise_weights,
)

__version__ = "0.1.0"
