"""Two-sample comparison and structure learning with coupling optional Polya trees."""

from .coopt import CooptParams, PosteriorTable, coopt_log_marginal, coopt_posterior, coupling_statistic, fit
from .numerics import RandomStream
from .opt import GridBase, OptParams, ResourceLimitError, UniformBase, fit_opt, gof_statistic, opt_log_marginal
from .space import Dataset, Node, PartitionRule, SampleSpace
from .trees import CouplingTree, DistanceSample, distance_samples, hmap_tree, sample_posterior_tree, sample_prior_measure

__all__ = [
    "CooptParams",
    "CouplingTree",
    "Dataset",
    "DistanceSample",
    "GridBase",
    "Node",
    "OptParams",
    "PartitionRule",
    "PosteriorTable",
    "RandomStream",
    "ResourceLimitError",
    "SampleSpace",
    "UniformBase",
    "coopt_log_marginal",
    "coopt_posterior",
    "coupling_statistic",
    "distance_samples",
    "fit",
    "fit_opt",
    "gof_statistic",
    "hmap_tree",
    "opt_log_marginal",
    "sample_posterior_tree",
    "sample_prior_measure",
]
