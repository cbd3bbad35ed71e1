"""Bayesian mean-shift change-point detection with Dirichlet-process segment classes."""

from .baselines import (calibrate_penalty, optimal_partition_mean, pelt_mean, pelt_result,
                        run_mcmc_nolabel)
from .bench import HarnessSettings, run_benchmark
from .estimators import (BayesianChangePointDetector, LabelFreeChangePointDetector,
                         PeltChangePointDetector)
from .metrics import MetricsReport, compute_metrics, match_changepoints
from .model import (ChainState, ClassParams, Hyperparams, LabelAssignment, Segmentation,
                    TimeSeries, ValidationError, log_class_marginal, log_joint_collapsed,
                    log_likelihood_given_params, segment_slices)
from .sampler import DetectionResult, SamplerSettings, run_chain, summarize
from .synth import GroundTruth, ScenarioConfig, gen_scenario_random, gen_scenario_repeating

__version__ = "0.1.0"

__all__ = [
    "BayesianChangePointDetector", "ChainState", "ClassParams", "DetectionResult",
    "GroundTruth", "HarnessSettings", "Hyperparams", "LabelAssignment",
    "LabelFreeChangePointDetector", "MetricsReport", "PeltChangePointDetector",
    "SamplerSettings", "ScenarioConfig", "Segmentation", "TimeSeries", "ValidationError",
    "calibrate_penalty", "compute_metrics", "gen_scenario_random", "gen_scenario_repeating",
    "log_class_marginal", "log_joint_collapsed", "log_likelihood_given_params",
    "match_changepoints", "optimal_partition_mean", "pelt_mean", "pelt_result",
    "run_benchmark", "run_chain", "run_mcmc_nolabel", "segment_slices", "summarize",
]
