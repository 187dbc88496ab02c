"""Bayesian de-duplication with microclustering priors and network data."""

from .analysis import (
    EvalReport,
    PosteriorSimilarity,
    binder_point_estimate,
    microclustering_diagnostic,
    network_stats,
    pairwise_metrics,
    population_size_summary,
    similarity_matrix,
)
from .data import (
    SCENARIOS,
    Dataset,
    ScenarioSpec,
    make_rldata_replica,
    synth_network,
    synth_profiles,
)
from .estimator import Deduplicator
from .model import (
    HyperParams,
    LatentState,
    LinkageState,
    Network,
    RecordTable,
    elicit_network_hypers,
)
from .priors import ABPSpec, EPPSpec, NBDPSpec, NBNBPSpec, UPSpec, prior_sample
from .sampler import ChainOutput, GibbsChain, SamplerConfig, run_chain

__version__ = "0.1.0"
