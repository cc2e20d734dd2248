"""Latent-space network modeling of binary item response data.

Persons and items are embedded in one Euclidean space; pairwise response
networks drive the likelihood, MCMC fits the space, and helpers align,
summarize, extend, and export the result.
"""

from . import datasets
from .data import (
    MISSING,
    Encoding,
    NetworkAxis,
    PairNetwork,
    PairwiseCounts,
    ResponseDataError,
    ResponseMatrix,
    ResponseParseError,
    ResponseValidationError,
    encode_pair,
    load_response_csv,
    materialize_network,
    pairwise_counts,
    save_response_csv,
)
from .extend import (
    DegenerateItemError,
    ExtendError,
    FittedModel,
    NewDataCase,
    NewDataKind,
    NewItemsResult,
    NewPersonsResult,
    NewResponses,
    NewUnitDraws,
    SumScoreNoMatchError,
    UnsupportedCaseError,
    UpdatePolicy,
    approx_new_intercept,
    approx_new_position,
    load_new_responses,
    sample_new_items,
    sample_new_persons,
)
from .export import (
    EdgeList,
    SimilarityMatrix,
    export_artifacts,
    item_rest_distances,
    similarity_matrix,
)
from .model import (
    Linkage,
    LogPosterior,
    ModelConfig,
    ModelError,
    ParameterChange,
    ParameterState,
    PriorConfig,
    delta_log_posterior,
    derive_positions,
    edge_log_prob,
    initial_state,
    log_posterior,
    simulate_networks,
    simulate_responses,
)
from .postprocess import (
    AlignedDraws,
    PosteriorSummary,
    effective_sample_size,
    pair_distance_trace,
    principal_axes_rotate,
    procrustes_align,
    summarize,
)
from .sampler import (
    AdaptationConfig,
    McmcConfig,
    PosteriorDraws,
    ProposalScales,
    SamplerError,
    adapt_scales,
    fit,
    gibbs_update_variance,
    sweep,
)

__version__ = "0.1.0"
