"""Strategic responses to linear graph classifiers, and robust training against them."""

from .errors import (
    BundleFormatError,
    DegenerateClassifierError,
    InternalInvariantError,
    InvalidArgument,
    NodeImmobileError,
    StratGraphError,
    TrainingFailure,
)
from .graph import (
    DirectedGraph,
    EmbeddingWeights,
    LinearGraphClassifier,
    build_alpha_weights,
    build_sgc_weights,
    direct_edges_by_degree,
    embed,
    score_and_predict,
)
from .response import (
    DynamicsTrace,
    ResponseConfig,
    best_response_round,
    hitchhikers,
    project_generalized,
    project_positive_only,
    project_to_boundary,
    simulate_dynamics,
)
from .smooth import ForwardRecord, SmoothConfig, backward, soft_response_layer, stacked_forward

from .response import TRACE_FORMAT_VERSION
from .training import MODEL_FORMAT_VERSION
from .datasets import BUNDLE_FORMAT_VERSION

__version__ = "0.1.0"
