"""Training-free unlearning for two-layer GCNs.

Erases the influence of requested nodes, edges, or features from a trained
model by Fisher-diagonal parameter editing, then applies a one-step gradient
correction assembled from stored training snapshots. Includes a retrain
oracle, evaluation harness, synthetic-graph generators, and a CLI.
"""

from .backend import HAVE_COMPILED, default_backend
from .bundle_io import BundleManifest, BundleValidationError, load_bundle, save_bundle
from .errors import (
    InputError,
    NumericError,
    SnapshotMissingError,
    StateError,
    TrainingDivergenceError,
)
from .evalharness import (
    EvalResult,
    adversarial_experiment,
    gradient_diff,
    measure,
    micro_f1,
    retrain_oracle,
    rms_param_distance,
)
from .fisher import FisherDiag, fisher_diag, importance_ratios
from .gcn import (
    ForwardTrace,
    ModelState,
    TrainConfig,
    backward,
    forward,
    load_model,
    loss,
    per_node_gradient,
    predict,
    save_model,
    train,
)
from .graph import (
    GraphBundle,
    NodeSubsets,
    UnlearnRequest,
    affected_subgraph,
    build_propagation,
    k_hop_neighborhood,
    remove_request,
)
from .synth import generate_sbm, inject_adversarial_edges
from .unlearn import (
    EraseConfig,
    RectifyConfig,
    UnlearnReport,
    erase,
    erase_single_subset,
    mask_baseline,
    rectify_gradient,
    rectify_gradient_single_subset,
    rectify_update,
    select_threshold,
    theorem_audit,
    unlearn,
)

__version__ = "0.1.0"
