"""Explicable boundary trees: compact, explainable mimics of a classifier.

The pipeline in one breath: embed training data through the model you want
to explain, rank points by distance to their class's max-margin boundary,
stitch the closest ones into a tree whose every edge crosses a decision
boundary, then answer queries with greedy descent — the path is the
explanation, the final node's label is the prediction, and the final node's
cohort powers conformal novelty detection.
"""

from .ann_index import LshConfig, LshIndex, SegmentedIndex, build_index, build_segmented, query_knn
from .core_model import (
    BoundaryTree,
    EmbeddedPoint,
    LabeledDataset,
    TraversalPath,
    TreeNode,
    classify,
    euclidean_distance,
    traverse,
    validate_tree,
)
from .errors import (
    DegenerateDataError,
    DegenerateHyperplaneError,
    DimensionError,
    EbTreeError,
    EmptyInputError,
    EmptyQueueError,
    InsufficientSupportError,
    MissingPlaneError,
    NotIndexedError,
    ParseError,
)
from .explain import (
    BoundarySegment,
    Explanation,
    boundary_projection,
    explain_prediction,
    export_dot,
)
from .fileformats import (
    dumps_tree,
    load_embeddings,
    load_tree,
    save_embeddings,
    save_tree,
)
from .margin_ranking import (
    Hyperplane,
    MarginFitConfig,
    RankedPoint,
    distance_to_boundary,
    fit_one_vs_all,
    sort_by_boundary_distance,
)
from .novelty import (
    NodeCohort,
    NoveltyVerdict,
    detect_stream,
    local_distribution,
    nonconformity,
    p_value,
    route_training_points,
    savings_ratio,
)
from .stitching import (
    BuildConfig,
    build_basic_boundary_tree,
    build_eb_tree,
    error_rate,
    fidelity,
    prediction_view,
    second_closest_class,
)

__version__ = "0.1.0"
