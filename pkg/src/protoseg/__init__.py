"""Pseudo-mask generation for camouflaged object segmentation.

Coarse per-image clustering, dataset-level prototype mining with
histogram filtering, and multi-view KNN retrieval over the mined
libraries.
"""

from .coarse_mask import CoarseMaskParams, assign_foreground, cluster_two, coarse_mask
from .errors import (
    ConvergenceError,
    DegenerateMaskError,
    DegenerateVectorError,
    EmptyLibraryError,
    FormatError,
    ProtosegError,
    ShapeError,
)
from .metrics import EvalReport, evaluate_dataset, f_measure, iou, mae
from .mining import (
    ImageProtoRecord,
    LibraryBuildReport,
    build_libraries,
    cross_category_prototypes,
    global_features,
    mine_image,
    split_sets,
)
from .numerics import (
    affinity_matrix,
    cosine,
    histogram_peak,
    kmeans,
    normalized_laplacian,
    smallest_eigvecs,
)
from .retrieval import (
    RetrievalIndex,
    RetrievalParams,
    View,
    build_index,
    knn_vote,
    mvkr_mask,
    retrieve_mask,
    transform_fm,
    transform_mask,
    upsample_mask,
)
from .synth import CompareReport, SynthSpec, compare, generate_images, write_dataset
from .tensor_store import (
    FeatureMap,
    PrototypeLibrary,
    read_fmap,
    read_manifest,
    read_mask,
    read_plib,
    write_fmap,
    write_manifest,
    write_mask,
    write_plib,
)

__version__ = "0.1.0"
