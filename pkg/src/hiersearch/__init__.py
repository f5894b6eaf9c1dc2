"""Hierarchy-aware embedding retrieval.

Ranks database vectors against a query by cosine distance plus a weighted
hierarchy distance, where the hierarchy comes from merging classes whose
fitted Gaussians overlap.
"""

from .errors import (
    ConfigError,
    DimensionError,
    EmptyResultError,
    FormatError,
    HiersearchError,
    NumericalError,
    ValidationError,
)
from .evaluation import (
    EvalReport,
    average_precision_at_k,
    map_at_k,
    map_curve,
)
from .gaussians import (
    ClassGaussian,
    bhattacharyya_coefficient,
    bhattacharyya_distance,
    fit_gaussian,
    mahalanobis,
)
from .hierarchy import (
    HierarchyNode,
    HierarchyTree,
    build_hierarchy,
    export_tree,
    hierarchical_distance,
    lca,
)
from .pca import PcaModel, fit_pca, select_components, transform, transform_set
from .pipeline import FittedModel, fit_model
from .retrieval import (
    RankedResult,
    RetrievalIndex,
    assign_leaf,
    build_index,
    cosine_distance,
    query,
)
from .store import (
    EmbeddingSet,
    FeatureRecord,
    load_embeddings,
    save_embeddings,
    split_by_label,
)
from .synthetic import (
    PlantedTruth,
    SynthConfig,
    adjusted_rand_index,
    generate,
    partition_agreement,
)

__version__ = "0.1.0"
