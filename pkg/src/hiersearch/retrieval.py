"""Exhaustive retrieval index combining cosine and hierarchy distances.

Database vectors are reduced, assigned to the hierarchy leaf with the
smallest Mahalanobis distance, and scanned linearly at query time. A query
is ranked by

    D = cosine_distance(q, x) + alpha * hierarchical_distance(leaf_q, leaf_x)

in ascending order, ties broken by database insertion order. The scan is
exact; no approximate-nearest-neighbor structure is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError
from .gaussians import ClassGaussian, mahalanobis
from .hierarchy import HierarchyTree, hierarchical_distance
from .parallel import map_workers
from .pca import PcaModel, transform, transform_set
from .store import EmbeddingSet


@dataclass
class RankedResult:
    """One retrieval hit with its combined distance and both parts."""

    record_id: int
    combined: float
    cosine_part: float
    hierarchical_part: float
    leaf: int


@dataclass
class RetrievalIndex:
    """Immutable query structure over a reduced database.

    ``leaf_assignment`` maps record ids to leaf node ids; ``assignment_rows``
    carries the same information aligned with database row order for
    vectorized scoring. ``norms`` caches the L2 norm of every reduced vector.
    """

    pca: PcaModel
    tree: HierarchyTree
    leaf_gaussians: dict[int, ClassGaussian]
    database: EmbeddingSet            # reduced-space float32 vectors
    leaf_assignment: dict[int, int]
    norms: np.ndarray                 # (n,) float64
    assignment_rows: np.ndarray       # (n,) int64


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(angle) in [0, 2]; rejects zero vectors as degenerate."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cosine distance is undefined for a zero vector")
    return 1.0 - float(a @ b) / (na * nb)


def _sorted_leaf_ids(leaf_gaussians: dict[int, ClassGaussian]) -> list[int]:
    if not leaf_gaussians:
        raise ValidationError("at least one leaf Gaussian is required")
    return sorted(leaf_gaussians)


def assign_leaf(leaf_gaussians: dict[int, ClassGaussian], x: np.ndarray) -> int:
    """Leaf with the smallest Mahalanobis distance; ties go to the lowest id."""
    ids = _sorted_leaf_ids(leaf_gaussians)
    best_id = ids[0]
    best = mahalanobis(leaf_gaussians[best_id], x)
    for nid in ids[1:]:
        d = mahalanobis(leaf_gaussians[nid], x)
        if d < best:
            best = d
            best_id = nid
    return best_id


def assign_leaves(
    leaf_gaussians: dict[int, ClassGaussian],
    x: np.ndarray,
    threads: int = 1,
) -> np.ndarray:
    """Row-wise leaf assignment for a batch, identical to assign_leaf per row."""
    ids = _sorted_leaf_ids(leaf_gaussians)
    x = np.asarray(x, dtype=np.float64)
    rows = map_workers(
        lambda nid: np.asarray(mahalanobis(leaf_gaussians[nid], x)), ids, threads
    )
    distances = np.vstack(rows)                      # (K, n)
    winners = np.argmin(distances, axis=0)           # first minimum wins
    return np.asarray(ids, dtype=np.int64)[winners]


def build_index(
    pca: PcaModel,
    tree: HierarchyTree,
    leaf_gaussians: dict[int, ClassGaussian],
    database: EmbeddingSet,
    threads: int = 1,
) -> RetrievalIndex:
    """Reduce, leaf-assign and norm-cache a raw database, preserving order."""
    if database.dim != pca.original_dim:
        raise DimensionError(
            f"database dimension {database.dim} does not match "
            f"model dimension {pca.original_dim}"
        )
    reduced = transform_set(pca, database)
    vectors = reduced.vectors
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    zero_rows = np.nonzero(norms == 0.0)[0]
    if len(database) and zero_rows.size:
        bad_ids = [int(database.ids[i]) for i in zero_rows]
        raise ValidationError(
            f"records {bad_ids} reduce to the zero vector and cannot be indexed"
        )
    if len(database):
        assignment_rows = assign_leaves(leaf_gaussians, vectors, threads)
    else:
        assignment_rows = np.empty(0, dtype=np.int64)
    leaf_assignment = {
        int(rid): int(leaf) for rid, leaf in zip(database.ids, assignment_rows)
    }
    return RetrievalIndex(
        pca=pca,
        tree=tree,
        leaf_gaussians=leaf_gaussians,
        database=reduced,
        leaf_assignment=leaf_assignment,
        norms=norms,
        assignment_rows=assignment_rows,
    )


def query(
    index: RetrievalIndex,
    q: np.ndarray,
    k: int,
    alpha: float,
) -> list[RankedResult]:
    """Rank the database against a raw query vector.

    Returns the min(k, N) best records sorted by ascending combined distance;
    exact ties keep database order. With alpha = 0 the ranking reduces to pure
    cosine ordering.
    """
    if alpha < 0:
        raise ConfigError(f"alpha must be non-negative, got {alpha}")
    if k < 0:
        raise ConfigError(f"k must be non-negative, got {k}")
    reduced_q = transform(index.pca, np.asarray(q, dtype=np.float64))
    q_norm = float(np.linalg.norm(reduced_q))
    if q_norm == 0.0:
        raise ValidationError("query reduces to the zero vector")
    query_leaf = assign_leaf(index.leaf_gaussians, reduced_q)

    n = len(index.database)
    if n == 0 or k == 0:
        return []

    vectors = index.database.vectors
    cosine = 1.0 - (vectors @ reduced_q) / (index.norms * q_norm)

    leaf_ids = _sorted_leaf_ids(index.leaf_gaussians)
    lookup = np.zeros(max(leaf_ids) + 1, dtype=np.float64)
    for nid in leaf_ids:
        lookup[nid] = hierarchical_distance(index.tree, query_leaf, nid)
    hier = lookup[index.assignment_rows]

    combined = cosine + alpha * hier
    order = np.argsort(combined, kind="stable")[: min(k, n)]
    ids = index.database.ids
    rows = index.assignment_rows
    return [
        RankedResult(
            record_id=int(ids[i]),
            combined=float(combined[i]),
            cosine_part=float(cosine[i]),
            hierarchical_part=float(hier[i]),
            leaf=int(rows[i]),
        )
        for i in order
    ]
