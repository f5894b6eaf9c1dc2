"""End-to-end fitting: PCA, leaf Gaussians and hierarchy from a training set."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError
from .gaussians import ClassGaussian, fit_gaussian
from .hierarchy import HierarchyTree, build_hierarchy
from .pca import PcaModel, fit_pca, transform_set
from .store import EmbeddingSet, split_by_label


@dataclass
class FittedModel:
    """Everything needed to index databases and answer queries."""

    pca: PcaModel
    tree: HierarchyTree
    leaf_gaussians: dict[int, ClassGaussian]
    label_names: dict[int, str] | None = None


def fit_model(
    train: EmbeddingSet,
    threshold: float,
    variance_target: float = 0.95,
    reg_epsilon: float = 1e-3,
    threads: int = 1,
) -> FittedModel:
    """Fit the full model on labeled raw training vectors.

    PCA is fitted once on the training set and reused unchanged for every
    later transform. Leaf Gaussians are fitted per class in reduced space;
    they are the same distributions the hierarchy builder uses at its first
    iteration, keyed by leaf node id.
    """
    if not train.is_fully_labeled():
        raise ValidationError("training set must be labeled")
    pca = fit_pca(train, variance_target)
    reduced = transform_set(pca, train)
    tree = build_hierarchy(reduced, threshold, reg_epsilon, threads)
    groups = split_by_label(reduced)
    leaf_gaussians = {
        tree.leaf_of_label[label]: fit_gaussian(
            vectors, reg_epsilon, class_id=tree.leaf_of_label[label]
        )
        for label, vectors in groups.items()
    }
    return FittedModel(
        pca=pca,
        tree=tree,
        leaf_gaussians=leaf_gaussians,
        label_names=dict(train.label_names) if train.label_names else None,
    )
