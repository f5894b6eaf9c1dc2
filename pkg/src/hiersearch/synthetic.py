"""Gaussian-mixture benchmark data with a planted two-level hierarchy.

Group centers are drawn wide apart, class means cluster around their group
center, and samples scatter isotropically around class means, so sibling
classes overlap while groups stay separated. Recovering the planted grouping
is what the hierarchy builder is verified against.

Generation is a pure function of the config; the generator is numpy's
seeded PCG64, so identical configs reproduce identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ValidationError
from .hierarchy import HierarchyTree
from .store import EmbeddingSet


@dataclass
class SynthConfig:
    seed: int
    dim: int = 16
    groups: int = 4
    classes_per_group: int = 5
    samples_per_class: int = 300
    within_group_mean_spread: float = 0.3
    between_group_mean_spread: float = 6.0
    class_std: float = 1.0
    query_noise_std: float = 0.0
    database_per_class: int | None = None   # defaults to samples_per_class
    queries_per_class: int | None = None    # defaults to samples_per_class // 10

    def validate(self) -> None:
        if self.groups < 1 or self.classes_per_group < 1:
            raise ConfigError("groups and classes_per_group must be positive")
        if self.groups * self.classes_per_group < 2:
            raise ConfigError("need at least 2 classes in total")
        if not self.between_group_mean_spread > self.within_group_mean_spread > 0:
            raise ConfigError(
                "spreads must satisfy between > within > 0, got "
                f"{self.between_group_mean_spread} and {self.within_group_mean_spread}"
            )
        if self.class_std <= 0:
            raise ConfigError(f"class_std must be positive, got {self.class_std}")
        if self.query_noise_std < 0:
            raise ConfigError("query_noise_std must be non-negative")
        if self.dim < 1 or self.samples_per_class < 1:
            raise ConfigError("dim and samples_per_class must be positive")
        for name in ("database_per_class", "queries_per_class"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be positive when given")


@dataclass
class PlantedTruth:
    group_of_class: dict[int, int]
    intended_partition: list[list[int]]

    def to_json(self) -> str:
        doc = {
            "group_of_class": {str(k): v for k, v in sorted(self.group_of_class.items())},
            "intended_partition": self.intended_partition,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PlantedTruth":
        doc = json.loads(text)
        return cls(
            group_of_class={int(k): int(v) for k, v in doc["group_of_class"].items()},
            intended_partition=[[int(m) for m in block]
                                for block in doc["intended_partition"]],
        )


def generate(config: SynthConfig):
    """Draw (train, database, queries, truth) deterministically from the seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    d = config.dim
    total_classes = config.groups * config.classes_per_group
    db_per_class = config.database_per_class or config.samples_per_class
    q_per_class = config.queries_per_class or max(1, config.samples_per_class // 10)

    centers = rng.normal(0.0, config.between_group_mean_spread, (config.groups, d))
    class_means = np.concatenate(
        [
            rng.normal(centers[g], config.within_group_mean_spread,
                       (config.classes_per_group, d))
            for g in range(config.groups)
        ]
    )
    group_of_class = {
        label: label // config.classes_per_group for label in range(total_classes)
    }

    def draw_set(per_class: int, noise_std: float = 0.0) -> EmbeddingSet:
        blocks = []
        labels = []
        for label in range(total_classes):
            x = rng.normal(class_means[label], config.class_std, (per_class, d))
            if noise_std > 0.0:
                x = x + rng.normal(0.0, noise_std, (per_class, d))
            blocks.append(x)
            labels.extend([label] * per_class)
        vectors = np.concatenate(blocks).astype(np.float32)
        n = len(vectors)
        return EmbeddingSet(
            dim=d,
            ids=np.arange(n, dtype=np.int64),
            labels=np.array(labels, dtype=np.int64),
            vectors=vectors,
        )

    train = draw_set(config.samples_per_class)
    database = draw_set(db_per_class)
    queries = draw_set(q_per_class, noise_std=config.query_noise_std)
    truth = PlantedTruth(
        group_of_class=group_of_class,
        intended_partition=[
            [label for label in range(total_classes)
             if group_of_class[label] == g]
            for g in range(config.groups)
        ],
    )
    return train, database, queries, truth


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected agreement between two partitions given as label arrays.

    Follows the pair-counting formulation; when the correction denominator is
    zero (both partitions trivial) the partitions are identical and the score
    is 1.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("partitions must be equal-length 1-D label arrays")
    n = a.size
    if n == 0:
        raise ValidationError("cannot compare empty partitions")
    _, a_codes = np.unique(a, return_inverse=True)
    _, b_codes = np.unique(b, return_inverse=True)
    contingency = np.zeros((a_codes.max() + 1, b_codes.max() + 1), dtype=np.int64)
    np.add.at(contingency, (a_codes, b_codes), 1)

    def comb2(x):
        return x * (x - 1) // 2

    sum_cells = int(comb2(contingency).sum())
    sum_rows = int(comb2(contingency.sum(axis=1)).sum())
    sum_cols = int(comb2(contingency.sum(axis=0)).sum())
    total_pairs = comb2(n)
    expected = sum_rows * sum_cols / total_pairs if total_pairs else 0.0
    max_index = (sum_rows + sum_cols) / 2.0
    if max_index == expected:
        return 1.0
    return (sum_cells - expected) / (max_index - expected)


def partition_agreement(tree: HierarchyTree, truth: PlantedTruth) -> float:
    """ARI between the tree's top-level blocks and the planted grouping.

    The tree partition takes each child of the root as one block (the whole
    class set when the root is a leaf). Leaf labels must match the truth's
    class set exactly.
    """
    tree_labels = set(tree.leaf_of_label)
    truth_labels = set(truth.group_of_class)
    if tree_labels != truth_labels:
        raise ValidationError(
            "tree leaves and planted truth cover different class sets"
        )
    labels = sorted(tree_labels)
    root = tree.nodes[tree.root]
    block_of_label: dict[int, int] = {}
    if not root.children:
        block_of_label[next(iter(root.members))] = 0
    else:
        for block, child in enumerate(root.children):
            for label in tree.nodes[child].members:
                block_of_label[label] = block
    predicted = np.array([block_of_label[label] for label in labels])
    planted = np.array([truth.group_of_class[label] for label in labels])
    return float(adjusted_rand_index(predicted, planted))


def write_dataset(
    out_dir: str | Path,
    train: EmbeddingSet,
    database: EmbeddingSet,
    queries: EmbeddingSet,
    truth: PlantedTruth,
    format: str = "binary",
) -> list[Path]:
    """Write the three sets plus truth.json into a directory; returns paths."""
    from .store import save_embeddings

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = "hfv" if format == "binary" else "csv"
    paths = []
    for name, data in (("train", train), ("database", database),
                       ("queries", queries)):
        path = out_dir / f"{name}.{ext}"
        save_embeddings(data, path, format=format)
        paths.append(path)
    truth_path = out_dir / "truth.json"
    truth_path.write_text(truth.to_json() + "\n")
    paths.append(truth_path)
    return paths
