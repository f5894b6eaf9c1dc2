"""Bottom-up construction of the class hierarchy from Gaussian overlap.

Each iteration fits a Gaussian to every current top-level node from the raw
training vectors of its member classes, computes all pairwise overlap
coefficients, and merges every connected component of the "overlap >= t"
graph into one new node. The loop stops when no pair overlaps or a single
node remains; survivors are attached to a synthetic root so leaf-to-leaf
distances stay defined.

Merging by connected component (rather than maximal clique) keeps the result
unique and deterministic. Merged-node Gaussians are always refitted from the
member vectors, never pooled from child moments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError
from .gaussians import ClassGaussian, bhattacharyya_coefficient, fit_gaussian
from .parallel import map_workers
from .store import EmbeddingSet, split_by_label


@dataclass
class HierarchyNode:
    node_id: int
    parent: int | None
    children: list[int]
    members: frozenset[int]   # original class labels covered
    level: int                # 0 for leaves, creation iteration for merged nodes
    height: int               # edges on the longest downward path to a leaf


@dataclass
class HierarchyTree:
    nodes: dict[int, HierarchyNode]
    root: int
    leaf_of_label: dict[int, int]
    threshold_used: float
    levels_built: int

    def is_leaf(self, node_id: int) -> bool:
        return not self.nodes[node_id].children


def build_hierarchy(
    train: EmbeddingSet,
    threshold: float,
    reg_epsilon: float = 1e-3,
    threads: int = 1,
) -> HierarchyTree:
    """Run the merge loop on a labeled (already reduced) training set.

    Leaf node ids are 0..K-1 in ascending label order; merged nodes get the
    next sequential ids, so identical inputs always produce identical trees.
    An iteration with any overlap strictly reduces the node count, bounding
    the loop at K-1 iterations.
    """
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"overlap threshold must be in (0, 1), got {threshold}")
    groups = split_by_label(train)
    if not groups:
        raise ValidationError("training set is empty")
    labels = sorted(groups)
    K = len(labels)

    nodes: dict[int, HierarchyNode] = {}
    leaf_of_label: dict[int, int] = {}
    for nid, label in enumerate(labels):
        nodes[nid] = HierarchyNode(nid, None, [], frozenset({label}), 0, 0)
        leaf_of_label[label] = nid

    active = list(range(K))
    next_id = K
    levels_built = 0
    fitted: dict[int, ClassGaussian] = {}  # members never change per node id

    for iteration in range(1, K):
        if len(active) == 1:
            break
        for nid in active:
            if nid not in fitted:
                vecs = np.concatenate(
                    [groups[label] for label in sorted(nodes[nid].members)]
                )
                fitted[nid] = fit_gaussian(vecs, reg_epsilon, class_id=nid)
        pairs = [
            (active[i], active[j])
            for i in range(len(active))
            for j in range(i + 1, len(active))
        ]
        coeffs = map_workers(
            lambda p: bhattacharyya_coefficient(fitted[p[0]], fitted[p[1]]),
            pairs,
            threads,
        )
        adjacency: dict[int, set[int]] = {nid: set() for nid in active}
        overlap_found = False
        for (a, b), bc in zip(pairs, coeffs):
            if bc >= threshold:
                adjacency[a].add(b)
                adjacency[b].add(a)
                overlap_found = True
        if not overlap_found:
            break

        seen: set[int] = set()
        new_active: list[int] = []
        for nid in active:  # ascending seed order fixes component numbering
            if nid in seen:
                continue
            component = _component_of(nid, adjacency)
            seen.update(component)
            if len(component) == 1:
                new_active.append(nid)
                continue
            merged_id = next_id
            next_id += 1
            members = frozenset().union(*(nodes[c].members for c in component))
            nodes[merged_id] = HierarchyNode(
                merged_id, None, sorted(component), members, iteration, 0
            )
            for child in component:
                nodes[child].parent = merged_id
            new_active.append(merged_id)
        levels_built = iteration
        active = sorted(new_active)

    if len(active) > 1:
        root_id = next_id
        nodes[root_id] = HierarchyNode(
            root_id,
            None,
            sorted(active),
            frozenset(labels),
            levels_built + 1,
            0,
        )
        for child in active:
            nodes[child].parent = root_id
    else:
        root_id = active[0]

    _assign_heights(nodes, root_id)
    return HierarchyTree(
        nodes=nodes,
        root=root_id,
        leaf_of_label=leaf_of_label,
        threshold_used=threshold,
        levels_built=levels_built,
    )


def _component_of(start: int, adjacency: dict[int, set[int]]) -> list[int]:
    component = {start}
    frontier = [start]
    while frontier:
        current = frontier.pop()
        for neighbor in adjacency[current]:
            if neighbor not in component:
                component.add(neighbor)
                frontier.append(neighbor)
    return sorted(component)


def _assign_heights(nodes: dict[int, HierarchyNode], root: int) -> None:
    # iterative post-order; height = 0 for leaves, 1 + max(children) otherwise
    stack = [(root, False)]
    while stack:
        nid, expanded = stack.pop()
        node = nodes[nid]
        if not node.children:
            node.height = 0
        elif expanded:
            node.height = 1 + max(nodes[c].height for c in node.children)
        else:
            stack.append((nid, True))
            stack.extend((c, False) for c in node.children)


def lca(tree: HierarchyTree, a: int, b: int) -> int:
    """Deepest node whose member set covers both arguments; lca(a, a) == a."""
    if a not in tree.nodes or b not in tree.nodes:
        raise ValidationError(f"unknown node id in lca({a}, {b})")
    ancestors = set()
    cursor: int | None = a
    while cursor is not None:
        ancestors.add(cursor)
        cursor = tree.nodes[cursor].parent
    cursor = b
    while cursor is not None and cursor not in ancestors:
        cursor = tree.nodes[cursor].parent
    if cursor is None:
        raise ValidationError(f"nodes {a} and {b} share no ancestor")
    return cursor


def hierarchical_distance(tree: HierarchyTree, a: int, b: int) -> float:
    """LCA height over root height, in [0, 1]; 0 for a single-class tree.

    Both arguments must be leaves. Distinct leaves merged nowhere below the
    root score 1; a leaf against itself scores 0. The result is an
    ultrametric on the leaves.
    """
    for nid in (a, b):
        if nid not in tree.nodes:
            raise ValidationError(f"unknown node id {nid}")
        if tree.nodes[nid].children:
            raise ValidationError(f"node {nid} is not a leaf")
    root_height = tree.nodes[tree.root].height
    if root_height == 0:
        return 0.0
    return tree.nodes[lca(tree, a, b)].height / root_height


def export_tree(
    tree: HierarchyTree,
    format: str = "json",
    label_names: dict[int, str] | None = None,
) -> str:
    """Serialize the tree as JSON (lossless) or DOT (for rendering)."""
    if format == "json":
        doc = {
            "threshold": tree.threshold_used,
            "levels_built": tree.levels_built,
            "nodes": [
                {
                    "id": node.node_id,
                    "parent": node.parent,
                    "children": list(node.children),
                    "members": sorted(node.members),
                    "height": node.height,
                    "level": node.level,
                }
                for _, node in sorted(tree.nodes.items())
            ],
        }
        return json.dumps(doc, indent=2)
    if format == "dot":
        lines = ["digraph hierarchy {"]
        for nid, node in sorted(tree.nodes.items()):
            if node.children:
                continue
            label = sorted(node.members)[0]
            name = (label_names or {}).get(label, f"class {label}")
            name = name.replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'  n{nid} [label="{name}"];')
        for nid, node in sorted(tree.nodes.items()):
            for child in node.children:
                lines.append(f"  n{nid} -> n{child};")
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown tree format {format!r}, expected 'json' or 'dot'")


def tree_from_json(text: str) -> HierarchyTree:
    """Rebuild a tree from its JSON export."""
    doc = json.loads(text)
    nodes: dict[int, HierarchyNode] = {}
    for entry in doc["nodes"]:
        nodes[int(entry["id"])] = HierarchyNode(
            node_id=int(entry["id"]),
            parent=None if entry["parent"] is None else int(entry["parent"]),
            children=[int(c) for c in entry["children"]],
            members=frozenset(int(m) for m in entry["members"]),
            level=int(entry["level"]),
            height=int(entry["height"]),
        )
    roots = [nid for nid, node in nodes.items() if node.parent is None]
    if len(roots) != 1:
        raise ValidationError(f"tree JSON has {len(roots)} parentless nodes")
    leaf_of_label = {
        next(iter(node.members)): nid
        for nid, node in nodes.items()
        if not node.children
    }
    return HierarchyTree(
        nodes=nodes,
        root=roots[0],
        leaf_of_label=leaf_of_label,
        threshold_used=float(doc["threshold"]),
        levels_built=int(doc["levels_built"]),
    )
