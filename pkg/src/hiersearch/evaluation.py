"""MAP@k evaluation of an index against a labeled query set.

AP@k for one query is sum over the top-k positions of (relevant at i) *
(precision at i), normalized by min(k, R) where R counts the relevant
records in the database, so perfect retrieval scores 1 even when R < k.
MAP@k is the mean over all evaluable queries. Relevance means exact label
match between the query and the database record.

Queries with no relevant database record are excluded with a logged count.
A query whose own vector exists in the database is not excluded by default;
pass exclude_self=True to drop the identical-id record from its own results.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyResultError, ValidationError
from .retrieval import RetrievalIndex, query
from .store import EmbeddingSet

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    ks: list[int]
    map_at_k: list[float]
    per_query: dict[int, list[float]]      # query id -> AP at each k in ks
    config_echo: dict = field(default_factory=dict)


def average_precision_at_k(
    retrieved_labels,
    query_label: int,
    k: int,
    total_relevant: int,
) -> float:
    """AP@k of one ranked label list against a single relevant label."""
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    if total_relevant < 1:
        raise ValidationError(
            "a query with no relevant database records cannot be scored"
        )
    hits = 0
    total = 0.0
    for i, label in enumerate(retrieved_labels[:k], start=1):
        if label == query_label:
            hits += 1
            total += hits / i
    return total / min(k, total_relevant)


def _iter_queries(queries: EmbeddingSet):
    order = np.argsort(queries.ids, kind="stable")
    for row in order:
        yield int(queries.ids[row]), int(queries.labels[row]), queries.vectors[row]


def map_curve(
    index: RetrievalIndex,
    queries: EmbeddingSet,
    database_labels: dict[int, int],
    ks,
    alpha: float,
    exclude_self: bool = False,
    config_echo: dict | None = None,
) -> EvalReport:
    """Evaluate MAP at every k in ``ks`` with one retrieval pass per query.

    ``ks`` must be non-empty and strictly increasing; each query is retrieved
    once at max(ks) and the smaller cutoffs reuse prefixes of that ranking,
    which by construction equals evaluating each k separately. Queries are
    processed in ascending id order so the report is deterministic.
    """
    ks = [int(k) for k in ks]
    if not ks or any(k < 1 for k in ks):
        raise ConfigError("ks must be a non-empty list of positive integers")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ConfigError("ks must be strictly increasing")
    relevant_counts = Counter(database_labels.values())
    kmax = ks[-1]

    per_query: dict[int, list[float]] = {}
    excluded = 0
    for qid, qlabel, qvec in _iter_queries(queries):
        if qlabel < 0:
            raise ValidationError(f"query record {qid} has no label")
        self_hit = (
            exclude_self
            and qid in database_labels
            and database_labels[qid] == qlabel
        )
        total_relevant = relevant_counts.get(qlabel, 0) - (1 if self_hit else 0)
        if total_relevant < 1:
            excluded += 1
            continue
        fetch = kmax + 1 if exclude_self else kmax
        results = query(index, qvec, fetch, alpha)
        if exclude_self:
            results = [r for r in results if r.record_id != qid][:kmax]
        labels = [database_labels[r.record_id] for r in results]
        per_query[qid] = _ap_prefixes(labels, qlabel, ks, total_relevant)

    if excluded:
        logger.warning("excluded %d queries with no relevant database record",
                       excluded)
    if not per_query:
        raise EmptyResultError(
            f"no evaluable queries: all {excluded} lacked relevant records"
        )
    map_values = [
        float(np.mean([aps[i] for aps in per_query.values()]))
        for i in range(len(ks))
    ]
    return EvalReport(
        ks=ks,
        map_at_k=map_values,
        per_query=per_query,
        config_echo=dict(config_echo or {}),
    )


def _ap_prefixes(labels, query_label, ks, total_relevant):
    """AP at each cutoff in ks from one ranking, sharing the running sums."""
    targets = set(ks)
    out = []
    hits = 0
    running = 0.0
    horizon = ks[-1]
    for i in range(1, horizon + 1):
        if i <= len(labels) and labels[i - 1] == query_label:
            hits += 1
            running += hits / i
        if i in targets:
            out.append(running / min(i, total_relevant))
    return out


def map_at_k(
    index: RetrievalIndex,
    queries: EmbeddingSet,
    database_labels: dict[int, int],
    k: int,
    alpha: float,
    exclude_self: bool = False,
) -> float:
    """MAP at a single cutoff; mean of AP@k over all evaluable queries."""
    report = map_curve(
        index, queries, database_labels, [k], alpha, exclude_self=exclude_self
    )
    return report.map_at_k[0]


def write_map_csv(report: EvalReport, path: str | Path) -> None:
    lines = ["k,map"]
    for k, value in zip(report.ks, report.map_at_k):
        lines.append(f"{k},{value:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_per_query_csv(report: EvalReport, path: str | Path) -> None:
    lines = ["query_id,k,ap"]
    for qid in sorted(report.per_query):
        for k, ap in zip(report.ks, report.per_query[qid]):
            lines.append(f"{qid},{k},{ap:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")
