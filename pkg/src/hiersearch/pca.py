"""Principal component reduction fitted on training vectors.

The component count is the smallest number of leading eigenvalues whose
cumulative mass reaches the requested fraction of total variance (default
0.95). The model is fitted once on training data and then applied unchanged
to database and query vectors, so no statistics leak across sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError
from .store import EmbeddingSet

def _clip_spectrum(w: np.ndarray) -> np.ndarray:
    """Zero out eigenvalues indistinguishable from rank-deficiency noise."""
    top = max(float(w[0]), 0.0) if w.size else 0.0
    return np.where(w < top * 1e-12, 0.0, w)


@dataclass
class PcaModel:
    """Affine projection onto the leading principal subspace.

    ``components`` has orthonormal rows sorted by descending eigenvalue; the
    sign of each row is fixed so its largest-magnitude entry is positive,
    which makes serialized models comparable across runs.
    """

    mean: np.ndarray          # (d,)
    components: np.ndarray    # (r, d)
    eigenvalues: np.ndarray   # (r,) non-increasing, non-negative
    explained_fraction: float
    original_dim: int
    reduced_dim: int


def select_components(eigenvalues: np.ndarray, variance_target: float) -> int:
    """Smallest r whose leading eigenvalue mass reaches the target fraction.

    ``eigenvalues`` must be non-increasing, non-negative, and not all zero.
    """
    if not 0.0 < variance_target <= 1.0:
        raise ConfigError(f"variance target must be in (0, 1], got {variance_target}")
    w = np.asarray(eigenvalues, dtype=np.float64)
    if w.size == 0:
        raise ValidationError("no eigenvalues given")
    if (w < 0).any():
        raise ValidationError("eigenvalues must be non-negative")
    if (np.diff(w) > 0).any():
        raise ValidationError("eigenvalues must be non-increasing")
    cum = np.cumsum(w)
    total = cum[-1]
    if total <= 0.0:
        raise ValidationError("all eigenvalues are zero")
    r = int(np.searchsorted(cum, variance_target * total)) + 1
    return min(r, w.size)


def fit_pca(train: EmbeddingSet, variance_target: float = 0.95) -> PcaModel:
    """Fit the reducer on the training set.

    The covariance (divisor n) eigendecomposition is computed through the
    smaller of the two Gram forms, so cost scales with min(n, d). Fitting is
    deterministic for identical input bytes.
    """
    if not 0.0 < variance_target <= 1.0:
        raise ConfigError(f"variance target must be in (0, 1], got {variance_target}")
    n = len(train)
    if n < 2:
        raise ValidationError(f"PCA needs at least 2 records, got {n}")
    d = train.dim
    x = train.vectors.astype(np.float64)
    mean = x.mean(axis=0)
    xc = x - mean

    if d <= n:
        cov = (xc.T @ xc) / n
        w, v = np.linalg.eigh(cov)            # ascending
        w = w[::-1]
        comps = v.T[::-1]                     # rows are eigenvectors
        w = _clip_spectrum(w)
    else:
        gram = (xc @ xc.T) / n
        w, u = np.linalg.eigh(gram)
        w = w[::-1]
        u = u[:, ::-1]
        w = _clip_spectrum(w)
        comps = np.zeros((n, d))
        for i in range(n):
            if w[i] > 0.0:
                row = xc.T @ u[:, i]
                comps[i] = row / np.linalg.norm(row)

    total = float(w.sum())
    if total <= 0.0:
        raise ValidationError("training data has zero variance; all records identical")

    # stable descending order: eigh output order preserved on exact ties
    order = np.argsort(-w, kind="stable")
    w = w[order]
    comps = comps[order]

    r = select_components(w, variance_target)
    comps = comps[:r].copy()
    w = w[:r].copy()
    for row in comps:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    explained = float(w.sum() / total)
    return PcaModel(
        mean=mean,
        components=comps,
        eigenvalues=w,
        explained_fraction=explained,
        original_dim=d,
        reduced_dim=r,
    )


def transform(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Project one vector (d,) or a batch (n, d) into the reduced space."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.original_dim:
        raise DimensionError(
            f"vector has dimension {x.shape[-1]}, model expects {model.original_dim}"
        )
    return (x - model.mean) @ model.components.T


def transform_set(model: PcaModel, s: EmbeddingSet) -> EmbeddingSet:
    """Reduce a whole set, keeping ids, labels and names; vectors become float32."""
    reduced = transform(model, s.vectors).astype(np.float32)
    return EmbeddingSet(
        dim=model.reduced_dim,
        ids=s.ids.copy(),
        labels=s.labels.copy(),
        vectors=reduced,
        label_names=dict(s.label_names) if s.label_names is not None else None,
    )
