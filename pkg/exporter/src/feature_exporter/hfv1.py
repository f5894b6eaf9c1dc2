"""Standalone writer for the HFV1 embedding interchange format.

Layout: 4-byte magic ``HFV1``, u32 version (=1), u32 record count, u32
dimension, then per record u32 id, u32 label (0xFFFFFFFF = unlabeled) and
``dim`` float32 values, all little-endian. This mirrors the retrieval
engine's loader; the file is the integration boundary, so nothing is
imported from it.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"HFV1"
VERSION = 1


def write_hfv1(
    path: str | Path,
    ids: np.ndarray,
    labels: np.ndarray,
    vectors: np.ndarray,
    label_names: dict[int, str] | None = None,
) -> None:
    """Write one embedding file plus, optionally, its labels sidecar."""
    path = Path(path)
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    n, dim = vectors.shape
    if not np.isfinite(vectors).all():
        raise ValueError("embeddings contain non-finite values")
    header = struct.pack("<4sIII", MAGIC, VERSION, n, dim)
    record = np.dtype([("id", "<u4"), ("label", "<u4"), ("vec", "<f4", (dim,))])
    body = np.empty(n, dtype=record)
    body["id"] = np.asarray(ids, dtype=np.uint32)
    body["label"] = np.asarray(labels, dtype=np.uint32)
    body["vec"] = vectors
    path.write_bytes(header + body.tobytes())
    if label_names is not None:
        sidecar = path.with_name(path.stem + ".labels.json")
        text = json.dumps({str(k): v for k, v in label_names.items()},
                          sort_keys=True, indent=2)
        sidecar.write_text(text + "\n")
