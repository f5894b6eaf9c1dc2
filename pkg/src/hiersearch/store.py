"""Labeled embedding vectors and their on-disk interchange formats.

Two formats are supported. The binary container ``HFV1`` is the canonical
interchange: little-endian, float32 vectors, bit-exact on round-trip. CSV
exists for human inspection and spreadsheet interop; floats are printed with
9 significant digits, which is enough to reproduce a float32 exactly.

Binary layout: 4-byte magic ``HFV1``, u32 version (=1), u32 record count,
u32 dimension, then per record u32 id, u32 label (0xFFFFFFFF = unlabeled)
and ``dim`` float32 values.

An optional sidecar ``<name>.labels.json`` maps label ids to display names.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, ValidationError

MAGIC = b"HFV1"
FORMAT_VERSION = 1
UNLABELED_WIRE = 0xFFFFFFFF
_HEADER = struct.Struct("<4sIII")


@dataclass
class FeatureRecord:
    """One labeled embedding vector. ``label`` is None for unlabeled records."""

    id: int
    label: int | None
    vector: np.ndarray


@dataclass
class EmbeddingSet:
    """An ordered collection of embedding vectors sharing one dimension.

    Vectors are stored row-wise as a float32 matrix; ``labels`` uses -1 for
    unlabeled records. Instances are treated as immutable after construction
    and are safe for concurrent reads.
    """

    dim: int
    ids: np.ndarray                     # (n,) int64
    labels: np.ndarray                  # (n,) int64, -1 where unlabeled
    vectors: np.ndarray                 # (n, dim) float32
    label_names: dict[int, str] | None = None

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def records(self) -> list[FeatureRecord]:
        return [
            FeatureRecord(int(i), None if l < 0 else int(l), v)
            for i, l, v in zip(self.ids, self.labels, self.vectors)
        ]

    @classmethod
    def from_records(
        cls,
        dim: int,
        records: list[FeatureRecord],
        label_names: dict[int, str] | None = None,
    ) -> "EmbeddingSet":
        n = len(records)
        ids = np.array([r.id for r in records], dtype=np.int64)
        labels = np.array(
            [-1 if r.label is None else r.label for r in records], dtype=np.int64
        )
        vectors = np.zeros((n, dim), dtype=np.float32)
        for row, r in enumerate(records):
            v = np.asarray(r.vector, dtype=np.float32)
            if v.shape != (dim,):
                raise DimensionError(
                    f"record {r.id}: vector has shape {v.shape}, expected ({dim},)"
                )
            vectors[row] = v
        return cls(dim=dim, ids=ids, labels=labels, vectors=vectors,
                   label_names=label_names)

    def is_fully_labeled(self) -> bool:
        return bool(len(self) == 0 or np.all(self.labels >= 0))


def validate_set(s: EmbeddingSet) -> None:
    """Check set-level invariants, raising instead of repairing.

    Verifies the vector matrix shape, finiteness of every component,
    uniqueness of record ids and, when a name map is attached, that every
    label used by a record has an entry.
    """
    n = len(s.ids)
    if s.dim < 1:
        raise DimensionError(f"dimension must be positive, got {s.dim}")
    if s.vectors.shape != (n, s.dim):
        raise DimensionError(
            f"vector matrix has shape {s.vectors.shape}, expected ({n}, {s.dim})"
        )
    if s.labels.shape != (n,):
        raise ValidationError("labels array does not match record count")
    bad = ~np.isfinite(s.vectors)
    if bad.any():
        row = int(np.nonzero(bad.any(axis=1))[0][0])
        raise ValidationError(
            f"record {int(s.ids[row])} contains a non-finite component"
        )
    if n:
        uniq, counts = np.unique(s.ids, return_counts=True)
        if (counts > 1).any():
            dup = int(uniq[counts > 1][0])
            raise ValidationError(f"duplicate record id {dup}")
        if int(s.ids.min()) < 0 or int(s.ids.max()) > 0xFFFFFFFF:
            raise ValidationError("record ids must fit an unsigned 32-bit integer")
        if int(s.labels.min()) < -1 or int(s.labels.max()) >= UNLABELED_WIRE:
            raise ValidationError(
                f"labels must be unsigned integers below {UNLABELED_WIRE}"
            )
    if s.label_names is not None:
        present = set(int(l) for l in s.labels if l >= 0)
        missing = present - set(s.label_names)
        if missing:
            raise ValidationError(
                f"label_names is missing entries for labels {sorted(missing)}"
            )


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.stem + ".labels.json")


def save_embeddings(s: EmbeddingSet, path: str | Path, format: str = "binary") -> None:
    """Write the set to ``path`` in the requested format.

    Writes the ``.labels.json`` sidecar alongside when a name map is present.
    """
    validate_set(s)
    path = Path(path)
    if format == "binary":
        path.write_bytes(dumps_binary(s))
    elif format == "csv":
        path.write_text(dumps_csv(s))
    else:
        raise FormatError(f"unknown format {format!r}, expected 'binary' or 'csv'")
    if s.label_names is not None:
        text = json.dumps(
            {str(k): v for k, v in s.label_names.items()}, sort_keys=True, indent=2
        )
        _sidecar_path(path).write_text(text + "\n")


def load_embeddings(path: str | Path, format: str = "binary") -> EmbeddingSet:
    """Read a set from ``path``, validating every invariant before returning."""
    path = Path(path)
    if format == "binary":
        s = loads_binary(path.read_bytes())
    elif format == "csv":
        s = loads_csv(path.read_text())
    else:
        raise FormatError(f"unknown format {format!r}, expected 'binary' or 'csv'")
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        raw = json.loads(sidecar.read_text())
        s.label_names = {int(k): str(v) for k, v in raw.items()}
    validate_set(s)
    return s


def dumps_binary(s: EmbeddingSet) -> bytes:
    n = len(s)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, n, s.dim)
    if n == 0:
        return header
    rec_dtype = np.dtype(
        [("id", "<u4"), ("label", "<u4"), ("vec", "<f4", (s.dim,))]
    )
    body = np.empty(n, dtype=rec_dtype)
    body["id"] = s.ids
    wire_labels = s.labels.copy()
    wire_labels[wire_labels < 0] = UNLABELED_WIRE
    body["label"] = wire_labels
    body["vec"] = s.vectors
    return header + body.tobytes()


def loads_binary(data: bytes) -> EmbeddingSet:
    if len(data) < _HEADER.size:
        raise FormatError("file too small to hold an HFV1 header")
    magic, version, count, dim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported HFV1 version {version}")
    if dim < 1:
        raise DimensionError(f"dimension must be positive, got {dim}")
    rec_dtype = np.dtype([("id", "<u4"), ("label", "<u4"), ("vec", "<f4", (dim,))])
    expected = _HEADER.size + count * rec_dtype.itemsize
    if len(data) != expected:
        raise FormatError(
            f"body is {len(data) - _HEADER.size} bytes, "
            f"expected {count} records of {rec_dtype.itemsize} bytes"
        )
    if count == 0:
        return EmbeddingSet(
            dim=dim,
            ids=np.empty(0, dtype=np.int64),
            labels=np.empty(0, dtype=np.int64),
            vectors=np.empty((0, dim), dtype=np.float32),
        )
    body = np.frombuffer(data, dtype=rec_dtype, offset=_HEADER.size)
    labels = body["label"].astype(np.int64)
    labels[labels == UNLABELED_WIRE] = -1
    return EmbeddingSet(
        dim=dim,
        ids=body["id"].astype(np.int64),
        labels=labels,
        vectors=np.ascontiguousarray(body["vec"], dtype=np.float32),
    )


def dumps_csv(s: EmbeddingSet) -> str:
    lines = ["id,label," + ",".join(f"f{i}" for i in range(s.dim))]
    for i, l, v in zip(s.ids, s.labels, s.vectors):
        label = "" if l < 0 else str(int(l))
        comps = ",".join(f"{float(x):.9g}" for x in v)
        lines.append(f"{int(i)},{label},{comps}")
    return "\n".join(lines) + "\n"


def loads_csv(text: str) -> EmbeddingSet:
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty CSV file") from None
    if len(header) < 3 or header[0] != "id" or header[1] != "label":
        raise FormatError("CSV header must start with 'id,label,f0,...'")
    dim = len(header) - 2
    if header[2:] != [f"f{i}" for i in range(dim)]:
        raise FormatError("CSV feature columns must be named f0..f{d-1}")
    ids, labels, rows = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != dim + 2:
            raise DimensionError(
                f"line {lineno}: {len(row) - 2} feature columns, expected {dim}"
            )
        try:
            ids.append(int(row[0]))
            labels.append(-1 if row[1] == "" else int(row[1]))
            rows.append([float(x) for x in row[2:]])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    return EmbeddingSet(
        dim=dim,
        ids=np.array(ids, dtype=np.int64),
        labels=np.array(labels, dtype=np.int64),
        vectors=np.array(rows, dtype=np.float32).reshape(len(rows), dim),
    )


def split_by_label(s: EmbeddingSet) -> dict[int, np.ndarray]:
    """Group the vectors by class label, keys in ascending label order.

    Every record must be labeled; the union of the groups is exactly the
    input, so group sizes sum to ``len(s)``.
    """
    if len(s) and (s.labels < 0).any():
        row = int(np.nonzero(s.labels < 0)[0][0])
        raise ValidationError(f"record {int(s.ids[row])} has no label")
    groups: dict[int, np.ndarray] = {}
    for label in sorted(int(l) for l in np.unique(s.labels)):
        groups[label] = s.vectors[s.labels == label]
    return groups
