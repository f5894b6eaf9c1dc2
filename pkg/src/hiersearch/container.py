"""Binary containers for fitted models and retrieval indexes.

Both files share one framing: a 4-byte magic (``HMDL`` for models, ``HIDX``
for indexes), a u32 version, then a sequence of sections, each a u32 tag
plus a u64 byte length plus the payload. All integers and floats are
little-endian; writing is deterministic, so identical inputs produce
byte-identical files.

Sections: 1 = PCA model, 2 = hierarchy JSON, 3 = leaf Gaussians (f64
moments; Cholesky factors are recomputed on load), 4 = reduced database in
HFV1 layout, 5 = leaf assignment per database row, 6 = label names JSON.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, NumericalError
from .gaussians import ClassGaussian
from .hierarchy import export_tree, tree_from_json
from .pca import PcaModel
from .pipeline import FittedModel
from .retrieval import RetrievalIndex
from . import store

MODEL_MAGIC = b"HMDL"
INDEX_MAGIC = b"HIDX"
CONTAINER_VERSION = 1

TAG_PCA = 1
TAG_TREE = 2
TAG_GAUSSIANS = 3
TAG_DATABASE = 4
TAG_ASSIGNMENTS = 5
TAG_LABEL_NAMES = 6

_SECTION = struct.Struct("<IQ")


def _pack_sections(magic: bytes, sections: list[tuple[int, bytes]]) -> bytes:
    out = [magic, struct.pack("<I", CONTAINER_VERSION)]
    for tag, payload in sections:
        out.append(_SECTION.pack(tag, len(payload)))
        out.append(payload)
    return b"".join(out)


def _unpack_sections(data: bytes, magic: bytes) -> dict[int, bytes]:
    if len(data) < 8 or data[:4] != magic:
        raise FormatError(f"bad magic, expected {magic!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CONTAINER_VERSION:
        raise FormatError(f"unsupported container version {version}")
    sections: dict[int, bytes] = {}
    offset = 8
    while offset < len(data):
        if offset + _SECTION.size > len(data):
            raise FormatError("truncated section header")
        tag, length = _SECTION.unpack_from(data, offset)
        offset += _SECTION.size
        if offset + length > len(data):
            raise FormatError(f"section {tag} runs past end of file")
        sections[tag] = data[offset:offset + length]
        offset += length
    return sections


def _pca_payload(pca: PcaModel) -> bytes:
    head = struct.pack("<IId", pca.original_dim, pca.reduced_dim,
                       pca.explained_fraction)
    return (
        head
        + pca.mean.astype("<f8").tobytes()
        + pca.eigenvalues.astype("<f8").tobytes()
        + pca.components.astype("<f8").tobytes()
    )


def _pca_from_payload(payload: bytes) -> PcaModel:
    d, r, explained = struct.unpack_from("<IId", payload)
    offset = 16
    mean = np.frombuffer(payload, "<f8", d, offset).copy()
    offset += 8 * d
    eigenvalues = np.frombuffer(payload, "<f8", r, offset).copy()
    offset += 8 * r
    components = np.frombuffer(payload, "<f8", r * d, offset).reshape(r, d).copy()
    return PcaModel(
        mean=mean,
        components=components,
        eigenvalues=eigenvalues,
        explained_fraction=explained,
        original_dim=d,
        reduced_dim=r,
    )


def _gaussians_payload(leaf_gaussians: dict[int, ClassGaussian]) -> bytes:
    parts = [struct.pack("<I", len(leaf_gaussians))]
    for nid in sorted(leaf_gaussians):
        g = leaf_gaussians[nid]
        r = g.dim
        parts.append(struct.pack("<IIQ", nid, r, g.count))
        parts.append(g.mu.astype("<f8").tobytes())
        parts.append(g.sigma.astype("<f8").tobytes())
    return b"".join(parts)


def _gaussians_from_payload(payload: bytes) -> dict[int, ClassGaussian]:
    (count,) = struct.unpack_from("<I", payload)
    offset = 4
    out: dict[int, ClassGaussian] = {}
    for _ in range(count):
        nid, r, n = struct.unpack_from("<IIQ", payload, offset)
        offset += 16
        mu = np.frombuffer(payload, "<f8", r, offset).copy()
        offset += 8 * r
        sigma = np.frombuffer(payload, "<f8", r * r, offset).reshape(r, r).copy()
        offset += 8 * r * r
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise NumericalError(
                f"stored covariance for node {nid} is not positive-definite"
            ) from None
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        out[nid] = ClassGaussian(
            class_id=nid, mu=mu, sigma=sigma, chol=chol, log_det=log_det,
            count=n,
        )
    return out


def _model_sections(model: FittedModel) -> list[tuple[int, bytes]]:
    sections = [
        (TAG_PCA, _pca_payload(model.pca)),
        (TAG_TREE, export_tree(model.tree, "json").encode()),
        (TAG_GAUSSIANS, _gaussians_payload(model.leaf_gaussians)),
    ]
    if model.label_names:
        names = json.dumps(
            {str(k): v for k, v in model.label_names.items()}, sort_keys=True
        )
        sections.append((TAG_LABEL_NAMES, names.encode()))
    return sections


def save_model(model: FittedModel, path: str | Path) -> None:
    Path(path).write_bytes(_pack_sections(MODEL_MAGIC, _model_sections(model)))


def load_model(path: str | Path) -> FittedModel:
    sections = _unpack_sections(Path(path).read_bytes(), MODEL_MAGIC)
    for tag in (TAG_PCA, TAG_TREE, TAG_GAUSSIANS):
        if tag not in sections:
            raise FormatError(f"model file is missing section {tag}")
    names = None
    if TAG_LABEL_NAMES in sections:
        names = {int(k): str(v)
                 for k, v in json.loads(sections[TAG_LABEL_NAMES]).items()}
    return FittedModel(
        pca=_pca_from_payload(sections[TAG_PCA]),
        tree=tree_from_json(sections[TAG_TREE].decode()),
        leaf_gaussians=_gaussians_from_payload(sections[TAG_GAUSSIANS]),
        label_names=names,
    )


def save_index(index: RetrievalIndex, path: str | Path) -> None:
    model = FittedModel(
        pca=index.pca,
        tree=index.tree,
        leaf_gaussians=index.leaf_gaussians,
        label_names=index.database.label_names,
    )
    sections = _model_sections(model)
    sections.append((TAG_DATABASE, store.dumps_binary(index.database)))
    assign = struct.pack("<I", len(index.assignment_rows))
    assign += index.assignment_rows.astype("<u4").tobytes()
    sections.append((TAG_ASSIGNMENTS, assign))
    Path(path).write_bytes(_pack_sections(INDEX_MAGIC, sections))


def load_index(path: str | Path) -> RetrievalIndex:
    sections = _unpack_sections(Path(path).read_bytes(), INDEX_MAGIC)
    for tag in (TAG_PCA, TAG_TREE, TAG_GAUSSIANS, TAG_DATABASE, TAG_ASSIGNMENTS):
        if tag not in sections:
            raise FormatError(f"index file is missing section {tag}")
    database = store.loads_binary(sections[TAG_DATABASE])
    if TAG_LABEL_NAMES in sections:
        database.label_names = {
            int(k): str(v)
            for k, v in json.loads(sections[TAG_LABEL_NAMES]).items()
        }
    payload = sections[TAG_ASSIGNMENTS]
    (n,) = struct.unpack_from("<I", payload)
    if n != len(database):
        raise FormatError(
            f"assignment section has {n} rows for {len(database)} records"
        )
    assignment_rows = np.frombuffer(payload, "<u4", n, 4).astype(np.int64)
    norms = np.linalg.norm(database.vectors.astype(np.float64), axis=1)
    return RetrievalIndex(
        pca=_pca_from_payload(sections[TAG_PCA]),
        tree=tree_from_json(sections[TAG_TREE].decode()),
        leaf_gaussians=_gaussians_from_payload(sections[TAG_GAUSSIANS]),
        database=database,
        leaf_assignment={
            int(rid): int(leaf)
            for rid, leaf in zip(database.ids, assignment_rows)
        },
        norms=norms,
        assignment_rows=assignment_rows,
    )
