"""Batch feature extraction from a folder-per-class image tree.

Class labels are assigned by lexicographic folder order and image order is
sorted paths within each folder, so repeated exports of the same tree are
identical regardless of filesystem enumeration order. Inference-time
preprocessing is resize (shorter side) plus center crop only; features are
written raw, with no normalization or reduction, since all statistics belong
to the retrieval engine.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .hfv1 import write_hfv1

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tiff", ".webp"}


class ExportError(RuntimeError):
    """Export could not produce a usable embedding file."""


@dataclass
class ExportManifest:
    model_path: str | Path | None     # TorchScript feature extractor
    image_dir: str | Path
    output_path: str | Path
    image_size: int = 224
    batch_size: int = 32
    device: str = "cpu"


@dataclass
class ExportReport:
    exported: int
    dim: int
    label_names: dict[int, str]
    skipped: list[str] = field(default_factory=list)


def penultimate_extractor(classifier: torch.nn.Module) -> torch.nn.Module:
    """Wrap a classifier so forward returns the input of its final Linear.

    The classification head is taken to be the last ``nn.Linear`` in module
    definition order, which matches common torchvision-style classifiers.
    """
    linears = [m for m in classifier.modules()
               if isinstance(m, torch.nn.Linear)]
    if not linears:
        raise ExportError("classifier has no Linear layer to treat as a head")
    return _PenultimateWrapper(classifier, linears[-1])


class _PenultimateWrapper(torch.nn.Module):
    def __init__(self, classifier: torch.nn.Module, head: torch.nn.Linear):
        super().__init__()
        self.classifier = classifier
        self._captured = None
        head.register_forward_pre_hook(self._capture)

    def _capture(self, module, inputs):
        self._captured = inputs[0]

    def forward(self, x):
        self.classifier(x)
        return self._captured


def list_class_images(image_dir: str | Path):
    """(label id, class name, sorted image paths) per class subfolder."""
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise ExportError(f"{image_dir} is not a directory")
    classes = sorted(p.name for p in image_dir.iterdir() if p.is_dir())
    if not classes:
        raise ExportError(f"{image_dir} contains no class subfolders")
    out = []
    for label, name in enumerate(classes):
        paths = sorted(
            p for p in (image_dir / name).iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        out.append((label, name, paths))
    return out


def load_image(path: Path, size: int) -> np.ndarray:
    """Resize shorter side to ``size``, center-crop, return (3, size, size)."""
    with Image.open(path) as img:
        img = img.convert("RGB")
        w, h = img.size
        scale = size / min(w, h)
        img = img.resize((max(size, round(w * scale)),
                          max(size, round(h * scale))), Image.BILINEAR)
        w, h = img.size
        left = (w - size) // 2
        top = (h - size) // 2
        img = img.crop((left, top, left + size, top + size))
        array = np.asarray(img, dtype=np.float32) / 255.0
    return array.transpose(2, 0, 1)


def export_features(
    manifest: ExportManifest,
    model: torch.nn.Module | None = None,
) -> ExportReport:
    """Run the extractor over every image and write HFV1 plus the sidecar.

    ``model`` overrides ``manifest.model_path`` for in-process use; either
    way the module's forward output is taken as the embedding, flattened to
    one row per image. Unreadable images are skipped with a warning and
    listed in the report; an export with zero records fails.
    """
    if model is None:
        if manifest.model_path is None:
            raise ExportError("no model given: set model_path or pass a module")
        model = torch.jit.load(str(manifest.model_path), map_location="cpu")
    device = torch.device(manifest.device)
    model = model.to(device)
    model.eval()

    labeled_paths = []
    label_names: dict[int, str] = {}
    for label, name, paths in list_class_images(manifest.image_dir):
        label_names[label] = name
        labeled_paths.extend((label, p) for p in paths)

    skipped: list[str] = []
    rows: list[np.ndarray] = []
    row_labels: list[int] = []
    batch_images: list[np.ndarray] = []
    batch_labels: list[int] = []

    def flush():
        if not batch_images:
            return
        stacked = torch.from_numpy(np.stack(batch_images)).to(device)
        with torch.no_grad():
            output = model(stacked)
        features = output.reshape(output.shape[0], -1).cpu().numpy()
        rows.append(features.astype(np.float32))
        row_labels.extend(batch_labels)
        batch_images.clear()
        batch_labels.clear()

    for label, path in labeled_paths:
        try:
            batch_images.append(load_image(path, manifest.image_size))
        except Exception as exc:
            logger.warning("skipping unreadable image %s: %s", path, exc)
            skipped.append(str(path))
            continue
        batch_labels.append(label)
        if len(batch_images) >= manifest.batch_size:
            flush()
    flush()

    if not rows:
        raise ExportError("no images could be exported")
    vectors = np.concatenate(rows)
    used_labels = sorted(set(row_labels))
    write_hfv1(
        manifest.output_path,
        ids=np.arange(len(vectors), dtype=np.uint32),
        labels=np.asarray(row_labels, dtype=np.uint32),
        vectors=vectors,
        label_names={l: label_names[l] for l in used_labels},
    )
    return ExportReport(
        exported=len(vectors),
        dim=vectors.shape[1],
        label_names={l: label_names[l] for l in used_labels},
        skipped=skipped,
    )
