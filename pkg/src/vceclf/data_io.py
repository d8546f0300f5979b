"""Manifests, image decoding and every on-disk format the pipeline uses.

Formats
-------
manifest CSV      ``image_path,label`` with class *names* in the label column.
predictions CSV   ``image_path,<class names...>``; probabilities with 6 decimals.
metrics JSON      ``{"per_class": {...}, "aggregate": {...}}`` in catalog order.
checkpoint        ``VCECKPT\\0`` magic, little-endian uint32 header length,
                  JSON header, then the parameter vector as little-endian
                  float64. The header carries the format version, layer
                  shapes, parameter count and a CRC32 of the parameter bytes.
"""

from __future__ import annotations

import csv
import json
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .catalog import DEFAULT_CATALOG, ClassCatalog
from .metrics import MetricsReport

MANIFEST_HEADER = ("image_path", "label")
PROB_DECIMALS = 6
PROB_SUM_TOL = 1e-5

CHECKPOINT_MAGIC = b"VCECKPT\0"
CHECKPOINT_VERSION = 1


class DataFormatError(ValueError):
    """A file exists but its contents break the format contract."""


class CheckpointError(DataFormatError):
    pass


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class ManifestRecord:
    image_id: str
    label: int


@dataclass(frozen=True)
class LabeledManifest:
    records: tuple[ManifestRecord, ...]
    catalog: ClassCatalog = DEFAULT_CATALOG
    root: Optional[Path] = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.image_id in seen:
                raise DataFormatError(f"duplicate image_path {rec.image_id!r}")
            seen.add(rec.image_id)
            if not 0 <= rec.label < len(self.catalog):
                raise DataFormatError(
                    f"label {rec.label} of {rec.image_id!r} outside 0..{len(self.catalog) - 1}"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def image_ids(self) -> list[str]:
        return [r.image_id for r in self.records]

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def resolve(self, image_id: str) -> Path:
        p = Path(image_id)
        if p.is_absolute() or self.root is None:
            return p
        return self.root / p


def load_manifest(path, catalog: ClassCatalog = DEFAULT_CATALOG) -> LabeledManifest:
    """Read a manifest CSV; relative image paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != MANIFEST_HEADER:
            raise DataFormatError(f"{path}: expected header 'image_path,label', got {header}")
        seen = set()
        # row numbers count the header as row 1
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataFormatError(f"{path}: row {rownum} has {len(row)} fields, expected 2")
            image_id, name = row[0].strip(), row[1].strip()
            try:
                label = catalog.index(name)
            except KeyError:
                raise DataFormatError(f"unknown class '{name}' at row {rownum}") from None
            if image_id in seen:
                raise DataFormatError(f"duplicate image_path '{image_id}' at row {rownum}")
            seen.add(image_id)
            records.append(ManifestRecord(image_id, label))
    return LabeledManifest(tuple(records), catalog, path.parent)


def write_manifest(path, manifest: LabeledManifest) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for rec in manifest.records:
            writer.writerow([rec.image_id, manifest.catalog.names[rec.label]])


# ---------------------------------------------------------------------------
# images


@dataclass(frozen=True)
class ImageBuffer:
    """H x W x 3 float64 pixels; raw intensities live in [0, 1]."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"image data must be H x W x 3, got shape {data.shape}")
        if data.shape[0] == 0 or data.shape[1] == 0:
            raise ValueError("image must have non-zero width and height")
        if not self.normalized and data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError("raw image values must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def decode_image(path) -> ImageBuffer:
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "JPEG"):
                raise DataFormatError(f"{path}: unsupported image format {im.format}")
            im.load()
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
                arr = np.repeat(arr[..., None], 3, axis=2)
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DataFormatError(f"cannot decode image {path}: {exc}") from exc
    return ImageBuffer(arr)


def encode_image(path, img: ImageBuffer) -> None:
    """Write an 8-bit PNG; normalized buffers are mapped back with mean=std=0.5."""
    data = img.data
    if img.normalized:
        data = data * 0.5 + 0.5
    arr = np.clip(np.rint(np.clip(data, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


# ---------------------------------------------------------------------------
# predictions


def _check_prob_rows(probs: np.ndarray, tol: float = PROB_SUM_TOL) -> None:
    if probs.size and not np.isfinite(probs).all():
        raise DataFormatError("probabilities contain non-finite values")
    sums = probs.sum(axis=1)
    for i in range(probs.shape[0]):
        if (probs[i] < 0.0).any() or abs(sums[i] - 1.0) > tol:
            raise DataFormatError(f"row {i} not a probability vector")


def write_predictions_csv(path, image_ids: Sequence[str], probs, catalog: ClassCatalog) -> None:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] != len(catalog):
        raise DataFormatError(f"probabilities must be N x {len(catalog)}, got {probs.shape}")
    if probs.shape[0] != len(image_ids):
        raise DataFormatError(f"{len(image_ids)} image ids but {probs.shape[0]} probability rows")
    _check_prob_rows(probs)
    fmt = f"{{:.{PROB_DECIMALS}f}}"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_path", *catalog.names])
        for image_id, row in zip(image_ids, probs):
            writer.writerow([os.path.basename(image_id), *(fmt.format(p) for p in row)])


def read_predictions_csv(path) -> tuple[list[str], np.ndarray, ClassCatalog]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"predictions file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "image_path" or len(header) < 3:
            raise DataFormatError(f"{path}: expected header 'image_path,<class names...>'")
        catalog = ClassCatalog(tuple(header[1:]))
        ids, rows = [], []
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}")
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise DataFormatError(f"{path}: non-numeric probability at row {rownum}") from None
    probs = np.array(rows, dtype=np.float64).reshape(len(rows), len(catalog))
    if len(set(ids)) != len(ids):
        raise DataFormatError(f"{path}: duplicate image ids")
    _check_prob_rows(probs)
    return ids, probs, catalog


def quantize_probs(probs) -> np.ndarray:
    """The exact values a reader recovers from a written predictions CSV."""
    fmt = f"{{:.{PROB_DECIMALS}f}}"
    probs = np.asarray(probs, dtype=np.float64)
    return np.array([[float(fmt.format(p)) for p in row] for row in probs]).reshape(probs.shape)


# ---------------------------------------------------------------------------
# metrics


def write_metrics_json(path, report: MetricsReport, catalog: Optional[ClassCatalog] = None) -> None:
    names = list(report.per_class)
    if not names or (catalog is not None and names != list(catalog.names)):
        raise DataFormatError("report must cover all catalog classes")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def read_metrics_json(path) -> MetricsReport:
    with open(path, encoding="utf-8") as fh:
        return MetricsReport.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# checkpoints


@dataclass(frozen=True)
class Checkpoint:
    params: np.ndarray
    layer_shapes: tuple[tuple[int, int], ...]
    epoch: int
    best_combined_score: float
    rng_seed: int
    class_catalog: ClassCatalog = DEFAULT_CATALOG
    arch: str = ""
    feature_size: tuple[int, int] = (8, 8)
    format_version: int = CHECKPOINT_VERSION
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        params = np.ascontiguousarray(self.params, dtype=np.float64).ravel()
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        shapes = tuple((int(o), int(i)) for o, i in self.layer_shapes)
        object.__setattr__(self, "layer_shapes", shapes)
        object.__setattr__(self, "feature_size", tuple(int(v) for v in self.feature_size))
        expected = sum(o * i + o for o, i in shapes)
        if params.size != expected:
            raise CheckpointError(f"parameter vector has {params.size} values, shapes imply {expected}")
        if not 0.0 <= self.best_combined_score <= 1.0:
            raise CheckpointError(f"best_combined_score {self.best_combined_score} outside [0, 1]")

    def __eq__(self, other):
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return (
            self._header() == other._header()
            and self.params.tobytes() == other.params.tobytes()
        )

    __hash__ = None

    def _header(self) -> dict:
        return {
            "format_version": self.format_version,
            "layer_shapes": [list(s) for s in self.layer_shapes],
            "epoch": int(self.epoch),
            "best_combined_score": float(self.best_combined_score),
            "rng_seed": int(self.rng_seed),
            "class_catalog": list(self.class_catalog.names),
            "arch": self.arch,
            "feature_size": list(self.feature_size),
            "extra": self.extra,
        }


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    payload = ckpt.params.astype("<f8").tobytes()
    header = ckpt._header()
    header["n_params"] = int(ckpt.params.size)
    header["crc32"] = zlib.crc32(payload)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    raw = path.read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    off = len(CHECKPOINT_MAGIC)
    if len(raw) < off + 4:
        raise CheckpointError(f"{path}: truncated header")
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    try:
        header = json.loads(raw[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupted header") from exc
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: format_version {header.get('format_version')} not supported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    payload = raw[off + hlen:]
    n = header["n_params"]
    if len(payload) != 8 * n:
        raise CheckpointError(f"{path}: expected {8 * n} parameter bytes, found {len(payload)}")
    if zlib.crc32(payload) != header["crc32"]:
        raise CheckpointError(f"{path}: parameter checksum mismatch")
    return Checkpoint(
        params=np.frombuffer(payload, dtype="<f8").astype(np.float64),
        layer_shapes=tuple(tuple(s) for s in header["layer_shapes"]),
        epoch=header["epoch"],
        best_combined_score=header["best_combined_score"],
        rng_seed=header["rng_seed"],
        class_catalog=ClassCatalog(tuple(header["class_catalog"])),
        arch=header["arch"],
        feature_size=tuple(header["feature_size"]),
        format_version=header["format_version"],
        extra=header.get("extra", {}),
    )
