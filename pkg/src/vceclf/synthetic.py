"""Synthetic solid-colour datasets for smoke runs and acceptance checks.

Each class has a base RGB colour; images are that colour plus a per-image
offset and mild pixel noise, so the classes separate on channel means.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .catalog import ClassCatalog
from .data_io import LabeledManifest, ManifestRecord, write_manifest

BASE_COLOURS = np.array([
    [0.80, 0.25, 0.25],
    [0.25, 0.75, 0.30],
    [0.25, 0.35, 0.80],
    [0.80, 0.75, 0.25],
    [0.65, 0.30, 0.75],
    [0.25, 0.75, 0.75],
])

DEFAULT_SYNTH_CLASSES = ("Bleeding", "Normal", "Ulcer")


def render(colour, size: int, rng: np.random.Generator, noise: float = 0.03) -> np.ndarray:
    img = np.broadcast_to(colour, (size, size, 3)) + rng.normal(0.0, noise, (size, size, 3))
    return np.clip(np.rint(np.clip(img, 0, 1) * 255), 0, 255).astype(np.uint8)


def make_split(root, name: str, counts: Sequence[int], catalog: ClassCatalog, seed: int,
               size: int = 32, spread: float = 0.08) -> LabeledManifest:
    """Write ``counts[c]`` PNGs per class under ``root/name`` plus ``root/name.csv``."""
    root = Path(root)
    if len(counts) != len(catalog):
        raise ValueError("need one count per class")
    if len(catalog) > len(BASE_COLOURS):
        raise ValueError(f"at most {len(BASE_COLOURS)} synthetic classes are supported")
    rng = np.random.default_rng(seed)
    (root / name).mkdir(parents=True, exist_ok=True)
    records = []
    for c, n in enumerate(counts):
        for i in range(n):
            colour = BASE_COLOURS[c] + rng.uniform(-spread, spread, 3)
            rel = f"{name}/c{c}_{i:04d}.png"
            Image.fromarray(render(colour, size, rng), mode="RGB").save(root / rel)
            records.append(ManifestRecord(rel, c))
    order = rng.permutation(len(records))
    manifest = LabeledManifest(tuple(records[i] for i in order), catalog, root)
    write_manifest(root / f"{name}.csv", manifest)
    return manifest


def make_dataset(root, train_counts=(300, 200, 100), val_counts=(100, 100, 100),
                 classes: Sequence[str] = DEFAULT_SYNTH_CLASSES, seed: int = 0,
                 size: int = 32) -> tuple[LabeledManifest, LabeledManifest]:
    catalog = ClassCatalog(tuple(classes))
    train = make_split(root, "train", train_counts, catalog, seed, size)
    val = make_split(root, "val", val_counts, catalog, seed + 1, size)
    return train, val
