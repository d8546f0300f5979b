"""Inverse-class-frequency weighted random sampling.

Each sample of class ``i`` gets weight ``1 / N_i``; every non-empty class then
carries the same total mass, so draws are class-balanced in expectation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def class_counts(labels, k: int) -> np.ndarray:
    labels = np.asarray(getattr(labels, "labels", labels), dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in 0..{k - 1}")
    return np.bincount(labels, minlength=k)


def inverse_frequency_weights(counts) -> np.ndarray:
    """w_i = 1 / N_i, with empty classes getting weight 0."""
    counts = np.asarray(counts, dtype=np.float64)
    w = np.zeros_like(counts)
    np.divide(1.0, counts, out=w, where=counts > 0)
    return w


def per_sample_weights(labels, k: int) -> np.ndarray:
    labels = np.asarray(getattr(labels, "labels", labels), dtype=np.int64)
    return inverse_frequency_weights(class_counts(labels, k))[labels]


@dataclass(frozen=True)
class SamplerSpec:
    per_sample_weights: np.ndarray
    replacement: bool = True
    seed: int = 0

    def __post_init__(self):
        w = np.array(self.per_sample_weights, dtype=np.float64).ravel()
        if w.size == 0:
            raise ValueError("sampler needs at least one weight")
        if not np.isfinite(w).all() or (w < 0).any():
            raise ValueError("sampling weights must be finite and non-negative")
        if not (w > 0).any():
            raise ValueError("all sampling weights are zero")
        w.setflags(write=False)
        object.__setattr__(self, "per_sample_weights", w)

    @classmethod
    def from_labels(cls, labels, k: int, seed: int = 0, replacement: bool = True) -> "SamplerSpec":
        return cls(per_sample_weights(labels, k), replacement, seed)


def draw_epoch_indices(spec: SamplerSpec, n: int) -> np.ndarray:
    """``n`` indices with P(j) = w_j / sum(w), by inverse-CDF lookup."""
    if n <= 0:
        raise ValueError(f"number of draws must be positive, got {n}")
    w = spec.per_sample_weights
    rng = np.random.default_rng(spec.seed)
    if not spec.replacement:
        positive = int((w > 0).sum())
        if n > positive:
            raise ValueError(f"cannot draw {n} distinct indices from {positive} non-zero weights")
        # Efraimidis-Spirakis: smallest -log(u)/w keys form a weighted sample
        with np.errstate(divide="ignore"):
            keys = -np.log(rng.random(w.size)) / w
        return np.argsort(keys, kind="stable")[:n]
    cdf = np.cumsum(w)
    u = rng.random(n) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    last = int(np.flatnonzero(w > 0)[-1])
    return np.minimum(idx, last)


def class_frequencies(labels, indices, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    drawn = labels[np.asarray(indices)]
    return np.bincount(drawn, minlength=k) / max(drawn.size, 1)


def chi_square_uniform(labels, indices, k: int) -> tuple[float, int]:
    """Chi-square statistic of drawn class counts against equal class mass.

    Only non-empty classes take part; returns ``(statistic, dof)``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    present = np.bincount(labels, minlength=k) > 0
    observed = np.bincount(labels[np.asarray(indices)], minlength=k)[present]
    expected = observed.sum() / present.sum()
    stat = float(((observed - expected) ** 2 / expected).sum())
    return stat, int(present.sum()) - 1
