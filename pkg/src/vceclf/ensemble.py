"""Softmax-averaging ensembles over per-model outputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import predict_labels
from .nn_core import softmax

__all__ = ["ModelOutputs", "align", "ensemble_average", "member_probs", "predict_labels"]


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class ModelOutputs:
    model_id: str
    image_ids: tuple[str, ...]
    values: np.ndarray  # logits, or probabilities when is_probs
    is_probs: bool = False

    def __post_init__(self):
        ids = tuple(self.image_ids)
        object.__setattr__(self, "image_ids", ids)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[0] != len(ids):
            raise ValueError(f"model {self.model_id!r}: {len(ids)} image ids but values of shape {values.shape}")
        if len(set(ids)) != len(ids):
            raise ValueError(f"model {self.model_id!r}: duplicate image ids")


def member_probs(out: ModelOutputs) -> np.ndarray:
    return out.values if out.is_probs else softmax(out.values)


def align(outputs) -> list[ModelOutputs]:
    """Re-order every member to the first member's image order."""
    outputs = list(outputs)
    if not outputs:
        raise AlignmentError("ensemble needs at least one member")
    ref = outputs[0].image_ids
    ref_set = set(ref)
    aligned = [outputs[0]]
    for out in outputs[1:]:
        pos = {img: i for i, img in enumerate(out.image_ids)}
        for img in ref:
            if img not in pos:
                raise AlignmentError(f"model {out.model_id!r} is missing image {img!r}")
        extra = [img for img in out.image_ids if img not in ref_set]
        if extra:
            raise AlignmentError(f"model {out.model_id!r} has extra image {extra[0]!r}")
        order = np.array([pos[img] for img in ref], dtype=np.int64)
        aligned.append(ModelOutputs(out.model_id, ref, out.values[order], out.is_probs))
    return aligned


def ensemble_average(outputs) -> np.ndarray:
    """Cell-wise arithmetic mean of member softmax probabilities.

    Members are reduced in a fixed order (model id, then content) so the
    result does not depend on how the list was ordered. The mean is formed
    as min + mean(p - min) and clipped to the members' range, which makes it
    exact for identical members and keeps every cell inside [min, max].
    """
    outputs = list(outputs)
    if not outputs:
        raise AlignmentError("ensemble needs at least one member")
    ks = {o.values.shape[1] for o in outputs}
    if len(ks) != 1:
        raise ValueError(f"members disagree on the number of classes: {sorted(ks)}")
    ref = outputs[0].image_ids
    if any(o.image_ids != ref for o in outputs):
        raise AlignmentError("members are not aligned; call align() first")
    members = sorted(outputs, key=lambda o: (o.model_id, o.is_probs, o.values.tobytes()))
    stack = np.stack([member_probs(o) for o in members])
    lo = stack.min(axis=0)
    hi = stack.max(axis=0)
    mean = lo + (stack - lo).sum(axis=0) / len(members)
    return np.clip(mean, lo, hi)
