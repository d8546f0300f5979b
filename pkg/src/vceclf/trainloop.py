"""Training orchestration: weighted sampling, augmentation, focal loss,
AdamW, per-epoch validation, early stopping and combined-score checkpoints.

Everything random derives from ``TrainConfig.seed``; two runs with the same
config produce identical histories and checkpoints.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .augment import AugmentConfig, apply_pipeline, eval_transform
from .catalog import ClassCatalog
from .data_io import Checkpoint, ImageBuffer, LabeledManifest, decode_image
from .loss_optim import AdamWConfig, AdamWState, FocalConfig, adamw_step, focal_loss, focal_loss_grad, resolve_alpha
from .metrics import MetricsReport, evaluate
from .nn_core import ModelParams, backward, featurize, forward, init_params, parse_arch, softmax
from .sampling import SamplerSpec, class_counts, draw_epoch_indices, per_sample_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 5
    improvement_tolerance: float = 1e-4
    seed: int = 0
    optimizer: AdamWConfig = field(default_factory=AdamWConfig)
    gamma: float = 2.0
    alpha: object = 1.0  # scalar, list of K, or "inverse_frequency"
    reduction: str = "mean"
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    feature_size: Optional[tuple[int, int]] = None
    augment_train: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.improvement_tolerance < 0:
            raise ValueError("improvement_tolerance must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.alpha, np.ndarray):
            d["alpha"] = self.alpha.tolist()
        return d


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_balanced_accuracy: float
    val_mean_auc: float
    val_combined_score: float
    improved: bool
    wall_time: float = 0.0

    def to_dict(self, timings: bool = False) -> dict:
        d = asdict(self)
        if not timings:
            del d["wall_time"]
        return d


@dataclass(frozen=True)
class EarlyStopper:
    patience: int = 5
    tolerance: float = 1e-4
    best_score: float = -math.inf
    epochs_since_improvement: int = 0


def stopper_update(stopper: EarlyStopper, score: float) -> tuple[EarlyStopper, str, bool]:
    """Returns (new stopper, "continue" | "stop", improved)."""
    if math.isnan(score):
        raise ValueError("validation score is NaN")
    if score > stopper.best_score + stopper.tolerance:
        return replace(stopper, best_score=score, epochs_since_improvement=0), "continue", True
    count = stopper.epochs_since_improvement + 1
    decision = "stop" if count >= stopper.patience else "continue"
    return replace(stopper, epochs_since_improvement=count), decision, False


def derive_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def resolve_feature_size(arch: str, feature_size=None) -> tuple[int, int]:
    _, dims = parse_arch(arch)
    if feature_size is None:
        side = math.isqrt(dims[0] // 3)
        if 3 * side * side != dims[0]:
            raise ValueError(f"cannot infer a square feature grid for input dim {dims[0]}; set feature_size")
        return side, side
    h, w = (int(v) for v in feature_size)
    if 3 * h * w != dims[0]:
        raise ValueError(f"feature grid {h}x{w} gives {3 * h * w} features but {arch!r} expects {dims[0]}")
    return h, w


class ImageCache:
    """Decodes each manifest image once."""

    def __init__(self, loader: Callable[[str], ImageBuffer] = decode_image):
        self._loader = loader
        self._cache: dict = {}

    def get(self, path) -> ImageBuffer:
        key = str(path)
        if key not in self._cache:
            self._cache[key] = self._loader(path)
        return self._cache[key]


def eval_features(manifest: LabeledManifest, cfg: AugmentConfig, feature_size, cache: Optional[ImageCache] = None) -> np.ndarray:
    cache = cache or ImageCache()
    rows = [featurize(eval_transform(cache.get(manifest.resolve(r.image_id)), cfg), feature_size)
            for r in manifest.records]
    if not rows:
        return np.zeros((0, 3 * feature_size[0] * feature_size[1]))
    return np.stack(rows)


def predict_probs(params: ModelParams, manifest: LabeledManifest, cfg: AugmentConfig, feature_size,
                  cache: Optional[ImageCache] = None) -> np.ndarray:
    return softmax(forward(params, eval_features(manifest, cfg, feature_size, cache)))


def validate(params: ModelParams, val_manifest: LabeledManifest, catalog: ClassCatalog,
             cfg: Optional[AugmentConfig] = None, feature_size=None,
             cache: Optional[ImageCache] = None) -> MetricsReport:
    """Metrics under the deterministic eval transform (resize + normalize)."""
    cfg = cfg or AugmentConfig()
    if feature_size is None:
        side = math.isqrt(params.in_dim // 3)
        feature_size = (side, side)
    probs = predict_probs(params, val_manifest, cfg, feature_size, cache)
    return evaluate(probs, val_manifest.labels, catalog)


def params_from_checkpoint(ckpt: Checkpoint) -> ModelParams:
    return ModelParams.from_vector(ckpt.params, ckpt.layer_shapes)


def train(train_manifest: LabeledManifest, val_manifest: LabeledManifest, arch: str,
          cfg: TrainConfig, on_epoch: Optional[Callable[[EpochRecord], None]] = None,
          cache: Optional[ImageCache] = None) -> tuple[Checkpoint, list[EpochRecord]]:
    if len(train_manifest) == 0:
        raise ValueError("training manifest is empty")
    if len(val_manifest) == 0:
        raise ValueError("validation manifest is empty")
    catalog = train_manifest.catalog
    if val_manifest.catalog != catalog:
        raise ValueError("training and validation manifests use different class catalogs")
    k = len(catalog)
    _, dims = parse_arch(arch)
    if dims[-1] != k:
        raise ValueError(f"architecture {arch!r} outputs {dims[-1]} classes, catalog has {k}")
    feature_size = resolve_feature_size(arch, cfg.feature_size)
    cache = cache or ImageCache()

    labels = train_manifest.labels
    counts = class_counts(labels, k)
    weights = per_sample_weights(labels, k)
    loss_cfg = FocalConfig(resolve_alpha(cfg.alpha, k, counts), cfg.gamma, cfg.reduction)
    raw = [cache.get(train_manifest.resolve(r.image_id)) for r in train_manifest.records]
    if not cfg.augment_train:
        plain = eval_features(train_manifest, cfg.augment, feature_size, cache)
    val_x = eval_features(val_manifest, cfg.augment, feature_size, cache)
    val_y = val_manifest.labels

    params = init_params(arch, derive_seed(cfg.seed, 0))
    shapes = params.shapes
    theta = params.to_vector()
    state = AdamWState.zeros(theta.size)
    stopper = EarlyStopper(cfg.patience, cfg.improvement_tolerance)
    best: Optional[Checkpoint] = None
    history: list[EpochRecord] = []
    n = len(train_manifest)

    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        order = draw_epoch_indices(SamplerSpec(weights, True, derive_seed(cfg.seed, epoch, 1)), n)
        aug_seed = derive_seed(cfg.seed, epoch, 2)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            if cfg.augment_train:
                x = np.stack([
                    featurize(apply_pipeline(raw[j], cfg.augment, aug_seed, start + i), feature_size)
                    for i, j in enumerate(batch)
                ])
            else:
                x = plain[batch]
            y = labels[batch]
            params = ModelParams.from_vector(theta, shapes)
            logits = forward(params, x)
            _, per_sample = focal_loss(logits, y, loss_cfg)
            loss_sum += float(per_sample.sum())
            grads = backward(params, x, focal_loss_grad(logits, y, loss_cfg))
            theta, state = adamw_step(theta, grads.to_vector(), state, cfg.optimizer)

        params = ModelParams.from_vector(theta, shapes)
        report = evaluate(softmax(forward(params, val_x)), val_y, catalog)
        agg = report.aggregate
        stopper, decision, improved = stopper_update(stopper, agg.combined_score)
        if improved:
            best = Checkpoint(
                params=theta.copy(),
                layer_shapes=shapes,
                epoch=epoch,
                best_combined_score=agg.combined_score,
                rng_seed=cfg.seed,
                class_catalog=catalog,
                arch=arch,
                feature_size=feature_size,
            )
        rec = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / n,
            val_balanced_accuracy=agg.balanced_accuracy,
            val_mean_auc=agg.mean_auc,
            val_combined_score=agg.combined_score,
            improved=improved,
            wall_time=time.perf_counter() - t0,
        )
        history.append(rec)
        log.info("epoch %d loss %.5f bal_acc %.4f mean_auc %.4f combined %.4f%s",
                 epoch, rec.train_loss, rec.val_balanced_accuracy, rec.val_mean_auc,
                 rec.val_combined_score, " *" if improved else "")
        if on_epoch is not None:
            on_epoch(rec)
        if decision == "stop":
            log.info("early stop after epoch %d", epoch)
            break

    assert best is not None  # the first epoch always improves on -inf
    return best, history
