"""Declarative run configuration (JSON or YAML) mapped onto TrainConfig.

Recognised keys::

    seed, batch_size, max_epochs, patience, improvement_tolerance,
    arch, classes, feature_size, augment_train,
    train_manifest, val_manifest, out_dir,
    loss.gamma, loss.alpha, loss.reduction,
    optim.lr, optim.weight_decay, optim.betas, optim.eps,
    augment.<any AugmentConfig field>
"""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path

import yaml

from .augment import AugmentConfig
from .loss_optim import AdamWConfig
from .trainloop import TrainConfig

TOP_KEYS = {
    "seed", "batch_size", "max_epochs", "patience", "improvement_tolerance",
    "arch", "classes", "feature_size", "augment_train",
    "train_manifest", "val_manifest", "out_dir",
    "loss", "optim", "augment",
}
LOSS_KEYS = {"gamma", "alpha", "reduction"}
OPTIM_KEYS = {"lr", "weight_decay", "betas", "eps"}
AUGMENT_KEYS = {f.name for f in fields(AugmentConfig)}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    check_keys(data)
    return data


def check_keys(data: dict) -> None:
    _reject(set(data) - TOP_KEYS, "")
    for section, allowed in (("loss", LOSS_KEYS), ("optim", OPTIM_KEYS), ("augment", AUGMENT_KEYS)):
        sub = data.get(section) or {}
        if not isinstance(sub, dict):
            raise ConfigError(f"'{section}' must be a mapping")
        _reject(set(sub) - allowed, f"{section}.")


def _reject(unknown: set, prefix: str) -> None:
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(prefix + k for k in sorted(unknown))}")


def build_train_config(data: dict) -> TrainConfig:
    loss = data.get("loss") or {}
    optim = dict(data.get("optim") or {})
    if "betas" in optim:
        optim["beta1"], optim["beta2"] = optim.pop("betas")
    kwargs = {k: data[k] for k in ("seed", "batch_size", "max_epochs", "patience",
                                   "improvement_tolerance", "augment_train") if k in data}
    if data.get("feature_size") is not None:
        kwargs["feature_size"] = tuple(data["feature_size"])
    return TrainConfig(
        optimizer=AdamWConfig(**optim),
        gamma=loss.get("gamma", 2.0),
        alpha=loss.get("alpha", 1.0),
        reduction=loss.get("reduction", "mean"),
        augment=AugmentConfig(**(data.get("augment") or {})),
        **kwargs,
    )


def resolved(data: dict, cfg: TrainConfig) -> dict:
    """Flat, JSON-ready view of everything a run will use."""
    out = {k: v for k, v in data.items() if k not in ("loss", "optim", "augment")}
    d = cfg.to_dict()
    opt = d.pop("optimizer")
    out.update({k: d[k] for k in ("seed", "batch_size", "max_epochs", "patience",
                                  "improvement_tolerance", "feature_size", "augment_train")})
    out["loss"] = {"gamma": d["gamma"], "alpha": d["alpha"], "reduction": d["reduction"]}
    out["optim"] = {"lr": opt["lr"], "weight_decay": opt["weight_decay"],
                    "betas": [opt["beta1"], opt["beta2"]], "eps": opt["eps"]}
    out["augment"] = d["augment"]
    return out
