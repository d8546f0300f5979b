"""Multi-class focal loss with its analytic gradient, and AdamW."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn_core import softmax

P_FLOOR = 1e-12
_LOG_FLOOR = float(np.log(P_FLOOR))


@dataclass(frozen=True)
class FocalConfig:
    alpha: np.ndarray
    gamma: float = 2.0
    reduction: str = "mean"

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.float64).ravel()
        if alpha.size == 0 or not np.isfinite(alpha).all() or (alpha <= 0).any():
            raise ValueError("alpha must be positive and finite")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.reduction not in ("mean", "sum"):
            raise ValueError(f"reduction must be 'mean' or 'sum', got {self.reduction!r}")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def uniform(cls, k: int, gamma: float = 2.0, reduction: str = "mean") -> "FocalConfig":
        return cls(np.ones(k), gamma, reduction)


def resolve_alpha(spec, k: int, counts=None) -> np.ndarray:
    """Turn a config value (scalar, list, or ``"inverse_frequency"``) into K weights.

    Inverse-frequency weights are scaled to average 1 over the non-empty
    classes; empty classes get 1 (they never contribute).
    """
    if isinstance(spec, str):
        if spec != "inverse_frequency":
            raise ValueError(f"unknown alpha spec {spec!r}")
        if counts is None:
            raise ValueError("inverse_frequency alpha needs class counts")
        counts = np.asarray(counts, dtype=np.float64)
        present = counts > 0
        alpha = np.ones(k)
        alpha[present] = 1.0 / counts[present]
        alpha[present] *= present.sum() / alpha[present].sum()
        return alpha
    alpha = np.asarray(spec, dtype=np.float64)
    if alpha.ndim == 0:
        return np.full(k, float(alpha))
    if alpha.shape != (k,):
        raise ValueError(f"alpha list must have {k} entries, got {alpha.size}")
    return alpha


def _true_class_terms(logits, targets, cfg: FocalConfig):
    """log p_t and 1 - p_t, both without catastrophic cancellation."""
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.int64)
    if z.ndim != 2 or t.shape != (z.shape[0],):
        raise ValueError(f"logits must be N x K with N targets, got {z.shape} and {t.shape}")
    k = z.shape[1]
    if cfg.alpha.size != k:
        raise ValueError(f"alpha has {cfg.alpha.size} entries for {k} classes")
    if t.size and (t.min() < 0 or t.max() >= k):
        raise ValueError(f"targets must lie in 0..{k - 1}")
    if not np.isfinite(z).all():
        raise ValueError("logits must be finite")
    rows = np.arange(z.shape[0])
    m = z.max(axis=1)
    e = np.exp(z - m[:, None])
    e_true = e[rows, t]
    # summing the off-target terms directly keeps 1 - p_t accurate near p_t = 1
    mask = np.ones_like(e, dtype=bool)
    mask[rows, t] = False
    e_other = np.where(mask, e, 0.0).sum(axis=1)
    total = e_true + e_other
    one_minus_p = e_other / total
    is_max = z[rows, t] >= m
    log_p = np.where(is_max, -np.log1p(e_other), (z[rows, t] - m) - np.log(total))
    return t, log_p, one_minus_p


def focal_loss(logits, targets, cfg: FocalConfig) -> tuple[float, np.ndarray]:
    """Returns (reduced loss, per-sample losses).

    Per sample: -alpha_t (1 - p_t)^gamma log(p_t), with p_t the softmax
    probability of the true class and p_t floored at 1e-12 inside the log.
    """
    t, log_p, one_minus_p = _true_class_terms(logits, targets, cfg)
    log_p = np.maximum(log_p, _LOG_FLOOR)
    per_sample = -cfg.alpha[t] * one_minus_p ** cfg.gamma * log_p
    if per_sample.size == 0:
        return 0.0, per_sample
    total = per_sample.mean() if cfg.reduction == "mean" else per_sample.sum()
    return float(total), per_sample


def focal_loss_grad(logits, targets, cfg: FocalConfig) -> np.ndarray:
    """dL/dlogits.

    With p = p_t and q = 1 - p the chain rule through the softmax gives

        dL/dz_j = -alpha_t [q^gamma - gamma q^(gamma-1) p log p] (onehot_j - p_j)

    which for gamma = 0, alpha = 1 is exactly softmax(z) - onehot.
    """
    t, log_p, q = _true_class_terms(logits, targets, cfg)
    probs = softmax(logits)
    p_true = probs[np.arange(t.size), t]
    if cfg.gamma == 0:
        bracket = np.ones_like(q)
    else:
        safe_q = np.where(q > 0, q, 1.0)
        hard = np.where(q > 0, cfg.gamma * safe_q ** (cfg.gamma - 1.0) * p_true * log_p, 0.0)
        bracket = q ** cfg.gamma - hard
    coef = -cfg.alpha[t] * bracket
    onehot = np.zeros_like(probs)
    onehot[np.arange(t.size), t] = 1.0
    grad = coef[:, None] * (onehot - probs)
    if cfg.reduction == "mean" and t.size:
        grad = grad / t.size
    return grad


@dataclass(frozen=True)
class AdamWConfig:
    lr: float = 1e-4
    weight_decay: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass(frozen=True)
class AdamWState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamWState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adamw_step(params, grads, state: AdamWState, cfg: AdamWConfig) -> tuple[np.ndarray, AdamWState]:
    """One decoupled-weight-decay Adam update on flat vectors.

    The decay term lr * weight_decay * theta uses the pre-update parameters
    and never passes through the moment estimates.
    """
    theta = np.asarray(params, dtype=np.float64)
    g = np.asarray(grads, dtype=np.float64)
    if theta.shape != g.shape or state.m.shape != theta.shape or state.v.shape != theta.shape:
        raise ValueError(f"shape mismatch: params {theta.shape}, grads {g.shape}, state {state.m.shape}")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g * g
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    new = theta - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps) - cfg.lr * cfg.weight_decay * theta
    return new, AdamWState(m, v, t)
