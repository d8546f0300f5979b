import mpmath
import numpy as np
import pytest

from vceclf.loss_optim import (
    AdamWConfig,
    AdamWState,
    FocalConfig,
    adamw_step,
    focal_loss,
    focal_loss_grad,
    resolve_alpha,
)
from vceclf.nn_core import softmax

mpmath.mp.dps = 50


def _logits_for(p_t, k, target=0):
    """Logits whose softmax puts p_t on the target and splits the rest evenly."""
    z = np.full(k, np.log((1.0 - p_t) / (k - 1)))
    z[target] = np.log(p_t)
    return z


def _mp_focal(logits, t, alpha, gamma):
    """High-precision oracle computed straight from the logits."""
    z = [mpmath.mpf(float(v)) for v in logits]
    total = mpmath.fsum(mpmath.exp(v) for v in z)
    p = mpmath.exp(z[t]) / total
    return -alpha * (1 - p) ** gamma * mpmath.log(p)


def _mp_adam(theta, grads, lr, b1, b2, eps):
    m = v = 0.0
    out = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        theta = theta - lr * mh / (np.sqrt(vh) + eps)
        out.append(theta)
    return out


class TestFocal:
    @pytest.mark.parametrize("p,gamma,alpha,expected", [
        (0.9, 0.0, 1.0, 0.105361),
        (0.5, 2.0, 0.25, 0.0433217),
    ])
    def test_spot_values(self, p, gamma, alpha, expected):
        cfg = FocalConfig(np.full(2, alpha), gamma)
        _, per = focal_loss(_logits_for(p, 2)[None, :], [0], cfg)
        assert round(per[0], 6) == round(expected, 6)
        assert abs(per[0] - expected) < 5e-7
        assert float(abs(per[0] - _mp_focal(_logits_for(p, 2), 0, alpha, gamma))) < 1e-12

    def test_formula_against_high_precision(self, rng):
        worst = 0.0
        for _ in range(1000):
            k = int(rng.integers(2, 11))
            p = float(10 ** rng.uniform(-8, np.log10(0.999999)))
            gamma = float(rng.uniform(0, 5))
            alpha = float(rng.uniform(0.05, 4))
            t = int(rng.integers(k))
            z = _logits_for(p, k, t) + rng.normal()
            cfg = FocalConfig(np.full(k, alpha), gamma)
            _, per = focal_loss(z[None, :], [t], cfg)
            ref = _mp_focal(z, t, alpha, gamma)
            worst = max(worst, float(abs((per[0] - ref) / ref)))
        assert worst < 1e-9

    def test_confident_prediction(self):
        z = np.array([[40.0, 0.0, 0.0]])
        _, per = focal_loss(z, [0], FocalConfig.uniform(3, 2.0))
        ref = _mp_focal(z[0], 0, 1, 2)
        assert per[0] > 0
        assert abs(per[0] - ref) / ref < 1e-9

    def test_floor(self):
        z = np.array([[0.0, 1000.0]])
        _, per = focal_loss(z, [0], FocalConfig.uniform(2, 0.0))
        assert per[0] == pytest.approx(-np.log(1e-12), rel=1e-12)

    def test_gamma_zero_is_cross_entropy(self, rng):
        z = rng.normal(scale=3, size=(64, 6))
        t = rng.integers(0, 6, size=64)
        _, per = focal_loss(z, t, FocalConfig.uniform(6, 0.0))
        ce = -np.log(softmax(z)[np.arange(64), t])
        np.testing.assert_allclose(per, ce, atol=1e-12)

    def test_ratio_to_cross_entropy(self, rng):
        z = rng.normal(scale=2, size=(64, 5))
        t = rng.integers(0, 5, size=64)
        alpha = rng.uniform(0.1, 2.0, size=5)
        _, foc = focal_loss(z, t, FocalConfig(alpha, 2.5))
        p = softmax(z)[np.arange(64), t]
        ce = -np.log(p)
        np.testing.assert_allclose(foc / ce, alpha[t] * (1 - p) ** 2.5, rtol=1e-9)

    def test_reductions(self, rng):
        z = rng.normal(size=(10, 3))
        t = rng.integers(0, 3, size=10)
        mean, per = focal_loss(z, t, FocalConfig.uniform(3))
        total, _ = focal_loss(z, t, FocalConfig.uniform(3, reduction="sum"))
        assert mean == pytest.approx(per.mean(), rel=1e-15)
        assert total == pytest.approx(per.sum(), rel=1e-15)

    def test_invalid(self):
        with pytest.raises(ValueError):
            FocalConfig(np.ones(2), gamma=-1)
        with pytest.raises(ValueError):
            FocalConfig(np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            focal_loss(np.zeros((1, 3)), [3], FocalConfig.uniform(3))
        with pytest.raises(ValueError):
            focal_loss(np.zeros((1, 3)), [0], FocalConfig.uniform(2))


class TestFocalGrad:
    def test_gamma_zero_is_softmax_minus_onehot(self, rng):
        z = rng.normal(scale=3, size=(20, 4))
        t = rng.integers(0, 4, size=20)
        g = focal_loss_grad(z, t, FocalConfig.uniform(4, 0.0, reduction="sum"))
        onehot = np.eye(4)[t]
        np.testing.assert_array_equal(g, softmax(z) - onehot)

    def test_finite_differences(self, rng):
        worst = 0.0
        eps = 1e-6
        for _ in range(100):
            n, k = int(rng.integers(1, 6)), int(rng.integers(2, 8))
            z = rng.normal(scale=2, size=(n, k))
            t = rng.integers(0, k, size=n)
            cfg = FocalConfig(rng.uniform(0.2, 2.0, size=k), float(rng.uniform(0, 4)),
                              reduction=("mean", "sum")[int(rng.integers(2))])
            g = focal_loss_grad(z, t, cfg)
            num = np.empty_like(z)
            for idx in np.ndindex(z.shape):
                up, dn = z.copy(), z.copy()
                up[idx] += eps
                dn[idx] -= eps
                num[idx] = (focal_loss(up, t, cfg)[0] - focal_loss(dn, t, cfg)[0]) / (2 * eps)
            scale = max(np.abs(num).max(), np.abs(g).max(), 1e-8)
            worst = max(worst, np.abs(g - num).max() / scale)
        assert worst < 1e-4

    def test_rows_sum_to_zero(self, rng):
        z = rng.normal(size=(30, 5))
        g = focal_loss_grad(z, rng.integers(0, 5, size=30), FocalConfig.uniform(5))
        np.testing.assert_allclose(g.sum(axis=1), 0.0, atol=1e-15)


class TestAlpha:
    def test_scalar_and_list(self):
        np.testing.assert_array_equal(resolve_alpha(0.25, 3), [0.25] * 3)
        np.testing.assert_array_equal(resolve_alpha([1, 2, 3], 3), [1, 2, 3])
        with pytest.raises(ValueError):
            resolve_alpha([1, 2], 3)

    def test_inverse_frequency(self):
        a = resolve_alpha("inverse_frequency", 3, [100, 50, 0])
        np.testing.assert_allclose(a[:2], [2 / 3, 4 / 3])
        with pytest.raises(ValueError):
            resolve_alpha("inverse_frequency", 3)


class TestAdamW:
    def test_first_step(self):
        new, state = adamw_step(np.array([1.0]), np.array([0.5]), AdamWState.zeros(1), AdamWConfig())
        # 1 - 1e-4 * 0.5 / (0.5 + 1e-8) - 1e-4 * 0.05
        assert new[0] == pytest.approx(0.9998950, abs=1e-9)
        assert state.t == 1

    def test_matches_plain_adam_without_decay(self, rng):
        cfg = AdamWConfig(lr=1e-3, weight_decay=0.0)
        grads = rng.normal(size=(1000, 4))
        theta0 = rng.normal(size=4)
        theta, state = theta0.copy(), AdamWState.zeros(4)
        traj = []
        for g in grads:
            theta, state = adamw_step(theta, g, state, cfg)
            traj.append(theta)
        for j in range(4):
            ref = _mp_adam(theta0[j], grads[:, j], cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            np.testing.assert_allclose([row[j] for row in traj], ref, atol=1e-12, rtol=0)

    def test_pure_decay(self):
        cfg = AdamWConfig(lr=1e-2, weight_decay=0.1)
        theta, state = np.array([2.0, -3.0]), AdamWState.zeros(2)
        for step in range(1, 101):
            theta, state = adamw_step(theta, np.zeros(2), state, cfg)
            np.testing.assert_allclose(theta, np.array([2.0, -3.0]) * (1 - 1e-3) ** step, rtol=1e-12)

    def test_decay_is_decoupled(self, rng):
        # the decay term does not scale with the gradient magnitude
        g = rng.normal(size=5)
        theta = rng.normal(size=5)
        a, _ = adamw_step(theta, g, AdamWState.zeros(5), AdamWConfig(weight_decay=0.05))
        b, _ = adamw_step(theta, g, AdamWState.zeros(5), AdamWConfig(weight_decay=0.0))
        np.testing.assert_allclose(b - a, 1e-4 * 0.05 * theta, rtol=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adamw_step(np.zeros(3), np.zeros(2), AdamWState.zeros(3), AdamWConfig())

    def test_invalid_config(self):
        for kw in ({"lr": 0}, {"beta1": 1.0}, {"eps": 0}, {"weight_decay": -1}):
            with pytest.raises(ValueError):
                AdamWConfig(**kw)
