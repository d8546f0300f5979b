import numpy as np
import pytest
from scipy import stats

from vceclf.data_io import LabeledManifest, ManifestRecord
from vceclf.catalog import ClassCatalog
from vceclf.sampling import (
    SamplerSpec,
    chi_square_uniform,
    class_counts,
    class_frequencies,
    draw_epoch_indices,
    inverse_frequency_weights,
    per_sample_weights,
)


def _labels(counts, rng=None):
    labels = np.repeat(np.arange(len(counts)), counts)
    return rng.permutation(labels) if rng is not None else labels


def _linear_scan(weights, n, rng):
    """Naive sampler: walk the running sum until it passes u * total."""
    total = sum(weights)
    out = []
    for _ in range(n):
        u = rng.random() * total
        acc = 0.0
        for j, w in enumerate(weights):
            acc += w
            if u < acc:
                out.append(j)
                break
        else:
            out.append(max(j for j, w in enumerate(weights) if w > 0))
    return np.array(out)


class TestCounts:
    def test_basic(self):
        np.testing.assert_array_equal(class_counts([0, 0, 1], 2), [2, 1])

    def test_empty(self):
        np.testing.assert_array_equal(class_counts([], 3), [0, 0, 0])

    def test_from_manifest(self):
        m = LabeledManifest((ManifestRecord("a", 1), ManifestRecord("b", 1)), ClassCatalog(("x", "y")))
        np.testing.assert_array_equal(class_counts(m, 2), [0, 2])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            class_counts([2], 2)
        with pytest.raises(ValueError):
            LabeledManifest((ManifestRecord("a", 2),), ClassCatalog(("x", "y")))


class TestWeights:
    @pytest.mark.parametrize("counts,expected", [
        ([100, 10], [0.01, 0.1]),
        ([1, 1, 1], [1.0, 1.0, 1.0]),
        ([5, 0], [0.2, 0.0]),
    ])
    def test_inverse_frequency(self, counts, expected):
        np.testing.assert_allclose(inverse_frequency_weights(counts), expected, rtol=1e-15)

    def test_equal_class_mass_analytic(self, rng):
        for _ in range(50):
            counts = rng.integers(0, 500, size=rng.integers(2, 11))
            counts[rng.integers(counts.size)] += 1
            labels = _labels(counts)
            w = per_sample_weights(labels, counts.size)
            mass = np.bincount(labels, weights=w, minlength=counts.size) / w.sum()
            present = counts > 0
            np.testing.assert_allclose(mass[present], 1.0 / present.sum(), rtol=1e-12)
            assert np.all(mass[~present] == 0)


class TestDraw:
    def test_900_100(self):
        labels = _labels([900, 100])
        spec = SamplerSpec.from_labels(labels, 2, seed=1)
        freq = class_frequencies(labels, draw_epoch_indices(spec, 100_000), 2)
        assert abs(freq[0] - 0.5) <= 0.01

    def test_single_record(self):
        assert np.all(draw_epoch_indices(SamplerSpec([3.0]), 50) == 0)

    def test_all_zero(self):
        with pytest.raises(ValueError):
            draw_epoch_indices(SamplerSpec([0.0, 0.0]), 10)

    def test_zero_weight_never_drawn(self):
        idx = draw_epoch_indices(SamplerSpec([0.0, 1.0, 0.0, 2.0, 0.0]), 20_000)
        assert set(np.unique(idx)) == {1, 3}

    def test_deterministic(self):
        spec = SamplerSpec(np.arange(1.0, 8.0), seed=5)
        np.testing.assert_array_equal(draw_epoch_indices(spec, 1000), draw_epoch_indices(spec, 1000))

    def test_bad_n(self):
        with pytest.raises(ValueError):
            draw_epoch_indices(SamplerSpec([1.0]), 0)

    def test_chi_square_random_counts(self, rng):
        for trial in range(10):
            counts = rng.integers(1, 300, size=rng.integers(2, 10))
            labels = _labels(counts, rng)
            idx = draw_epoch_indices(SamplerSpec.from_labels(labels, counts.size, seed=trial), 100_000)
            stat, dof = chi_square_uniform(labels, idx, counts.size)
            assert stats.chi2.sf(stat, dof) > 0.001

    def test_matches_linear_scan_distribution(self):
        weights = [0.5, 3.0, 0.0, 1.25, 2.0, 0.25]
        ours = draw_epoch_indices(SamplerSpec(weights, seed=11), 100_000)
        naive = _linear_scan(weights, 100_000, np.random.default_rng(22))
        table = np.array([np.bincount(ours, minlength=6), np.bincount(naive, minlength=6)])
        table = table[:, table.sum(axis=0) > 0]
        _, p, _, _ = stats.chi2_contingency(table)
        assert p > 0.001

    def test_without_replacement(self):
        spec = SamplerSpec([1.0, 1.0, 0.0, 5.0], replacement=False, seed=2)
        idx = draw_epoch_indices(spec, 3)
        assert sorted(idx.tolist()) == [0, 1, 3]
        with pytest.raises(ValueError):
            draw_epoch_indices(spec, 4)

    def test_weights_validated(self):
        for bad in ([], [1.0, -1.0], [np.inf], [np.nan]):
            with pytest.raises(ValueError):
                SamplerSpec(bad)
