import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from _oracles import cosine_loop
from diar_adapt import AggregationConfig, AttentionAggregator, DataError, attention_aggregate, cosine_affinity
from diar_adapt.aggregate import _aggregate
from diar_adapt.synthetic import SyntheticSessionSpec, generate_synthetic_session

matrices = st.integers(1, 8).flatmap(
    lambda n: arrays(np.float64, (n, 4), elements=st.floats(-3, 3, allow_subnormal=False))
).filter(lambda X: np.all(np.linalg.norm(X, axis=1) > 1e-3))


class TestCosineAffinity:
    def test_single(self):
        np.testing.assert_array_equal(cosine_affinity([[3.0, 4.0]]), [[1.0]])

    def test_orthogonal(self):
        np.testing.assert_array_equal(cosine_affinity([[2.0, 0.0], [0.0, 5.0]]), np.eye(2))

    def test_matches_loops(self):
        X = np.random.default_rng(0).standard_normal((5, 8))
        np.testing.assert_allclose(cosine_affinity(X), cosine_loop(X), atol=1e-12)

    def test_zero_norm_names_window(self):
        with pytest.raises(DataError, match="2"):
            cosine_affinity([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    @settings(max_examples=100, deadline=None)
    @given(matrices)
    def test_invariants(self, X):
        A = cosine_affinity(X)
        np.testing.assert_array_equal(A, A.T)
        np.testing.assert_array_equal(np.diag(A), 1.0)
        assert A.min() >= -1.0 and A.max() <= 1.0


class TestAttentionAggregate:
    def test_defaults(self):
        cfg = AggregationConfig()
        assert (cfg.repetitions, cfg.temperature) == (5, 15.0)

    def test_zero_iterations_identity(self):
        X = np.random.default_rng(0).standard_normal((6, 3))
        np.testing.assert_array_equal(attention_aggregate(X, AggregationConfig(0, 15.0)), X)

    @given(st.integers(0, 8), st.floats(0.01, 100.0), st.integers(1, 10))
    def test_identical_rows_fixed_point(self, n_iter, tau, n):
        v = np.array([0.3, -1.7, 2.2, 0.05])
        X = np.tile(v, (n, 1))
        out = attention_aggregate(X, AggregationConfig(n_iter, tau))
        assert np.array_equal(out, X)

    def test_orthogonal_pair_softmax(self):
        X = np.eye(2)
        out = attention_aggregate(X, AggregationConfig(1, 15.0))
        eps = 1.0 / (1.0 + math.exp(15.0))
        assert abs(eps - 3.059e-7) < 1e-10
        expected = np.array([[1 - eps, eps], [eps, 1 - eps]])
        np.testing.assert_allclose(out, expected, atol=1e-9)

    def test_keeps_timestamps(self):
        s, _, _ = generate_synthetic_session(SyntheticSessionSpec(2, 10, seed=0))
        out = attention_aggregate(s)
        assert out.starts is s.starts or np.array_equal(out.starts, s.starts)
        assert out.dim == s.dim

    @settings(max_examples=100, deadline=None)
    @given(matrices, st.floats(0.1, 30.0))
    def test_row_stochastic_and_convex(self, X, tau):
        A = cosine_affinity(X) * tau
        W = np.exp(A - A.max(axis=1, keepdims=True))
        W /= W.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-9)
        out = attention_aggregate(X, AggregationConfig(3, tau))
        lo, hi = X.min(axis=0), X.max(axis=0)
        slack = 1e-9 * (1 + np.abs(X).max())
        assert np.all(out >= lo - slack) and np.all(out <= hi + slack)

    @settings(max_examples=50, deadline=None)
    @given(st.permutations(list(range(7))), st.integers(0, 100))
    def test_permutation_equivariant(self, perm, seed):
        X = np.random.default_rng(seed).standard_normal((7, 5))
        cfg = AggregationConfig(3, 15.0)
        np.testing.assert_allclose(attention_aggregate(X[perm], cfg), attention_aggregate(X, cfg)[perm],
                                   atol=1e-12)

    def test_denoising_two_speakers(self):
        s, truth, _ = generate_synthetic_session(SyntheticSessionSpec(2, 60, noise_sigma=0.3, seed=4))
        same = truth.labels[:, None] == truth.labels[None, :]
        off = ~np.eye(len(s), dtype=bool)

        def gap(X):
            A = cosine_affinity(X)
            return A[same & off].mean() - A[~same].mean()

        assert gap(attention_aggregate(s).vectors) > gap(s.vectors)

    def test_monotone_sharpening(self):
        rng = np.random.default_rng(0)
        centres = np.eye(3, 16)  # pairwise cosine 0
        labels = np.repeat(np.arange(3), 20)
        X = centres[labels] + 0.2 * rng.standard_normal((60, 16))
        assert cosine_affinity(centres).max(initial=0, where=~np.eye(3, dtype=bool)) < 0.2

        def within_var(Y):
            return sum(((Y[labels == c] - Y[labels == c].mean(0)) ** 2).sum() for c in range(3))

        values = [within_var(X)]
        for _ in range(6):
            X = _aggregate(X, 1, 15.0)
            values.append(within_var(X))
        assert np.all(np.diff(values) <= 1e-12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AggregationConfig(-1, 15.0)
        with pytest.raises(ValueError):
            AggregationConfig(5, 0.0)


class TestEstimator:
    def test_transformer(self):
        X = np.random.default_rng(0).standard_normal((10, 4))
        agg = AttentionAggregator(n_iter=2, temperature=5.0)
        np.testing.assert_array_equal(agg.fit_transform(X), attention_aggregate(X, AggregationConfig(2, 5.0)))
        assert agg.get_params() == {"n_iter": 2, "temperature": 5.0}
