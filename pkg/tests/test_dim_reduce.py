import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diar_adapt import DataError, SessionAutoEncoder, TrainConfig, reduce_session, train_session_ae
from diar_adapt.dim_reduce import AutoEncoderParams, decode, dump_params, encode, loss_and_grads
from diar_adapt.synthetic import SyntheticSessionSpec, generate_synthetic_session


def _random_params(d, c, rng):
    return AutoEncoderParams(
        rng.standard_normal((2 * c, d)), rng.standard_normal(2 * c),
        rng.standard_normal((d, c)), rng.standard_normal(d),
    )


def _untied_problem(rng, d=6, c=2, n=5, margin=1e-3):
    """Random params and data with every MFM pair separated by > margin."""
    while True:
        params = _random_params(d, c, rng)
        X = rng.standard_normal((n, d))
        pre = X @ params.encoder_weight.T + params.encoder_bias
        if np.all(np.abs(pre[:, :c] - pre[:, c:]) > margin):
            return params, X


def numeric_grads(params, X, h=1e-4):
    grads = []
    for arr in params.arrays():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss_and_grads(params, X)[0]
            arr[idx] = old - h
            down = loss_and_grads(params, X)[0]
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


class TestEncodeDecode:
    def test_zero_params(self):
        p = AutoEncoderParams(np.zeros((4, 3)), np.zeros(4), np.zeros((3, 2)), np.zeros(3))
        np.testing.assert_array_equal(encode(p, [1.0, 2.0, 3.0]), [0.0, 0.0])

    def test_max_semantics(self):
        # C=1, D=1: pre = (1, -1)
        p = AutoEncoderParams(np.array([[1.0], [-1.0]]), np.zeros(2), np.zeros((1, 1)), np.zeros(1))
        np.testing.assert_array_equal(encode(p, [1.0]), [1.0])

    def test_tie_takes_first_half(self):
        p = AutoEncoderParams(np.array([[1.0], [1.0]]), np.array([0.0, 0.0]), np.zeros((1, 1)), np.zeros(1))
        np.testing.assert_array_equal(encode(p, [2.0]), [2.0])

    def test_encode_matches_loops(self):
        rng = np.random.default_rng(0)
        d, c = 7, 3
        p = _random_params(d, c, rng)
        x = rng.standard_normal(d)
        pre = [sum(p.encoder_weight[r, j] * x[j] for j in range(d)) + p.encoder_bias[r] for r in range(2 * c)]
        expected = [max(pre[k], pre[k + c]) for k in range(c)]
        np.testing.assert_allclose(encode(p, x), expected, atol=1e-10)

    def test_zero_code_gives_bias(self):
        rng = np.random.default_rng(1)
        p = _random_params(5, 2, rng)
        np.testing.assert_array_equal(decode(p, np.zeros(2)), p.decoder_bias)

    def test_identity_decoder(self):
        p = AutoEncoderParams(np.zeros((6, 3)), np.zeros(6), np.eye(3), np.zeros(3))
        np.testing.assert_array_equal(decode(p, [1.0, -2.0, 0.5]), [1.0, -2.0, 0.5])

    def test_decode_matches_loops(self):
        rng = np.random.default_rng(2)
        d, c = 5, 3
        p = _random_params(d, c, rng)
        z = rng.standard_normal(c)
        expected = [sum(p.decoder_weight[i, k] * z[k] for k in range(c)) + p.decoder_bias[i] for i in range(d)]
        np.testing.assert_allclose(decode(p, z), expected, atol=1e-10)

    def test_dimension_mismatch(self):
        p = _random_params(4, 2, np.random.default_rng(0))
        with pytest.raises(ValueError):
            encode(p, np.ones(5))
        with pytest.raises(ValueError):
            decode(p, np.ones(3))

    @given(st.floats(0.1, 10.0), st.integers(0, 1000))
    def test_positive_scale_equivariance(self, s, seed):
        rng = np.random.default_rng(seed)
        p = _random_params(5, 2, rng)
        scaled = AutoEncoderParams(s * p.encoder_weight, s * p.encoder_bias, p.decoder_weight, p.decoder_bias)
        x = rng.standard_normal(5)
        np.testing.assert_allclose(encode(scaled, x), s * encode(p, x), rtol=1e-12, atol=1e-12)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            AutoEncoderParams(np.zeros((4, 3)), np.zeros(3), np.zeros((3, 2)), np.zeros(3))


class TestTraining:
    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            params, X = _untied_problem(rng)
            _, analytic = loss_and_grads(params, X)
            for a, n in zip(analytic, numeric_grads(params, X)):
                np.testing.assert_allclose(a, n, rtol=1e-4, atol=1e-10)

    def test_identical_vectors_reconstructed(self):
        v = np.random.default_rng(0).standard_normal(32)
        X = np.tile(v, (40, 1))
        p = train_session_ae(X, TrainConfig())
        assert loss_and_grads(p, X)[0] < 1e-3 * (v @ v)

    def test_deterministic(self):
        X = np.random.default_rng(3).standard_normal((30, 12))
        a = train_session_ae(X, TrainConfig(epochs=20, code_dim=4, seed=5))
        b = train_session_ae(X, TrainConfig(epochs=20, code_dim=4, seed=5))
        for x, y in zip(a.arrays(), b.arrays()):
            assert x.tobytes() == y.tobytes()

    def test_moving_average_loss_decreases(self):
        s, _, _ = generate_synthetic_session(SyntheticSessionSpec(3, 40, noise_sigma=0.3, dim=48, seed=1))
        h = np.array(train_session_ae(s).loss_history)
        assert len(h) == 200
        ma = np.convolve(h, np.ones(20) / 20, mode="valid")
        assert np.all(np.diff(ma) <= 1e-12)

    def test_too_small(self):
        with pytest.raises(DataError, match="session too small for dimensionality reduction"):
            train_session_ae(np.ones((1, 4)))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)

    def test_paper_defaults(self):
        cfg = TrainConfig()
        assert (cfg.epochs, cfg.learning_rate, cfg.code_dim) == (200, 0.001, 20)


class TestReduceSession:
    def test_default_output_dimension(self):
        s, _, _ = generate_synthetic_session(SyntheticSessionSpec(2, 30, dim=64, seed=0))
        out = reduce_session(s, TrainConfig(epochs=5))
        assert out.dim == 20
        assert out.starts.tobytes() == s.starts.tobytes()
        assert out.ends.tobytes() == s.ends.tobytes()

    def test_noise_free_separation(self):
        s, truth, _ = generate_synthetic_session(SyntheticSessionSpec(2, 30, noise_sigma=0.0, dim=64, seed=3))
        codes = reduce_session(s).vectors
        unit = codes / np.linalg.norm(codes, axis=1, keepdims=True)
        A = unit @ unit.T
        same = truth.labels[:, None] == truth.labels[None, :]
        assert A[same].min() > A[~same].max()

    def test_fewer_windows_than_code_passes_through(self, caplog):
        X = np.random.default_rng(0).standard_normal((5, 30))
        out = reduce_session(X)
        assert out is X
        assert "skipping" in caplog.text

    def test_too_small(self):
        with pytest.raises(DataError):
            reduce_session(np.ones((1, 8)))


class TestEstimator:
    def test_fit_transform(self):
        X = np.random.default_rng(0).standard_normal((40, 10))
        ae = SessionAutoEncoder(code_dim=3, epochs=10)
        Z = ae.fit_transform(X)
        assert Z.shape == (40, 3)
        assert len(ae.loss_history_) == 10
        assert ae.inverse_transform(Z).shape == (40, 10)
        assert ae.get_params()["code_dim"] == 3

    def test_not_fitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            SessionAutoEncoder().transform(np.ones((2, 3)))

    def test_dump(self, tmp_path):
        p = _random_params(3, 1, np.random.default_rng(0))
        dump_params(p, tmp_path / "ae.txt")
        text = (tmp_path / "ae.txt").read_text()
        assert "# encoder_weight 2 3" in text and "# decoder_bias 1 3" in text
