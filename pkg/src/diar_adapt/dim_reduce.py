"""Per-session autoencoder with a max-feature-map (MFM) bottleneck.

The encoder is one affine layer producing ``2 * code_dim`` pre-activations;
the code is the elementwise max of the two halves. The decoder is one affine
layer with no activation. The network is trained from scratch on every
session with full-batch Adam on the mean squared reconstruction error, so the
code adapts to the handful of speakers present in that session.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DataError, as_matrix
from .embeddings import SessionEmbeddings

logger = logging.getLogger(__name__)

__all__ = [
    "AutoEncoderParams",
    "TrainConfig",
    "SessionAutoEncoder",
    "encode",
    "decode",
    "loss_and_grads",
    "train_session_ae",
    "reduce_session",
    "dump_params",
]


@dataclass
class AutoEncoderParams:
    encoder_weight: np.ndarray  # (2C, D)
    encoder_bias: np.ndarray  # (2C,)
    decoder_weight: np.ndarray  # (D, C)
    decoder_bias: np.ndarray  # (D,)
    loss_history: list[float] = field(default_factory=list, compare=False)

    def __post_init__(self):
        two_c, d = np.shape(self.encoder_weight)
        if two_c % 2:
            raise ValueError("encoder_weight must have an even number of rows")
        c = two_c // 2
        expected = {
            "encoder_bias": (two_c,),
            "decoder_weight": (d, c),
            "decoder_bias": (d,),
        }
        for name, shape in expected.items():
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")

    @property
    def code_dim(self) -> int:
        return self.encoder_weight.shape[0] // 2

    @property
    def input_dim(self) -> int:
        return self.encoder_weight.shape[1]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return self.encoder_weight, self.encoder_bias, self.decoder_weight, self.decoder_bias

    @classmethod
    def initialise(cls, input_dim: int, code_dim: int, seed=None) -> "AutoEncoderParams":
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        enc_bound = np.sqrt(6.0 / (input_dim + 2 * code_dim))
        dec_bound = np.sqrt(6.0 / (code_dim + input_dim))
        return cls(
            encoder_weight=rng.uniform(-enc_bound, enc_bound, size=(2 * code_dim, input_dim)),
            encoder_bias=np.zeros(2 * code_dim),
            decoder_weight=rng.uniform(-dec_bound, dec_bound, size=(input_dim, code_dim)),
            decoder_bias=np.zeros(input_dim),
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    code_dim: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.code_dim < 1:
            raise ValueError("code_dim must be >= 1")


def _mfm(pre: np.ndarray, c: int) -> tuple[np.ndarray, np.ndarray]:
    first, second = pre[..., :c], pre[..., c:]
    # ties resolve to the first half
    take_first = first >= second
    return np.where(take_first, first, second), take_first


def encode(params: AutoEncoderParams, x) -> np.ndarray:
    """Map a vector (or rows of a matrix) of size D to the C-dimensional code."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.input_dim:
        raise DataError(f"expected input dimension {params.input_dim}, got {x.shape[-1]}")
    pre = x @ params.encoder_weight.T + params.encoder_bias
    return _mfm(pre, params.code_dim)[0]


def decode(params: AutoEncoderParams, code) -> np.ndarray:
    code = np.asarray(code, dtype=np.float64)
    if code.shape[-1] != params.code_dim:
        raise DataError(f"expected code dimension {params.code_dim}, got {code.shape[-1]}")
    return code @ params.decoder_weight.T + params.decoder_bias


def loss_and_grads(params: AutoEncoderParams, X: np.ndarray) -> tuple[float, tuple[np.ndarray, ...]]:
    """Mean squared reconstruction error over all entries, and its gradient.

    Gradients are returned in the order of :meth:`AutoEncoderParams.arrays`.
    """
    W_e, b_e, W_d, b_d = params.arrays()
    c = params.code_dim
    pre = X @ W_e.T + b_e
    code, take_first = _mfm(pre, c)
    resid = code @ W_d.T + b_d - X
    loss = float(np.mean(resid**2))

    d_out = 2.0 * resid / resid.size
    g_Wd = d_out.T @ code
    g_bd = d_out.sum(axis=0)
    d_code = d_out @ W_d
    d_pre = np.concatenate([d_code * take_first, d_code * ~take_first], axis=1)
    g_We = d_pre.T @ X
    g_be = d_pre.sum(axis=0)
    return loss, (g_We, g_be, g_Wd, g_bd)


def train_session_ae(session, config: TrainConfig | None = None) -> AutoEncoderParams:
    """Fit an autoencoder to one session's embeddings.

    Runs ``config.epochs`` full-batch Adam steps. The loss before each step
    is stored in ``params.loss_history``.

    Raises
    ------
    DataError
        If the session has fewer than two windows.
    """
    config = config or TrainConfig()
    X = as_matrix(session, min_samples=1)
    if X.shape[0] < 2:
        raise DataError("session too small for dimensionality reduction")

    params = AutoEncoderParams.initialise(X.shape[1], config.code_dim, config.seed)
    arrays = params.arrays()
    m = [np.zeros_like(a) for a in arrays]
    v = [np.zeros_like(a) for a in arrays]
    b1, b2, eps, lr = config.adam_beta1, config.adam_beta2, config.adam_epsilon, config.learning_rate

    history = []
    for t in range(1, config.epochs + 1):
        loss, grads = loss_and_grads(params, X)
        history.append(loss)
        for a, g, m_i, v_i in zip(arrays, grads, m, v):
            m_i *= b1
            m_i += (1 - b1) * g
            v_i *= b2
            v_i += (1 - b2) * g * g
            m_hat = m_i / (1 - b1**t)
            v_hat = v_i / (1 - b2**t)
            a -= lr * m_hat / (np.sqrt(v_hat) + eps)
    params.loss_history = history
    return params


def reduce_session(session, config: TrainConfig | None = None):
    """Train an autoencoder on ``session`` and return its codes.

    Sessions with fewer windows than ``config.code_dim`` are returned
    unchanged: a projection fitted to so few points is not trustworthy.
    """
    config = config or TrainConfig()
    X = as_matrix(session)
    if X.shape[0] < 2:
        raise DataError("session too small for dimensionality reduction")
    if X.shape[0] < config.code_dim:
        logger.warning(
            "session has %d windows (< code_dim=%d); skipping dimensionality reduction",
            X.shape[0], config.code_dim,
        )
        return session
    params = train_session_ae(X, config)
    codes = encode(params, X)
    if isinstance(session, SessionEmbeddings):
        return session.with_vectors(codes)
    return codes


def dump_params(params: AutoEncoderParams, path) -> None:
    """Write parameters as text: a ``# name rows cols`` header then row-major values."""
    with open(path, "w", encoding="utf-8") as fh:
        names = ("encoder_weight", "encoder_bias", "decoder_weight", "decoder_bias")
        for name, arr in zip(names, params.arrays()):
            arr2 = np.atleast_2d(arr)
            fh.write(f"# {name} {arr2.shape[0]} {arr2.shape[1]}\n")
            np.savetxt(fh, arr2, fmt="%.10g")


class SessionAutoEncoder(TransformerMixin, BaseEstimator):
    """Per-session MFM autoencoder as a scikit-learn transformer.

    ``fit`` trains on the given session; ``transform`` returns codes.
    Refit for every new session.

    Parameters
    ----------
    code_dim : int, default=20
    epochs : int, default=200
    learning_rate : float, default=0.001
    beta1, beta2, epsilon : float
        Adam constants.
    random_state : int, default=0
        Seed for weight initialisation.

    Attributes
    ----------
    params_ : AutoEncoderParams
    loss_history_ : list of float
    """

    def __init__(self, code_dim=20, epochs=200, learning_rate=0.001, beta1=0.9,
                 beta2=0.999, epsilon=1e-8, random_state=0):
        self.code_dim = code_dim
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            adam_beta1=self.beta1,
            adam_beta2=self.beta2,
            adam_epsilon=self.epsilon,
            code_dim=self.code_dim,
            seed=self.random_state,
        )

    def fit(self, X, y=None):
        X = as_matrix(X)
        self.params_ = train_session_ae(X, self._config())
        self.loss_history_ = self.params_.loss_history
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return encode(self.params_, as_matrix(X))

    def inverse_transform(self, codes):
        check_is_fitted(self, "params_")
        return decode(self.params_, codes)
