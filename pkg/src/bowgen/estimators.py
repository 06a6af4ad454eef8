"""scikit-learn compatible wrappers around the feature, skeleton and generator code.

Sequence data is passed as ``(L, C)`` arrays, ``(B, L, C)`` arrays or lists
of ``(L_i, C)`` arrays, so the transformers compose in a ``Pipeline``.
"""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin

from . import alignment, skeleton
from .audio_features import FRAME_RATE, WINDOW_LEN, AudioClip, extract_features
from .model import ModelConfig, ModelWeights, generate, init_weights
from .training import TrainConfig, fit
from .validation import check_is_fitted, check_sequences


def _map_sequences(X, fn):
    if isinstance(X, (list, tuple)):
        return [fn(np.asarray(x)) for x in X]
    arr = np.asarray(X)
    if arr.ndim == 3:
        return np.stack([fn(x) for x in arr])
    return fn(arr)


class AudioFeatureExtractor(TransformerMixin, BaseEstimator):
    """Waveforms (``AudioClip`` or 1-D arrays at ``sample_rate``) -> list of (L, 28) matrices."""

    def __init__(self, sample_rate=44100, window_len=WINDOW_LEN, frame_rate=FRAME_RATE):
        self.sample_rate = sample_rate
        self.window_len = window_len
        self.frame_rate = frame_rate

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        clips = [X] if isinstance(X, AudioClip) or np.asarray(X[0]).ndim == 0 else X
        out = []
        for c in clips:
            if not isinstance(c, AudioClip):
                c = AudioClip(np.asarray(c), self.sample_rate)
            out.append(extract_features(c, self.window_len, self.frame_rate).frames)
        return out


class FeatureScaler(TransformerMixin, BaseEstimator):
    """Per-feature z-score fitted over every frame of the training sequences."""

    def fit(self, X, y=None):
        frames = [np.asarray(x) for x in X] if isinstance(X, (list, tuple)) else np.asarray(X)
        stats = alignment.zscore_fit(frames if isinstance(frames, list) else frames.reshape(-1, frames.shape[-1]))
        self.mean_, self.std_ = stats.mean, stats.std
        self.n_features_in_ = self.mean_.shape[0]
        return self

    @property
    def stats_(self):
        check_is_fitted(self, ["mean_", "std_"])
        return alignment.NormStats(self.mean_, self.std_)

    def transform(self, X):
        stats = self.stats_
        return _map_sequences(X, lambda x: alignment.zscore_apply(x, stats))

    def inverse_transform(self, X):
        stats = self.stats_
        return _map_sequences(X, lambda x: x * stats.std + stats.mean)


class SkeletonCleaner(TransformerMixin, BaseEstimator):
    """Zero-mean per axis, then per-channel running median."""

    def __init__(self, window=5, frame_rate=FRAME_RATE):
        self.window = window
        self.frame_rate = frame_rate

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        def one(x):
            seq = skeleton.SkeletonSequence(x, self.frame_rate)
            return skeleton.median_smooth(skeleton.normalize(seq), self.window).joints
        return _map_sequences(X, one)


class MotionGenerator(RegressorMixin, BaseEstimator):
    """Audio-feature sequences (B, L, 28) -> skeleton sequences (B, L, 45).

    ``fit`` holds out ``val_fraction`` of the sequences for early stopping
    unless ``X_val``/``y_val`` are given, and keeps the weights from the
    best validation epoch. ``score`` returns the negative mean L1 error.
    """

    def __init__(self, d_model=512, n_heads=4, d_ff=2048, n_levels=4, n_blocks=2,
                 lstm_dim=512, dropout=0.1, conv_kernel=3, segment_len=900,
                 ffn=True, refine=True, warmup=500, k=1.0, batch_size=32,
                 max_epochs=100, patience=5, max_steps=None, grad_clip=None,
                 val_fraction=0.2, random_state=0, dtype="float32"):
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_ff = d_ff
        self.n_levels = n_levels
        self.n_blocks = n_blocks
        self.lstm_dim = lstm_dim
        self.dropout = dropout
        self.conv_kernel = conv_kernel
        self.segment_len = segment_len
        self.ffn = ffn
        self.refine = refine
        self.warmup = warmup
        self.k = k
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.max_steps = max_steps
        self.grad_clip = grad_clip
        self.val_fraction = val_fraction
        self.random_state = random_state
        self.dtype = dtype

    def _model_config(self, n_features, n_outputs):
        return ModelConfig(
            d_model=self.d_model, n_heads=self.n_heads, d_ff=self.d_ff,
            n_levels=self.n_levels, n_blocks=self.n_blocks, lstm_dim=self.lstm_dim,
            dropout=self.dropout, feature_dim=n_features, body_dim=n_outputs - 6,
            rh_dim=6, conv_kernel=self.conv_kernel, segment_len=self.segment_len,
            ffn=self.ffn, refine=self.refine,
        )

    def _train_config(self):
        return TrainConfig(
            warmup=self.warmup, k=self.k, batch_size=self.batch_size,
            max_epochs=self.max_epochs, patience=self.patience, seed=self.random_state,
            grad_clip=self.grad_clip, max_steps=self.max_steps, val_fraction=self.val_fraction,
        )

    def init(self, n_features=28, n_outputs=skeleton.SKELETON_DIM):
        """Initialise weights without training (the untrained baseline)."""
        self.config_ = self._model_config(n_features, n_outputs)
        self.weights_ = init_weights(self.config_, self.random_state, np.dtype(self.dtype).type)
        self.n_features_in_ = n_features
        self.history_ = []
        return self

    def fit(self, X, y, X_val=None, y_val=None, log_path=None):
        X, _ = check_sequences(X, "X")
        y, _ = check_sequences(y, "y", n_cols=skeleton.SKELETON_DIM)
        if X.shape[:2] != y.shape[:2]:
            raise ValueError(f"X {X.shape[:2]} and y {y.shape[:2]} disagree on (B, L)")
        if X_val is None:
            train_idx, val_idx = alignment.train_val_split(
                range(len(X)), self.val_fraction, self.random_state)
            X, y, X_val, y_val = X[train_idx], y[train_idx], X[val_idx], y[val_idx]
        else:
            X_val, _ = check_sequences(X_val, "X_val", n_cols=X.shape[2])
            y_val, _ = check_sequences(y_val, "y_val", n_cols=skeleton.SKELETON_DIM)
        self.init(X.shape[2], y.shape[2])
        result = fit(self.weights_, X, y, X_val, y_val, self._train_config(), log_path=log_path)
        self.weights_ = result.weights
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.best_val_loss_ = result.best_val_loss
        self.n_steps_ = result.steps
        self.optimizer_ = result.optimizer
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X, single = check_sequences(X, "X", n_cols=self.n_features_in_)
        out = generate(X.astype(np.dtype(self.dtype)), self.weights_, self.batch_size)
        return out[0] if single else out

    def score(self, X, y, sample_weight=None):
        pred = self.predict(X)
        return -float(np.abs(pred - np.asarray(y, dtype=np.float64)).mean())

    def save(self, path, extra=None):
        check_is_fitted(self, "weights_")
        meta = {"estimator_params": self.get_params(), **(extra or {})}
        self.weights_.save(path, meta)

    @classmethod
    def load(cls, path):
        weights, extra = ModelWeights.load(path)
        params = extra.get("estimator_params", {})
        est = cls(**params)
        est.config_ = weights.config
        est.weights_ = weights
        est.n_features_in_ = weights.config.feature_dim
        est.history_ = []
        return est, extra
