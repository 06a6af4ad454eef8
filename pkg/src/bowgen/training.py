"""L1 training with Adam, inverse-sqrt warmup schedule and early stopping."""
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .exceptions import InvalidInput, NonFiniteGradient
from .model import ModelWeights, forward

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    warmup: int = 500
    k: float = 1.0
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    grad_clip: float | None = None
    max_steps: int | None = None
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.warmup < 1:
            raise InvalidInput("warmup must be >= 1")
        if self.batch_size < 1:
            raise InvalidInput("batch_size must be >= 1")
        if self.max_epochs < 1 or self.patience < 1:
            raise InvalidInput("max_epochs and patience must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def lr_schedule(n, d, k=1.0, warmup=500):
    """``k * d**-0.5 * min(n**-0.5, n * warmup**-1.5)`` for step ``n >= 1``."""
    if n < 1:
        raise InvalidInput(f"step must be >= 1, got {n}")
    return k * d ** -0.5 * min(n ** -0.5, n * warmup ** -1.5)


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    n: int = 0
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9

    def save(self, path):
        arrays = {f"m/{k}": a for k, a in self.m.items()}
        arrays.update({f"v/{k}": a for k, a in self.v.items()})
        meta = np.array(json.dumps({"n": self.n, "beta1": self.beta1,
                                    "beta2": self.beta2, "eps": self.eps}))
        with open(path, "wb") as fh:
            np.savez(fh, __meta__=meta, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            meta = json.loads(str(z["__meta__"]))
            st = cls(n=meta["n"], beta1=meta["beta1"], beta2=meta["beta2"], eps=meta["eps"])
            for key in z.files:
                if key.startswith("m/"):
                    st.m[key[2:]] = z[key].copy()
                elif key.startswith("v/"):
                    st.v[key[2:]] = z[key].copy()
        return st


def adam_step(params, state, lr, grads=None):
    """Bias-corrected Adam update in place; ``grads`` default to each tensor's ``.grad``.

    Raises :class:`NonFiniteGradient` (leaving weights untouched) if any
    gradient is NaN/inf.
    """
    if grads is None:
        grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NonFiniteGradient(bad)
    state.n += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.n
    c2 = 1.0 - b2 ** state.n
    for k, p in params.items():
        g = grads[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p.data)
            state.v[k] = np.zeros_like(p.data)
        m, v = state.m[k], state.v[k]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.data.dtype)


def clip_grad_norm(params, max_norm):
    grads = [p.grad for p in params.values() if p.grad is not None]
    total = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads)))
    if total > max_norm:
        for g in grads:
            g *= max_norm / (total + 1e-12)
    return total


def train_step(weights, state, x, y, lr, seed=None, grad_clip=None):
    """One forward/backward/update on a batch; returns the pre-update loss."""
    for p in weights.params.values():
        p.grad = None
    loss = ad.l1_loss(forward(x, weights, train_mode=True, seed=seed)[0], y)
    loss.backward()
    if grad_clip is not None:
        clip_grad_norm(weights.params, grad_clip)
    adam_step(weights.params, state, lr)
    return float(loss.data)


def evaluate_loss(weights, x, y, batch_size=32):
    """Mean L1 in eval mode over all elements of ``x``/``y`` (B, L, C)."""
    total, count = 0.0, 0
    for i in range(0, len(x), batch_size):
        pred = forward(x[i:i + batch_size], weights)[0].data
        diff = np.abs(pred.astype(np.float64) - y[i:i + batch_size])
        total += diff.sum()
        count += diff.size
    return float(total / count)


@dataclass
class FitResult:
    weights: ModelWeights
    history: list
    best_epoch: int
    best_val_loss: float
    steps: int
    optimizer: OptimizerState
    stopped_early: bool


def fit(weights, x_train, y_train, x_val, y_val, config=None, log_path=None, callback=None):
    """Train ``weights`` in place and return the best-validation snapshot.

    Arrays are (n_segments, L, C). Shuffling depends only on
    ``(config.seed, epoch)``; dropout masks on ``(config.seed, step)``.
    """
    config = config or TrainConfig()
    if len(x_train) == 0 or len(x_val) == 0:
        raise InvalidInput("training and validation sets must be nonempty")
    dtype = next(iter(weights.params.values())).data.dtype
    x_train = np.asarray(x_train, dtype=dtype)
    y_train = np.asarray(y_train, dtype=np.float64)
    x_val = np.asarray(x_val, dtype=dtype)
    y_val = np.asarray(y_val, dtype=np.float64)
    d = weights.config.d_model
    state = OptimizerState(beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    history = []
    best, best_epoch, best_loss, wait = None, 0, np.inf, 0
    stopped_early = False
    log_fh = open(log_path, "a") if log_path else None
    t0 = time.time()
    try:
        for epoch in range(1, config.max_epochs + 1):
            order = np.random.default_rng([config.seed, epoch]).permutation(len(x_train))
            sum_loss, n_seen, lr = 0.0, 0, 0.0
            for start in range(0, len(order), config.batch_size):
                if config.max_steps is not None and state.n >= config.max_steps:
                    break
                idx = order[start:start + config.batch_size]
                lr = lr_schedule(state.n + 1, d, config.k, config.warmup)
                loss = train_step(weights, state, x_train[idx], y_train[idx].astype(dtype), lr,
                                  seed=[config.seed, state.n], grad_clip=config.grad_clip)
                sum_loss += loss * len(idx)
                n_seen += len(idx)
            if n_seen == 0:
                break
            val_loss = evaluate_loss(weights, x_val, y_val, config.batch_size)
            rec = {"epoch": epoch, "train_loss": sum_loss / n_seen, "val_loss": val_loss,
                   "lr": lr, "steps": state.n, "wall_time": time.time() - t0}
            history.append(rec)
            log.info("epoch %d train %.5f val %.5f lr %.2e", epoch, rec["train_loss"], val_loss, lr)
            if log_fh:
                log_fh.write(json.dumps(rec) + "\n")
                log_fh.flush()
            if callback:
                callback(rec, weights)
            if val_loss < best_loss:
                best, best_epoch, best_loss, wait = weights.copy(), epoch, val_loss, 0
            else:
                wait += 1
                if wait >= config.patience:
                    stopped_early = True
                    break
    finally:
        if log_fh:
            log_fh.close()
    if best is None:
        best = weights.copy()
    return FitResult(best, history, best_epoch, float(best_loss), state.n, state, stopped_early)


def save_checkpoint(path, weights, state=None, extra=None):
    """Weight container at ``path`` plus optimizer sidecar ``path + '.opt.npz'``."""
    weights.save(path, extra)
    if state is not None:
        state.save(str(path) + ".opt.npz")
