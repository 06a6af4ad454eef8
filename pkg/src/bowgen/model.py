"""Audio-to-skeleton generator: U-net encoder with relative-position self-attention
at the bottleneck, position-wise FFN, LSTM decoders and a right-wrist refine branch.
"""
import json
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff.ops import RunningStats
from .exceptions import InvalidInput, ShapeError
from .skeleton import DEFAULT_SPLIT

WEIGHTS_MAGIC = b"BGW1"
FORMAT_VERSION = 1


@dataclass
class ModelConfig:
    d_model: int = 512
    n_heads: int = 4
    d_ff: int = 2048
    n_levels: int = 4
    n_blocks: int = 2
    lstm_dim: int = 512
    dropout: float = 0.1
    feature_dim: int = 28
    body_dim: int = 39
    rh_dim: int = 6
    conv_kernel: int = 3
    segment_len: int = 900
    max_rel_dist: int | None = None
    ffn: bool = True
    refine: bool = True
    attn_ffn: bool = False
    conv_dropout: bool = False

    def __post_init__(self):
        dims = ("d_model", "n_heads", "d_ff", "n_levels", "n_blocks", "lstm_dim",
                "feature_dim", "body_dim", "rh_dim", "conv_kernel", "segment_len")
        for name in dims:
            if getattr(self, name) <= 0:
                raise InvalidInput(f"{name} must be positive")
        if self.d_model % self.n_heads:
            raise InvalidInput(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.conv_kernel % 2 == 0:
            raise InvalidInput("conv_kernel must be odd")
        if self.rh_dim < 3:
            raise InvalidInput("rh_dim must hold at least the wrist (3 columns)")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidInput("dropout must be in [0, 1)")
        if self.max_rel_dist is None:
            self.max_rel_dist = max(1, bottleneck_len(self.segment_len, self.n_levels) - 1)

    @property
    def head_dim(self):
        return self.d_model // self.n_heads

    @property
    def min_len(self):
        return 2 ** self.n_levels

    @property
    def output_dim(self):
        return self.body_dim + self.rh_dim

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def bottleneck_len(length, n_levels):
    for _ in range(n_levels):
        length = -(-length // 2)
    return length


class ModelWeights:
    """Named parameter tensors plus batch-norm running statistics."""

    def __init__(self, config, params, buffers=None):
        self.config = config
        self.params = dict(params)
        self.buffers = dict(buffers or {})

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def named_parameters(self):
        return list(self.params.items())

    def n_parameters(self):
        return int(sum(p.size for p in self.params.values()))

    def astype(self, dtype):
        params = {k: ad.Tensor(v.data.astype(dtype), requires_grad=True) for k, v in self.params.items()}
        buffers = {}
        for k, rs in self.buffers.items():
            nb = RunningStats(rs.mean.shape[0], dtype)
            nb.mean[...] = rs.mean
            nb.var[...] = rs.var
            buffers[k] = nb
        return ModelWeights(self.config, params, buffers)

    def copy(self):
        return self.astype(next(iter(self.params.values())).data.dtype)

    def state_arrays(self):
        """Flat name -> array map including running statistics."""
        out = {k: v.data for k, v in self.params.items()}
        for k, rs in self.buffers.items():
            out[f"{k}.running_mean"] = rs.mean
            out[f"{k}.running_var"] = rs.var
        return out

    def load_state_arrays(self, arrays):
        for name, p in self.params.items():
            if name not in arrays:
                raise InvalidInput(f"missing parameter {name!r}")
            a = np.asarray(arrays[name])
            if a.shape != p.shape:
                raise ShapeError(f"parameter {name!r}: expected shape {p.shape}, got {a.shape}")
            p.data[...] = a
        for name, rs in self.buffers.items():
            for attr in ("mean", "var"):
                key = f"{name}.running_{attr}"
                if key not in arrays:
                    raise InvalidInput(f"missing buffer {key!r}")
                getattr(rs, attr)[...] = arrays[key]

    def save(self, path, extra=None):
        """Write the weight container: JSON manifest followed by little-endian f32 payloads."""
        arrays = self.state_arrays()
        entries, offset = [], 0
        for name, a in arrays.items():
            entries.append({"name": name, "shape": list(a.shape), "offset": offset})
            offset += 4 * a.size
        manifest = json.dumps({
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "tensors": entries,
            "extra": extra or {},
        }, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(WEIGHTS_MAGIC)
            fh.write(struct.pack("<I", len(manifest)))
            fh.write(manifest)
            for a in arrays.values():
                fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())

    @staticmethod
    def read_manifest(path):
        data = Path(path).read_bytes()
        if data[:4] != WEIGHTS_MAGIC:
            raise InvalidInput(f"{path}: not a weight container")
        (n,) = struct.unpack_from("<I", data, 4)
        manifest = json.loads(data[8:8 + n])
        if manifest.get("format_version") != FORMAT_VERSION:
            raise InvalidInput(f"{path}: unsupported format version {manifest.get('format_version')}")
        return manifest, data[8 + n:]

    @classmethod
    def load(cls, path, config=None, dtype=np.float32):
        """Load a container; with ``config`` given, shapes are checked against it."""
        manifest, payload = cls.read_manifest(path)
        stored = ModelConfig.from_dict(manifest["config"])
        weights = init_weights(config or stored, seed=0, dtype=dtype)
        arrays = {}
        for e in manifest["tensors"]:
            n = int(np.prod(e["shape"]))
            arrays[e["name"]] = np.frombuffer(payload, "<f4", n, e["offset"]).reshape(e["shape"])
        weights.load_state_arrays(arrays)
        return weights, manifest.get("extra", {})


# ------------------------------------------------------------- initialisation

def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape).astype(dtype)


def _orthogonal(rng, n, dtype):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * np.sign(np.diag(r))).astype(dtype)


def init_weights(config, seed=0, dtype=None):
    """Glorot-uniform linear/conv/embedding weights, orthogonal recurrent weights,
    forget-gate bias 1, other biases 0, batch-norm scale 1 / shift 0."""
    dtype = dtype or ad.get_default_dtype()
    rng = np.random.default_rng(seed)
    c = config
    d, k, H = c.d_model, c.conv_kernel, c.lstm_dim
    p, buffers = {}, {}

    def linear(name, n_in, n_out, bias=True):
        p[f"{name}.weight"] = _glorot(rng, (n_in, n_out), n_in, n_out, dtype)
        if bias:
            p[f"{name}.bias"] = np.zeros(n_out, dtype)

    def conv_bn(name, c_in, c_out):
        p[f"{name}.conv.weight"] = _glorot(rng, (c_out, c_in, k), c_in * k, c_out * k, dtype)
        p[f"{name}.conv.bias"] = np.zeros(c_out, dtype)
        p[f"{name}.bn.gamma"] = np.ones(c_out, dtype)
        p[f"{name}.bn.beta"] = np.zeros(c_out, dtype)
        buffers[f"{name}.bn"] = RunningStats(c_out, dtype)

    def lstm(name, d_in):
        p[f"{name}.w_ih"] = np.concatenate(
            [_glorot(rng, (H, d_in), d_in, H, dtype) for _ in range(4)])
        p[f"{name}.w_hh"] = np.concatenate([_orthogonal(rng, H, dtype) for _ in range(4)])
        b = np.zeros(4 * H, dtype)
        b[H:2 * H] = 1.0
        p[f"{name}.bias"] = b

    def ffn(name):
        linear(f"{name}.1", d, c.d_ff)
        linear(f"{name}.2", c.d_ff, d)

    linear("input", c.feature_dim, d)
    n_rel = 2 * c.max_rel_dist + 1
    for m in range(c.n_blocks):
        for lvl in range(c.n_levels):
            conv_bn(f"block{m}.down{lvl}.1", d, d)
            conv_bn(f"block{m}.down{lvl}.2", d, d)
        for name in ("q", "k", "v", "o"):
            linear(f"block{m}.attn.{name}", d, d, bias=False)
        p[f"block{m}.attn.rel_k"] = _glorot(rng, (n_rel, c.head_dim), n_rel, c.head_dim, dtype)
        p[f"block{m}.attn.rel_v"] = _glorot(rng, (n_rel, c.head_dim), n_rel, c.head_dim, dtype)
        if c.attn_ffn:
            ffn(f"block{m}.attn.ffn")
        for lvl in range(c.n_levels):
            conv_bn(f"block{m}.up{lvl}.1", 2 * d, d)
            conv_bn(f"block{m}.up{lvl}.2", d, d)
    if c.ffn:
        ffn("ffn")
    lstm("rh.lstm", d)
    linear("rh.out", H, c.rh_dim)
    if c.refine:
        linear("refine", d, 3)
    lstm("body.lstm", c.feature_dim)
    linear("body.out", H, c.body_dim)

    params = {name: ad.Tensor(v, requires_grad=True) for name, v in p.items()}
    return ModelWeights(config, params, buffers)


# ------------------------------------------------------------------- forward

def _rel_index(length, max_dist):
    pos = np.arange(length)
    return np.clip(pos[None, :] - pos[:, None], -max_dist, max_dist) + max_dist


def attention(x, weights, prefix, config, trace=None):
    """Multi-head self-attention with relative-position keys and values, plus residual.

    Per head, ``logits[i, j] = (q_i . k_j + q_i . r^K_{j-i}) / sqrt(d_h)`` and
    the output is ``sum_j a_ij (v_j + r^V_{j-i})``, with distances clipped to
    ``config.max_rel_dist`` and the two tables shared by all heads.
    """
    B, L, d = x.shape
    if d != config.d_model:
        raise ShapeError(f"attention: expected {config.d_model} channels, got {d}")
    h, dh = config.n_heads, config.head_dim

    def heads(t):
        return t.reshape(B, L, h, dh).transpose(0, 2, 1, 3)

    q = heads(ad.matmul(x, weights[f"{prefix}.q.weight"]))
    k = heads(ad.matmul(x, weights[f"{prefix}.k.weight"]))
    v = heads(ad.matmul(x, weights[f"{prefix}.v.weight"]))
    idx = _rel_index(L, config.max_rel_dist)
    rk = ad.gather(weights[f"{prefix}.rel_k"], idx)  # (L, L, dh)
    rv = ad.gather(weights[f"{prefix}.rel_v"], idx)
    logits = ad.matmul(q, k.transpose(0, 1, 3, 2)) + ad.einsum("bhid,ijd->bhij", q, rk)
    attn = ad.softmax(logits * (1.0 / np.sqrt(dh)), axis=-1)
    if trace is not None:
        trace.setdefault("attention", []).append(attn.data)
    out = ad.matmul(attn, v) + ad.einsum("bhij,ijd->bhid", attn, rv)
    out = out.transpose(0, 2, 1, 3).reshape(B, L, d)
    return ad.matmul(out, weights[f"{prefix}.o.weight"]) + x


def ffn(x, weights, prefix):
    """``max(0, x W1 + b1) W2 + b2`` applied independently at each time step."""
    hidden = ad.relu(ad.linear(x, weights[f"{prefix}.1.weight"], weights[f"{prefix}.1.bias"]))
    return ad.linear(hidden, weights[f"{prefix}.2.weight"], weights[f"{prefix}.2.bias"])


def _conv_bn_relu(x, weights, name, train_mode, rng, config):
    y = ad.conv1d(x, weights[f"{name}.conv.weight"], weights[f"{name}.conv.bias"])
    y = ad.batch_norm1d(y, weights[f"{name}.bn.gamma"], weights[f"{name}.bn.beta"],
                        weights.buffers[f"{name}.bn"], train_mode)
    y = ad.relu(y)
    if config.conv_dropout:
        y = ad.dropout(y, config.dropout, train_mode, rng=rng)
    return y


def unet_block(x, weights, prefix, config, train_mode=False, rng=None, trace=None):
    """One U-net pass: N x (pool, 2 conv blocks), attention, N x (upsample, concat skip, 2 conv blocks)."""
    L = x.shape[-2]
    if L < config.min_len:
        raise InvalidInput(f"sequence length {L} < 2**n_levels = {config.min_len}")
    skips = []
    h = x
    for lvl in range(config.n_levels):
        skips.append(h)
        h = ad.avg_pool1d(h)
        h = _conv_bn_relu(h, weights, f"{prefix}.down{lvl}.1", train_mode, rng, config)
        h = _conv_bn_relu(h, weights, f"{prefix}.down{lvl}.2", train_mode, rng, config)
    h = attention(h, weights, f"{prefix}.attn", config, trace)
    if config.attn_ffn:
        h = ffn(h, weights, f"{prefix}.attn.ffn") + h
    for lvl in reversed(range(config.n_levels)):
        skip = skips[lvl]
        h = ad.linear_upsample(h, skip.shape[-2])
        h = ad.concat([h, skip], axis=-1)
        h = _conv_bn_relu(h, weights, f"{prefix}.up{lvl}.1", train_mode, rng, config)
        h = _conv_bn_relu(h, weights, f"{prefix}.up{lvl}.2", train_mode, rng, config)
    return h


def _decoder(x, weights, prefix, train_mode, rng, config):
    h = ad.lstm(x, weights[f"{prefix}.lstm.w_ih"], weights[f"{prefix}.lstm.w_hh"],
                weights[f"{prefix}.lstm.bias"])
    h = ad.dropout(h, config.dropout, train_mode, rng=rng)
    return ad.linear(h, weights[f"{prefix}.out.weight"], weights[f"{prefix}.out.bias"])


def forward(features, weights, config=None, train_mode=False, seed=None,
            body_split=DEFAULT_SPLIT, trace=None):
    """Generate skeletons from audio features.

    ``features`` is (L, 28) or (B, L, 28), as an array or Tensor. Returns
    ``(full, body, righthand)`` tensors; ``full`` is in the 45-D joint
    layout with the right-hand columns placed at the joints named by
    ``body_split``.
    """
    config = config or weights.config
    x = features if isinstance(features, ad.Tensor) else ad.Tensor(
        np.asarray(features, dtype=next(iter(weights.params.values())).data.dtype))
    squeeze = x.ndim == 2
    if squeeze:
        x = x.reshape((1,) + x.shape)
    if x.ndim != 3 or x.shape[-1] != config.feature_dim:
        raise ShapeError(f"features must be (B, L, {config.feature_dim}), got {x.shape}")
    if not np.all(np.isfinite(x.data)):
        raise InvalidInput("features contain non-finite values")
    if x.shape[1] < config.min_len:
        raise InvalidInput(f"sequence length {x.shape[1]} < 2**n_levels = {config.min_len}")
    if len(body_split.body_columns) != config.body_dim or \
            len(body_split.righthand_columns) != config.rh_dim:
        raise ShapeError("body split does not match the configured output dims")
    rng = np.random.default_rng(seed)

    h = ad.linear(x, weights["input.weight"], weights["input.bias"])
    for m in range(config.n_blocks):
        h = unet_block(h, weights, f"block{m}", config, train_mode, rng, trace)
    if config.ffn:
        h = ffn(h, weights, "ffn")

    rh = _decoder(h, weights, "rh", train_mode, rng, config)
    if config.refine:
        wrist = ad.linear(h, weights["refine.weight"], weights["refine.bias"])
        zeros = ad.Tensor(np.zeros(wrist.shape[:-1] + (config.rh_dim - 3,), wrist.dtype))
        rh = rh + ad.concat([zeros, wrist], axis=-1)
    body = _decoder(x, weights, "body", train_mode, rng, config)
    full = ad.concat([body, rh], axis=-1)[..., body_split.inverse_permutation]
    if squeeze:
        full, body, rh = (t.reshape(t.shape[1:]) for t in (full, body, rh))
    return full, body, rh


def generate(features, weights, batch_size=8):
    """Eval-mode convenience wrapper returning a numpy array (L, 45) or (B, L, 45)."""
    x = np.asarray(features)
    if x.ndim == 2:
        return forward(x, weights)[0].data.astype(np.float64)
    outs = [forward(x[i:i + batch_size], weights)[0].data for i in range(0, len(x), batch_size)]
    return np.concatenate(outs).astype(np.float64)
