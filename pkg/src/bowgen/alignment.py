"""Beat alignment by DTW, beat-anchored segmentation, z-scoring, tempo resampling and folds."""
import logging
from dataclasses import dataclass

import numba
import numpy as np

from .audio_features import AudioFeatureSequence, N_MFCC
from .exceptions import InvalidInput, ShapeError

log = logging.getLogger(__name__)

SEGMENT_LEN = 900
STD_FLOOR = 1e-8


@dataclass(frozen=True)
class BeatGrid:
    beat_times: tuple

    def __post_init__(self):
        t = tuple(float(b) for b in self.beat_times)
        if any(b < 0 for b in t):
            raise InvalidInput("beat times must be nonnegative")
        if any(b2 <= b1 for b1, b2 in zip(t, t[1:])):
            raise InvalidInput("beat times must be strictly increasing")
        object.__setattr__(self, "beat_times", t)

    def __len__(self):
        return len(self.beat_times)


@dataclass
class Segment:
    features: np.ndarray  # (L, 28)
    skeleton: np.ndarray  # (L, 45)
    piece_id: str
    start_frame: int

    @property
    def id(self):
        return f"{self.piece_id}:{self.start_frame}"


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


@numba.njit(cache=False)
def _accumulate(cost):
    n, m = cost.shape
    acc = np.empty((n, m))
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
        for j in range(1, m):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = cost[i, j] + best
    return acc


def _traceback(acc):
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            # ties prefer the diagonal, then advancing only in ``a``
            options = ((acc[i - 1, j - 1], i - 1, j - 1),
                       (acc[i - 1, j], i - 1, j),
                       (acc[i, j - 1], i, j - 1))
            _, i, j = min(options, key=lambda o: o[0])
        path.append((i, j))
    return path[::-1]


def dtw(a, b):
    """Minimum-cost monotone alignment of ``a`` (N, K) and ``b`` (M, K).

    Steps are (1,0), (0,1), (1,1); the local cost is the Euclidean distance
    between frames. Returns ``(path, cost)`` with ``path`` a list of
    ``(i, j)`` pairs from (0, 0) to (N-1, M-1).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise InvalidInput("dtw inputs must be nonempty")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    # direct differences keep a == b at exactly zero cost
    cost = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    acc = _accumulate(cost)
    return _traceback(acc), float(acc[-1, -1])


def align_features(reference, performance, n_coeffs=N_MFCC):
    """DTW over the MFCC columns of two feature matrices."""
    ref = reference.frames if isinstance(reference, AudioFeatureSequence) else reference
    perf = performance.frames if isinstance(performance, AudioFeatureSequence) else performance
    return dtw(np.asarray(ref)[:, :n_coeffs], np.asarray(perf)[:, :n_coeffs])


def transfer_beats(midi_beats, path, frame_rate=30.0):
    """Map reference-time beats onto performance frames along a DTW path.

    Each beat becomes a reference frame ``round(t * frame_rate)``, then the
    smallest performance frame matched to it on ``path``. Beats past the end
    of the reference are clamped to its last frame and reported in the
    returned warning list.
    """
    times = midi_beats.beat_times if isinstance(midi_beats, BeatGrid) else tuple(midi_beats)
    if not times:
        return np.zeros(0, dtype=int), []
    p = np.asarray(path, dtype=int)
    last_ref = int(p[:, 0].max())
    first_match = np.full(last_ref + 1, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(first_match, p[:, 0], p[:, 1])
    out, warnings = [], []
    for t in times:
        ref_frame = int(round(t * frame_rate))
        if ref_frame > last_ref:
            warnings.append(f"beat at {t:.3f}s beyond reference end; clamped to frame {last_ref}")
            ref_frame = last_ref
        out.append(int(first_match[ref_frame]))
    for w in warnings:
        log.warning(w)
    return np.maximum.accumulate(np.asarray(out, dtype=int)), warnings


def segment(features, skeleton, beat_frames, length=SEGMENT_LEN, piece_id=""):
    """One ``length``-frame segment per beat frame ``b`` with ``b + length <= n``."""
    f = features.frames if isinstance(features, AudioFeatureSequence) else np.asarray(features)
    s = getattr(skeleton, "joints", skeleton)
    s = np.asarray(s)
    if f.shape[0] != s.shape[0]:
        raise ShapeError(f"features ({f.shape[0]}) and skeleton ({s.shape[0]}) lengths differ")
    n = f.shape[0]
    out = []
    for b in sorted(set(int(b) for b in beat_frames)):
        if 0 <= b and b + length <= n:
            out.append(Segment(f[b:b + length].copy(), s[b:b + length].copy(), piece_id, b))
    return out


def _stack_frames(data):
    if isinstance(data, np.ndarray):
        return data.reshape(-1, data.shape[-1])
    mats = [d.features if isinstance(d, Segment) else np.asarray(d) for d in data]
    return np.concatenate([m.reshape(-1, m.shape[-1]) for m in mats], axis=0)


def zscore_fit(train):
    """Per-column mean and (floored) std over every frame of the training data."""
    x = _stack_frames(train)
    if x.shape[0] < 2:
        raise InvalidInput("z-score fit needs at least 2 frames")
    return NormStats(x.mean(axis=0), np.maximum(x.std(axis=0), STD_FLOOR))


def zscore_apply(x, stats):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != stats.mean.shape[0]:
        raise ShapeError(f"expected {stats.mean.shape[0]} columns, got {x.shape[-1]}")
    return (x - stats.mean) / stats.std


def resample_time(x, speed):
    """Linearly interpolate rows to ``round(L / speed)`` frames, keeping endpoints."""
    if not speed > 0:
        raise InvalidInput(f"speed must be positive, got {speed}")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    new_n = max(1, int(round(n / speed)))
    if new_n == n:
        return x.copy()
    src = np.arange(n, dtype=np.float64)
    pos = np.linspace(0.0, n - 1, new_n) if new_n > 1 else np.zeros(1)
    return np.stack([np.interp(pos, src, x[:, c]) for c in range(x.shape[1])], axis=1)


def resample_features(seq, speed):
    """Play the feature sequence ``speed`` times faster (time axis only)."""
    if isinstance(seq, AudioFeatureSequence):
        return AudioFeatureSequence(resample_time(seq.frames, speed), seq.frame_rate)
    return resample_time(seq, speed)


def split_folds(pieces, k=None):
    """Leave-one-piece-out folds: ``[(train_ids, test_ids), ...]``."""
    pieces = list(pieces)
    if len(set(pieces)) != len(pieces):
        raise InvalidInput("duplicate piece ids")
    if k is not None and k != len(pieces):
        raise InvalidInput(f"k={k} must equal the number of pieces ({len(pieces)})")
    return [([p for p in pieces if p != held], [held]) for held in pieces]


def train_val_split(items, val_fraction=0.2, seed=0):
    """Shuffle with a fixed seed and hold out ``val_fraction`` (at least one item)."""
    items = list(items)
    if len(items) < 2:
        raise InvalidInput("need at least 2 items to split train/validation")
    order = np.random.default_rng(seed).permutation(len(items))
    n_val = min(len(items) - 1, max(1, int(round(val_fraction * len(items)))))
    val = sorted(order[:n_val].tolist())
    train = sorted(order[n_val:].tolist())
    return [items[i] for i in train], [items[i] for i in val]
