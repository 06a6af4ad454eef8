"""Evaluation metrics: L1, 3-D PCK, bowing-attack F1 and wrist cosine similarity."""
import csv
import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .exceptions import InvalidInput, ShapeError
from .skeleton import WRIST_COLUMNS, SkeletonSequence

log = logging.getLogger(__name__)

BOW_TOLERANCE = 3
PCK_ALPHAS = (0.1, 0.2)


@dataclass
class MetricsReport:
    l1_avg: float
    l1_hand_avg: float
    pck: float
    bow_x: float
    bow_y: float
    bow_z: float
    bow_avg: float
    cosine_similarity: float

    COLUMNS = ("l1_avg", "l1_hand_avg", "pck", "bow_x", "bow_y", "bow_z", "bow_avg",
               "cosine_similarity")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**{f.name: float(d[f.name]) for f in fields(cls)})

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _joints(x):
    return x.joints if isinstance(x, SkeletonSequence) else np.asarray(x, dtype=np.float64)


def l1_avg(pred, gt):
    """Mean absolute error over every coordinate and frame."""
    p, g = _joints(pred), _joints(gt)
    if p.shape != g.shape:
        raise ShapeError(f"pred {p.shape} vs gt {g.shape}")
    return float(np.abs(p - g).mean())


def l1_hand_avg(pred, gt, wrist_columns=WRIST_COLUMNS):
    p, g = _joints(pred), _joints(gt)
    if p.shape != g.shape:
        raise ShapeError(f"pred {p.shape} vs gt {g.shape}")
    return float(np.abs(p[:, wrist_columns] - g[:, wrist_columns]).mean())


def pck(pred, gt, alphas=PCK_ALPHAS):
    """3-D PCK averaged over ``alphas``.

    Per frame the threshold is ``alpha * max(extent_x, extent_y, extent_z)``
    of the ground-truth joints' bounding box; a joint is correct when its
    Euclidean error is ``<=`` the threshold.
    """
    p, g = _joints(pred), _joints(gt)
    if p.shape != g.shape:
        raise ShapeError(f"pred {p.shape} vs gt {g.shape}")
    if p.shape[1] % 3 or p.shape[1] == 0:
        raise ShapeError("coordinate count must be a positive multiple of 3")
    p = p.reshape(len(p), -1, 3)
    g = g.reshape(len(g), -1, 3)
    err = np.linalg.norm(p - g, axis=2)  # (L, J)
    size = (g.max(axis=1) - g.min(axis=1)).max(axis=1)  # (L,)
    return float(np.mean([(err <= a * size[:, None]).mean() for a in alphas]))


def bowing_direction(y):
    """``D(i) = 1`` if ``y(i+1) - y(i) > 0`` else 0; length L-1."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(y) < 2:
        raise InvalidInput("bowing direction needs at least 2 frames")
    return (np.diff(y) > 0).astype(np.int8)


def bowing_attacks(direction):
    """``A(i) = 1`` where ``D(i) != D(i-1)``; element ``j`` refers to ``D`` index ``j+1``."""
    d = np.asarray(direction).ravel()
    if len(d) < 2:
        raise InvalidInput("bowing attacks need at least 2 direction values")
    return (np.diff(d.astype(np.int8)) != 0).astype(np.int8)


def attack_frames(attacks):
    """Frame indices of attacks: the turning-point frame of the source trajectory."""
    return np.flatnonzero(np.asarray(attacks)) + 1


def wrist_attacks(y):
    return bowing_attacks(bowing_direction(y))


def match_attacks(pred_times, gt_times, tolerance=BOW_TOLERANCE, strategy="earliest"):
    """Count true positives when each ground-truth attack can be used only once.

    Predictions are visited in time order. With ``strategy="earliest"`` each
    takes the earliest unused ground-truth attack within
    ``[t - tolerance, t + tolerance]``; for equal-width windows this yields a
    maximum matching. ``"nearest"`` takes the closest unused one instead
    (ties to the earlier), which can fall short of the maximum.
    """
    gt = sorted(int(t) for t in gt_times)
    used = [False] * len(gt)
    tp = 0
    if strategy == "nearest":
        for t in sorted(int(t) for t in pred_times):
            best = None
            for j, g in enumerate(gt):
                if not used[j] and abs(g - t) <= tolerance:
                    if best is None or abs(g - t) < abs(gt[best] - t):
                        best = j
            if best is not None:
                used[best] = True
                tp += 1
        return tp
    if strategy != "earliest":
        raise InvalidInput(f"unknown matching strategy {strategy!r}")
    ptr = 0
    for t in sorted(int(t) for t in pred_times):
        while ptr < len(gt) and (used[ptr] or gt[ptr] < t - tolerance):
            ptr += 1
        if ptr < len(gt) and gt[ptr] <= t + tolerance:
            used[ptr] = True
            tp += 1
            ptr += 1
    return tp


def bowing_f1(pred_attacks, gt_attacks, tolerance=BOW_TOLERANCE, strategy="earliest"):
    """Return ``(precision, recall, f1)`` for binary attack sequences of equal length."""
    pa = np.asarray(pred_attacks).ravel()
    ga = np.asarray(gt_attacks).ravel()
    if pa.shape != ga.shape:
        raise ShapeError(f"attack sequences differ in length: {pa.shape} vs {ga.shape}")
    pt, gtt = np.flatnonzero(pa), np.flatnonzero(ga)
    n_pred, n_gt = len(pt), len(gtt)
    if n_pred == 0 and n_gt == 0:
        return 1.0, 1.0, 1.0
    if n_pred == 0 or n_gt == 0:
        return (0.0 if n_pred else 1.0), (0.0 if n_gt else 1.0), 0.0
    tp = match_attacks(pt, gtt, tolerance, strategy)
    precision, recall = tp / n_pred, tp / n_gt
    f1 = 0.0 if tp == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def cosine_similarity(pred_wrist, gt_wrist, mode="axis"):
    """Cosine similarity of the right-wrist trajectory.

    ``mode="axis"`` (default) compares the length-L trajectory of each
    coordinate and averages the three cosines. ``mode="frame"`` compares the
    3-vectors frame by frame and averages over frames. Zero vectors
    contribute 0.
    """
    p = np.asarray(pred_wrist, dtype=np.float64)
    g = np.asarray(gt_wrist, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 2 or p.shape[1] != 3:
        raise ShapeError(f"wrist trajectories must both be (L, 3), got {p.shape} and {g.shape}")
    if mode not in ("axis", "frame"):
        raise InvalidInput(f"unknown cosine mode {mode!r}")
    axis = 0 if mode == "axis" else 1
    num = (p * g).sum(axis=axis)
    den = np.linalg.norm(p, axis=axis) * np.linalg.norm(g, axis=axis)
    zero = den == 0
    if zero.any():
        log.warning("cosine similarity: %d zero-length trajectories scored as 0", int(zero.sum()))
    cos = np.where(zero, 0.0, num / np.where(zero, 1.0, den))
    return float(np.clip(cos, -1.0, 1.0).mean())


def bow_scores(pred_wrist, gt_wrist, tolerance=BOW_TOLERANCE):
    """F1 per wrist axis (x, y, z)."""
    p = np.asarray(pred_wrist, dtype=np.float64)
    g = np.asarray(gt_wrist, dtype=np.float64)
    return [bowing_f1(wrist_attacks(p[:, a]), wrist_attacks(g[:, a]), tolerance)[2]
            for a in range(3)]


def evaluate(pred, gt, wrist_columns=WRIST_COLUMNS, tolerance=BOW_TOLERANCE, cosine_mode="axis"):
    """Fill a :class:`MetricsReport` comparing two skeleton sequences."""
    if isinstance(pred, SkeletonSequence) and isinstance(gt, SkeletonSequence):
        if pred.frame_rate != gt.frame_rate:
            raise InvalidInput(f"frame rates differ: {pred.frame_rate} vs {gt.frame_rate}")
    p, g = _joints(pred), _joints(gt)
    if p.shape != g.shape:
        raise ShapeError(f"pred {p.shape} vs gt {g.shape}")
    if len(p) < 3:
        raise InvalidInput("evaluation needs at least 3 frames")
    pw, gw = p[:, wrist_columns], g[:, wrist_columns]
    bx, by, bz = bow_scores(pw, gw, tolerance)
    return MetricsReport(
        l1_avg=l1_avg(p, g),
        l1_hand_avg=l1_hand_avg(p, g, wrist_columns),
        pck=pck(p, g),
        bow_x=bx, bow_y=by, bow_z=bz, bow_avg=(bx + by + bz) / 3.0,
        cosine_similarity=cosine_similarity(pw, gw, cosine_mode),
    )


def aggregate(reports):
    """Field-wise mean of a mapping or list of reports."""
    items = list(reports.values()) if isinstance(reports, dict) else list(reports)
    if not items:
        raise InvalidInput("no reports to aggregate")
    return MetricsReport(**{c: float(np.mean([getattr(r, c) for r in items]))
                            for c in MetricsReport.COLUMNS})


def write_table(path, rows, key="piece"):
    """CSV with one row per ``(name, report)`` in the standard report column order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([key, *MetricsReport.COLUMNS])
        for name, rep in rows:
            w.writerow([name, *(f"{getattr(rep, c):.6f}" for c in MetricsReport.COLUMNS)])


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    key = next(iter(rows[0])) if rows else "piece"
    return [(r[key], MetricsReport.from_dict(r)) for r in rows]


def write_report(path, report):
    Path(path).write_text(report.to_json() + "\n")
