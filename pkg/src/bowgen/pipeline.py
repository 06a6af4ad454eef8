"""Dataset preparation: per-piece features, cleaned skeletons, beat frames, segments and folds."""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import alignment, io, skeleton
from .audio_features import FRAME_RATE, AudioClip, extract_features
from .exceptions import InvalidInput

log = logging.getLogger(__name__)


class PieceError(Exception):
    def __init__(self, piece_id, message):
        self.piece_id = piece_id
        super().__init__(f"{piece_id}: {message}")


@dataclass
class PreparedPiece:
    piece_id: str
    features: np.ndarray        # (L, 28), raw (not z-scored)
    skeleton: np.ndarray        # (L, 45), normalised and median-smoothed
    beat_frames: np.ndarray
    warnings: list = field(default_factory=list)

    def __len__(self):
        return self.features.shape[0]


def find_pieces(root):
    root = Path(root)
    if not root.is_dir():
        raise InvalidInput(f"dataset root {root} is not a directory")
    return sorted(p for p in root.iterdir() if p.is_dir())


def prepare_piece(piece_dir, frame_rate=FRAME_RATE):
    """Features, cleaned skeleton and performance-time beat frames for one piece directory.

    Expects ``audio.wav``, ``skeleton.csv`` and ``beats.txt``. If
    ``reference.wav`` is present the beat times refer to it and are carried
    over to the performance by DTW; otherwise they are taken as performance
    times.
    """
    d = Path(piece_dir)
    pid = d.name
    missing = [n for n in ("audio.wav", "skeleton.csv", "beats.txt") if not (d / n).exists()]
    if missing:
        raise PieceError(pid, f"missing {', '.join(missing)}")
    samples, sr = io.read_wav(d / "audio.wav")
    feats = extract_features(AudioClip(samples, sr), frame_rate=frame_rate).frames
    skel = skeleton.read_csv(d / "skeleton.csv", frame_rate)
    if abs(len(skel) - len(feats)) > 1:
        raise PieceError(pid, f"audio gives {len(feats)} frames but skeleton has {len(skel)}")
    n = min(len(skel), len(feats))
    feats = feats[:n]
    skel = skeleton.SkeletonSequence(skel.joints[:n], frame_rate, skel.joint_names)
    skel = skeleton.median_smooth(skeleton.normalize(skel), 5)

    grid = alignment.BeatGrid(io.read_beats(d / "beats.txt"))
    warnings = []
    if (d / "reference.wav").exists():
        ref, ref_sr = io.read_wav(d / "reference.wav")
        ref_feats = extract_features(AudioClip(ref, ref_sr), frame_rate=frame_rate).frames
        path, _ = alignment.align_features(ref_feats, feats)
        beats, warnings = alignment.transfer_beats(grid, path, frame_rate)
    else:
        beats = np.array([int(round(t * frame_rate)) for t in grid.beat_times], dtype=int)
        late = beats >= n
        if late.any():
            warnings.append(f"{int(late.sum())} beats beyond the recording end dropped")
        beats = beats[~late]
    return PreparedPiece(pid, feats, skel.joints, np.asarray(beats, dtype=int), warnings)


def prepare_dataset(root, workers=4, frame_rate=FRAME_RATE):
    """Prepare every piece; returns ``(pieces, errors)`` so all failures can be reported."""
    dirs = find_pieces(root)

    def run(d):
        try:
            return prepare_piece(d, frame_rate), None
        except (PieceError, InvalidInput, ValueError, OSError) as e:
            return None, e if isinstance(e, PieceError) else PieceError(d.name, str(e))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
        results = list(ex.map(run, dirs))
    pieces = [p for p, _ in results if p is not None]
    errors = [e for _, e in results if e is not None]
    return pieces, errors


def build_segments(pieces, segment_len=alignment.SEGMENT_LEN):
    segs = []
    for p in pieces:
        s = alignment.segment(p.features, p.skeleton, p.beat_frames, segment_len, p.piece_id)
        if not s:
            p.warnings.append(f"no {segment_len}-frame segment fits ({len(p)} frames)")
        segs.extend(s)
    return segs


def fold_manifests(pieces, segments, val_fraction=0.2, seed=0):
    """Leave-one-piece-out manifests with an 80/20 train/validation split of segment ids."""
    ids = [p.piece_id for p in pieces]
    out = []
    for i, (train_ids, test_ids) in enumerate(alignment.split_folds(ids)):
        pool = [s.id for s in segments if s.piece_id in train_ids]
        if len(pool) >= 2:
            train, val = alignment.train_val_split(pool, val_fraction, seed)
        else:
            train, val = pool, []
        out.append({
            "fold": i,
            "train": train,
            "val": val,
            "test": [s.id for s in segments if s.piece_id in test_ids],
            "test_pieces": test_ids,
        })
    return out


def write_prepared(out_dir, pieces, segment_len=alignment.SEGMENT_LEN, val_fraction=0.2, seed=0):
    out = Path(out_dir)
    (out / "pieces").mkdir(parents=True, exist_ok=True)
    (out / "folds").mkdir(exist_ok=True)
    pieces = sorted(pieces, key=lambda p: p.piece_id)
    for p in pieces:
        d = out / "pieces" / p.piece_id
        d.mkdir(exist_ok=True)
        io.write_matrix(d / "features.bgf", p.features, io.FEATURE_MAGIC)
        io.write_csv_matrix(d / "features.csv", p.features,
                            [f"f{i}" for i in range(p.features.shape[1])], index_name="frame")
        seq = skeleton.SkeletonSequence(p.skeleton)
        skeleton.write_csv(d / "skeleton.csv", seq)
        skeleton.write_binary(d / "skeleton.bgs", seq)
        (d / "beat_frames.txt").write_text("".join(f"{int(b)}\n" for b in p.beat_frames))
    segments = build_segments(pieces, segment_len)
    manifest = {
        "segment_len": segment_len,
        "pieces": [p.piece_id for p in pieces],
        "segments": [{"id": s.id, "piece_id": s.piece_id, "start_frame": s.start_frame}
                     for s in segments],
        "warnings": {p.piece_id: p.warnings for p in pieces if p.warnings},
    }
    (out / "segments.json").write_text(json.dumps(manifest, indent=1) + "\n")
    folds = fold_manifests(pieces, segments, val_fraction, seed)
    for f in folds:
        (out / "folds" / f"fold_{f['fold']:02d}.json").write_text(json.dumps(f, indent=1) + "\n")
    return manifest, folds


def load_prepared_piece(prepared_dir, piece_id):
    d = Path(prepared_dir) / "pieces" / piece_id
    feats = io.read_matrix(d / "features.bgf", io.FEATURE_MAGIC)
    skel = skeleton.read_binary(d / "skeleton.bgs").joints
    beats = np.array([int(x) for x in (d / "beat_frames.txt").read_text().split()], dtype=int)
    return PreparedPiece(piece_id, feats, skel, beats)


def load_prepared(prepared_dir):
    manifest = json.loads((Path(prepared_dir) / "segments.json").read_text())
    pieces = {pid: load_prepared_piece(prepared_dir, pid) for pid in manifest["pieces"]}
    return manifest, pieces


def load_fold(prepared_dir, fold):
    return json.loads((Path(prepared_dir) / "folds" / f"fold_{int(fold):02d}.json").read_text())


def segment_arrays(pieces, segment_ids, segment_len):
    """Stack ``(features, skeleton)`` windows for ``"piece:start"`` ids."""
    xs, ys = [], []
    for sid in segment_ids:
        pid, start = sid.rsplit(":", 1)
        p, b = pieces[pid], int(start)
        xs.append(p.features[b:b + segment_len])
        ys.append(p.skeleton[b:b + segment_len])
    if not xs:
        return np.zeros((0, segment_len, 28)), np.zeros((0, segment_len, 45))
    return np.stack(xs), np.stack(ys)
