"""Synthetic violin-like corpus whose audio and bowing motion share one oscillator.

Each piece is a sequence of bow strokes. The right wrist moves linearly
between alternating extremes, turning at stroke boundaries; the audio
plays one harmonic note per stroke with an amplitude envelope that follows
the wrist position. A "reference" rendition (flat dynamics, uniform tempo
change) stands in for the score-synthesised audio whose beats are known.
"""
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import io
from .exceptions import InvalidInput
from .skeleton import JOINT_NAMES, RIGHT_ELBOW, RIGHT_WRIST, SkeletonSequence, write_csv

FRAME_RATE = 30.0

# rough seated-violinist pose (x right, y up, z toward camera), metres-ish
_TEMPLATE = np.array([
    [0.00, 0.75, 0.00],   # head
    [0.00, 0.72, 0.08],   # nose
    [0.00, 0.55, 0.00],   # thorax
    [0.00, 0.35, 0.00],   # spine
    [-0.18, 0.52, 0.00],  # right shoulder
    [0.18, 0.52, 0.00],   # left shoulder
    [-0.28, 0.32, 0.10],  # right elbow
    [0.30, 0.45, 0.15],   # left elbow
    [-0.20, 0.22, 0.28],  # right wrist
    [0.22, 0.55, 0.30],   # left wrist
    [0.00, 0.10, 0.00],   # hip
    [-0.10, 0.10, 0.00],  # right hip
    [0.10, 0.10, 0.00],   # left hip
    [-0.12, -0.30, 0.10], # right knee
    [0.12, -0.30, 0.10],  # left knee
])
_BOW_DIR = np.array([0.25, 0.12, 0.08])
_SCALE_HZ = 196.0 * 2 ** (np.array([0, 2, 4, 5, 7, 9, 11, 12, 14, 16, 17, 19]) / 12)


@dataclass
class SyntheticSpec:
    n_pieces: int = 8
    duration: float = 30.0        # seconds per piece
    bowing_rate: float = 1.0      # attacks per second
    noise: float = 0.01
    seed: int = 0
    sample_rate: int = 44100
    stroke_jitter: float = 0.0    # relative spread of stroke lengths
    reference_tempo: float = 1.1  # reference duration / performance duration

    def __post_init__(self):
        for name in ("n_pieces", "duration", "bowing_rate", "sample_rate", "reference_tempo"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{name} must be positive")
        if self.noise < 0 or not 0 <= self.stroke_jitter < 1:
            raise InvalidInput("noise must be >= 0 and stroke_jitter in [0, 1)")

    @property
    def n_frames(self):
        return int(round(self.duration * FRAME_RATE))


@dataclass
class SyntheticPiece:
    piece_id: str
    audio: np.ndarray
    reference: np.ndarray
    sample_rate: int
    skeleton: SkeletonSequence
    beat_times: list        # seconds, in reference time
    attack_frames: np.ndarray  # ground-truth attacks, performance frames


def _turning_points(rng, spec):
    n = spec.n_frames
    mean_len = FRAME_RATE / spec.bowing_rate
    pts = [0]
    while True:
        step = mean_len * (1 + spec.stroke_jitter * rng.uniform(-1, 1))
        nxt = pts[-1] + max(2, int(round(step)))
        if nxt >= n - 1:
            break
        pts.append(nxt)
    pts.append(n - 1)
    return np.array(pts)


def _render_audio(rng, frame_pos, envelope, notes, turn, sr, n_samples, noise):
    t = np.arange(n_samples) / sr
    f = t * FRAME_RATE
    amp = np.interp(f, frame_pos, envelope)
    stroke = np.clip(np.searchsorted(turn, f, side="right") - 1, 0, len(notes) - 1)
    freq = notes[stroke]
    phase = 2 * np.pi * np.cumsum(freq) / sr
    tone = sum(w * np.sin(h * phase) for h, w in ((1, 1.0), (2, 0.5), (3, 0.3), (4, 0.15)))
    x = amp * tone / 1.95
    if noise:
        x = x + noise * rng.standard_normal(n_samples)
    return np.clip(x, -1.0, 1.0)


def make_piece(spec, index):
    rng = np.random.default_rng([spec.seed, index])
    n = spec.n_frames
    turn = _turning_points(rng, spec)
    extremes = np.where(np.arange(len(turn)) % 2 == 0, -1.0, 1.0) * rng.uniform(0.7, 1.0, len(turn))
    frames = np.arange(n)
    bow = np.interp(frames, turn, extremes)  # piecewise linear, turns at ``turn``

    sway = 0.01 * np.sin(2 * np.pi * frames / (FRAME_RATE * rng.uniform(3, 6)) + rng.uniform(0, 6.3))
    xyz = np.repeat(_TEMPLATE[None], n, axis=0)
    xyz[:, :, 0] += sway[:, None]
    others = [j for j in range(len(JOINT_NAMES)) if j not in (RIGHT_ELBOW, RIGHT_WRIST)]
    if spec.noise:
        xyz[:, others] += spec.noise * rng.standard_normal((n, len(others), 3))
    xyz[:, RIGHT_WRIST] += bow[:, None] * _BOW_DIR
    xyz[:, RIGHT_ELBOW] += 0.4 * bow[:, None] * _BOW_DIR
    skel = SkeletonSequence(xyz.reshape(n, -1), FRAME_RATE)

    notes = rng.choice(_SCALE_HZ, len(turn))
    envelope = 0.15 + 0.35 * (bow + 1.0)
    n_samples = int(round(spec.duration * spec.sample_rate))
    audio = _render_audio(rng, frames, envelope, notes, turn, spec.sample_rate, n_samples, spec.noise)

    r = spec.reference_tempo
    ref_frames = frames * r
    ref_samples = int(round(spec.duration * r * spec.sample_rate))
    reference = _render_audio(rng, ref_frames, np.full(n, 0.4), notes, turn * r,
                              spec.sample_rate, ref_samples, 0.0)
    beats = [float(b * r / FRAME_RATE) for b in turn[:-1]]
    return SyntheticPiece(f"piece{index:02d}", audio, reference, spec.sample_rate, skel,
                          beats, turn[1:-1].copy())


def make_corpus(spec):
    return [make_piece(spec, i) for i in range(spec.n_pieces)]


def write_corpus(out_dir, spec):
    """Write ``<out>/<piece>/{audio.wav, reference.wav, skeleton.csv, beats.txt, attacks.txt}``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pieces = make_corpus(spec)
    for p in pieces:
        d = out / p.piece_id
        d.mkdir(exist_ok=True)
        io.write_wav(d / "audio.wav", p.audio, p.sample_rate, pcm16=True)
        io.write_wav(d / "reference.wav", p.reference, p.sample_rate, pcm16=True)
        write_csv(d / "skeleton.csv", p.skeleton)
        io.write_beats(d / "beats.txt", p.beat_times)
        (d / "attacks.txt").write_text("".join(f"{int(a)}\n" for a in p.attack_frames))
    (out / "corpus.json").write_text(json.dumps(asdict(spec), indent=2, sort_keys=True) + "\n")
    return pieces
