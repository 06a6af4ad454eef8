"""15-joint 3-D skeleton sequences: normalisation, smoothing, body/right-hand split and I/O."""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import median_filter

from . import io
from .exceptions import InvalidInput, ShapeError

JOINT_NAMES = (
    "head", "nose", "thorax", "spine",
    "right_shoulder", "left_shoulder",
    "right_elbow", "left_elbow",
    "right_wrist", "left_wrist",
    "hip", "right_hip", "left_hip",
    "right_knee", "left_knee",
)
N_JOINTS = len(JOINT_NAMES)
SKELETON_DIM = 3 * N_JOINTS
RIGHT_ELBOW = JOINT_NAMES.index("right_elbow")
RIGHT_WRIST = JOINT_NAMES.index("right_wrist")


def joint_columns(joint):
    j = JOINT_NAMES.index(joint) if isinstance(joint, str) else int(joint)
    return list(range(3 * j, 3 * j + 3))


WRIST_COLUMNS = joint_columns(RIGHT_WRIST)


@dataclass
class SkeletonSequence:
    joints: np.ndarray  # (L, 3 * n_joints)
    frame_rate: float = 30.0
    joint_names: tuple = JOINT_NAMES

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        if self.joints.ndim != 2 or self.joints.shape[1] != 3 * len(self.joint_names):
            raise ShapeError(
                f"joints must be (L, {3 * len(self.joint_names)}), got {self.joints.shape}"
            )
        self.joint_names = tuple(self.joint_names)

    def __len__(self):
        return self.joints.shape[0]

    def xyz(self):
        """View as ``(L, n_joints, 3)``."""
        return self.joints.reshape(len(self), -1, 3)


@dataclass(frozen=True)
class BodySplit:
    """Partition of the 15 joints into a 13-joint body part and the bowing arm.

    The right-hand part is (right elbow, right wrist), so the wrist occupies
    its last three columns.
    """
    righthand_joints: tuple = (RIGHT_ELBOW, RIGHT_WRIST)
    n_joints: int = N_JOINTS
    body_joints: tuple = field(init=False)

    def __post_init__(self):
        rh = tuple(int(j) for j in self.righthand_joints)
        if len(set(rh)) != len(rh) or not all(0 <= j < self.n_joints for j in rh):
            raise InvalidInput(f"invalid right-hand joints {rh}")
        object.__setattr__(self, "righthand_joints", rh)
        object.__setattr__(
            self, "body_joints", tuple(j for j in range(self.n_joints) if j not in rh)
        )

    @staticmethod
    def _cols(joints):
        return np.array([3 * j + k for j in joints for k in range(3)], dtype=int)

    @property
    def body_columns(self):
        return self._cols(self.body_joints)

    @property
    def righthand_columns(self):
        return self._cols(self.righthand_joints)

    @property
    def permutation(self):
        """Column order ``[body | right hand]`` as indices into the full layout."""
        return np.concatenate([self.body_columns, self.righthand_columns])

    @property
    def inverse_permutation(self):
        return np.argsort(self.permutation)


DEFAULT_SPLIT = BodySplit()


def _check_finite(joints):
    if not np.all(np.isfinite(joints)):
        raise InvalidInput("skeleton contains non-finite values")


def normalize(seq):
    """Subtract the per-axis mean over all joints and frames."""
    _check_finite(seq.joints)
    if len(seq) < 1:
        raise InvalidInput("empty skeleton sequence")
    xyz = seq.xyz()
    centred = xyz - xyz.mean(axis=(0, 1), keepdims=True)
    return SkeletonSequence(centred.reshape(len(seq), -1), seq.frame_rate, seq.joint_names)


def median_smooth(seq, window=5):
    """Centred running median per channel; windows are truncated at the edges."""
    if window < 1 or window % 2 == 0:
        raise InvalidInput(f"median window must be odd and >= 1, got {window}")
    x = seq.joints
    half = window // 2
    n = x.shape[0]
    out = median_filter(x, size=(window, 1), mode="nearest")
    # edge frames: median over the truncated in-range window only
    for i in list(range(min(half, n))) + list(range(max(n - half, half), n)):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        out[i] = np.median(x[lo:hi], axis=0)
    return SkeletonSequence(out, seq.frame_rate, seq.joint_names)


def split(seq, body_split=DEFAULT_SPLIT):
    """Return ``(body (L, 39), righthand (L, 6))``."""
    joints = seq.joints if isinstance(seq, SkeletonSequence) else np.asarray(seq)
    return joints[..., body_split.body_columns], joints[..., body_split.righthand_columns]


def merge(body, righthand, body_split=DEFAULT_SPLIT):
    """Inverse of :func:`split` for arrays with time on axis -2."""
    stacked = np.concatenate([body, righthand], axis=-1)
    return stacked[..., body_split.inverse_permutation]


def csv_header(joint_names=JOINT_NAMES):
    return [f"{j}_{a}" for j in joint_names for a in "xyz"]


def write_csv(path, seq):
    io.write_csv_matrix(path, seq.joints, csv_header(seq.joint_names), index_name="frame")


def read_csv(path, frame_rate=30.0):
    mat, header = io.read_csv_matrix(path, has_header=True, index_col=True)
    names = []
    for col in header[::3]:
        if not col.endswith("_x"):
            raise InvalidInput(f"{path}: unexpected column {col!r}")
        names.append(col[:-2])
    if header != csv_header(names):
        raise InvalidInput(f"{path}: header columns not in joint x/y/z order")
    if mat.shape[0] == 0:
        mat = np.zeros((0, len(header)))
    return SkeletonSequence(mat, frame_rate, tuple(names))


def write_binary(path, seq):
    io.write_matrix(path, seq.joints, io.SKELETON_MAGIC)


def read_binary(path, frame_rate=30.0):
    return SkeletonSequence(io.read_matrix(path, io.SKELETON_MAGIC), frame_rate)


def render_json(seq):
    return {
        "fps": seq.frame_rate,
        "joint_names": list(seq.joint_names),
        "frames": seq.xyz().tolist(),
    }


def write_render_json(path, seq):
    Path(path).write_text(json.dumps(render_json(seq)))
