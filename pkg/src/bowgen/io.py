"""File formats: binary matrix containers, CSV matrices, WAV audio and beat lists."""
import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .exceptions import InvalidInput

FEATURE_MAGIC = b"BGF1"
SKELETON_MAGIC = b"BGS1"
_HEADER = struct.Struct("<4sII")


def write_matrix(path, matrix, magic=FEATURE_MAGIC):
    """Write ``matrix`` as ``magic | rows u32 | cols u32 | f32 LE row-major``."""
    m = np.ascontiguousarray(matrix, dtype="<f4")
    if m.ndim != 2:
        raise InvalidInput(f"matrix must be 2-D, got shape {m.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, m.shape[0], m.shape[1]))
        fh.write(m.tobytes())


def read_matrix(path, magic=None):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InvalidInput(f"{path}: truncated header")
    tag, rows, cols = _HEADER.unpack_from(data)
    if magic is not None and tag != magic:
        raise InvalidInput(f"{path}: bad magic {tag!r}, expected {magic!r}")
    if tag not in (FEATURE_MAGIC, SKELETON_MAGIC):
        raise InvalidInput(f"{path}: unknown magic {tag!r}")
    payload = data[_HEADER.size:]
    if len(payload) != 4 * rows * cols:
        raise InvalidInput(f"{path}: payload has {len(payload)} bytes, expected {4 * rows * cols}")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float64)


def write_csv_matrix(path, matrix, header=None, index_name=None):
    m = np.asarray(matrix, dtype=np.float64)
    lines = []
    if header is not None:
        cols = ([index_name] if index_name else []) + list(header)
        lines.append(",".join(cols))
    for i, row in enumerate(m):
        vals = [repr(float(v)) for v in row]
        if index_name:
            vals.insert(0, str(i))
        lines.append(",".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv_matrix(path, has_header=True, index_col=False):
    """Return ``(matrix, header)``; ``header`` is None when absent."""
    text = Path(path).read_text().strip().splitlines()
    header = None
    if has_header:
        header = text[0].split(",")
        text = text[1:]
        if index_col:
            header = header[1:]
    rows = []
    for ln in text:
        vals = ln.split(",")
        if index_col:
            vals = vals[1:]
        rows.append([float(v) for v in vals])
    if not rows:
        ncol = len(header) if header else 0
        return np.zeros((0, ncol)), header
    return np.array(rows, dtype=np.float64), header


def read_wav(path):
    """Read PCM WAV (16-bit int or 32-bit float) as mono float in [-1, 1].

    Multi-channel audio is averaged down to mono.
    """
    sr, data = wavfile.read(path)
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise InvalidInput(f"{path}: unsupported sample format {data.dtype}")
    if x.ndim == 2:
        x = x.mean(axis=1)
    return x, int(sr)


def write_wav(path, samples, sample_rate, pcm16=False):
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    if pcm16:
        wavfile.write(path, sample_rate, np.round(x * 32767.0).astype(np.int16))
    else:
        wavfile.write(path, sample_rate, x.astype(np.float32))


def read_beats(path):
    """One beat time in seconds per line; blank lines and ``#`` comments skipped."""
    out = []
    for ln in Path(path).read_text().splitlines():
        ln = ln.split("#", 1)[0].strip()
        if ln:
            out.append(float(ln))
    return out


def write_beats(path, beat_times):
    Path(path).write_text("".join(f"{t:.6f}\n" for t in beat_times))
