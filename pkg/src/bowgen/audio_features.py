"""Frame-level audio descriptors at the 30 fps motion frame rate.

Per frame: 13 MFCCs, the log mean spectral energy, and the first-order
temporal deltas of all 14, giving 28 columns.
"""
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .exceptions import InvalidInput

FRAME_RATE = 30.0
WINDOW_LEN = 4096
N_MELS = 128
N_MFCC = 13
LOG_FLOOR = 1e-10
TOP_DB = 80.0
FEATURE_DIM = 2 * (N_MFCC + 1)


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 2:
            x = x.mean(axis=1)
        if x.ndim != 1:
            raise InvalidInput(f"samples must be 1-D or (n, channels), got {x.shape}")
        if self.sample_rate <= 0:
            raise InvalidInput("sample_rate must be positive")
        if not np.all(np.isfinite(x)):
            raise InvalidInput("samples contain non-finite values")
        object.__setattr__(self, "samples", x)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class PowerSpectrogram:
    power: np.ndarray  # (frames, window_len // 2 + 1)
    sample_rate: int
    window_len: int
    hop_len: int

    @property
    def n_frames(self):
        return self.power.shape[0]


@dataclass
class AudioFeatureSequence:
    frames: np.ndarray  # (L, 28)
    frame_rate: float = FRAME_RATE

    def __len__(self):
        return self.frames.shape[0]


def hop_for(sample_rate, frame_rate=FRAME_RATE):
    return int(round(sample_rate / frame_rate))


def stft(clip, window_len=WINDOW_LEN, hop_len=None):
    """Power spectrogram of a Hann-windowed, centred, reflect-padded STFT.

    Frame ``t`` is centred on sample ``t * hop_len``; there are
    ``ceil(len / hop_len)`` frames.
    """
    if hop_len is None:
        hop_len = hop_for(clip.sample_rate)
    if hop_len <= 0:
        raise InvalidInput("hop_len must be positive")
    if window_len < 2:
        raise InvalidInput("window_len must be >= 2")
    x = clip.samples
    n = len(x)
    if n == 0:
        raise InvalidInput("empty clip")
    pad = window_len // 2
    if n > 1:
        padded = np.pad(x, pad, mode="reflect")
    else:
        padded = np.pad(x, pad, mode="edge")
    n_frames = -(-n // hop_len)
    starts = np.arange(n_frames) * hop_len
    frames = np.lib.stride_tricks.sliding_window_view(padded, window_len)[starts]
    # periodic Hann, as used by common audio toolkits
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(window_len) / window_len)
    spec = np.fft.rfft(frames * window, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    return PowerSpectrogram(power, clip.sample_rate, window_len, hop_len)


def _hz_to_mel(f):
    # Slaney: linear below 1 kHz, logarithmic above
    f = np.asarray(f, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    return np.where(
        f >= min_log_hz,
        min_log_mel + np.log(np.maximum(f, min_log_hz) / min_log_hz) / logstep,
        f / f_sp,
    )


def _mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    return np.where(
        m >= min_log_mel,
        min_log_hz * np.exp(logstep * (m - min_log_mel)),
        f_sp * m,
    )


def mel_filterbank(sample_rate, n_fft, n_mels=N_MELS, fmin=0.0, fmax=None):
    """Triangular, area-normalised mel filters of shape ``(n_mels, n_fft//2 + 1)``."""
    if fmax is None:
        fmax = sample_rate / 2.0
    fft_freqs = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    mel_pts = np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2)
    hz_pts = _mel_to_hz(mel_pts)
    fdiff = np.diff(hz_pts)
    ramps = hz_pts[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / fdiff[:-1, None]
    upper = ramps[2:] / fdiff[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (hz_pts[2:] - hz_pts[:-2]))[:, None]
    return weights


def mfcc(spec, n_coeffs=N_MFCC, n_mels=N_MELS, top_db=TOP_DB):
    """MFCCs: mel energies -> floored natural log -> orthonormal DCT-II.

    The floor is ``max(1e-10, frame_peak * 10**(-top_db / 10))`` so sidelobe
    leakage far below a frame's loudest band cannot dominate the cepstrum.
    Pass ``top_db=None`` for the plain absolute floor.
    """
    if spec.power.size == 0:
        raise InvalidInput("empty spectrogram")
    if n_coeffs > n_mels:
        raise InvalidInput(f"n_coeffs={n_coeffs} exceeds mel band count {n_mels}")
    fb = mel_filterbank(spec.sample_rate, spec.window_len, n_mels)
    mel = spec.power @ fb.T
    floor = np.full((mel.shape[0], 1), LOG_FLOOR)
    if top_db is not None:
        floor = np.maximum(floor, mel.max(axis=1, keepdims=True) * 10.0 ** (-top_db / 10.0))
    log_mel = np.log(np.maximum(mel, floor))
    return dct(log_mel, type=2, axis=1, norm="ortho")[:, :n_coeffs]


def log_mean_energy(spec):
    if spec.power.size == 0:
        raise InvalidInput("empty spectrogram")
    return np.log(np.maximum(spec.power.mean(axis=1), LOG_FLOOR))[:, None]


def delta(seq):
    """Central difference along time; edges use replicated neighbour frames."""
    x = np.asarray(seq, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise InvalidInput("delta needs at least 2 frames")
    padded = np.concatenate([x[:1], x, x[-1:]], axis=0)
    return (padded[2:] - padded[:-2]) / 2.0


def extract_features(clip, window_len=WINDOW_LEN, frame_rate=FRAME_RATE):
    """Full 28-D feature matrix ``[13 MFCC | energy | 13 dMFCC | d energy]``."""
    spec = stft(clip, window_len, hop_for(clip.sample_rate, frame_rate))
    base = np.hstack([mfcc(spec), log_mean_energy(spec)])
    if base.shape[0] < 2:
        raise InvalidInput("clip too short: need at least 2 feature frames")
    return AudioFeatureSequence(np.hstack([base, delta(base)]), frame_rate)
