import numpy as np
import pytest

from bowgen.audio_features import (
    FEATURE_DIM, LOG_FLOOR, N_MELS, AudioClip, PowerSpectrogram, delta, extract_features,
    hop_for, log_mean_energy, mel_filterbank, mfcc, stft,
)
from bowgen.exceptions import InvalidInput

SR = 44100


def sine(freq, seconds, sr=SR, amp=0.5):
    return amp * np.sin(2 * np.pi * freq * np.arange(int(seconds * sr)) / sr)


def direct_power(x, window_len, hop):
    """Oracle: explicit DFT sum over reflect-padded, Hann-windowed frames."""
    pad = window_len // 2
    xp = np.pad(x, pad, mode="reflect")
    n_frames = -(-len(x) // hop)
    n = np.arange(window_len)
    win = 0.5 - 0.5 * np.cos(2 * np.pi * n / window_len)
    k = np.arange(window_len // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(k, n) / window_len)
    return np.array([np.abs(basis @ (xp[t * hop:t * hop + window_len] * win)) ** 2
                     for t in range(n_frames)])


class TestSTFT:
    def test_zero_signal_gives_zero_power(self):
        spec = stft(AudioClip(np.zeros(5000), SR), 512, 128)
        assert np.all(spec.power == 0)

    def test_hop_gives_30_fps_grid(self):
        assert hop_for(44100) == 1470
        spec = stft(AudioClip(np.zeros(44100), SR), 4096, hop_for(SR))
        assert spec.power.shape == (30, 2049)

    def test_frame_count_is_ceil(self):
        spec = stft(AudioClip(np.ones(1000), SR), 256, 300)
        assert spec.n_frames == 4

    def test_sine_peak_bin(self):
        spec = stft(AudioClip(sine(440, 1.0), SR), 4096, 1470)
        assert np.all(spec.power.argmax(axis=1)[1:-1] == round(440 * 4096 / 44100))

    def test_matches_direct_dft(self, rng):
        x = rng.standard_normal(3000)
        spec = stft(AudioClip(x, 8000), 256, 100)
        ref = direct_power(x, 256, 100)
        np.testing.assert_allclose(spec.power, ref, rtol=1e-9, atol=1e-9)

    def test_empty_clip_rejected(self):
        with pytest.raises(InvalidInput):
            stft(AudioClip(np.zeros(0), SR))

    def test_stereo_downmix(self):
        left, right = sine(300, 0.2), sine(500, 0.2)
        clip = AudioClip(np.stack([left, right], axis=1), SR)
        np.testing.assert_allclose(clip.samples, (left + right) / 2)


class TestMFCC:
    def test_identical_frames_identical_rows(self, rng):
        row = rng.random(2049)
        spec = PowerSpectrogram(np.stack([row, row]), SR, 4096, 1470)
        out = mfcc(spec)
        np.testing.assert_array_equal(out[0], out[1])

    def test_zero_frame_is_dct_of_constant(self):
        spec = PowerSpectrogram(np.zeros((2, 2049)), SR, 4096, 1470)
        out = mfcc(spec)
        np.testing.assert_allclose(out[:, 0], np.sqrt(N_MELS) * np.log(LOG_FLOOR))
        np.testing.assert_allclose(out[:, 1:], 0, atol=1e-9)

    def test_too_many_coefficients(self):
        spec = PowerSpectrogram(np.ones((1, 2049)), SR, 4096, 1470)
        with pytest.raises(InvalidInput):
            mfcc(spec, n_coeffs=N_MELS + 1)

    def test_steady_tone_is_stable(self):
        spec = stft(AudioClip(sine(440, 2.0), SR), 4096, 1470)
        m = mfcc(spec)[3:-3]  # interior frames away from reflect padding
        assert np.all(m.std(axis=0) < 1e-3 * np.abs(m.mean(axis=0)))

    def test_matches_explicit_dct(self, rng):
        power = rng.random((3, 2049)) * 100
        spec = PowerSpectrogram(power, SR, 4096, 1470)
        fb = mel_filterbank(SR, 4096)
        mel = power @ fb.T
        log_mel = np.log(np.maximum(mel, mel.max(axis=1, keepdims=True) * 1e-8))
        n = np.arange(N_MELS)
        basis = np.cos(np.pi * np.outer(np.arange(13), 2 * n + 1) / (2 * N_MELS))
        basis *= np.sqrt(2.0 / N_MELS)
        basis[0] /= np.sqrt(2.0)
        np.testing.assert_allclose(mfcc(spec), log_mel @ basis.T, rtol=1e-10, atol=1e-9)

    def test_filterbank_matches_librosa(self):
        librosa = pytest.importorskip("librosa")
        ref = librosa.filters.mel(sr=SR, n_fft=4096, n_mels=128)
        np.testing.assert_allclose(mel_filterbank(SR, 4096), ref, atol=1e-7)

    def test_stft_matches_librosa(self):
        librosa = pytest.importorskip("librosa")
        x = sine(440, 1.0) + 0.1 * sine(1234, 1.0)
        ref = np.abs(librosa.stft(x, n_fft=4096, hop_length=1470, window="hann",
                                  center=True, pad_mode="reflect")) ** 2
        ours = stft(AudioClip(x, SR), 4096, 1470).power
        np.testing.assert_allclose(ours, ref.T[:ours.shape[0]], rtol=1e-6, atol=1e-6 * ref.max())


class TestEnergy:
    def test_zero_frame_floor(self):
        spec = PowerSpectrogram(np.zeros((1, 10)), SR, 18, 9)
        assert log_mean_energy(spec)[0, 0] == pytest.approx(np.log(1e-10))

    def test_ones_give_zero(self):
        spec = PowerSpectrogram(np.ones((2, 10)), SR, 18, 9)
        np.testing.assert_allclose(log_mean_energy(spec), 0.0)

    def test_doubling_amplitude_adds_log4(self):
        x = sine(440, 0.5)
        e1 = log_mean_energy(stft(AudioClip(x, SR)))
        e2 = log_mean_energy(stft(AudioClip(2 * x, SR)))
        np.testing.assert_allclose(e2 - e1, np.log(4), atol=1e-9)


class TestDelta:
    def test_constant(self):
        np.testing.assert_array_equal(delta(np.full((6, 3), 2.5)), 0)

    def test_hand_values(self):
        np.testing.assert_allclose(delta(np.array([0.0, 1, 2, 3])).ravel(), [0.5, 1, 1, 0.5])

    def test_ramp_interior(self):
        d = delta(0.7 * np.arange(10.0))
        np.testing.assert_allclose(d[1:-1].ravel(), 0.7)

    def test_delta_of_delta_of_ramp(self):
        dd = delta(delta(3.0 * np.arange(12.0)))
        np.testing.assert_allclose(dd[2:-2], 0.0, atol=1e-12)

    def test_too_short(self):
        with pytest.raises(InvalidInput):
            delta(np.zeros((1, 3)))


class TestExtractFeatures:
    def test_one_second_shape(self, rng):
        feats = extract_features(AudioClip(0.1 * rng.standard_normal(SR), SR))
        assert feats.frames.shape[1] == FEATURE_DIM == 28
        assert abs(feats.frames.shape[0] - 30) <= 1
        assert feats.frame_rate == 30.0

    def test_silence(self):
        f = extract_features(AudioClip(np.zeros(SR), SR)).frames
        np.testing.assert_array_equal(f[:, :13], np.broadcast_to(f[0, :13], (len(f), 13)))
        np.testing.assert_array_equal(f[:, 14:], 0)

    def test_white_noise_finite(self, rng):
        f = extract_features(AudioClip(np.clip(rng.standard_normal(SR // 2), -1, 1), SR)).frames
        assert np.all(np.isfinite(f))

    def test_deterministic(self, rng):
        x = rng.uniform(-1, 1, SR // 3)
        a = extract_features(AudioClip(x, SR)).frames
        b = extract_features(AudioClip(x.copy(), SR)).frames
        np.testing.assert_array_equal(a, b)

    def test_column_order(self, rng):
        x = sine(330, 0.5) * np.linspace(0.1, 1, SR // 2)
        f = extract_features(AudioClip(x, SR)).frames
        base = f[:, :14]
        np.testing.assert_allclose(f[:, 14:], delta(base))
        np.testing.assert_allclose(f[:, 13:14], log_mean_energy(stft(AudioClip(x, SR))))

    def test_time_shift_covariance(self, rng):
        hop = hop_for(SR)
        x = 0.3 * rng.standard_normal(SR)
        a = extract_features(AudioClip(x, SR)).frames
        b = extract_features(AudioClip(x[hop:], SR)).frames
        # b[t] sees the same samples as a[t + 1], away from the padded edges
        n = min(len(a) - 1, len(b))
        np.testing.assert_allclose(b[4:n - 4], a[5:n - 3], atol=1e-6)
