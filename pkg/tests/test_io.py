import struct

import numpy as np
import pytest
from scipy.io import wavfile

from bowgen import io
from bowgen.exceptions import InvalidInput


def test_matrix_layout(tmp_path, rng):
    m = rng.standard_normal((3, 4)).astype(np.float32)
    io.write_matrix(tmp_path / "m.bgf", m)
    raw = (tmp_path / "m.bgf").read_bytes()
    assert raw[:4] == b"BGF1" and struct.unpack("<II", raw[4:12]) == (3, 4)
    assert len(raw) == 12 + 4 * 12
    np.testing.assert_array_equal(np.frombuffer(raw[12:], "<f4").reshape(3, 4), m)
    np.testing.assert_array_equal(io.read_matrix(tmp_path / "m.bgf"), m)


def test_matrix_errors(tmp_path):
    io.write_matrix(tmp_path / "m.bgf", np.zeros((2, 2)))
    with pytest.raises(InvalidInput):
        io.read_matrix(tmp_path / "m.bgf", io.SKELETON_MAGIC)
    (tmp_path / "t.bgf").write_bytes((tmp_path / "m.bgf").read_bytes()[:-1])
    with pytest.raises(InvalidInput):
        io.read_matrix(tmp_path / "t.bgf")
    (tmp_path / "x.bgf").write_bytes(b"XXXX" + bytes(8))
    with pytest.raises(InvalidInput):
        io.read_matrix(tmp_path / "x.bgf")
    with pytest.raises(InvalidInput):
        io.write_matrix(tmp_path / "v.bgf", np.zeros(3))


def test_csv_round_trip_exact(tmp_path, rng):
    m = rng.standard_normal((4, 3))
    io.write_csv_matrix(tmp_path / "m.csv", m, ["a", "b", "c"], index_name="frame")
    back, header = io.read_csv_matrix(tmp_path / "m.csv", index_col=True)
    assert header == ["a", "b", "c"]
    np.testing.assert_array_equal(back, m)


def test_csv_without_header(tmp_path):
    io.write_csv_matrix(tmp_path / "m.csv", np.eye(2))
    back, header = io.read_csv_matrix(tmp_path / "m.csv", has_header=False)
    assert header is None
    np.testing.assert_array_equal(back, np.eye(2))


@pytest.mark.parametrize("dtype,scale", [(np.int16, 32767), (np.int32, 2 ** 31 - 1), (np.float32, 1.0)])
def test_read_wav_formats(tmp_path, dtype, scale):
    x = np.array([0.0, 0.5, -0.5, 0.25])
    wavfile.write(tmp_path / "a.wav", 8000, (x * scale).astype(dtype))
    y, sr = io.read_wav(tmp_path / "a.wav")
    assert sr == 8000
    np.testing.assert_allclose(y, x, atol=1e-4)


def test_read_wav_stereo(tmp_path):
    st = np.array([[0.5, -0.5], [0.2, 0.4]], dtype=np.float32)
    wavfile.write(tmp_path / "s.wav", 8000, st)
    y, _ = io.read_wav(tmp_path / "s.wav")
    np.testing.assert_allclose(y, [0.0, 0.3], atol=1e-7)


def test_write_wav_pcm16(tmp_path):
    io.write_wav(tmp_path / "a.wav", [0.0, 2.0, -0.5], 16000, pcm16=True)
    sr, data = wavfile.read(tmp_path / "a.wav")
    assert data.dtype == np.int16 and data.tolist() == [0, 32767, -16384]


def test_beats(tmp_path):
    (tmp_path / "b.txt").write_text("# header\n0.5\n\n1.25  # downbeat\n")
    assert io.read_beats(tmp_path / "b.txt") == [0.5, 1.25]
    io.write_beats(tmp_path / "c.txt", [0.1, 2.0])
    assert io.read_beats(tmp_path / "c.txt") == [0.1, 2.0]
