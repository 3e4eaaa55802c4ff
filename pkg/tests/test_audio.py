import struct

import numpy as np
import pytest

from voxscreen.audio import AudioBuffer, VadConfig, read_wav, resample, trim_endpoints, write_wav
from voxscreen.errors import EmptyAudio, InvalidArgument, ParseError, UnsupportedFormat

from conftest import FS, buffer, sine


def test_buffer_invariants():
    with pytest.raises(ValueError):
        AudioBuffer(np.array([0.0, np.nan]), FS)
    with pytest.raises(ValueError):
        AudioBuffer(np.zeros(4), 0)
    with pytest.raises(ValueError):
        AudioBuffer(np.zeros(0), FS)


def test_silence_pcm16(tmp_path):
    path = tmp_path / "s.wav"
    write_wav(path, buffer(np.zeros(FS)))
    buf = read_wav(path)
    assert buf.sample_rate == FS and buf.samples.size == FS and not buf.samples.any()


def test_float32_round_trip(tmp_path):
    x = sine(440)
    path = tmp_path / "f.wav"
    write_wav(path, buffer(x), "float32")
    y = read_wav(path).samples
    assert np.max(np.abs(y - x)) <= np.spacing(np.float32(0.5))


@pytest.mark.parametrize("fmt,step", [("pcm16", 1 / 32768), ("pcm24", 1 / 8388608)])
def test_pcm_round_trip(tmp_path, fmt, step):
    x = sine(220)
    path = tmp_path / "p.wav"
    write_wav(path, buffer(x), fmt)
    assert np.max(np.abs(read_wav(path).samples - x)) <= step


def _riff(fmt_chunk, data, magic=b"RIFF"):
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk
    body += b"data" + struct.pack("<I", len(data)) + data
    return magic + struct.pack("<I", len(body)) + body


def test_stereo_is_averaged(tmp_path):
    frames = np.array([[1000, 3000], [-2000, 0]], dtype="<i2")
    fmt = struct.pack("<HHIIHH", 1, 2, FS, FS * 4, 4, 16)
    path = tmp_path / "st.wav"
    path.write_bytes(_riff(fmt, frames.tobytes()))
    buf = read_wav(path)
    np.testing.assert_allclose(buf.samples, [2000 / 32768, -1000 / 32768])


def test_rifx_is_parse_error(tmp_path):
    path = tmp_path / "x.wav"
    path.write_bytes(_riff(struct.pack("<HHIIHH", 1, 1, FS, FS * 2, 2, 16), b"\0\0", magic=b"RIFX"))
    with pytest.raises(ParseError):
        read_wav(path)


def test_truncated_header_is_parse_error(tmp_path):
    path = tmp_path / "t.wav"
    path.write_bytes(b"RIFF\x10\x00")
    with pytest.raises(ParseError):
        read_wav(path)


def test_unsupported_codec(tmp_path):
    path = tmp_path / "a.wav"
    path.write_bytes(_riff(struct.pack("<HHIIHH", 6, 1, 8000, 8000, 1, 8), b"\0" * 8))  # A-law
    with pytest.raises(UnsupportedFormat):
        read_wav(path)


def test_empty_data_chunk(tmp_path):
    path = tmp_path / "e.wav"
    path.write_bytes(_riff(struct.pack("<HHIIHH", 1, 1, FS, FS * 2, 2, 16), b""))
    with pytest.raises(EmptyAudio):
        read_wav(path)


def test_resample_identity_is_bit_identical():
    buf = buffer(sine(100))
    out = resample(buf, FS)
    assert np.array_equal(out.samples, buf.samples) and out.sample_rate == FS


def test_resample_keeps_dominant_frequency():
    buf = buffer(sine(100, fs=48000), fs=48000)
    out = resample(buf, 16000)
    spec = np.abs(np.fft.rfft(out.samples))
    freqs = np.fft.rfftfreq(out.samples.size, 1 / 16000)
    assert abs(freqs[np.argmax(spec)] - 100) <= freqs[1]


def test_resample_length_preserved():
    out = resample(buffer(sine(300, fs=44100), fs=44100), 16000)
    assert abs(out.samples.size - 16000) <= 1


def test_resample_round_trip_error():
    x = sine(300, fs=16000) + sine(1200, fs=16000, amp=0.2)
    back = resample(resample(buffer(x), 44100), 16000).samples
    n = min(back.size, x.size)
    assert np.linalg.norm(back[:n] - x[:n]) / np.linalg.norm(x[:n]) <= 1e-2


def test_resample_rejects_bad_rate():
    with pytest.raises(InvalidArgument):
        resample(buffer(sine(100)), 0)


def test_trim_sine_between_silences():
    x = np.concatenate([np.zeros(FS // 2), sine(200), np.zeros(FS // 2)])
    out, bounds = trim_endpoints(buffer(x), VadConfig())
    assert abs(out.duration - 1.0) <= 0.06
    assert bounds.speech_found
    assert np.array_equal(out.samples, x[bounds.start_index:bounds.end_index])


def test_trim_all_silence_passes_through():
    x = np.zeros(FS)
    out, bounds = trim_endpoints(buffer(x))
    assert not bounds.speech_found
    assert (bounds.start_index, bounds.end_index) == (0, FS)
    assert np.array_equal(out.samples, x)


def test_trim_chirp_keeps_most():
    t = np.arange(FS) / FS
    x = 0.5 * np.sin(2 * np.pi * (100 * t + 150 * t ** 2))
    _, bounds = trim_endpoints(buffer(x))
    assert (bounds.end_index - bounds.start_index) >= 0.95 * FS
    assert 0 <= bounds.start_index < bounds.end_index <= FS
