import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.io import wavfile

from difftransfer import spectro
from difftransfer.exceptions import DecodeError, DegenerateStatsWarning, EmptyInputError, ShapeError
from difftransfer.spectro import (
    AudioBuffer,
    NormalizationStats,
    audio_to_logmel,
    denormalize,
    invert_to_waveform,
    join_slices,
    load_audio,
    log_mel,
    normalize,
    slice_frames,
    stft,
)

SR = 16000


def sine(freq, seconds=1.0, amp=1.0):
    t = np.arange(int(seconds * SR)) / SR
    return amp * np.sin(2 * np.pi * freq * t)


def dominant_frequency(x):
    mag = np.abs(np.fft.rfft(x))
    return np.fft.rfftfreq(len(x), 1 / SR)[np.argmax(mag)]


# -------------------------------------------------------------------- loading


def test_load_stereo_44k_resamples_to_mono_16k(tmp_path):
    n = 441000
    left = (0.5 * np.sin(2 * np.pi * 300 * np.arange(n) / 44100) * 32767).astype(np.int16)
    wavfile.write(tmp_path / "s.wav", 44100, np.stack([left, left], axis=1))
    audio = load_audio(tmp_path / "s.wav")
    assert audio.sample_rate == SR
    assert len(audio) == 160000
    assert np.max(np.abs(audio.samples)) == pytest.approx(1.0)


def test_load_all_zero_file_skips_normalization(tmp_path):
    wavfile.write(tmp_path / "z.wav", SR, np.zeros(1600, dtype=np.int16))
    audio = load_audio(tmp_path / "z.wav")
    assert len(audio) == 1600
    assert not np.any(audio.samples)


def test_load_mono_16k_is_identity_up_to_peak(tmp_path):
    x = 0.25 * sine(220, 10.0)
    wavfile.write(tmp_path / "m.wav", SR, x.astype(np.float32))
    audio = load_audio(tmp_path / "m.wav")
    assert len(audio) == 160000
    np.testing.assert_allclose(audio.samples, x / np.max(np.abs(x)), atol=1e-6)


def test_load_int32_scaling(tmp_path):
    x = (0.5 * sine(100, 0.1) * 2**31).astype(np.int32)
    wavfile.write(tmp_path / "i.wav", SR, x)
    assert np.max(np.abs(load_audio(tmp_path / "i.wav").samples)) == pytest.approx(1.0)


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"definitely not a wav file")
    with pytest.raises(DecodeError):
        load_audio(bad)
    wavfile.write(tmp_path / "empty.wav", SR, np.zeros(0, dtype=np.int16))
    with pytest.raises(EmptyInputError):
        load_audio(tmp_path / "empty.wav")


# ----------------------------------------------------------------------- stft


def test_stft_shape_one_second():
    assert stft(np.zeros(16000)).shape == (161, 101)


def test_stft_zero_input():
    assert not np.any(np.abs(stft(np.zeros(5000))))


def test_stft_sine_peak_bin():
    mag = np.abs(stft(sine(440)))
    # 440 Hz * 320 / 16000 = 8.8 -> bin 9
    assert np.all(np.argmax(mag, axis=0) == 9)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=4000))
def test_frame_count_formula(length):
    # brute force: count hop positions whose window fits in the padded signal
    padded = length + 320
    expected = sum(1 for k in range(padded) if k * 160 + 320 <= padded)
    assert stft(np.ones(length)).shape[1] == expected


def test_stft_rejects_empty():
    with pytest.raises(EmptyInputError):
        stft(np.zeros(0))


# -------------------------------------------------------------------- log-mel


def test_filterbank_shape():
    assert spectro.mel_filterbank().shape == (128, 161)


def test_log_mel_floor():
    lm = log_mel(np.zeros((161, 7)))
    np.testing.assert_allclose(lm.values, np.log(1e-5))
    assert np.log(1e-5) == pytest.approx(-11.513, abs=1e-3)


def test_log_mel_rejects_wrong_bin_count():
    with pytest.raises(ShapeError):
        log_mel(np.zeros((160, 4)))


def test_log_mel_sine_lands_in_bracketing_band():
    lm = audio_to_logmel(AudioBuffer(sine(440)))
    band = np.bincount(np.argmax(lm.values, axis=0)).argmax()
    # independent HTK band edges
    mels = np.linspace(0.0, 2595.0 * np.log10(1.0 + 8000.0 / 700.0), 130)
    edges = 700.0 * (10.0 ** (mels / 2595.0) - 1.0)
    assert edges[band] <= 440.0 <= edges[band + 2]
    assert band == 24


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=1.01, max_value=50.0), st.integers(min_value=0, max_value=2**31 - 1))
def test_scaling_never_decreases_log_mel(c, seed):
    x = np.random.default_rng(seed).standard_normal(3200) * 0.1
    base = audio_to_logmel(AudioBuffer(x)).values
    louder = audio_to_logmel(AudioBuffer(c * x)).values
    assert np.all(louder >= base - 1e-12)


def test_pipeline_is_pure():
    x = np.random.default_rng(3).standard_normal(4000)
    a = audio_to_logmel(AudioBuffer(x)).values
    b = audio_to_logmel(AudioBuffer(x.copy())).values
    assert np.array_equal(a, b)


# -------------------------------------------------------------- normalization


def test_normalize_endpoints():
    stats = NormalizationStats(-11.5, 8.0)
    np.testing.assert_array_equal(normalize(np.array([[-11.5, 8.0]]), stats), [[-1.0, 1.0]])


def test_normalize_clips_out_of_range():
    stats = NormalizationStats(0.0, 1.0)
    out = normalize(np.array([[-5.0, 0.5, 7.0]]), stats)
    np.testing.assert_allclose(out, [[-1.0, 0.0, 1.0]])


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 0), st.floats(0.1, 30), st.integers(0, 2**31 - 1))
def test_normalize_round_trip(lo, width, seed):
    stats = NormalizationStats(lo, lo + width)
    x = np.random.default_rng(seed).uniform(stats.lo, stats.hi, size=(128, 9))
    y = normalize(x, stats)
    assert np.all(np.abs(y) <= 1.0)
    np.testing.assert_allclose(denormalize(y, stats), x, atol=1e-6)


def test_normalize_degenerate_stats():
    stats = NormalizationStats(2.0, 2.0)
    with pytest.warns(DegenerateStatsWarning):
        out = normalize(np.full((128, 3), 2.0), stats)
    assert stats.degenerate
    assert not np.any(out)


def test_stats_reject_inverted_range():
    with pytest.raises(ValueError):
        NormalizationStats(1.0, 0.0)


# -------------------------------------------------------------------- slicing


def test_sequential_slices_1001_frames():
    x = np.random.default_rng(0).uniform(-1, 1, (128, 1001))
    slices = slice_frames(x, "sequential")
    assert len(slices) == 8
    assert [s.pad_frames for s in slices] == [0] * 7 + [8 * 128 - 1001]
    assert slices[-1].pad_frames == 23
    assert np.all(slices[-1].values[:, -23:] == -1.0)


def test_single_slice_identity():
    x = np.random.default_rng(1).uniform(-1, 1, (128, 128))
    (s,) = slice_frames(x, "sequential")
    assert s.pad_frames == 0 and s.origin_frame == 0
    assert np.array_equal(s.values, x)


def test_random_crop_deterministic():
    x = np.random.default_rng(2).uniform(-1, 1, (128, 500))
    a = slice_frames(x, "random_crop", seed=11)[0]
    b = slice_frames(x, "random_crop", seed=11)[0]
    assert a.origin_frame == b.origin_frame
    assert np.array_equal(a.values, b.values)
    assert a.values.shape == (128, 128)
    assert np.array_equal(a.values, x[:, a.origin_frame:a.origin_frame + 128])


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=700))
def test_sequential_slices_reassemble(n_frames):
    x = np.random.default_rng(n_frames).uniform(-1, 1, (128, n_frames))
    slices = slice_frames(x, "sequential")
    assert all(s.values.shape == (128, 128) and 0 <= s.pad_frames < 128 for s in slices)
    assert np.array_equal(join_slices(slices), x)


def test_unknown_slice_mode():
    with pytest.raises(ValueError):
        slice_frames(np.zeros((128, 4)), "overlap")


# ------------------------------------------------------------------ inversion


def test_invert_floor_is_near_silent():
    y = invert_to_waveform(np.full((128, 50), np.log(1e-5)))
    assert np.max(np.abs(y.samples)) < 1e-2


def test_invert_length():
    assert len(invert_to_waveform(np.full((128, 101), -3.0))) == 16160


def test_invert_sine_round_trip_frequency():
    lm = audio_to_logmel(AudioBuffer(sine(440)))
    y = invert_to_waveform(lm, iterations=32).samples
    assert abs(dominant_frequency(y) - 440.0) <= 0.03 * 440.0


# ------------------------------------------------------------------ file format


def test_spectrogram_file_round_trip(tmp_path):
    x = np.random.default_rng(5).standard_normal((128, 37))
    stats = NormalizationStats(-11.5, 8.25)
    path = tmp_path / "x.logmel"
    spectro.write_spectrogram(path, x, stats)
    raw = path.read_bytes()
    header_line, payload = raw.split(b"\n", 1)
    header = json.loads(header_line.decode("utf-8"))
    assert header == {"bins": 128, "frames": 37, "hop_s": 0.01, "lo": -11.5, "hi": 8.25}
    assert len(payload) == 128 * 37 * 4
    np.testing.assert_array_equal(np.frombuffer(payload, "<f4").reshape(128, 37), x.astype(np.float32))
    values, header2 = spectro.read_spectrogram(path)
    assert header2 == header
    np.testing.assert_allclose(values, x, rtol=1e-6, atol=1e-6)


def test_read_spectrogram_detects_truncation(tmp_path):
    path = tmp_path / "t.logmel"
    spectro.write_spectrogram(path, np.zeros((128, 4)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ShapeError):
        spectro.read_spectrogram(path)


def test_audio_buffer_rejects_multichannel():
    with pytest.raises(ShapeError):
        AudioBuffer(np.zeros((10, 2)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert AudioBuffer(np.zeros(3)).duration == 3 / SR
