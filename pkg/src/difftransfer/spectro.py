"""Audio <-> log-mel spectrogram pipeline.

Everything here runs at a fixed 16 kHz sample rate with a 20 ms Hann window
and 50% overlap (320-sample window, 160-sample hop), projected onto 128 HTK
mel bands spanning 0-8000 Hz.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window, resample_poly

from .exceptions import (
    DecodeError,
    DegenerateStatsWarning,
    EmptyInputError,
    ShapeError,
)

SAMPLE_RATE = 16000
WINDOW_S = 0.020
OVERLAP = 0.5
N_FFT = int(round(WINDOW_S * SAMPLE_RATE))  # 320
HOP = int(round(N_FFT * (1.0 - OVERLAP)))  # 160
N_FREQS = N_FFT // 2 + 1  # 161
N_MELS = 128
F_MIN = 0.0
F_MAX = SAMPLE_RATE / 2.0
LOG_FLOOR = 1e-5
SLICE_FRAMES = 128
HOP_SECONDS = HOP / SAMPLE_RATE


@dataclass
class AudioBuffer:
    """Mono waveform with its sample rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ShapeError(f"audio must be mono 1-D, got shape {self.samples.shape}")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass
class LogMelSpectrogram:
    """Log-power mel energies, shape [128 mel bins, frames]."""

    values: np.ndarray
    hop_seconds: float = HOP_SECONDS
    mel_range: tuple = (F_MIN, F_MAX)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != N_MELS:
            raise ShapeError(f"expected [{N_MELS}, frames], got {self.values.shape}")
        if self.values.shape[1] < 1:
            raise EmptyInputError("spectrogram has no frames")

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NormalizationStats:
    """Corpus-level min/max of log-mel values."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"lo ({self.lo}) must be <= hi ({self.hi})")

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    def to_dict(self) -> dict:
        return {"lo": float(self.lo), "hi": float(self.hi)}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(lo=float(d["lo"]), hi=float(d["hi"]))

    @classmethod
    def from_spectrograms(cls, specs) -> "NormalizationStats":
        lo = min(float(np.min(_values(s))) for s in specs)
        hi = max(float(np.max(_values(s))) for s in specs)
        return cls(lo=lo, hi=hi)


@dataclass
class SpectrogramSlice:
    values: np.ndarray
    origin_frame: int
    pad_frames: int = 0


def _values(spec) -> np.ndarray:
    return spec.values if isinstance(spec, LogMelSpectrogram) else np.asarray(spec)


# --------------------------------------------------------------------------- io


def _pcm_to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if np.issubdtype(data.dtype, np.integer):
        return data.astype(np.float64) / float(-np.iinfo(data.dtype).min)
    return data.astype(np.float64)


def resample(samples: np.ndarray, orig_sr: int, target_sr: int = SAMPLE_RATE) -> np.ndarray:
    if orig_sr == target_sr:
        return np.asarray(samples, dtype=np.float64)
    g = math.gcd(int(orig_sr), int(target_sr))
    return resample_poly(samples, target_sr // g, orig_sr // g)


def peak_normalize(samples: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(samples)) if samples.size else 0.0
    if peak == 0.0:
        return samples
    return samples / peak


def load_audio(path) -> AudioBuffer:
    """Read a PCM WAV file as mono 16 kHz audio, peak-normalized to 1.

    Multi-channel input is averaged to mono. Silent files are returned as-is.
    """
    path = Path(path)
    try:
        sr, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    data = _pcm_to_float(np.asarray(data))
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.size == 0:
        raise EmptyInputError(f"{path} contains no samples")
    data = resample(data, sr)
    if not np.all(np.isfinite(data)):
        raise DecodeError(f"{path} contains non-finite samples")
    return AudioBuffer(peak_normalize(data), SAMPLE_RATE)


def save_audio(path, audio: AudioBuffer) -> None:
    """Write float32 WAV; samples are clipped to [-1, 1]."""
    samples = np.clip(audio.samples, -1.0, 1.0).astype(np.float32)
    wavfile.write(Path(path), audio.sample_rate, samples)


# ------------------------------------------------------------------------- stft


@lru_cache(maxsize=None)
def hann_window(n: int = N_FFT) -> np.ndarray:
    return get_window("hann", n, fftbins=True)


def n_frames_for(length: int) -> int:
    return 1 + length // HOP


def stft(audio) -> np.ndarray:
    """Complex STFT, shape [161, 1 + len // 160], zero center padding."""
    x = audio.samples if isinstance(audio, AudioBuffer) else np.asarray(audio, dtype=np.float64)
    if x.size < 1:
        raise EmptyInputError("stft needs at least one sample")
    pad = N_FFT // 2
    xp = np.pad(x, (pad, pad))
    frames = np.lib.stride_tricks.sliding_window_view(xp, N_FFT)[::HOP]
    return np.fft.rfft(frames * hann_window(), axis=1).T


def istft(spec: np.ndarray, length: int | None = None) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft`.

    Output length defaults to ``frames * HOP``.
    """
    n_frames = spec.shape[1]
    win = hann_window()
    frames = np.fft.irfft(spec.T, n=N_FFT, axis=1) * win
    total = (n_frames - 1) * HOP + N_FFT
    out = np.zeros(total)
    norm = np.zeros(total)
    for i in range(n_frames):
        s = i * HOP
        out[s:s + N_FFT] += frames[i]
        norm[s:s + N_FFT] += win ** 2
    out = np.where(norm > 1e-8, out / np.maximum(norm, 1e-8), 0.0)
    out = out[N_FFT // 2:]
    if length is None:
        length = n_frames * HOP
    if out.shape[0] < length:
        out = np.pad(out, (0, length - out.shape[0]))
    return out[:length]


# -------------------------------------------------------------------------- mel


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges() -> np.ndarray:
    """The N_MELS + 2 HTK-spaced corner frequencies in Hz."""
    return mel_to_hz(np.linspace(hz_to_mel(F_MIN), hz_to_mel(F_MAX), N_MELS + 2))


@lru_cache(maxsize=None)
def _mel_filterbank() -> np.ndarray:
    edges = mel_band_edges()
    freqs = np.linspace(0.0, SAMPLE_RATE / 2.0, N_FREQS)
    lower = edges[:-2, None]
    center = edges[1:-1, None]
    upper = edges[2:, None]
    up = (freqs[None, :] - lower) / (center - lower)
    down = (upper - freqs[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(up, down))
    fb.setflags(write=False)
    return fb


def mel_filterbank() -> np.ndarray:
    """Triangular HTK mel filterbank, shape [128, 161], unit peak height."""
    return _mel_filterbank().copy()


@lru_cache(maxsize=None)
def _mel_pinv() -> np.ndarray:
    p = np.linalg.pinv(_mel_filterbank())
    p.setflags(write=False)
    return p


def log_mel(stft_mag: np.ndarray) -> LogMelSpectrogram:
    """Project STFT magnitudes to 128 mel bands and take ``log(power + 1e-5)``."""
    mag = np.asarray(stft_mag)
    if np.iscomplexobj(mag):
        mag = np.abs(mag)
    if mag.ndim != 2 or mag.shape[0] != N_FREQS:
        raise ShapeError(f"expected [{N_FREQS}, frames] magnitudes, got {mag.shape}")
    mel_power = _mel_filterbank() @ (mag.astype(np.float64) ** 2)
    return LogMelSpectrogram(np.log(mel_power + LOG_FLOOR))


def audio_to_logmel(audio: AudioBuffer) -> LogMelSpectrogram:
    return log_mel(np.abs(stft(audio)))


def griffin_lim(magnitude: np.ndarray, iterations: int = 32, momentum: float = 0.99,
                length: int | None = None) -> np.ndarray:
    """Phase reconstruction from magnitude (fast Griffin-Lim with momentum).

    Starts from zero phase so the result is a pure function of the input.
    """
    n_frames = magnitude.shape[1]
    out_len = n_frames * HOP
    angles = np.ones_like(magnitude, dtype=np.complex128)
    prev = np.zeros_like(angles)
    for _ in range(iterations):
        rebuilt = stft(istft(magnitude * angles, out_len))[:, :n_frames]
        accel = rebuilt - (momentum / (1.0 + momentum)) * prev
        angles = accel / np.maximum(np.abs(accel), 1e-16)
        prev = rebuilt
    y = istft(magnitude * angles, out_len)
    if length is not None:
        y = y[:length] if y.shape[0] >= length else np.pad(y, (0, length - y.shape[0]))
    return y


def invert_to_waveform(spec, iterations: int = 32) -> AudioBuffer:
    """Approximate inverse of the log-mel pipeline (no neural vocoder).

    exp -> clipped mel pseudo-inverse -> Griffin-Lim. Returns ``frames * 160``
    samples, rescaled only if the peak exceeds 1.
    """
    spec = spec if isinstance(spec, LogMelSpectrogram) else LogMelSpectrogram(spec)
    mel_power = np.maximum(np.exp(spec.values) - LOG_FLOOR, 0.0)
    lin_power = np.maximum(_mel_pinv() @ mel_power, 0.0)
    y = griffin_lim(np.sqrt(lin_power), iterations)
    peak = np.max(np.abs(y)) if y.size else 0.0
    if peak > 1.0:
        y = y / peak
    return AudioBuffer(y, SAMPLE_RATE)


# ---------------------------------------------------------------- normalization


def normalize(spec, stats: NormalizationStats) -> np.ndarray:
    """Affine map [lo, hi] -> [-1, 1], clipping out-of-range values.

    With ``lo == hi`` the result is all zeros and a
    :class:`DegenerateStatsWarning` is emitted.
    """
    x = _values(spec).astype(np.float64)
    if stats.degenerate:
        warnings.warn("normalization range is zero; returning zeros", DegenerateStatsWarning, stacklevel=2)
        return np.zeros_like(x)
    y = 2.0 * (x - stats.lo) / (stats.hi - stats.lo) - 1.0
    return np.clip(y, -1.0, 1.0)


def denormalize(x, stats: NormalizationStats) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (x + 1.0) * 0.5 * (stats.hi - stats.lo) + stats.lo


# ---------------------------------------------------------------------- slicing

PAD_VALUE = -1.0


def take_crop(values: np.ndarray, offset: int, width: int = SLICE_FRAMES) -> np.ndarray:
    """Frames ``[offset, offset + width)``, right-padded with -1 if short."""
    chunk = values[:, offset:offset + width]
    short = width - chunk.shape[1]
    if short > 0:
        chunk = np.pad(chunk, ((0, 0), (0, short)), constant_values=PAD_VALUE)
    return chunk


def random_crop_offset(n_frames: int, rng: np.random.Generator, width: int = SLICE_FRAMES) -> int:
    return int(rng.integers(0, max(n_frames - width, 0) + 1))


def slice_frames(spec, mode: str = "sequential", seed: int = 0) -> list[SpectrogramSlice]:
    """Cut a normalized spectrogram into 128-frame slices.

    ``sequential`` covers the whole input with ceil(F / 128) slices, padding
    the last one with -1 (the silence floor). ``random_crop`` returns a single
    crop at a seed-determined offset.
    """
    values = _values(spec)
    n_frames = values.shape[1]
    if n_frames < 1:
        raise EmptyInputError("spectrogram has no frames")
    if mode == "sequential":
        out = []
        for start in range(0, n_frames, SLICE_FRAMES):
            chunk = take_crop(values, start)
            pad = max(0, start + SLICE_FRAMES - n_frames)
            out.append(SpectrogramSlice(chunk, start, pad))
        return out
    if mode == "random_crop":
        rng = np.random.default_rng(seed)
        offset = random_crop_offset(n_frames, rng)
        pad = max(0, offset + SLICE_FRAMES - n_frames)
        return [SpectrogramSlice(take_crop(values, offset), offset, pad)]
    raise ValueError(f"unknown slicing mode {mode!r}")


def join_slices(slices: list[SpectrogramSlice]) -> np.ndarray:
    """Concatenate sequential slices and drop the padded tail."""
    parts = [s.values[:, :SLICE_FRAMES - s.pad_frames] for s in slices]
    return np.concatenate(parts, axis=1)


# ------------------------------------------------------------- spectrogram file


def write_spectrogram(path, spec, stats: NormalizationStats | None = None) -> None:
    """Write a JSON header line followed by little-endian float32 [bins x frames]."""
    values = _values(spec)
    header = {
        "bins": int(values.shape[0]),
        "frames": int(values.shape[1]),
        "hop_s": HOP_SECONDS,
        "lo": None if stats is None else float(stats.lo),
        "hi": None if stats is None else float(stats.hi),
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_spectrogram(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    bins, frames = header["bins"], header["frames"]
    values = np.frombuffer(raw, dtype="<f4")
    if values.size != bins * frames:
        raise ShapeError(f"{path}: header says {bins}x{frames}, payload has {values.size} values")
    return values.reshape(bins, frames).astype(np.float64), header
