"""Input checks shared by the estimator-style wrappers."""

from __future__ import annotations

import numpy as np

from .exceptions import EmptyInputError, ShapeError
from .spectro import N_MELS, AudioBuffer, LogMelSpectrogram


def check_spectrogram(spec, name: str = "spectrogram") -> np.ndarray:
    values = spec.values if isinstance(spec, LogMelSpectrogram) else np.asarray(spec, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != N_MELS:
        raise ShapeError(f"{name} must be [{N_MELS}, frames], got {values.shape}")
    if values.shape[1] < 1:
        raise EmptyInputError(f"{name} has no frames")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains NaN or inf")
    return values.astype(np.float64, copy=False)


def check_spectrogram_list(specs, name: str = "X") -> list[np.ndarray]:
    if isinstance(specs, (np.ndarray, LogMelSpectrogram)) and np.ndim(getattr(specs, "values", specs)) == 2:
        specs = [specs]
    out = [check_spectrogram(s, f"{name}[{i}]") for i, s in enumerate(specs)]
    if not out:
        raise EmptyInputError(f"{name} is empty")
    return out


def check_paired(X, y) -> tuple[list[np.ndarray], list[np.ndarray]]:
    X = check_spectrogram_list(X, "X")
    y = check_spectrogram_list(y, "y")
    if len(X) != len(y):
        raise ShapeError(f"X has {len(X)} spectrograms but y has {len(y)}")
    return X, y


def check_audio(audio, name: str = "audio") -> AudioBuffer:
    if not isinstance(audio, AudioBuffer):
        audio = AudioBuffer(np.asarray(audio, dtype=np.float64))
    if len(audio) == 0:
        raise EmptyInputError(f"{name} is empty")
    if not np.all(np.isfinite(audio.samples)):
        raise ValueError(f"{name} contains NaN or inf")
    return audio
