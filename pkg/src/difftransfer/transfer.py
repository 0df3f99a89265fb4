"""Inference: conditioning audio -> generated target-timbre audio."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch

from .denoiser import DenoiserCheckpoint, predict_noise
from .exceptions import CheckpointError, ConfigError
from .sampler import SamplerConfig, sample
from .schedule import draw_noise
from .spectro import (
    HOP,
    N_MELS,
    SLICE_FRAMES,
    AudioBuffer,
    LogMelSpectrogram,
    SpectrogramSlice,
    audio_to_logmel,
    denormalize,
    invert_to_waveform,
    join_slices,
    load_audio,
    normalize,
    save_audio,
    slice_frames,
    write_spectrogram,
)

log = logging.getLogger(__name__)

# 32 iterations leave phase noise that the pitch extractor reads as extra notes
GL_ITERATIONS = 100


def _predictor(ckpt: DenoiserCheckpoint):
    model = ckpt.model.eval()

    @torch.no_grad()
    def predict(yt, x, t):
        out = predict_noise(model, yt[None, :, :, None].astype(np.float32),
                            x[None, :, :, None].astype(np.float32), [t], ckpt.schedule_config)
        return out[0, :, :, 0].astype(np.float64)

    return predict


def transfer_spectrogram(spec, ckpt: DenoiserCheckpoint, steps: int = 50, seed: int = 0) -> LogMelSpectrogram:
    """Generate the target-timbre log-mel for a conditioning log-mel.

    The spectrogram is cut into 128-frame slices and every slice is sampled
    from the same noise tensor drawn once from ``seed``.
    """
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    stats = ckpt.normalization_stats
    if stats is None:
        raise CheckpointError("checkpoint manifest has no normalization stats")
    values = getattr(spec, "values", spec)
    cfg = SamplerConfig(steps=steps, schedule=ckpt.schedule_config)
    noise = draw_noise((N_MELS, SLICE_FRAMES), seed)
    predict = _predictor(ckpt)
    generated = []
    for s in slice_frames(normalize(values, stats), mode="sequential"):
        y = sample(predict, s.values, noise, cfg)
        generated.append(SpectrogramSlice(np.clip(y, -1.0, 1.0), s.origin_frame, s.pad_frames))
    return LogMelSpectrogram(denormalize(join_slices(generated), stats))


def transfer_track(audio: AudioBuffer, ckpt: DenoiserCheckpoint, steps: int = 50, seed: int = 0,
                   gl_iterations: int = GL_ITERATIONS) -> AudioBuffer:
    """Audio in, target-timbre audio out, same length as the input."""
    if len(audio) < HOP:
        raise ConfigError(f"audio must be at least one hop ({HOP} samples) long")
    generated = transfer_spectrogram(audio_to_logmel(audio), ckpt, steps, seed)
    y = invert_to_waveform(generated, gl_iterations).samples
    y = y[:len(audio)] if y.shape[0] >= len(audio) else np.pad(y, (0, len(audio) - y.shape[0]))
    return AudioBuffer(y, audio.sample_rate)


def transfer_corpus(dir_in, ckpt: DenoiserCheckpoint, dir_out, steps: int = 50, seed: int = 0,
                    gl_iterations: int = GL_ITERATIONS) -> list[str]:
    """Transfer every WAV in ``dir_in`` into ``dir_out`` under the same name.

    Each output WAV gets a ``.logmel`` sidecar with the generated spectrogram.
    All tracks share ``seed``. Returns the names of files that failed; those
    are logged and skipped.
    """
    dir_in, dir_out = Path(dir_in), Path(dir_out)
    if not dir_in.is_dir():
        raise FileNotFoundError(f"input directory {dir_in} does not exist")
    dir_out.mkdir(parents=True, exist_ok=True)
    paths = sorted(dir_in.glob("*.wav"))
    if not paths:
        log.warning("no WAV files in %s", dir_in)
    failed = []
    for path in paths:
        try:
            audio = load_audio(path)
            spec = transfer_spectrogram(audio_to_logmel(audio), ckpt, steps, seed)
            y = invert_to_waveform(spec, gl_iterations).samples[:len(audio)]
            save_audio(dir_out / path.name, AudioBuffer(y))
            write_spectrogram(dir_out / (path.stem + ".logmel"), spec, ckpt.normalization_stats)
        except Exception as exc:  # one bad file must not stop the batch
            log.error("failed to transfer %s: %s", path.name, exc)
            failed.append(path.name)
    return failed
