"""Noise-prediction training loop with best-epoch checkpoint selection."""

from __future__ import annotations

import copy
import json
import logging
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .denoiser import DenoiserCheckpoint, UNetConfig, build_unet
from .exceptions import ConfigError, DatasetError, TrainingDivergedError
from .schedule import ScheduleConfig, cosine_rates, forward_noise, sample_diffusion_time
from .spectro import (
    SLICE_FRAMES,
    NormalizationStats,
    audio_to_logmel,
    load_audio,
    normalize,
    random_crop_offset,
    take_crop,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5000
    batch_size: int = 16
    learning_rate: float = 2e-5
    weight_decay: float = 1e-4
    seed: int = 0
    crops_per_track_per_epoch: int = 1

    def __post_init__(self):
        for name in ("epochs", "batch_size", "crops_per_track_per_epoch"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate must be > 0 and weight_decay >= 0")

    @classmethod
    def toy(cls, **overrides) -> "TrainConfig":
        """Desk-scale settings for the synthetic corpus."""
        return replace(cls(epochs=200, learning_rate=TOY_LEARNING_RATE), **overrides)

    def to_dict(self) -> dict:
        return asdict(self)


TOY_LEARNING_RATE = 1e-3


def l1_loss(eps_hat: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    return (eps_hat - eps).abs().mean()


def train_step(batch, model: torch.nn.Module, rng: np.random.Generator,
               optimizer: torch.optim.Optimizer | None = None,
               schedule: ScheduleConfig = ScheduleConfig()) -> float:
    """One noise-prediction step on a batch of ``(x, y0)`` slices.

    ``x`` and ``y0`` are ``[B, H, W]`` normalized arrays. The model is called
    as ``model(yt, x, noise_rate_sq)`` on NCHW tensors. Parameters are only
    updated when an optimizer is given.
    """
    x, y0 = (np.asarray(a, dtype=np.float64) for a in batch)
    b = y0.shape[0]
    t = sample_diffusion_time(b, rng)
    eps = rng.standard_normal(y0.shape)
    rates = cosine_rates(t, schedule)
    yt = forward_noise(y0, rates, eps)

    dtype = next(model.parameters()).dtype
    as_t = lambda a: torch.as_tensor(a, dtype=dtype)[:, None]
    nr2 = torch.as_tensor(np.asarray(rates.noise_rate) ** 2, dtype=dtype)
    eps_hat = model(as_t(yt), as_t(x), nr2)
    loss = l1_loss(eps_hat, as_t(eps))
    if not torch.isfinite(loss):
        raise TrainingDivergedError(
            f"non-finite loss {loss.item()} (t in [{t.min():.4f}, {t.max():.4f}], "
            f"|x| max {np.abs(x).max():.3g}, |y0| max {np.abs(y0).max():.3g}, "
            f"|eps_hat| max {eps_hat.detach().abs().max().item():.3g})"
        )
    if optimizer is not None:
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    return float(loss.item())


def select_best_epoch(losses: Sequence[float]) -> int:
    """1-based epoch with the smallest loss; ties go to the earliest."""
    return int(np.argmin(np.asarray(losses))) + 1


def _pair_arrays(corpus) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    for i, (x, y) in enumerate(corpus):
        x = np.asarray(getattr(x, "values", x), dtype=np.float64)
        y = np.asarray(getattr(y, "values", y), dtype=np.float64)
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise DatasetError(f"pair {i}: incompatible spectrogram shapes {x.shape} and {y.shape}")
        n = min(x.shape[1], y.shape[1])
        out.append((x[:, :n], y[:, :n]))
    return out


def load_corpus(pairs) -> list[tuple[np.ndarray, np.ndarray]]:
    """Load ``(conditioning_path, target_path)`` WAV pairs as log-mel arrays."""
    corpus = []
    for x_path, y_path in pairs:
        for p in (x_path, y_path):
            if not Path(p).exists():
                raise DatasetError(f"missing paired file {p}")
        corpus.append((audio_to_logmel(load_audio(x_path)).values, audio_to_logmel(load_audio(y_path)).values))
    return corpus


def fit(corpus, cfg: TrainConfig = TrainConfig(), unet_config: UNetConfig = UNetConfig(),
        schedule: ScheduleConfig = ScheduleConfig(), stats: NormalizationStats | None = None,
        log_path=None, on_epoch: Callable[[int, float], None] | None = None) -> DenoiserCheckpoint:
    """Train a denoiser on paired log-mel spectrograms.

    Every epoch draws ``crops_per_track_per_epoch`` random 128-frame crops per
    track, at the same offset in the conditioning and target spectrograms.
    The returned checkpoint holds the weights of the epoch with the lowest
    mean loss.
    """
    pairs = _pair_arrays(corpus)
    if not pairs:
        raise DatasetError("training corpus is empty")
    if stats is None:
        stats = NormalizationStats.from_spectrograms([a for p in pairs for a in p])
    normed = [(normalize(x, stats), normalize(y, stats)) for x, y in pairs]

    rng = np.random.default_rng(cfg.seed)
    model = build_unet(unet_config, seed=cfg.seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    log_fh = open(log_path, "w") if log_path is not None else None

    history: list[float] = []
    best_state, best_loss = None, np.inf
    try:
        for epoch in range(1, cfg.epochs + 1):
            start = time.perf_counter()
            model.train()
            jobs = np.repeat(np.arange(len(normed)), cfg.crops_per_track_per_epoch)
            jobs = jobs[rng.permutation(len(jobs))]
            total, count = 0.0, 0
            for lo in range(0, len(jobs), cfg.batch_size):
                xs, ys = [], []
                for j in jobs[lo:lo + cfg.batch_size]:
                    x, y = normed[j]
                    offset = random_crop_offset(x.shape[1], rng)
                    xs.append(take_crop(x, offset, SLICE_FRAMES))
                    ys.append(take_crop(y, offset, SLICE_FRAMES))
                loss = train_step((np.stack(xs), np.stack(ys)), model, rng, optimizer, schedule)
                total += loss * len(xs)
                count += len(xs)
            mean_loss = total / count
            history.append(mean_loss)
            if mean_loss < best_loss:
                best_loss = mean_loss
                best_state = copy.deepcopy(model.state_dict())
            record = {"epoch": epoch, "mean_loss": mean_loss, "wall_s": time.perf_counter() - start}
            log.info(json.dumps(record))
            if log_fh is not None:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()
            if on_epoch is not None:
                on_epoch(epoch, mean_loss)
    finally:
        if log_fh is not None:
            log_fh.close()

    model.load_state_dict(best_state)
    model.eval()
    best_epoch = select_best_epoch(history)
    return DenoiserCheckpoint(
        model=model,
        unet_config=unet_config,
        schedule_config=schedule,
        normalization_stats=stats,
        training_meta={
            "epoch": best_epoch,
            "loss": history[best_epoch - 1],
            "seed": cfg.seed,
            "epochs_run": len(history),
            "loss_history": history,
            "train_config": cfg.to_dict(),
        },
    )
