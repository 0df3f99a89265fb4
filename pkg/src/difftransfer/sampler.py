"""Deterministic DDIM reverse process."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ConfigError, DomainError, ShapeError
from .schedule import ScheduleConfig, cosine_rates


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 50
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError(f"steps must be an integer >= 1, got {self.steps}")

    @property
    def step_size(self) -> float:
        return 1.0 / self.steps

    def time_grid(self) -> np.ndarray:
        """Diffusion times visited by :func:`sample`, from 1 down to 0."""
        return np.arange(self.steps, -1, -1) / self.steps


def ddim_step(yt, eps_hat, t: float, t_prev: float, cfg: ScheduleConfig = ScheduleConfig()):
    """One deterministic DDIM update from ``t`` to ``t_prev``.

    Returns ``(y0_pred, yt_prev)``. Works on numpy arrays and torch tensors.
    """
    if t_prev > t:
        raise DomainError(f"t_prev ({t_prev}) must not exceed t ({t})")
    if tuple(np.shape(yt)) != tuple(np.shape(eps_hat)):
        raise ShapeError(f"sample and noise estimate shapes differ: {np.shape(yt)} vs {np.shape(eps_hat)}")
    now = cosine_rates(t, cfg)
    prev = cosine_rates(t_prev, cfg)
    y0_pred = (yt - now.noise_rate * eps_hat) / now.signal_rate
    yt_prev = prev.signal_rate * y0_pred + prev.noise_rate * eps_hat
    return y0_pred, yt_prev


NoisePredictor = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


def sample(predict: NoisePredictor, x, noise, cfg: SamplerConfig = SamplerConfig()):
    """Run the reverse process from ``noise`` conditioned on ``x``.

    ``predict(yt, x, t)`` must return a noise estimate shaped like ``yt``.
    The loop visits ``t = i / T`` for ``i = T .. 1`` and returns the final
    clean-sample estimate.
    """
    if tuple(np.shape(noise)) != tuple(np.shape(x)):
        raise ShapeError(f"noise shape {np.shape(noise)} differs from conditioning shape {np.shape(x)}")
    grid = cfg.time_grid()
    yt = noise
    y0_pred = noise
    for t, t_prev in zip(grid[:-1], grid[1:]):
        eps_hat = predict(yt, x, float(t))
        if tuple(np.shape(eps_hat)) != tuple(np.shape(yt)):
            raise ShapeError(f"predictor returned shape {np.shape(eps_hat)}, expected {np.shape(yt)}")
        y0_pred, yt = ddim_step(yt, eps_hat, float(t), float(t_prev), cfg.schedule)
    return y0_pred
