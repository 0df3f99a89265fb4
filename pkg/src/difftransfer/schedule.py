"""Continuous-time cosine diffusion schedule.

Rates are parameterized by an angle that moves linearly in ``t`` between
``acos(max_signal_rate)`` and ``acos(min_signal_rate)``, so that
``signal_rate**2 + noise_rate**2 == 1`` for every ``t``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ConfigError, DomainError, ShapeError


@dataclass(frozen=True)
class ScheduleConfig:
    max_signal_rate: float = 0.95
    min_signal_rate: float = 0.02

    def __post_init__(self):
        if not 0.0 < self.min_signal_rate < self.max_signal_rate < 1.0:
            raise ConfigError(
                "need 0 < min_signal_rate < max_signal_rate < 1, got "
                f"{self.min_signal_rate}, {self.max_signal_rate}"
            )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DiffusionRates:
    t: np.ndarray | float
    signal_rate: np.ndarray | float
    noise_rate: np.ndarray | float


def cosine_rates(t, cfg: ScheduleConfig = ScheduleConfig()) -> DiffusionRates:
    """Signal and noise rates at diffusion time ``t`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise DomainError(f"diffusion time must lie in [0, 1], got {t}")
    start = np.arccos(cfg.max_signal_rate)
    end = np.arccos(cfg.min_signal_rate)
    angle = start + t_arr * (end - start)
    signal, noise = np.cos(angle), np.sin(angle)
    if t_arr.ndim == 0:
        return DiffusionRates(float(t_arr), float(signal), float(noise))
    return DiffusionRates(t_arr, signal, noise)


def forward_noise(y0, rates: DiffusionRates, eps):
    """Closed-form forward marginal: ``signal_rate * y0 + noise_rate * eps``.

    Array-valued rates broadcast over the leading (batch) axis.
    """
    if np.shape(y0) != np.shape(eps):
        raise ShapeError(f"clean and noise shapes differ: {np.shape(y0)} vs {np.shape(eps)}")
    signal = _batch_broadcast(rates.signal_rate, np.ndim(y0))
    noise = _batch_broadcast(rates.noise_rate, np.ndim(y0))
    return signal * y0 + noise * eps


def _batch_broadcast(rate, ndim: int):
    rate = np.asarray(rate, dtype=np.float64)
    if rate.ndim == 0:
        return float(rate)
    return rate.reshape(rate.shape + (1,) * (ndim - rate.ndim))


def sample_diffusion_time(batch: int, rng_seed=None) -> np.ndarray:
    """``batch`` i.i.d. draws from U(0, 1].

    ``rng_seed`` may be an int seed or an existing ``np.random.Generator``.
    """
    if batch < 1:
        raise ConfigError(f"batch must be >= 1, got {batch}")
    rng = np.random.default_rng(rng_seed)
    return 1.0 - rng.random(batch)


def draw_noise(shape, seed=None) -> np.ndarray:
    """Standard-normal noise tensor reproducible from ``seed``."""
    return np.random.default_rng(seed).standard_normal(shape)


def embedding_frequencies(dims: int) -> np.ndarray:
    if dims <= 0 or dims % 2:
        raise ConfigError(f"embedding dims must be a positive even number, got {dims}")
    return np.exp(np.linspace(np.log(1.0), np.log(1000.0), dims // 2))


def sinusoidal_embedding(noise_rate_sq, dims: int = 32) -> np.ndarray:
    """``[sin(2 pi f x), cos(2 pi f x)]`` over dims/2 log-spaced frequencies in [1, 1000]."""
    freqs = embedding_frequencies(dims)
    x = np.asarray(noise_rate_sq, dtype=np.float64)[..., None]
    angles = 2.0 * np.pi * freqs * x
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)
