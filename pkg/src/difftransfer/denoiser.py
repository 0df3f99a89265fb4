"""Conditional U-Net noise predictor and checkpoint I/O."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .exceptions import CheckpointError, ConfigError, ShapeError
from .schedule import ScheduleConfig, cosine_rates, embedding_frequencies
from .spectro import NormalizationStats

ATTENTION_SITES = ("last_down_stage", "bottleneck", "first_up_stage")
MANIFEST_SCHEMA = 1


@dataclass(frozen=True)
class UNetConfig:
    stage_filters: tuple = (64, 128, 256)
    blocks_per_stage: int = 4
    bottleneck_filters: int = 512
    pool_size: int = 2
    kernel: int = 3
    residual_kernel: int = 1
    attention_sites: tuple = ATTENTION_SITES
    time_embed_dims: int = 32

    def __post_init__(self):
        object.__setattr__(self, "stage_filters", tuple(int(f) for f in self.stage_filters))
        object.__setattr__(self, "attention_sites", tuple(self.attention_sites))
        if not self.stage_filters or min(self.stage_filters) < 1:
            raise ConfigError(f"stage_filters must be positive, got {self.stage_filters}")
        if self.blocks_per_stage < 1 or self.bottleneck_filters < 1:
            raise ConfigError("blocks_per_stage and bottleneck_filters must be >= 1")
        if self.kernel % 2 == 0:
            raise ConfigError("kernel size must be odd to preserve spatial dims")
        if self.time_embed_dims % 2:
            raise ConfigError(f"time_embed_dims must be even, got {self.time_embed_dims}")
        unknown = set(self.attention_sites) - set(ATTENTION_SITES)
        if unknown:
            raise ConfigError(f"unknown attention sites {sorted(unknown)}; valid: {ATTENTION_SITES}")

    @property
    def downsample_factor(self) -> int:
        return self.pool_size ** len(self.stage_filters)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage_filters"] = list(self.stage_filters)
        d["attention_sites"] = list(self.attention_sites)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UNetConfig":
        return cls(**d)


class ResidualBlock(nn.Module):
    """conv3x3 + swish -> batch-norm -> conv3x3, plus a 1x1-conv residual."""

    def __init__(self, in_channels: int, filters: int, kernel: int = 3, residual_kernel: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, filters, kernel, padding=kernel // 2)
        self.norm = nn.BatchNorm2d(filters)
        self.conv2 = nn.Conv2d(filters, filters, kernel, padding=kernel // 2)
        self.residual = nn.Conv2d(in_channels, filters, residual_kernel, padding=residual_kernel // 2)

    def forward(self, x):
        h = self.norm(F.silu(self.conv1(x)))
        return self.conv2(h) + self.residual(x)


class SelfAttention(nn.Module):
    """Single-head scaled dot-product attention over spatial positions."""

    def __init__(self, channels: int):
        super().__init__()
        self.query = nn.Conv2d(channels, channels, 1)
        self.key = nn.Conv2d(channels, channels, 1)
        self.value = nn.Conv2d(channels, channels, 1)
        self.out = nn.Conv2d(channels, channels, 1)

    def forward(self, x):
        b, c, h, w = x.shape
        q = self.query(x).reshape(b, c, h * w).transpose(1, 2)
        k = self.key(x).reshape(b, c, h * w).transpose(1, 2)
        v = self.value(x).reshape(b, c, h * w).transpose(1, 2)
        attended = F.scaled_dot_product_attention(q, k, v)
        return x + self.out(attended.transpose(1, 2).reshape(b, c, h, w))


def _stage(in_channels: int, filters: int, cfg: UNetConfig) -> nn.Sequential:
    blocks = [ResidualBlock(in_channels, filters, cfg.kernel, cfg.residual_kernel)]
    for _ in range(cfg.blocks_per_stage - 1):
        blocks.append(ResidualBlock(filters, filters, cfg.kernel, cfg.residual_kernel))
    return nn.Sequential(*blocks)


class UNet(nn.Module):
    """Noise predictor over NCHW tensors.

    Input channels are ``[noisy target, conditioning, time embedding...]``.
    """

    def __init__(self, cfg: UNetConfig = UNetConfig()):
        super().__init__()
        self.cfg = cfg
        self.register_buffer(
            "embed_freqs",
            torch.tensor(embedding_frequencies(cfg.time_embed_dims), dtype=torch.float32),
            persistent=False,
        )
        sites = set(cfg.attention_sites)
        channels = 2 + cfg.time_embed_dims
        self.down = nn.ModuleList()
        for f in cfg.stage_filters:
            self.down.append(_stage(channels, f, cfg))
            channels = f
        self.down_attention = SelfAttention(channels) if "last_down_stage" in sites else nn.Identity()
        self.pool = nn.AvgPool2d(cfg.pool_size)

        self.bottleneck = ResidualBlock(channels, cfg.bottleneck_filters, cfg.kernel, cfg.residual_kernel)
        self.bottleneck_attention = (
            SelfAttention(cfg.bottleneck_filters) if "bottleneck" in sites else nn.Identity()
        )
        channels = cfg.bottleneck_filters

        self.upsample = nn.ModuleList()
        self.up = nn.ModuleList()
        for f in reversed(cfg.stage_filters):
            self.upsample.append(nn.ConvTranspose2d(channels, f, cfg.pool_size, stride=cfg.pool_size))
            self.up.append(_stage(2 * f, f, cfg))
            channels = f
        self.up_attention = (
            SelfAttention(cfg.stage_filters[-1]) if "first_up_stage" in sites else nn.Identity()
        )
        self.head = nn.Conv2d(channels, 1, 1)

    def time_embedding(self, noise_rate_sq: torch.Tensor) -> torch.Tensor:
        angles = 2.0 * math.pi * self.embed_freqs.to(noise_rate_sq.dtype) * noise_rate_sq[:, None]
        return torch.cat([torch.sin(angles), torch.cos(angles)], dim=1)

    def forward(self, yt, x, noise_rate_sq):
        factor = self.cfg.downsample_factor
        if yt.shape[-1] % factor or yt.shape[-2] % factor:
            raise ConfigError(f"spatial dims {tuple(yt.shape[-2:])} not divisible by {factor}")
        emb = self.time_embedding(noise_rate_sq)
        emb = emb[:, :, None, None].expand(-1, -1, yt.shape[-2], yt.shape[-1])
        h = torch.cat([yt, x, emb], dim=1)

        skips = []
        last = len(self.down) - 1
        for i, stage in enumerate(self.down):
            h = stage(h)
            if i == last:
                h = self.down_attention(h)
            skips.append(h)
            h = self.pool(h)

        h = self.bottleneck_attention(self.bottleneck(h))

        for i, (upsample, stage) in enumerate(zip(self.upsample, self.up)):
            h = upsample(h)
            h = stage(torch.cat([h, skips.pop()], dim=1))
            if i == 0:
                h = self.up_attention(h)
        return self.head(h)


def build_unet(cfg: UNetConfig = UNetConfig(), seed: int = 0) -> UNet:
    """Construct a U-Net with weights initialized from ``seed``."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return UNet(cfg)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def noise_rate_squared(t, schedule: ScheduleConfig) -> np.ndarray:
    return np.asarray(cosine_rates(np.asarray(t, dtype=np.float64), schedule).noise_rate) ** 2


def predict_noise(model: UNet, yt, x, t, schedule: ScheduleConfig = ScheduleConfig()):
    """Channels-last wrapper: ``yt``, ``x`` are ``[B, H, W, 1]``, ``t`` is ``[B]``.

    Accepts numpy arrays or tensors; returns the same kind as ``yt``.
    """
    as_numpy = isinstance(yt, np.ndarray)
    yt_t = torch.as_tensor(yt)
    x_t = torch.as_tensor(x)
    if yt_t.shape != x_t.shape or yt_t.ndim != 4 or yt_t.shape[-1] != 1:
        raise ShapeError(f"expected matching [B, H, W, 1] inputs, got {tuple(yt_t.shape)} and {tuple(x_t.shape)}")
    dtype = next(model.parameters()).dtype
    t_arr = np.broadcast_to(np.asarray(t, dtype=np.float64), (yt_t.shape[0],))
    nr2 = torch.as_tensor(noise_rate_squared(t_arr, schedule), dtype=dtype)
    out = model(yt_t.permute(0, 3, 1, 2).to(dtype), x_t.permute(0, 3, 1, 2).to(dtype), nr2)
    out = out.permute(0, 2, 3, 1)
    if as_numpy:
        return out.detach().cpu().numpy().astype(np.asarray(yt).dtype)
    return out


@dataclass
class DenoiserCheckpoint:
    """Trained weights plus everything needed to run them again."""

    model: UNet
    unet_config: UNetConfig
    schedule_config: ScheduleConfig = field(default_factory=ScheduleConfig)
    normalization_stats: NormalizationStats | None = None
    training_meta: dict = field(default_factory=dict)

    def manifest(self) -> dict:
        return {
            "schema_version": MANIFEST_SCHEMA,
            "unet": self.unet_config.to_dict(),
            "schedule": self.schedule_config.to_dict(),
            "normalization": None if self.normalization_stats is None else self.normalization_stats.to_dict(),
            "training_meta": self.training_meta,
        }

    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save(self.model.state_dict(), directory / "weights.pt")
        with open(directory / "manifest.json", "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
        return directory

    @classmethod
    def load(cls, directory) -> "DenoiserCheckpoint":
        directory = Path(directory)
        manifest = read_manifest(directory)
        weights = directory / "weights.pt"
        if not weights.exists():
            raise CheckpointError(f"{weights} not found")
        unet_cfg = UNetConfig.from_dict(manifest["unet"])
        model = UNet(unet_cfg)
        model.load_state_dict(torch.load(weights, map_location="cpu", weights_only=True))
        model.eval()
        norm = manifest.get("normalization")
        return cls(
            model=model,
            unet_config=unet_cfg,
            schedule_config=ScheduleConfig(**manifest["schedule"]),
            normalization_stats=None if norm is None else NormalizationStats.from_dict(norm),
            training_meta=manifest.get("training_meta", {}),
        )


def read_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise CheckpointError(f"{path} not found")
    with open(path) as fh:
        manifest = json.load(fh)
    missing = {"schema_version", "unet", "schedule", "normalization", "training_meta"} - set(manifest)
    if missing:
        raise CheckpointError(f"{path} is missing fields {sorted(missing)}")
    if manifest["schema_version"] != MANIFEST_SCHEMA:
        raise CheckpointError(f"unsupported manifest schema {manifest['schema_version']}")
    return manifest
