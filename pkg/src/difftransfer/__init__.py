"""Paired timbre transfer with a conditional continuous-time DDIM on log-mel spectrograms."""

from .denoiser import DenoiserCheckpoint, UNet, UNetConfig, build_unet, predict_noise
from .estimator import DiffTransfer, LogMelExtractor, SpectrogramScaler
from .metrics import (
    EvalReport,
    PeakPitchExtractor,
    SpecStatsEmbedding,
    evaluate,
    extract_pitch_set,
    frechet_distance,
    gaussian_stats,
    jaccard_distance,
)
from .sampler import SamplerConfig, ddim_step, sample
from .schedule import ScheduleConfig, cosine_rates, forward_noise, sample_diffusion_time, sinusoidal_embedding
from .spectro import (
    AudioBuffer,
    LogMelSpectrogram,
    NormalizationStats,
    audio_to_logmel,
    denormalize,
    invert_to_waveform,
    load_audio,
    log_mel,
    normalize,
    slice_frames,
    stft,
)
from .trainer import TrainConfig, fit, train_step
from .transfer import transfer_corpus, transfer_spectrogram, transfer_track

__version__ = "0.1.0"
