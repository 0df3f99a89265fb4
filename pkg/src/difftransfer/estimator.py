"""scikit-learn style wrappers around the pipeline.

``LogMelExtractor`` and ``SpectrogramScaler`` are transformers;
``DiffTransfer`` is the trainable timbre-transfer model with ``fit`` on
paired spectrograms and ``predict`` producing target-timbre spectrograms.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_audio, check_paired, check_spectrogram_list
from .denoiser import DenoiserCheckpoint, UNetConfig
from .schedule import ScheduleConfig
from .spectro import NormalizationStats, audio_to_logmel, denormalize, normalize
from .trainer import TrainConfig, fit
from .transfer import transfer_spectrogram


class LogMelExtractor(TransformerMixin, BaseEstimator):
    """Audio buffers (or 1-D sample arrays at 16 kHz) -> log-mel arrays."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return [audio_to_logmel(check_audio(a)).values for a in X]


class SpectrogramScaler(TransformerMixin, BaseEstimator):
    """Corpus-level min/max scaling of log-mel values to [-1, 1]."""

    def fit(self, X, y=None):
        specs = check_spectrogram_list(X)
        self.stats_ = NormalizationStats.from_spectrograms(specs)
        return self

    def transform(self, X):
        check_is_fitted(self, "stats_")
        return [normalize(s, self.stats_) for s in check_spectrogram_list(X)]

    def inverse_transform(self, X):
        check_is_fitted(self, "stats_")
        return [denormalize(s, self.stats_) for s in X]


class DiffTransfer(BaseEstimator):
    """Conditional DDIM that maps source-timbre log-mels to target-timbre log-mels.

    Defaults give the full-size network and the long training
    schedule; see :meth:`TrainConfig.toy` for desk-scale values.
    """

    def __init__(self, stage_filters=(64, 128, 256), blocks_per_stage=4, bottleneck_filters=512,
                 time_embed_dims=32, max_signal_rate=0.95, min_signal_rate=0.02, epochs=5000,
                 batch_size=16, learning_rate=2e-5, weight_decay=1e-4, crops_per_track=1,
                 steps=50, random_state=0, log_path=None):
        self.stage_filters = stage_filters
        self.blocks_per_stage = blocks_per_stage
        self.bottleneck_filters = bottleneck_filters
        self.time_embed_dims = time_embed_dims
        self.max_signal_rate = max_signal_rate
        self.min_signal_rate = min_signal_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.crops_per_track = crops_per_track
        self.steps = steps
        self.random_state = random_state
        self.log_path = log_path

    def _unet_config(self) -> UNetConfig:
        return UNetConfig(
            stage_filters=tuple(self.stage_filters),
            blocks_per_stage=self.blocks_per_stage,
            bottleneck_filters=self.bottleneck_filters,
            time_embed_dims=self.time_embed_dims,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            seed=self.random_state,
            crops_per_track_per_epoch=self.crops_per_track,
        )

    def fit(self, X, y):
        """Train on conditioning spectrograms ``X`` and targets ``y``."""
        X, y = check_paired(X, y)
        schedule = ScheduleConfig(self.max_signal_rate, self.min_signal_rate)
        self.checkpoint_ = fit(list(zip(X, y)), self._train_config(), self._unet_config(), schedule,
                               log_path=self.log_path)
        self.loss_history_ = list(self.checkpoint_.training_meta["loss_history"])
        self.best_epoch_ = self.checkpoint_.training_meta["epoch"]
        return self

    def predict(self, X, seed=None):
        """Generate a target-timbre log-mel for each conditioning log-mel."""
        check_is_fitted(self, "checkpoint_")
        seed = self.random_state if seed is None else seed
        return [transfer_spectrogram(s, self.checkpoint_, self.steps, seed).values
                for s in check_spectrogram_list(X)]

    def save(self, directory):
        check_is_fitted(self, "checkpoint_")
        return self.checkpoint_.save(directory)

    @classmethod
    def from_checkpoint(cls, directory, **params) -> "DiffTransfer":
        """Rebuild a fitted estimator from a saved checkpoint directory."""
        ckpt = DenoiserCheckpoint.load(directory)
        u, s = ckpt.unet_config, ckpt.schedule_config
        est = cls(stage_filters=u.stage_filters, blocks_per_stage=u.blocks_per_stage,
                  bottleneck_filters=u.bottleneck_filters, time_embed_dims=u.time_embed_dims,
                  max_signal_rate=s.max_signal_rate, min_signal_rate=s.min_signal_rate, **params)
        est.checkpoint_ = ckpt
        est.loss_history_ = list(ckpt.training_meta.get("loss_history", []))
        est.best_epoch_ = ckpt.training_meta.get("epoch")
        return est
