"""Objective evaluation: Frechet Audio Distance and Jaccard pitch distance.

Both metrics take pluggable feature extractors. An embedding is any callable
``audio -> array[n_vectors, dim]`` with a ``name`` attribute; a pitch
extractor is any callable ``audio -> set of MIDI numbers`` with a ``name``.
The built-in ones are lightweight DSP stand-ins, so absolute numbers are not
comparable to VGGish/MELODIA-based scores.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy.signal import get_window

from .exceptions import DatasetError, InsufficientDataError, ShapeError
from .spectro import (
    HOP,
    N_FREQS,
    SAMPLE_RATE,
    AudioBuffer,
    audio_to_logmel,
    load_audio,
    stft,
)

# ------------------------------------------------------------------ embeddings


class SpecStatsEmbedding:
    """Per-second spectral statistics.

    Each 1 s window yields ``[band means (128), band stds (128), spectral
    centroid in kHz, spectral flux]``, 258 values. A trailing partial window
    is dropped unless the audio is shorter than one window, in which case it
    is zero-padded.
    """

    name = "specstats"
    dim = 258

    def __init__(self, window_s: float = 1.0):
        self.window = int(round(window_s * SAMPLE_RATE))

    def __call__(self, audio: AudioBuffer) -> np.ndarray:
        x = audio.samples
        if x.size == 0:
            raise InsufficientDataError("cannot embed empty audio")
        if x.size < self.window:
            x = np.pad(x, (0, self.window - x.size))
        n = x.size // self.window
        return np.stack([self._window_features(x[i * self.window:(i + 1) * self.window]) for i in range(n)])

    @staticmethod
    def _window_features(x: np.ndarray) -> np.ndarray:
        mag = np.abs(stft(x))
        lm = audio_to_logmel(AudioBuffer(x)).values
        freqs_khz = np.linspace(0.0, SAMPLE_RATE / 2000.0, N_FREQS)
        total = mag.sum(axis=0)
        centroid = np.where(total > 0, (freqs_khz[:, None] * mag).sum(axis=0) / np.maximum(total, 1e-12), 0.0)
        rise = np.maximum(np.diff(lm, axis=1), 0.0)
        flux = np.sqrt((rise ** 2).sum(axis=0)).mean() if rise.shape[1] else 0.0
        return np.concatenate([lm.mean(axis=1), lm.std(axis=1), [centroid.mean(), flux]])


@dataclass
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray
    n: int


def gaussian_stats(embeddings) -> GaussianStats:
    """Sample mean and unbiased, symmetrized covariance of ``[n, d]`` vectors."""
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2:
        raise ShapeError(f"embeddings must be [n, d], got {e.shape}")
    if e.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 embeddings, got {e.shape[0]}")
    mu = e.mean(axis=0)
    centered = e - mu
    sigma = centered.T @ centered / (e.shape[0] - 1)
    return GaussianStats(mu, 0.5 * (sigma + sigma.T), e.shape[0])


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def frechet_distance(r: GaussianStats, g: GaussianStats) -> float:
    """Squared Wasserstein-2 distance between two Gaussians.

    The cross term uses ``tr((S_r^1/2 S_g S_r^1/2)^1/2)``, computed with
    symmetric eigendecompositions and negative eigenvalues clipped to 0.
    """
    if r.mu.shape != g.mu.shape or r.sigma.shape != g.sigma.shape:
        raise ShapeError(f"dimension mismatch: {r.mu.shape} vs {g.mu.shape}")
    diff = r.mu - g.mu
    root_r = _psd_sqrt(r.sigma)
    middle = root_r @ g.sigma @ root_r
    w = np.linalg.eigvalsh(0.5 * (middle + middle.T))
    cross = np.sqrt(np.clip(w, 0.0, None)).sum()
    value = float(diff @ diff + np.trace(r.sigma) + np.trace(g.sigma) - 2.0 * cross)
    return max(value, 0.0)


def frechet_audio_distance(reference: Iterable[AudioBuffer], generated: Iterable[AudioBuffer],
                           embedding: Callable | None = None) -> float:
    embedding = embedding or SpecStatsEmbedding()
    ref = np.concatenate([embedding(a) for a in reference])
    gen = np.concatenate([embedding(a) for a in generated])
    return frechet_distance(gaussian_stats(ref), gaussian_stats(gen))


# ----------------------------------------------------------------------- pitch


def hz_to_midi(f) -> np.ndarray:
    return 69.0 + 12.0 * np.log2(np.asarray(f, dtype=np.float64) / 440.0)


class PeakPitchExtractor:
    """Multi-pitch estimate from spectral peak picking.

    Per frame (1024-sample Blackman-Harris window, 160-sample hop), local
    maxima within ``threshold_db`` of the frame maximum are refined by
    parabolic interpolation. Scanning peaks from low to high, a peak near an
    integer multiple (2..``max_harmonic``) of an already accepted
    fundamental, and not louder than it by more than ``harmonic_slack_db``,
    is treated as an overtone; the rest are rounded to MIDI numbers. A pitch
    is reported if it persists for ``min_frames`` consecutive frames.
    Frames more than ``gate_db`` below the loudest frame are ignored.
    """

    name = "peakpick"

    def __init__(self, n_fft: int = 1024, hop: int = HOP, threshold_db: float = 20.0,
                 min_frames: int = 10, gate_db: float = 60.0, f_range=(27.5, 4200.0),
                 max_harmonic: int = 16, harmonic_tol: float = 0.03, harmonic_slack_db: float = 6.0):
        self.n_fft = n_fft
        self.hop = hop
        self.threshold_db = threshold_db
        self.min_frames = min_frames
        self.gate_db = gate_db
        self.f_range = f_range
        self.max_harmonic = max_harmonic
        self.harmonic_tol = harmonic_tol
        self.harmonic_slack_db = harmonic_slack_db
        self._window = get_window("blackmanharris", n_fft)

    def spectrogram_db(self, x: np.ndarray) -> np.ndarray:
        pad = self.n_fft // 2
        xp = np.pad(x, (pad, pad))
        frames = np.lib.stride_tricks.sliding_window_view(xp, self.n_fft)[::self.hop]
        mag = np.abs(np.fft.rfft(frames * self._window, axis=1))
        return 20.0 * np.log10(mag + 1e-12)

    def frame_pitches(self, db: np.ndarray, floor_db: float) -> set[int]:
        top = db.max()
        if top < floor_db:
            return set()
        thresh = top - self.threshold_db
        inner = db[1:-1]
        idx = np.nonzero((inner > db[:-2]) & (inner >= db[2:]) & (inner > thresh))[0] + 1
        bin_hz = SAMPLE_RATE / self.n_fft
        peaks = []
        for k in idx:
            a, b, c = db[k - 1], db[k], db[k + 1]
            denom = a - 2 * b + c
            shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
            freq = (k + shift) * bin_hz
            level = b - 0.25 * (a - c) * shift
            if self.f_range[0] <= freq <= self.f_range[1]:
                peaks.append((freq, level))
        fundamentals: list[tuple[float, float]] = []
        for freq, level in peaks:
            if not self._is_overtone(freq, level, fundamentals):
                fundamentals.append((freq, level))
        return {int(np.rint(hz_to_midi(f))) for f, _ in fundamentals}

    def _is_overtone(self, freq, level, fundamentals) -> bool:
        for f0, l0 in fundamentals:
            k = round(freq / f0)
            if 2 <= k <= self.max_harmonic and abs(freq - k * f0) <= self.harmonic_tol * k * f0:
                if level <= l0 + self.harmonic_slack_db:
                    return True
        return False

    def __call__(self, audio: AudioBuffer) -> frozenset:
        x = audio.samples
        if x.size == 0 or not np.any(x):
            return frozenset()
        db = self.spectrogram_db(x)
        floor_db = db.max() - self.gate_db
        per_frame = [self.frame_pitches(row, floor_db) for row in db]
        kept = set()
        run: dict[int, int] = {}
        for pitches in per_frame:
            run = {p: run.get(p, 0) + 1 for p in pitches}
            kept.update(p for p, n in run.items() if n >= self.min_frames)
        return frozenset(p for p in kept if 0 <= p <= 127)


def extract_pitch_set(audio: AudioBuffer, extractor: Callable | None = None) -> frozenset:
    return (extractor or PeakPitchExtractor())(audio)


def jaccard_distance(a: Iterable[int], b: Iterable[int]) -> float:
    """``1 - |A & B| / |A | B|``; two empty sets are at distance 0."""
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 0.0
    return 1.0 - len(a & b) / len(union)


# ------------------------------------------------------------------ evaluation


@dataclass
class EvalReport:
    fad: float
    jd_per_track: list[float]
    jd_mean: float
    embedding_name: str
    pitch_extractor_name: str
    tracks: list[str] = field(default_factory=list)
    jd_aggregation: str = "per-track mean"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _wav_names(directory: Path) -> set[str]:
    if not directory.is_dir():
        raise FileNotFoundError(f"directory {directory} does not exist")
    return {p.name for p in directory.glob("*.wav")}


def evaluate(generated_dir, reference_dir, embedding: Callable | None = None,
             pitch_extractor: Callable | None = None) -> EvalReport:
    """Compare a directory of generated WAVs against references with the same basenames."""
    embedding = embedding or SpecStatsEmbedding()
    pitch_extractor = pitch_extractor or PeakPitchExtractor()
    generated_dir, reference_dir = Path(generated_dir), Path(reference_dir)
    gen_names, ref_names = _wav_names(generated_dir), _wav_names(reference_dir)
    unmatched = sorted(gen_names ^ ref_names)
    if unmatched:
        raise DatasetError("unmatched basenames: " + ", ".join(unmatched))
    names = sorted(gen_names)
    if not names:
        raise InsufficientDataError(f"no WAV files in {generated_dir}")
    gen_emb, ref_emb, jds = [], [], []
    for name in names:
        gen = load_audio(generated_dir / name)
        ref = load_audio(reference_dir / name)
        gen_emb.append(embedding(gen))
        ref_emb.append(embedding(ref))
        jds.append(jaccard_distance(pitch_extractor(gen), pitch_extractor(ref)))
    fad = frechet_distance(gaussian_stats(np.concatenate(ref_emb)), gaussian_stats(np.concatenate(gen_emb)))
    return EvalReport(
        fad=fad,
        jd_per_track=jds,
        jd_mean=float(np.mean(jds)),
        embedding_name=getattr(embedding, "name", type(embedding).__name__),
        pitch_extractor_name=getattr(pitch_extractor, "name", type(pitch_extractor).__name__),
        tracks=names,
    )


__all__ = [
    "EvalReport",
    "GaussianStats",
    "PeakPitchExtractor",
    "SpecStatsEmbedding",
    "evaluate",
    "extract_pitch_set",
    "frechet_audio_distance",
    "frechet_distance",
    "gaussian_stats",
    "jaccard_distance",
]
