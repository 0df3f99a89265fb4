"""Synthetic paired-timbre corpus and paired-directory loader.

The synthetic corpus renders the same random note sequence twice: timbre A
is a decaying sine, timbre B a band-limited sawtooth (8 harmonics with 1/k
amplitudes) with a slower decay. Both land in ``out_dir/timbreA`` and
``out_dir/timbreB`` with shared basenames, the same layout used for the
reduced StarNet release (two timbre-domain folders, matched basenames,
16 kHz mono).
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DatasetError
from .spectro import SAMPLE_RATE, AudioBuffer, save_audio

SOURCE_DIR = "timbreA"
TARGET_DIR = "timbreB"
MIDI_RANGE = (48, 84)
NOTE_DURATION = (0.25, 1.0)
GAP_PROB = 0.25
GAP_DURATION = (0.05, 0.3)
FADE_S = 0.01
PEAK = 0.9


def midi_to_hz(midi) -> np.ndarray:
    return 440.0 * 2.0 ** ((np.asarray(midi, dtype=np.float64) - 69.0) / 12.0)


def random_notes(rng: np.random.Generator, duration_s: float) -> list[dict]:
    """Monophonic note list covering ``duration_s`` with occasional rests."""
    notes = []
    t = 0.0
    while t < duration_s:
        if notes and rng.random() < GAP_PROB:
            t += rng.uniform(*GAP_DURATION)
            continue
        dur = float(rng.uniform(*NOTE_DURATION))
        pitch = int(rng.integers(MIDI_RANGE[0], MIDI_RANGE[1] + 1))
        dur = min(dur, duration_s - t)
        if dur > 2 * FADE_S:
            notes.append({"pitch": pitch, "onset": round(t, 6), "duration": round(dur, 6)})
        t += dur
    return notes


def _envelope(n: int, decay_s: float) -> np.ndarray:
    t = np.arange(n) / SAMPLE_RATE
    env = np.exp(-t / decay_s)
    fade = min(int(FADE_S * SAMPLE_RATE), n // 2)
    if fade > 0:
        ramp = np.linspace(0.0, 1.0, fade, endpoint=False)
        env[:fade] *= ramp
        env[n - fade:] *= ramp[::-1]
    return env


def render_sine(f0: float, n: int) -> np.ndarray:
    t = np.arange(n) / SAMPLE_RATE
    return np.sin(2 * np.pi * f0 * t) * _envelope(n, decay_s=0.3)


def render_saw(f0: float, n: int, harmonics: int = 8) -> np.ndarray:
    t = np.arange(n) / SAMPLE_RATE
    out = np.zeros(n)
    for k in range(1, harmonics + 1):
        if k * f0 >= SAMPLE_RATE / 2:
            break
        out += np.sin(2 * np.pi * k * f0 * t) / k
    return out * _envelope(n, decay_s=0.8)


def render(notes: list[dict], duration_s: float, voice) -> np.ndarray:
    n_total = int(round(duration_s * SAMPLE_RATE))
    out = np.zeros(n_total)
    for note in notes:
        start = int(round(note["onset"] * SAMPLE_RATE))
        n = min(int(round(note["duration"] * SAMPLE_RATE)), n_total - start)
        if n <= 0:
            continue
        out[start:start + n] += voice(float(midi_to_hz(note["pitch"])), n)
    return out


def _scale(x: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(x))
    return x if peak == 0 else x * (PEAK / peak)


def render_pair(seed: int, duration_s: float, voices: int = 1):
    """Render one (timbre A, timbre B) pair and its note lists."""
    rng = np.random.default_rng(seed)
    lines = [random_notes(rng, duration_s) for _ in range(voices)]
    a = sum(render(notes, duration_s, render_sine) for notes in lines)
    b = sum(render(notes, duration_s, render_saw) for notes in lines)
    return _scale(a), _scale(b), lines


def generate_paired_dataset(seed: int, n_tracks: int, duration_s: float, out_dir, voices: int = 1) -> dict:
    """Write a synthetic paired corpus and return its manifest.

    Track ``i`` is rendered from seed ``seed + i``. ``voices=2`` sums two
    independent monophonic lines per track (mixture mode).
    """
    if n_tracks < 1:
        raise ConfigError(f"n_tracks must be >= 1, got {n_tracks}")
    if duration_s < 1:
        raise ConfigError(f"duration_s must be >= 1, got {duration_s}")
    out_dir = Path(out_dir)
    (out_dir / SOURCE_DIR).mkdir(parents=True, exist_ok=True)
    (out_dir / TARGET_DIR).mkdir(parents=True, exist_ok=True)
    pairs = []
    for i in range(n_tracks):
        name = f"track_{i:04d}.wav"
        a, b, lines = render_pair(seed + i, duration_s, voices)
        save_audio(out_dir / SOURCE_DIR / name, AudioBuffer(a))
        save_audio(out_dir / TARGET_DIR / name, AudioBuffer(b))
        pairs.append({"name": name, "seed": seed + i, "notes": lines})
    manifest = {
        "seed": seed,
        "n_tracks": n_tracks,
        "duration_s": duration_s,
        "sample_rate": SAMPLE_RATE,
        "voices": voices,
        "source_dir": SOURCE_DIR,
        "target_dir": TARGET_DIR,
        "pairs": pairs,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest


def load_paired_corpus(directory, source: str = SOURCE_DIR, target: str = TARGET_DIR) -> list[tuple[Path, Path]]:
    """Match WAVs in ``directory/source`` and ``directory/target`` by basename.

    Returns ``(conditioning_path, target_path)`` pairs sorted by name. Swap
    ``source`` and ``target`` to train the opposite direction.
    """
    directory = Path(directory)
    src_dir, tgt_dir = directory / source, directory / target
    for d in (src_dir, tgt_dir):
        if not d.is_dir():
            raise DatasetError(f"timbre directory {d} does not exist")
    src = {p.name: p for p in src_dir.glob("*.wav")}
    tgt = {p.name: p for p in tgt_dir.glob("*.wav")}
    unpaired = sorted(set(src) ^ set(tgt))
    if unpaired:
        where = [f"{n} (only in {source if n in src else target})" for n in unpaired]
        raise DatasetError("unpaired tracks: " + ", ".join(where))
    if not src:
        warnings.warn(f"no WAV files found under {directory}", stacklevel=2)
        return []
    return [(src[n], tgt[n]) for n in sorted(src)]
