import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from difftransfer.exceptions import DatasetError, InsufficientDataError, ShapeError
from difftransfer.metrics import (
    GaussianStats,
    PeakPitchExtractor,
    SpecStatsEmbedding,
    evaluate,
    extract_pitch_set,
    frechet_distance,
    gaussian_stats,
    jaccard_distance,
)
from difftransfer.spectro import AudioBuffer, save_audio

SR = 16000


def tone(*freqs, seconds=1.0):
    t = np.arange(int(seconds * SR)) / SR
    return AudioBuffer(sum(np.sin(2 * np.pi * f * t) for f in freqs))


def stats(mu, sigma, n=10):
    return GaussianStats(np.asarray(mu, float), np.asarray(sigma, float), n)


def random_psd(rng, d):
    a = rng.standard_normal((d, d + 2))
    return a @ a.T / d


def frechet_reference(r, g):
    # product-form square root (scipy.linalg.sqrtm); independent of the eigh route
    cross = linalg.sqrtm(r.sigma @ g.sigma)
    return float(np.sum((r.mu - g.mu) ** 2) + np.trace(r.sigma + g.sigma - 2 * np.real(cross)))


# ----------------------------------------------------------------- gaussians


def test_gaussian_stats_two_points():
    s = gaussian_stats([[0.0, 0.0], [2.0, 0.0]])
    np.testing.assert_allclose(s.mu, [1.0, 0.0])
    np.testing.assert_allclose(s.sigma, [[2.0, 0.0], [0.0, 0.0]])
    assert s.n == 2


def test_gaussian_stats_constant_set():
    s = gaussian_stats(np.ones((5, 3)))
    assert not np.any(s.sigma)


def test_gaussian_stats_monte_carlo():
    e = np.random.default_rng(0).standard_normal((10_000, 3))
    s = gaussian_stats(e)
    assert np.max(np.abs(s.mu)) < 0.05
    assert np.max(np.abs(s.sigma - np.eye(3))) < 0.05
    np.testing.assert_array_equal(s.sigma, s.sigma.T)
    assert np.min(np.linalg.eigvalsh(s.sigma)) >= -1e-8


def test_gaussian_stats_needs_two():
    with pytest.raises(InsufficientDataError):
        gaussian_stats([[1.0, 2.0]])


# ------------------------------------------------------------------- frechet


def test_frechet_identity():
    rng = np.random.default_rng(1)
    s = stats(rng.standard_normal(4), random_psd(rng, 4))
    assert frechet_distance(s, s) < 1e-8


def test_frechet_unit_mean_shift():
    assert frechet_distance(stats([0.0], [[1.0]]), stats([1.0], [[1.0]])) == pytest.approx(1.0, abs=1e-6)


def test_frechet_commuting_covariances():
    assert frechet_distance(stats([0, 0], 4 * np.eye(2)), stats([0, 0], np.eye(2))) == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_frechet_matches_product_sqrt(seed):
    rng = np.random.default_rng(seed)
    r = stats(rng.standard_normal(6), random_psd(rng, 6))
    g = stats(rng.standard_normal(6), random_psd(rng, 6))
    assert frechet_distance(r, g) == pytest.approx(frechet_reference(r, g), rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_frechet_symmetric_nonnegative(seed):
    rng = np.random.default_rng(10 + seed)
    r = stats(rng.standard_normal(5), random_psd(rng, 5))
    g = stats(rng.standard_normal(5), random_psd(rng, 5))
    assert frechet_distance(r, g) == pytest.approx(frechet_distance(g, r), abs=1e-8)
    assert frechet_distance(r, g) >= 0.0


def test_frechet_rotation_invariance():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((200, 5)) * [1, 2, 3, 0.5, 1]
    b = rng.standard_normal((150, 5)) + 0.3
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    before = frechet_distance(gaussian_stats(a), gaussian_stats(b))
    after = frechet_distance(gaussian_stats(a @ q.T), gaussian_stats(b @ q.T))
    assert after == pytest.approx(before, abs=1e-6)


def test_frechet_dimension_mismatch():
    with pytest.raises(ShapeError):
        frechet_distance(stats([0, 0], np.eye(2)), stats([0], np.eye(1)))


# ------------------------------------------------------------------- jaccard


def test_jaccard_examples():
    assert jaccard_distance({60, 64, 67}, {60, 64, 67}) == 0.0
    assert jaccard_distance({60}, {61, 62}) == 1.0
    assert jaccard_distance({60, 64}, {64, 67}) == 1.0 - 1.0 / 3.0
    assert jaccard_distance(set(), set()) == 0.0


pitch_sets = st.sets(st.integers(0, 127), max_size=12)


@given(pitch_sets, pitch_sets, pitch_sets)
def test_jaccard_metric_properties(a, b, c):
    ab = jaccard_distance(a, b)
    assert 0.0 <= ab <= 1.0
    assert ab == jaccard_distance(b, a)
    assert jaccard_distance(a, a) == 0.0
    assert jaccard_distance(a, c) <= ab + jaccard_distance(b, c) + 1e-12


# --------------------------------------------------------------- embeddings


def test_embedding_window_count():
    e = SpecStatsEmbedding()(tone(440, seconds=10.0))
    assert e.shape == (10, 258)


def test_embedding_short_audio_single_window():
    assert SpecStatsEmbedding()(tone(440, seconds=0.3)).shape == (1, 258)


def test_embedding_silence():
    e = SpecStatsEmbedding()(AudioBuffer(np.zeros(2 * SR)))
    np.testing.assert_allclose(e[:, :128], np.log(1e-5))
    assert np.all(e[:, -1] == 0.0)


def test_embedding_deterministic():
    a = tone(330, 440, seconds=2.0)
    assert np.array_equal(SpecStatsEmbedding()(a), SpecStatsEmbedding()(AudioBuffer(a.samples.copy())))


# ---------------------------------------------------------------------- pitch


def test_pitch_of_a4():
    assert extract_pitch_set(tone(440)) == {69}


def test_pitch_of_silence():
    assert extract_pitch_set(AudioBuffer(np.zeros(SR))) == set()


def test_pitch_of_dyad():
    assert extract_pitch_set(tone(440.0, 523.25)) == {69, 72}


def test_pitch_ignores_overtones():
    t = np.arange(SR) / SR
    f0 = 220.0
    saw = sum(np.sin(2 * np.pi * k * f0 * t) / k for k in range(1, 9))
    assert extract_pitch_set(AudioBuffer(saw)) == {57}


def test_pitch_needs_persistence():
    burst = np.concatenate([tone(440, seconds=0.2).samples, np.zeros(SR)])
    assert extract_pitch_set(AudioBuffer(burst)) == {69}
    assert extract_pitch_set(AudioBuffer(burst), PeakPitchExtractor(min_frames=100)) == set()


# ------------------------------------------------------------------ evaluate


def _write_corpus(directory, seeds):
    directory.mkdir()
    for s in seeds:
        rng = np.random.default_rng(s)
        f = 220.0 * 2 ** (rng.integers(0, 12) / 12)
        save_audio(directory / f"t{s}.wav", tone(f, seconds=2.0))


def test_evaluate_self_comparison(tmp_path):
    _write_corpus(tmp_path / "ref", range(3))
    report = evaluate(tmp_path / "ref", tmp_path / "ref")
    assert report.fad < 1e-6
    assert report.jd_mean == 0.0
    assert report.jd_per_track == [0.0, 0.0, 0.0]
    assert report.embedding_name == "specstats"
    assert report.pitch_extractor_name == "peakpick"
    report.to_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert {"fad", "jd_per_track", "jd_mean", "embedding_name", "pitch_extractor_name"} <= set(data)


def test_evaluate_unmatched_basename(tmp_path):
    _write_corpus(tmp_path / "a", [0, 1])
    _write_corpus(tmp_path / "b", [0, 2])
    with pytest.raises(DatasetError, match="t1.wav"):
        evaluate(tmp_path / "a", tmp_path / "b")


def test_evaluate_accepts_custom_extractors(tmp_path):
    _write_corpus(tmp_path / "a", [0, 1])

    class Const:
        name = "const"

        def __call__(self, audio):
            return np.arange(6.0).reshape(2, 3) + len(audio)

    report = evaluate(tmp_path / "a", tmp_path / "a", embedding=Const(), pitch_extractor=lambda a: {60})
    assert report.embedding_name == "const"
    assert report.fad == pytest.approx(0.0, abs=1e-9)
