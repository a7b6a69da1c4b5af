import numpy as np
import pytest

from hanr.audio_io import read_wav
from hanr.dataset import (MixManifest, NoiseComponent, build_noise_mixture,
                          compute_gs, generate_mixtures, load_manifests,
                          make_desk_corpus, mix, realize_manifest,
                          split_corpus, synth_noise, synth_speech)
from hanr.errors import ConfigError, DataError


def manifest(**kw):
    base = dict(mixture_id="m0", speech_id="speech_000",
                noises=[NoiseComponent("noise_000", 0)],
                target_snr_db=0.0, g_s=1.0, g_l_db=0.0, split="train",
                rng_seed=0, num_samples=100)
    base.update(kw)
    return MixManifest(**base)


def snr_db(s, n):
    return 20.0 * np.log10(np.sqrt(np.mean(s ** 2)) / np.sqrt(np.mean(n ** 2)))


def test_single_noise_offset_zero():
    noise = np.arange(100.0)
    out = build_noise_mixture([noise], [0], 50)
    assert np.array_equal(out, noise[:50])


def test_duplicate_noise_doubles():
    noise = np.sin(np.arange(200.0))
    out = build_noise_mixture([noise, noise], [0, 0], 100)
    assert np.allclose(out, 2.0 * noise[:100])


def test_four_noises_match_sum_oracle():
    rng = np.random.default_rng(0)
    noises = [rng.standard_normal(500) for _ in range(4)]
    offsets = [0, 10, 200, 399]
    out = build_noise_mixture(noises, offsets, 100)
    oracle = np.zeros(100)
    for sig, off in zip(noises, offsets):
        for i in range(100):
            oracle[i] += sig[off + i]
    assert np.allclose(out, oracle, atol=1e-12)


def test_too_many_noises_and_bad_offset():
    noise = np.zeros(100)
    with pytest.raises(ConfigError):
        build_noise_mixture([noise] * 5, [0] * 5, 10)
    with pytest.raises(DataError):
        build_noise_mixture([noise], [95], 10)


def test_compute_gs_unity_and_double():
    rng = np.random.default_rng(1)
    s0 = rng.standard_normal(1000)
    n0 = rng.standard_normal(1000)
    n0 *= np.sqrt(np.mean(s0 ** 2) / np.mean(n0 ** 2))  # equal RMS
    assert abs(compute_gs(s0, n0, 0.0) - 1.0) < 1e-9
    assert abs(compute_gs(s0, n0, 20.0 * np.log10(2.0)) - 2.0) < 1e-9


def test_compute_gs_hits_target_snr():
    rng = np.random.default_rng(2)
    s0 = rng.standard_normal(2000) * 0.03
    n0 = rng.standard_normal(2000) * 0.7
    for target in (-7.5, 0.0, 12.25):
        g = compute_gs(s0, n0, target)
        assert abs(snr_db(g * s0, n0) - target) < 0.01


def test_compute_gs_zero_energy_rejected():
    with pytest.raises(DataError):
        compute_gs(np.zeros(10), np.ones(10), 0.0)


def test_mix_additivity_and_level():
    rng = np.random.default_rng(3)
    s0 = rng.standard_normal(100) * 0.1
    n0 = rng.standard_normal(100) * 0.1
    man = manifest(g_s=0.5, g_l_db=0.0)
    x, s, n = mix(s0, n0, man)
    assert np.array_equal(x, s + n)  # bit-level additivity
    assert np.allclose(x, n0 + 0.5 * s0)

    man6 = manifest(g_s=0.5, g_l_db=-6.0)
    x6, s6, n6 = mix(s0, n0, man6)
    scale = 10.0 ** (-6.0 / 20.0)
    assert abs(scale - 0.5011872336272722) < 1e-12
    assert np.allclose(s6, scale * s)
    assert np.allclose(n6, scale * n)
    assert abs(snr_db(s6, n6) - snr_db(s, n)) < 1e-9


def test_mix_clipping_flag():
    s0 = np.full(10, 0.9)
    n0 = np.full(10, 0.9)
    man = manifest(g_s=1.0)
    x, s, n = mix(s0, n0, man)
    assert man.peak_norm > 1.0
    assert np.max(np.abs(x)) <= 1.0
    assert np.array_equal(x, s + n)


def test_split_disjoint():
    sp = [f"speech_{i:03d}" for i in range(10)]
    no = [f"noise_{i:03d}" for i in range(10)]
    s_split, n_split = split_corpus(sp, no, ratios=(0.8, 0.1, 0.1), seed=4)
    for split_map in (s_split, n_split):
        groups = {k: {i for i, v in split_map.items() if v == k}
                  for k in ("train", "val", "test")}
        assert groups["train"] & groups["val"] == set()
        assert groups["train"] & groups["test"] == set()
        assert groups["val"] & groups["test"] == set()
        assert all(groups.values())


def test_split_single_file_errors():
    with pytest.raises(DataError):
        split_corpus(["speech_000"] * 1, ["noise_000"], seed=0)


def test_split_deterministic():
    sp = [f"s{i}" for i in range(12)]
    no = [f"n{i}" for i in range(9)]
    a = split_corpus(sp, no, ratios=(0.5, 0.25, 0.25), seed=7)
    b = split_corpus(sp, no, ratios=(0.5, 0.25, 0.25), seed=7)
    assert a == b


def test_bad_ratio_sum():
    with pytest.raises(ConfigError):
        split_corpus(["a"], ["b"], ratios=(0.5, 0.2, 0.2), seed=0)


def test_corpus_generation_and_manifest_round_trip(tmp_path):
    corpus = make_desk_corpus(tmp_path / "corpus", n_speech=6, n_noise=5,
                              speech_duration_s=0.5, noise_duration_s=1.0,
                              seed=1)
    out = tmp_path / "mix"
    mans = generate_mixtures(corpus, out, counts=(4, 2, 2), seed=5)
    assert len(mans) == 8
    loaded = load_manifests(out / "manifests.jsonl")
    assert loaded == mans
    for man in loaded:
        x, s, n = realize_manifest(man, corpus)
        x_file, _ = read_wav(out / f"{man.mixture_id}_x.wav")
        assert np.array_equal(x_file, x.astype(np.float32).astype(np.float64))
        # SNR fidelity of the separated pair
        assert abs(snr_db(s, n) - man.target_snr_db) < 0.01


def test_mixture_split_leakage_free(tmp_path):
    corpus = make_desk_corpus(tmp_path / "corpus", n_speech=9, n_noise=6,
                              speech_duration_s=0.4, noise_duration_s=0.8,
                              seed=2)
    mans = generate_mixtures(corpus, tmp_path / "mix", counts=(6, 3, 3),
                             seed=6, write_audio=False)
    sources = {k: set() for k in ("train", "val", "test")}
    for man in mans:
        sources[man.split].add(man.speech_id)
        sources[man.split].update(c.noise_id for c in man.noises)
    assert sources["train"] & sources["val"] == set()
    assert sources["train"] & sources["test"] == set()
    assert sources["val"] & sources["test"] == set()


def test_generation_deterministic(tmp_path):
    corpus = make_desk_corpus(tmp_path / "corpus", n_speech=6, n_noise=5,
                              speech_duration_s=0.3, noise_duration_s=0.6,
                              seed=3)
    m1 = generate_mixtures(corpus, tmp_path / "a", counts=(3, 1, 1), seed=9,
                           write_audio=False)
    m2 = generate_mixtures(corpus, tmp_path / "b", counts=(3, 1, 1), seed=9,
                           write_audio=False)
    assert m1 == m2
    assert (tmp_path / "a" / "manifests.jsonl").read_bytes() == \
        (tmp_path / "b" / "manifests.jsonl").read_bytes()


def test_synth_signals_are_sane():
    s = synth_speech(0.5, seed=11)
    n = synth_noise(0.5, seed=12)
    for sig in (s, n):
        assert np.all(np.isfinite(sig))
        assert np.max(np.abs(sig)) <= 1.0
        assert np.sqrt(np.mean(sig ** 2)) > 1e-4
