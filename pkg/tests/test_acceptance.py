"""Acceptance suite: one test per release criterion.

Each test prints a single PASS line with the measured values so the run log
doubles as the acceptance report.  The heavyweight fixtures (hermetic desk
corpus, feature dumps, trained desk-scale model) are shared session-wide;
seeds are fixed so every number here regenerates bitwise.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from hanr.config import PipelineConfig
from hanr.dataset import generate_mixtures, make_desk_corpus
from hanr.features import ContextBuffer, ContextConfig, read_feature_dump
from hanr.filterbank import (FilterbankConfig, SubbandFrame, analyze,
                             group_delay, synthesize)
from hanr.metrics import delta_stoi, nr_sd, stoi, summarize_records
from hanr.network import TrainConfig, backward, init_params, train
from hanr.pipeline import context_sweep, build_feature_dumps, enhance_stream, \
    evaluate_systems
from hanr.wiener import clamp_gain, gain_floor, ideal_gain

SEED = 11


def desk_cfg():
    return PipelineConfig.from_profile("desk_scale").validate()


def unity_model(cfg):
    """Desk-scale net rigged to emit gain 1 everywhere (saturated output)."""
    params = init_params(cfg.topology(), seed=0)
    for w in params.weights:
        w *= 0.0
    for b in params.biases[:-1]:
        b[:] = 0.0
    params.biases[-1][:] = 50.0
    return params


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """Hermetic corpus, 0/5 dB mixtures, feature dumps and a trained
    desk-scale model — shared by the trend and ordering criteria."""
    root = tmp_path_factory.mktemp("acceptance")
    cfg = desk_cfg()
    corpus = make_desk_corpus(root / "corpus", n_speech=16, n_noise=9,
                              speech_duration_s=3.0, noise_duration_s=6.0,
                              seed=SEED)
    generate_mixtures(corpus, root / "mix", counts=(24, 6, 8),
                      snr_set_db=(0.0, 5.0), seed=SEED)
    dumps = build_feature_dumps(root / "mix" / "manifests.jsonl",
                                root / "mix", root / "feat", cfg)
    _, X, Y = read_feature_dump(dumps["train"])
    _, Xv, Yv = read_feature_dump(dumps["val"])
    t0 = time.perf_counter()
    params, history = train(
        (X, Y), TrainConfig(learning_rate=1e-3, epochs=10, batch_size=128,
                            rng_seed=0), cfg.topology(), val_data=(Xv, Yv))
    return {"root": root, "cfg": cfg, "params": params,
            "manifests": root / "mix" / "manifests.jsonl",
            "mix_dir": root / "mix", "history": history,
            "train_seconds": time.perf_counter() - t0}


def test_criterion_01_filterbank_contract():
    cfg = FilterbankConfig()
    t0 = time.perf_counter()
    d = group_delay(cfg)
    rng = np.random.default_rng(SEED)
    worst = -np.inf
    for _ in range(100):
        x = rng.standard_normal(2400)
        y = synthesize(analyze(x, cfg), cfg)
        L = cfg.window_len_samples
        ref = x[L:len(x) - L]
        est = y[L + d:len(x) - L + d]
        err = 10.0 * np.log10(np.sum((est - ref) ** 2) / np.sum(ref ** 2))
        worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    assert worst <= -40.0
    assert d <= 144
    assert elapsed < 10.0
    print(f"\nPASS criterion 1: worst round-trip {worst:.1f} dB (<= -40), "
          f"delay {d} samples (<= 144), {elapsed:.2f} s (< 10)")


def test_criterion_02_latency_budget():
    cfg = desk_cfg()
    cfg.validate(deployment=True)
    x = np.zeros(4800)
    x[2000] = 1.0
    y, _, info = enhance_stream(x, unity_model(cfg), cfg)
    measured = int(np.argmax(np.abs(y))) - 2000
    assert measured == info.latency_samples
    assert measured <= 192
    print(f"\nPASS criterion 2: measured latency {measured} samples "
          f"= reported, <= 192 (8 ms)")


def test_criterion_03_gain_algebra():
    floor = gain_floor(14.0)
    assert abs(floor - 0.199526) <= 1e-6
    assert np.min(clamp_gain(np.zeros(48))) == pytest.approx(floor)

    def frame(amps):
        return SubbandFrame(bins=np.asarray(amps, dtype=complex),
                            frame_index=0, nyquist=0.0)

    g = ideal_gain(frame([1.0, 1.0, np.sqrt(3.0)]),
                   frame([1.0, 0.0, 1.0]))
    assert abs(g[0] - 0.5) <= 1e-12
    assert abs(g[1] - 1.0) <= 1e-12
    assert abs(g[2] - 0.75) <= 1e-12
    print(f"\nPASS criterion 3: floor {floor:.9f} (0.199526 +- 1e-6); "
          f"Wiener examples 0.5/1.0/0.75 exact to 1e-12")


def test_criterion_04_gradient_correctness():
    t0 = time.perf_counter()
    from hanr.network import NetworkTopology
    topo = NetworkTopology(input_dim=6, hidden_layers=2, hidden_width=5,
                           output_dim=3, gain_floor=gain_floor(14.0))
    p = init_params(topo, seed=7)
    rng = np.random.default_rng(8)
    x = rng.standard_normal((5, 6)).astype(np.float32)
    t = rng.uniform(0.25, 0.95, (5, 3)).astype(np.float32)
    gw, gb = backward(p, x, t)

    # float64 reference of the same forward pass, so the finite differences
    # are not polluted by float32 rounding
    W = [w.astype(np.float64) for w in p.weights]
    B = [b.astype(np.float64) for b in p.biases]
    x64 = x.astype(np.float64)
    t64 = t.astype(np.float64)
    floor = topo.gain_floor

    def loss():
        a = x64
        for w, b in zip(W[:-1], B[:-1]):
            a = np.maximum(a @ w.T + b, 0.0)
        z = a @ W[-1].T + B[-1]
        pred = floor + (1.0 - floor) / (1.0 + np.exp(-z))
        return float(np.mean((pred - t64) ** 2))

    h = 1e-4
    checked, worst_rel = 0, 0.0
    for arrs, grads in ((W, gw), (B, gb)):
        for arr, grad in zip(arrs, grads):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss()
                flat[i] = orig - h
                down = loss()
                flat[i] = orig
                fd = (up - down) / (2 * h)
                rel = abs(gflat[i] - fd) / max(abs(fd), 1e-4)
                worst_rel = max(worst_rel, rel)
                checked += 1
                assert rel <= 1e-2, f"param {checked}: {gflat[i]} vs fd {fd}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    print(f"\nPASS criterion 4: {checked} gradients within 1e-2 of central "
          f"differences (worst rel {worst_rel:.2e}), {elapsed:.1f} s (< 30)")


def test_criterion_05_overfit_capability():
    cfg = desk_cfg()
    topo = cfg.topology()
    rng = np.random.default_rng(1)
    X = rng.standard_normal((256, topo.input_dim)).astype(np.float32)
    floor = topo.gain_floor
    Y = (floor + (1.0 - floor) *
         rng.uniform(0.0, 1.0, (256, topo.output_dim))).astype(np.float32)
    t0 = time.perf_counter()
    _, hist = train((X, Y), TrainConfig(learning_rate=1e-3, epochs=200,
                                        batch_size=32, rng_seed=0), topo)
    elapsed = time.perf_counter() - t0
    best = min(h["train_rmse"] for h in hist)
    assert best < 0.05
    assert elapsed < 120.0
    print(f"\nPASS criterion 5: desk net overfits 256 samples to train RMSE "
          f"{best:.4f} (< 0.05) in {elapsed:.1f} s (< 120)")


def test_criterion_06_normalization_invariance():
    cfg = desk_cfg()
    scale_db = 12.0
    c = 10.0 ** (scale_db / 20.0)
    x = np.random.default_rng(4).standard_normal(2400) * 0.05
    ctx = ContextConfig(tau1_frames=4, tau2_frames=2)
    buf_a, buf_b = ContextBuffer(ctx), ContextBuffer(ctx)
    wins = [(buf_a.push(fa), buf_b.push(fb))
            for fa, fb in zip(analyze(x, cfg.filterbank),
                              analyze(c * x, cfg.filterbank))]
    wins = [(a, b) for a, b in wins if a is not None]
    assert wins
    expected_shift = 2.0 * np.log(c)
    for a, b in wins:
        assert np.max(np.abs(a.logpow - b.logpow)) <= 1e-6
        assert np.max(np.abs(a.sigma - b.sigma)) <= 1e-6
        assert np.max(np.abs(b.mu - a.mu - expected_shift)) <= 1e-6
    print(f"\nPASS criterion 6: +12 dB input leaves normalized window and "
          f"sigma identical (1e-6); mu shifts by 2*ln(10^0.6) = "
          f"{expected_shift:.6f} on {len(wins)} windows")


def test_criterion_07_context_trend(desk_run):
    t0 = time.perf_counter()
    rows = context_sweep(
        desk_run["manifests"], desk_run["mix_dir"], [(2, 2), (50, 2)],
        desk_run["cfg"],
        TrainConfig(learning_rate=1e-3, epochs=6, batch_size=128, rng_seed=0),
        max_samples=12000)
    elapsed = time.perf_counter() - t0
    by_tau = {r["tau1_frames"]: r["val_rmse"] for r in rows}
    assert by_tau[50] < by_tau[2]
    assert elapsed < 900.0
    print(f"\nPASS criterion 7: val RMSE tau1=50 {by_tau[50]:.4f} < tau1=2 "
          f"{by_tau[2]:.4f} (fixed seed/budget), {elapsed:.1f} s (< 900)")


def test_criterion_08_metric_closed_forms():
    rng = np.random.default_rng(5)
    cfg = FilterbankConfig()
    s = rng.standard_normal(24000) * 0.1
    n = rng.standard_normal(24000) * 0.1
    n_frames = 1000
    nr, sd = nr_sd(s, n, np.full((n_frames, 48), 0.5), cfg, skip_frames=10)
    assert abs(nr - 6.021) <= 0.01
    assert abs(sd - (-6.021)) <= 0.01
    from hanr.dataset import synth_speech
    x = synth_speech(2.0, seed=3)
    self_stoi = stoi(x, x)
    assert self_stoi >= 0.999
    noisy = x + rng.standard_normal(len(x)) * 0.02
    assert delta_stoi(x, noisy, noisy) == 0.0
    print(f"\nPASS criterion 8: constant gain 0.5 -> NR {nr:.3f} dB, "
          f"speech-error ratio {sd:.3f} dB (+-0.01 of +-6.021); "
          f"stoi(x,x) = {self_stoi:.4f} >= 0.999; dSTOI(noisy,noisy) = 0")


def test_criterion_09_system_ordering(desk_run):
    t0 = time.perf_counter()
    records = evaluate_systems(desk_run["manifests"], desk_run["mix_dir"],
                               desk_run["cfg"], params=desk_run["params"])
    elapsed = desk_run["train_seconds"] + (time.perf_counter() - t0)
    rows = {(r["system"], r["snr_db"]): r for r in summarize_records(records)}
    for snr in (0.0, 5.0):
        ideal = rows[("ideal_wiener", snr)]["delta_stoi_median"]
        dnn = rows[("dnn", snr)]["delta_stoi_median"]
        sd_dnn = rows[("dnn", snr)]["sd_db_median"]
        sd_anchor = rows[("anchor", snr)]["sd_db_median"]
        assert ideal > dnn, f"{snr} dB: ideal {ideal} !> dnn {dnn}"
        assert sd_dnn < sd_anchor, \
            f"{snr} dB: SD dnn {sd_dnn} !< anchor {sd_anchor}"
        print(f"\nPASS criterion 9 @ {snr:g} dB: median dSTOI ideal "
              f"{ideal:+.4f} > dnn {dnn:+.4f}; median SD dnn {sd_dnn:.2f} < "
              f"anchor {sd_anchor:.2f} dB (seed {SEED})")
    assert elapsed < 1800.0


def test_criterion_10_throughput():
    cfg = desk_cfg()
    params = init_params(cfg.topology(), seed=0)
    x = np.random.default_rng(6).standard_normal(24000 * 2) * 0.1
    _, _, info = enhance_stream(x, params, cfg)
    assert info.realtime_factor < 1.0
    print(f"\nPASS criterion 10: realtime factor {info.realtime_factor:.3f} "
          f"(< 1.0) single-threaded on 2 s of audio")


def test_criterion_11_determinism(tmp_path):
    def run(*args):
        res = subprocess.run([sys.executable, "-m", "hanr.cli", *args],
                             capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        return res

    common = ["--tau1", "4", "--tau2", "2", "--width", "16", "--layers", "1"]
    outputs = []
    for run_id in ("run1", "run2"):
        d = tmp_path / run_id
        run("mix", "--corpus", str(d / "corpus"), "--out", str(d / "mix"),
            "--synth-speech", "4", "--synth-noise", "4",
            "--duration", "2.5", "--train", "2", "--val", "1", "--test", "1",
            "--seed", "7")
        run("features", "--manifests", str(d / "mix" / "manifests.jsonl"),
            "--mix-dir", str(d / "mix"), "--out", str(d / "feat"), *common)
        run("train", "--train-dump", str(d / "feat" / "train.hadf"),
            "--val-dump", str(d / "feat" / "val.hadf"),
            "--model-out", str(d / "model.hadm"),
            "--epochs", "2", "--lr", "1e-4", "--seed", "0", *common)
        run("evaluate", "--manifests", str(d / "mix" / "manifests.jsonl"),
            "--mix-dir", str(d / "mix"), "--out", str(d / "eval"),
            "--model", str(d / "model.hadm"),
            "--systems", "noisy,dnn,baseline", *common)
        outputs.append({
            "manifests": (d / "mix" / "manifests.jsonl").read_bytes(),
            "model": (d / "model.hadm").read_bytes(),
            "records": (d / "eval" / "records.csv").read_bytes(),
            "summary": (d / "eval" / "summary.csv").read_bytes(),
        })
    for key in outputs[0]:
        assert outputs[0][key] == outputs[1][key], f"{key} differs"
    print("\nPASS criterion 11: mix->train->evaluate reproduces bitwise-"
          "identical manifests, model file and CSVs across two runs")
