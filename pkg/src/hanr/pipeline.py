"""End-to-end plumbing: feature extraction over mixtures, streaming
enhancement, system evaluation and the context sweep.

The enhancement path is honestly streamed: the output wav is delayed by the
filter-bank group delay plus the lookahead, exactly as a real-time device
would emit it, and truncated to the input length.  Evaluation compensates
that reported latency before scoring.
"""

import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baseline as bl
from .audio_io import read_wav, write_wav
from .config import PipelineConfig
from .dataset import load_manifests
from .errors import ConfigError, DataError
from .features import (ContextBuffer, FeatureDumpWriter, assemble_input,
                       read_feature_dump)
from .filterbank import (AnalysisFilterBank, SynthesisFilterBank, analyze,
                         group_delay, warmup_frames)
from .metrics import EvalRecord, nr_sd, stoi
from .network import (NetworkParams, TrainConfig, forward, train)
from .wiener import apply_gain, clamp_gain, ideal_gain

GAIN_TRACE_MAGIC = b"HADG"
GAIN_TRACE_VERSION = 1

SYSTEMS = ("noisy", "dnn", "baseline", "anchor", "ideal_wiener")


def save_gain_trace(path, trace, start_index=0):
    trace = np.asarray(trace, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(GAIN_TRACE_MAGIC)
        fh.write(struct.pack("<3I", GAIN_TRACE_VERSION, trace.shape[1],
                             trace.shape[0]))
        for k in range(trace.shape[0]):
            fh.write(struct.pack("<I", start_index + k))
            fh.write(trace[k].tobytes())


def load_gain_trace(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != GAIN_TRACE_MAGIC:
        raise DataError(f"{path}: not a gain trace (bad magic)")
    version, bands, frames = struct.unpack_from("<3I", blob, 4)
    if version != GAIN_TRACE_VERSION:
        raise DataError(f"{path}: unsupported trace version {version}")
    rec = 4 + 4 * bands
    if len(blob) - 16 != frames * rec:
        raise DataError(f"{path}: truncated gain trace")
    idx = np.zeros(frames, dtype=np.int64)
    trace = np.zeros((frames, bands), dtype=np.float32)
    for k in range(frames):
        off = 16 + k * rec
        (idx[k],) = struct.unpack_from("<I", blob, off)
        trace[k] = np.frombuffer(blob, dtype="<f4", count=bands, offset=off + 4)
    return idx, trace


def mixture_features(x, s, n, cfg: PipelineConfig):
    """Feature matrix and clamped ideal-gain targets for one mixture.

    One row per context window; targets are the ideal Wiener gains of the
    window's center frame, clamped to the attenuation limit before
    training so the network never chases unreachable values.
    """
    fx = analyze(x, cfg.filterbank)
    fs = analyze(s, cfg.filterbank)
    fn = analyze(n, cfg.filterbank)
    buf = ContextBuffer(cfg.context)
    feats, targets = [], []
    for frame in fx:
        win = buf.push(frame)
        if win is None:
            continue
        c = win.center_frame_index
        feats.append(assemble_input(win))
        targets.append(clamp_gain(ideal_gain(fs[c], fn[c]), cfg.max_atten_db))
    if not feats:
        raise DataError("mixture shorter than the context window")
    return (np.asarray(feats, dtype=np.float32),
            np.asarray(targets, dtype=np.float32))


def build_feature_dumps(manifests_path, mix_dir, out_dir, cfg: PipelineConfig):
    """One HADF dump per split from rendered mixture triplets."""
    mix_dir = Path(mix_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifests = load_manifests(manifests_path)
    paths = {}
    writers = {}
    try:
        for man in manifests:
            x, _ = read_wav(mix_dir / f"{man.mixture_id}_x.wav")
            s, _ = read_wav(mix_dir / f"{man.mixture_id}_s.wav")
            n, _ = read_wav(mix_dir / f"{man.mixture_id}_n.wav")
            X, Y = mixture_features(x, s, n, cfg)
            if man.split not in writers:
                paths[man.split] = out_dir / f"{man.split}.hadf"
                writers[man.split] = FeatureDumpWriter(paths[man.split],
                                                      cfg.context)
            w = writers[man.split]
            for i in range(len(X)):
                w.write(X[i], Y[i])
    finally:
        for w in writers.values():
            w.close()
    return paths


@dataclass
class EnhanceInfo:
    latency_samples: int
    warmup_frames: int
    realtime_factor: float
    limited: bool  # True if the +-1 limiter engaged


def enhance_stream(x, params: NetworkParams, cfg: PipelineConfig):
    """Enhance a 24 kHz signal; returns (y, gain_trace, EnhanceInfo).

    y has the length of x and is delayed by group_delay + tau2*hop samples
    relative to it (real-time emission).  gain_trace[k] holds the gains
    applied to analysis frame k; warm-up frames pass through with unity
    gain.
    """
    if params.topology.input_dim != cfg.context.feature_dim:
        raise ConfigError(
            f"model expects input dim {params.topology.input_dim}, config "
            f"produces {cfg.context.feature_dim}")
    x = np.asarray(x, dtype=np.float64)
    R = cfg.filterbank.hop_samples
    tau1 = cfg.context.tau1_frames
    tau2 = cfg.context.tau2_frames
    n_frames = -(-len(x) // R)
    padded = np.zeros(n_frames * R)
    padded[:len(x)] = x
    afb = AnalysisFilterBank(cfg.filterbank)
    sfb = SynthesisFilterBank(cfg.filterbank)
    buf = ContextBuffer(cfg.context)
    pending = {}
    trace = np.ones((n_frames, cfg.context.num_bands), dtype=np.float32)
    blocks = []
    t0 = time.perf_counter()
    for k in range(n_frames):
        frame = afb.push(padded[k * R:(k + 1) * R])
        win = buf.push(frame)
        if frame.frame_index < tau1:
            blocks.append(sfb.push(frame))  # warm-up passthrough
        else:
            pending[frame.frame_index] = frame
        if win is not None and win.center_frame_index >= tau1:
            c = win.center_frame_index
            gains = forward(params, assemble_input(win).astype(np.float32))
            gains = clamp_gain(gains, cfg.max_atten_db)
            trace[c] = gains
            blocks.append(sfb.push(apply_gain(pending.pop(c), gains)))
    for c in sorted(pending):  # tail frames without lookahead
        blocks.append(sfb.push(pending.pop(c)))
    elapsed = time.perf_counter() - t0
    aligned = np.concatenate(blocks) if blocks else np.zeros(0)
    # real-time emission: the lookahead shifts everything by tau2 hops
    y = np.concatenate([np.zeros(tau2 * R), aligned])[:len(x)]
    limited = bool(np.max(np.abs(y), initial=0.0) > 1.0)
    if limited:
        y = np.clip(y, -1.0, 1.0)
    info = EnhanceInfo(
        latency_samples=group_delay(cfg.filterbank) + tau2 * R,
        warmup_frames=tau1 + tau2,
        realtime_factor=elapsed / (len(x) / cfg.filterbank.sample_rate_hz),
        limited=limited)
    return y, trace, info


def dnn_gain_trace(x, params, cfg: PipelineConfig):
    _, trace, _ = enhance_stream(x, params, cfg)
    return trace


def system_gain_trace(system, x, s, n, params, cfg: PipelineConfig):
    """Per-frame gain trace a given system produces on mixture x."""
    if system == "noisy":
        n_frames = -(-len(x) // cfg.filterbank.hop_samples)
        return np.ones((n_frames, cfg.context.num_bands))
    if system == "dnn":
        if params is None:
            raise ConfigError("the dnn system needs a trained model")
        return dnn_gain_trace(x, params, cfg)
    if system == "baseline":
        return bl.run_baseline(analyze(x, cfg.filterbank),
                               max_atten_db=cfg.max_atten_db)
    if system == "anchor":
        return bl.run_anchor(analyze(x, cfg.filterbank),
                             max_atten_db=cfg.max_atten_db)
    if system == "ideal_wiener":
        fs = analyze(s, cfg.filterbank)
        fn = analyze(n, cfg.filterbank)
        return np.stack([clamp_gain(ideal_gain(a, b), cfg.max_atten_db)
                         for a, b in zip(fs, fn)])
    raise ConfigError(f"unknown system {system!r}; choose from {SYSTEMS}")


def render_trace(x, trace, cfg: PipelineConfig):
    """Apply a gain trace to a mixture and synthesize, compensating the
    filter-bank delay so the result aligns with x."""
    frames = analyze(x, cfg.filterbank)
    sfb = SynthesisFilterBank(cfg.filterbank)
    blocks = [sfb.push(apply_gain(f, trace[f.frame_index]))
              for f in frames]
    y = np.concatenate(blocks)
    d = group_delay(cfg.filterbank)
    out = np.zeros(len(x))
    avail = min(len(x), len(y) - d)
    out[:avail] = y[d:d + avail]
    return out


def evaluate_systems(manifests_path, mix_dir, cfg: PipelineConfig,
                     params=None, systems=SYSTEMS, init_cut_s=1.0,
                     split="test"):
    """EvalRecord list over the given split's mixtures.

    The first init_cut_s seconds are excluded from STOI and from the NR/SD
    sums (estimator initialization, context warm-up).
    """
    mix_dir = Path(mix_dir)
    manifests = [m for m in load_manifests(manifests_path)
                 if split is None or m.split == split]
    if not manifests:
        raise DataError(f"no manifests for split {split!r}")
    rate = cfg.filterbank.sample_rate_hz
    cut = int(init_cut_s * rate)
    hop = cfg.filterbank.hop_samples
    skip = max(int(init_cut_s * rate / hop),
               warmup_frames(cfg.filterbank),
               cfg.context.tau1_frames + cfg.context.tau2_frames)
    records = []
    for man in manifests:
        x, _ = read_wav(mix_dir / f"{man.mixture_id}_x.wav", expect_rate=rate)
        s, _ = read_wav(mix_dir / f"{man.mixture_id}_s.wav", expect_rate=rate)
        n, _ = read_wav(mix_dir / f"{man.mixture_id}_n.wav", expect_rate=rate)
        stoi_noisy = stoi(s[cut:], x[cut:], fs=rate)
        for system in systems:
            trace = system_gain_trace(system, x, s, n, params, cfg)
            if system == "noisy":
                enhanced = x
            else:
                enhanced = render_trace(x, trace, cfg)
            st = stoi(s[cut:], enhanced[cut:], fs=rate)
            nr, sd = nr_sd(s, n, trace, cfg.filterbank, skip_frames=skip)
            records.append(EvalRecord(
                mixture_id=man.mixture_id, snr_db=man.target_snr_db,
                system=system, stoi=st, delta_stoi=st - stoi_noisy,
                nr_db=nr, sd_db=sd))
    return records


def context_sweep(manifests_path, mix_dir, pairs, cfg: PipelineConfig,
                  train_cfg: TrainConfig, max_samples=None):
    """Final validation RMSE for each (tau1, tau2) pair under a fixed
    training budget.  Returns a list of result dicts."""
    from dataclasses import replace
    from .features import ContextConfig

    rows = []
    for tau1, tau2 in pairs:
        sub = replace(cfg, context=ContextConfig(tau1_frames=tau1,
                                                 tau2_frames=tau2))
        mix_path = Path(mix_dir)
        manifests = load_manifests(manifests_path)
        data = {"train": [[], []], "val": [[], []]}
        for man in manifests:
            if man.split not in data:
                continue
            x, _ = read_wav(mix_path / f"{man.mixture_id}_x.wav")
            s, _ = read_wav(mix_path / f"{man.mixture_id}_s.wav")
            n, _ = read_wav(mix_path / f"{man.mixture_id}_n.wav")
            X, Y = mixture_features(x, s, n, sub)
            data[man.split][0].append(X)
            data[man.split][1].append(Y)
        sets = {}
        for split, (Xs, Ys) in data.items():
            if not Xs:
                raise DataError(f"no {split} mixtures for the sweep")
            X = np.concatenate(Xs)
            Y = np.concatenate(Ys)
            if max_samples is not None:
                X, Y = X[:max_samples], Y[:max_samples]
            sets[split] = (X, Y)
        _, hist = train(sets["train"], train_cfg, sub.topology(),
                        val_data=sets["val"])
        rows.append({"tau1_frames": tau1, "tau2_frames": tau2,
                     "train_rmse": hist[-1]["train_rmse"],
                     "val_rmse": hist[-1]["val_rmse"]})
    return rows


def monotone_trend(rows, key="val_rmse"):
    """True if the metric is non-increasing with tau1 (lookahead fixed)."""
    ordered = sorted(rows, key=lambda r: r["tau1_frames"])
    vals = [r[key] for r in ordered]
    return all(b <= a for a, b in zip(vals, vals[1:]))
