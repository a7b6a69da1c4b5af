"""Command-line interface.

Subcommands: mix, features, train, enhance, evaluate, sweep-context,
fbank-check.  Exit codes: 0 success, 2 configuration error, 3 data error,
4 numeric failure.  Tables are CSV with a header row; figures are PNG.
"""

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .audio_io import read_wav, write_wav
from .config import PipelineConfig
from .dataset import (DEFAULT_SNR_SET_DB, generate_mixtures, make_desk_corpus)
from .errors import HanrError
from .features import read_feature_dump
from .filterbank import FilterbankConfig, analyze, group_delay, synthesize
from .metrics import summarize_records, write_records_csv, write_summary_csv
from .network import TrainConfig, load_model, save_model, train
from .pipeline import (SYSTEMS, build_feature_dumps, context_sweep,
                       enhance_stream, evaluate_systems, monotone_trend,
                       save_gain_trace)


def _pipeline_config(args, deployment=False):
    overrides = {}
    for flag, key in (("tau1", "tau1_frames"), ("tau2", "tau2_frames"),
                      ("width", "hidden_width"), ("layers", "hidden_layers"),
                      ("max_atten_db", "max_atten_db")):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "config", None):
        cfg = PipelineConfig.from_yaml(args.config)
        if overrides:
            cfg = PipelineConfig.from_profile(cfg.profile, **overrides)
    else:
        cfg = PipelineConfig.from_profile(args.profile, **overrides)
    return cfg.validate(deployment=deployment)


def _add_config_flags(p):
    p.add_argument("--profile", default="desk_scale",
                   choices=("desk_scale", "paper_scale"))
    p.add_argument("--config", help="resolved-config YAML to load")
    p.add_argument("--tau1", type=int, help="look-back frames")
    p.add_argument("--tau2", type=int, help="lookahead frames")
    p.add_argument("--width", type=int, help="hidden layer width")
    p.add_argument("--layers", type=int, help="hidden layer count")
    p.add_argument("--max-atten-db", dest="max_atten_db", type=float)


def cmd_mix(args):
    corpus = Path(args.corpus)
    if args.synth_speech or args.synth_noise:
        make_desk_corpus(corpus, n_speech=args.synth_speech or 8,
                         n_noise=args.synth_noise or 6,
                         speech_duration_s=args.duration,
                         noise_duration_s=2.0 * args.duration,
                         seed=args.seed)
    snr_set = tuple(float(v) for v in args.snr_set.split(",")) \
        if args.snr_set else DEFAULT_SNR_SET_DB
    manifests = generate_mixtures(
        corpus, args.out, counts=(args.train, args.val, args.test),
        snr_set_db=snr_set, seed=args.seed)
    print(f"wrote {len(manifests)} mixtures to {args.out}")
    return 0


def cmd_features(args):
    cfg = _pipeline_config(args)
    out = Path(args.out)
    paths = build_feature_dumps(args.manifests, args.mix_dir, out, cfg)
    cfg.write_snapshot(out / "config_snapshot.yaml")
    for split, path in sorted(paths.items()):
        _, X, _ = read_feature_dump(path)
        print(f"{split}: {len(X)} samples -> {path}")
    return 0


def cmd_train(args):
    cfg = _pipeline_config(args)
    _, X, Y = read_feature_dump(args.train_dump)
    val = None
    if args.val_dump:
        _, Xv, Yv = read_feature_dump(args.val_dump)
        val = (Xv, Yv)
    tcfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                       batch_size=args.batch_size, rng_seed=args.seed)
    params, history = train(
        (X, Y), tcfg, cfg.topology(), val_data=val,
        log=lambda row: print(
            f"epoch {row['epoch']}: train_rmse {row['train_rmse']:.6f}"
            + (f", val_rmse {row['val_rmse']:.6f}"
               if row["val_rmse"] is not None else "")))
    save_model(params, args.model_out)
    out_dir = Path(args.model_out).parent
    cfg.write_snapshot(out_dir / "config_snapshot.yaml")
    if args.loss_csv:
        with open(args.loss_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_rmse", "val_rmse"])
            for row in history:
                w.writerow([row["epoch"], f"{row['train_rmse']:.9g}",
                            "" if row["val_rmse"] is None
                            else f"{row['val_rmse']:.9g}"])
    if args.loss_figure:
        from .report import plot_loss_history
        plot_loss_history(history, args.loss_figure)
    print(f"model saved to {args.model_out}")
    return 0


def cmd_enhance(args):
    cfg = _pipeline_config(args, deployment=True)
    params = load_model(args.model)
    x, rate = read_wav(args.input, expect_rate=cfg.filterbank.sample_rate_hz)
    y, trace, info = enhance_stream(x, params, cfg)
    write_wav(args.output, y, rate, fmt=args.format)
    if args.trace_out:
        save_gain_trace(args.trace_out, trace)
    meta = {
        "input": str(args.input),
        "output": str(args.output),
        "latency_samples": info.latency_samples,
        "latency_ms": info.latency_samples / rate * 1000.0,
        "warmup_frames": info.warmup_frames,
        "realtime_factor": info.realtime_factor,
        "limited": info.limited,
    }
    if args.meta_out:
        with open(args.meta_out, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
    print(f"latency {meta['latency_ms']:.2f} ms, "
          f"realtime factor {info.realtime_factor:.3f}")
    return 0


def cmd_evaluate(args):
    cfg = _pipeline_config(args, deployment=True)
    params = load_model(args.model) if args.model else None
    systems = tuple(args.systems.split(",")) if args.systems else SYSTEMS
    records = evaluate_systems(args.manifests, args.mix_dir, cfg,
                               params=params, systems=systems,
                               init_cut_s=args.init_cut_s, split=args.split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out / "records.csv")
    rows = summarize_records(records)
    write_summary_csv(rows, out / "summary.csv")
    cfg.write_snapshot(out / "config_snapshot.yaml")
    from .report import plot_evaluation
    plot_evaluation(records, out / "evaluation.png")
    for row in rows:
        print(f"{row['system']:>12} @ {row['snr_db']:>5g} dB: "
              f"dSTOI {row['delta_stoi_median']:+.3f}, "
              f"NR {row['nr_db_median']:5.2f} dB, "
              f"SD {row['sd_db_median']:7.2f} dB")
    return 0


def cmd_sweep_context(args):
    cfg = _pipeline_config(args)
    pairs = []
    for item in args.pairs.split(","):
        t1, t2 = item.split(":")
        pairs.append((int(t1), int(t2)))
    tcfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                       batch_size=args.batch_size, rng_seed=args.seed)
    rows = context_sweep(args.manifests, args.mix_dir, pairs, cfg, tcfg,
                         max_samples=args.max_samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau1_frames", "tau2_frames", "train_rmse", "val_rmse"])
        for row in rows:
            w.writerow([row["tau1_frames"], row["tau2_frames"],
                        f"{row['train_rmse']:.9g}", f"{row['val_rmse']:.9g}"])
    from .report import plot_context_sweep
    plot_context_sweep(rows, out / "sweep.png")
    for row in rows:
        print(f"tau1 {row['tau1_frames']:>4}, tau2 {row['tau2_frames']}: "
              f"val RMSE {row['val_rmse']:.6f}")
    print("monotone improvement with tau1:",
          monotone_trend(rows))
    return 0


def cmd_fbank_check(args):
    cfg = FilterbankConfig()
    d = group_delay(cfg)
    rng = np.random.default_rng(0)
    worst = -np.inf
    for _ in range(args.trials):
        x = rng.standard_normal(2400)
        y = synthesize(analyze(x, cfg), cfg)
        L = cfg.window_len_samples
        ref = x[L:len(x) - L]
        est = y[L + d:len(x) - L + d]
        err = 10.0 * np.log10(np.sum((est - ref) ** 2) / np.sum(ref ** 2))
        worst = max(worst, err)
    ok = d <= 144 and worst <= -40.0
    print(f"group delay: {d} samples ({d / 24.0:.2f} ms) "
          f"[budget 144 samples]")
    print(f"worst round-trip error over {args.trials} trials: {worst:.1f} dB "
          f"[budget -40 dB]")
    print("PASS" if ok else "FAIL")
    if args.figure:
        from .report import plot_filterbank_check
        plot_filterbank_check(cfg, args.figure)
    return 0 if ok else 4


def build_parser():
    ap = argparse.ArgumentParser(
        prog="hanr",
        description="Low-latency subband speech enhancement toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mix", help="build a mixture corpus with manifests")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train", type=int, default=8)
    p.add_argument("--val", type=int, default=2)
    p.add_argument("--test", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr-set", dest="snr_set",
                   help="comma-separated SNRs in dB")
    p.add_argument("--synth-speech", type=int, default=0,
                   help="synthesize N stand-in speech files first")
    p.add_argument("--synth-noise", type=int, default=0)
    p.add_argument("--duration", type=float, default=2.5,
                   help="synthesized speech duration in seconds")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("features", help="extract training feature dumps")
    p.add_argument("--manifests", required=True)
    p.add_argument("--mix-dir", dest="mix_dir", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train the gain predictor")
    p.add_argument("--train-dump", dest="train_dump", required=True)
    p.add_argument("--val-dump", dest="val_dump")
    p.add_argument("--model-out", dest="model_out", required=True)
    p.add_argument("--loss-csv", dest="loss_csv")
    p.add_argument("--loss-figure", dest="loss_figure")
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance a wav file")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--trace-out", dest="trace_out")
    p.add_argument("--meta-out", dest="meta_out")
    p.add_argument("--format", default="float32",
                   choices=("float32", "pcm16"))
    _add_config_flags(p)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("evaluate", help="objective evaluation of systems")
    p.add_argument("--manifests", required=True)
    p.add_argument("--mix-dir", dest="mix_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    p.add_argument("--systems", help=f"comma list from {','.join(SYSTEMS)}")
    p.add_argument("--split", default="test")
    p.add_argument("--init-cut-s", dest="init_cut_s", type=float, default=1.0)
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-context",
                       help="validation loss over (tau1, tau2) pairs")
    p.add_argument("--manifests", required=True)
    p.add_argument("--mix-dir", dest="mix_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", required=True,
                   help="e.g. 2:2,10:2,50:2 (tau1:tau2 in frames)")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-samples", dest="max_samples", type=int)
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep_context)

    p = sub.add_parser("fbank-check", help="filter bank self-test")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--figure")
    p.set_defaults(func=cmd_fbank_check)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HanrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
