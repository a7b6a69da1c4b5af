"""Matplotlib figures rendered next to the CSV outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_evaluation(records, path):
    """Per-system box plots of delta-STOI, NR and SD, grouped by SNR."""
    systems = sorted({r.system for r in records})
    snrs = sorted({r.snr_db for r in records})
    metrics = [("delta_stoi", r"$\Delta$STOI"), ("nr_db", "NR [dB]"),
               ("sd_db", "SD [dB]")]
    fig, axes = plt.subplots(3, 1, figsize=(1.8 + 1.2 * len(snrs) * len(systems) / 2,
                                            9), sharex=True)
    width = 0.8 / len(systems)
    for ax, (key, label) in zip(axes, metrics):
        for i, system in enumerate(systems):
            data = [[getattr(r, key) for r in records
                     if r.system == system and r.snr_db == snr]
                    for snr in snrs]
            pos = [j + (i - (len(systems) - 1) / 2) * width
                   for j in range(len(snrs))]
            bp = ax.boxplot(data, positions=pos, widths=width * 0.9,
                            patch_artist=True, manage_ticks=False,
                            medianprops=dict(color="black"))
            color = plt.cm.tab10(i % 10)
            for box in bp["boxes"]:
                box.set_facecolor(color)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    axes[-1].set_xticks(range(len(snrs)))
    axes[-1].set_xticklabels([f"{snr:g}" for snr in snrs])
    axes[-1].set_xlabel("input SNR [dB]")
    handles = [plt.Rectangle((0, 0), 1, 1, facecolor=plt.cm.tab10(i % 10))
               for i in range(len(systems))]
    axes[0].legend(handles, systems, loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_context_sweep(rows, path):
    """Validation RMSE against look-back length, one line per lookahead."""
    fig, ax = plt.subplots(figsize=(6, 4))
    tau2s = sorted({r["tau2_frames"] for r in rows})
    for tau2 in tau2s:
        pts = sorted([r for r in rows if r["tau2_frames"] == tau2],
                     key=lambda r: r["tau1_frames"])
        ax.plot([r["tau1_frames"] for r in pts],
                [r["val_rmse"] for r in pts],
                marker="o", label=rf"$\tau_2$ = {tau2} frames")
    ax.set_xlabel(r"look-back $\tau_1$ [frames]")
    ax.set_ylabel("validation RMSE")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_filterbank_check(cfg, path):
    """Prototype window and round-trip impulse response."""
    from .filterbank import analyze, synthesize

    n = 4 * cfg.window_len_samples
    x = np.zeros(n)
    x[0] = 1.0
    y = synthesize(analyze(x, cfg), cfg)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5))
    ax1.plot(cfg.window(), lw=1)
    ax1.set_title("prototype window")
    ax1.grid(True, alpha=0.3)
    ax2.plot(y, lw=1)
    ax2.axvline(int(np.argmax(np.abs(y))), color="r", ls="--",
                label=f"delay = {int(np.argmax(np.abs(y)))} samples")
    ax2.set_title("analysis+synthesis impulse response")
    ax2.set_xlabel("sample")
    ax2.legend()
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_loss_history(history, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = [h["epoch"] for h in history]
    ax.plot(epochs, [h["train_rmse"] for h in history], marker="o",
            label="train")
    if history and history[0]["val_rmse"] is not None:
        ax.plot(epochs, [h["val_rmse"] for h in history], marker="s",
                label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("RMSE")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
