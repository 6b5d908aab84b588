"""Static plot emission for training logs and evaluation reports."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_loss_curves", "plot_per_frame_metrics", "plot_frame_strip"]


def plot_loss_curves(logs: dict, path) -> list:
    """One curve per training stage found in the log document."""
    fig, ax = plt.subplots(figsize=(7, 4))
    plotted = []
    for stage in ("autoencoder", "vqvae", "full"):
        history = logs.get(stage)
        if history and history.get("losses"):
            ax.plot(history["losses"], label=stage)
            plotted.append(stage)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return plotted


def plot_per_frame_metrics(report: dict, path) -> list:
    per_frame = report.get("per_frame", {})
    keys = [k for k in ("mse_pixel", "mae_pixel", "ssim", "ms_ssim", "psnr") if per_frame.get(k)]
    fig, axes = plt.subplots(1, max(len(keys), 1), figsize=(3.2 * max(len(keys), 1), 3))
    if len(keys) <= 1:
        axes = [axes]
    for ax, key in zip(axes, keys):
        values = [np.nan if v == "inf" else v for v in per_frame[key]]
        ax.plot(values, marker="o", markersize=3)
        ax.set_title(key)
        ax.set_xlabel("frame")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return keys


def plot_frame_strip(frames: dict, path, max_cols: int = 10) -> None:
    """Rows of frames (e.g. input / target / prediction) as one image grid."""
    rows = [(name, np.asarray(seq)) for name, seq in frames.items() if len(seq)]
    n_rows = len(rows)
    n_cols = min(max_cols, max(arr.shape[0] for _, arr in rows))
    fig, axes = plt.subplots(n_rows, n_cols, figsize=(1.2 * n_cols, 1.3 * n_rows), squeeze=False)
    for r, (name, arr) in enumerate(rows):
        for c in range(n_cols):
            ax = axes[r][c]
            ax.set_xticks([])
            ax.set_yticks([])
            if c < arr.shape[0]:
                img = arr[c]
                if img.ndim == 3:  # (C, H, W): show the first channel
                    img = img[0]
                ax.imshow(img, cmap="viridis")
            if c == 0:
                ax.set_ylabel(name, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
