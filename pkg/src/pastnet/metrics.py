"""Pixel-space and structural similarity metrics for frame sequences.

All functions accept numpy arrays (frames (H, W) / (C, H, W), videos
(T, C, H, W), or batches (N, T, C, H, W) where noted) and are pure.

Two error-reduction conventions are supported because reported magnitudes in
the video-prediction literature differ: `per_pixel_mean` averages over every
element, `per_frame_sum` sums over (C, H, W) and averages over frames and
sequences.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .errors import MetricError, ShapeMismatchError

__all__ = [
    "pixel_errors",
    "ssim",
    "ms_ssim",
    "psnr",
    "relative_l2",
    "MetricReport",
    "compute_report",
]

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def _check_shapes(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"pred {pred.shape} vs target {target.shape}")
    return pred, target


def pixel_errors(pred, target, reduction: str = "per_pixel_mean") -> tuple[float, float]:
    """(mse, mae) under the chosen reduction convention."""
    pred, target = _check_shapes(pred, target)
    diff = pred - target
    if reduction == "per_pixel_mean":
        return float((diff**2).mean()), float(np.abs(diff).mean())
    if reduction == "per_frame_sum":
        sq = (diff**2).reshape(*diff.shape[:-3], -1).sum(-1)
        ab = np.abs(diff).reshape(*diff.shape[:-3], -1).sum(-1)
        return float(sq.mean()), float(ab.mean())
    raise MetricError(f"unknown reduction {reduction!r}")


def _gaussian_window(size: int, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _ssim_maps(a, b, data_range, win_size):
    window = _gaussian_window(win_size)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_a = convolve2d(a, window, mode="valid")
    mu_b = convolve2d(b, window, mode="valid")
    saa = convolve2d(a * a, window, mode="valid") - mu_a**2
    sbb = convolve2d(b * b, window, mode="valid") - mu_b**2
    sab = convolve2d(a * b, window, mode="valid") - mu_a * mu_b
    luminance = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2 * sab + c2) / (saa + sbb + c2)
    return luminance * cs, cs


def _frame_channels(frame):
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 2:
        return frame[None]
    if frame.ndim == 3:
        return frame
    raise ShapeMismatchError(f"expected (H, W) or (C, H, W) frame, got {frame.shape}")


def _fit_window(h, w, win_size):
    win = min(win_size, h, w)
    if win % 2 == 0:
        win -= 1
    return max(win, 3)


def ssim(pred_frame, target_frame, data_range: float, win_size: int = 11) -> float:
    """Structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Frames smaller than the window fall back to the largest odd window that
    fits. Multi-channel frames are averaged over channels.
    """
    a, b = _frame_channels(pred_frame), _frame_channels(target_frame)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"pred {a.shape} vs target {b.shape}")
    win = _fit_window(a.shape[-2], a.shape[-1], win_size)
    vals = [_ssim_maps(ac, bc, data_range, win)[0].mean() for ac, bc in zip(a, b)]
    return float(np.mean(vals))


def _usable_scales(h, w, win_size, max_scales):
    scales = 1
    while scales < max_scales and min(h, w) // (2**scales) >= win_size:
        scales += 1
    return scales


def _downsample(x):
    h, w = x.shape
    h2, w2 = h - h % 2, w - w % 2
    x = x[:h2, :w2]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim(pred_frame, target_frame, data_range: float, win_size: int = 11) -> float:
    """Multi-scale SSIM with the standard 5-scale weights.

    The scale count shrinks until every scale fits the window, and the weights
    are renormalized; contrast-structure factors are clamped at zero before
    exponentiation so fractional powers stay real.
    """
    a, b = _frame_channels(pred_frame), _frame_channels(target_frame)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"pred {a.shape} vs target {b.shape}")
    h, w = a.shape[-2:]
    win = _fit_window(h, w, win_size)
    n_scales = _usable_scales(h, w, win, len(MS_SSIM_WEIGHTS))
    weights = np.asarray(MS_SSIM_WEIGHTS[:n_scales])
    weights = weights / weights.sum()

    per_channel = []
    for ac, bc in zip(a, b):
        score = 1.0
        x, y = ac, bc
        for level in range(n_scales):
            full, cs = _ssim_maps(x, y, data_range, win)
            if level == n_scales - 1:
                score *= max(full.mean(), 0.0) ** weights[level]
            else:
                score *= max(cs.mean(), 0.0) ** weights[level]
                x, y = _downsample(x), _downsample(y)
        per_channel.append(score)
    return float(np.mean(per_channel))


def psnr(pred, target, data_range: float) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give +inf."""
    mse, _ = pixel_errors(pred, target, "per_pixel_mean")
    if mse == 0.0:
        return math.inf
    return float(10.0 * math.log10(data_range**2 / mse))


def relative_l2(pred, target) -> float:
    """||target - pred||_2 / ||target - mean(target)||_2."""
    pred, target = _check_shapes(pred, target)
    denom = float(np.linalg.norm(target - target.mean()))
    if denom == 0.0:
        raise MetricError("relative_l2 is undefined for a constant target")
    return float(np.linalg.norm(target - pred) / denom)


@dataclass
class MetricReport:
    """Aggregated metrics plus per-frame breakdowns and conventions."""

    mse_pixel: float
    mse_frame_sum: float
    mae_pixel: float
    mae_frame_sum: float
    ssim: float
    ms_ssim: float
    psnr: float
    rel_l2: float
    per_frame: dict = field(default_factory=dict)
    conventions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def enc(v):
            return "inf" if isinstance(v, float) and math.isinf(v) else v

        return {
            "mse_pixel": enc(self.mse_pixel),
            "mse_frame_sum": enc(self.mse_frame_sum),
            "mae_pixel": enc(self.mae_pixel),
            "mae_frame_sum": enc(self.mae_frame_sum),
            "ssim": enc(self.ssim),
            "ms_ssim": enc(self.ms_ssim),
            "psnr": enc(self.psnr),
            "rel_l2": enc(self.rel_l2),
            "lpips": None,
            "per_frame": {k: [enc(x) for x in v] for k, v in self.per_frame.items()},
            "conventions": self.conventions,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def compute_report(pred, target, data_range: float | None = None) -> MetricReport:
    """Full metric report for (T, C, H, W) or (N, T, C, H, W) videos."""
    pred, target = _check_shapes(pred, target)
    if pred.ndim == 4:
        pred, target = pred[None], target[None]
    if pred.ndim != 5:
        raise ShapeMismatchError(f"expected (T, C, H, W) or (N, T, C, H, W), got {pred.shape}")
    if data_range is None:
        spread = float(target.max() - target.min())
        data_range = spread if spread > 0 else 1.0

    mse_p, mae_p = pixel_errors(pred, target, "per_pixel_mean")
    mse_f, mae_f = pixel_errors(pred, target, "per_frame_sum")
    n, t = pred.shape[:2]
    ssim_vals = np.zeros((n, t))
    ms_vals = np.zeros((n, t))
    for i in range(n):
        for j in range(t):
            ssim_vals[i, j] = ssim(pred[i, j], target[i, j], data_range)
            ms_vals[i, j] = ms_ssim(pred[i, j], target[i, j], data_range)

    per_frame = {
        "mse_pixel": [float(((pred[:, j] - target[:, j]) ** 2).mean()) for j in range(t)],
        "mae_pixel": [float(np.abs(pred[:, j] - target[:, j]).mean()) for j in range(t)],
        "ssim": [float(ssim_vals[:, j].mean()) for j in range(t)],
        "ms_ssim": [float(ms_vals[:, j].mean()) for j in range(t)],
        "psnr": [psnr(pred[:, j], target[:, j], data_range) for j in range(t)],
    }
    h, w = pred.shape[-2:]
    win = _fit_window(h, w, 11)
    conventions = {
        "data_range": data_range,
        "reductions": ["per_pixel_mean", "per_frame_sum"],
        "ssim_window": win,
        "ms_ssim_scales": _usable_scales(h, w, win, len(MS_SSIM_WEIGHTS)),
    }
    if win < 11:
        conventions["warnings"] = [f"frame smaller than the 11x11 window; using {win}x{win}"]
    return MetricReport(
        mse_pixel=mse_p,
        mse_frame_sum=mse_f,
        mae_pixel=mae_p,
        mae_frame_sum=mae_f,
        ssim=float(ssim_vals.mean()),
        ms_ssim=float(ms_vals.mean()),
        psnr=psnr(pred, target, data_range),
        rel_l2=relative_l2(pred, target),
        per_frame=per_frame,
        conventions=conventions,
    )
