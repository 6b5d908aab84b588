"""Bouncing-glyph sequences: fixed sprites moving with elastic wall reflection.

A desk-scale stand-in for digit-bouncing video benchmarks. Positions follow
the closed-form triangle-wave fold of unreflected motion, so trajectories are
exactly elastic and a pure function of (config, seed). Overlapping glyphs
combine by per-pixel max; pixel values lie in [0, 1].
"""

import numpy as np

from ..errors import ConfigurationError
from .container import TrajectoryDataset

__all__ = ["gen_bouncing", "make_glyphs", "fold_position"]


def make_glyphs(size: int = 16) -> np.ndarray:
    """A small bank of procedural sprites on a size x size canvas."""
    s = size
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)
    cy = cx = (s - 1) / 2.0
    r = np.hypot(yy - cy, xx - cx)

    ring = ((r <= s * 0.42) & (r >= s * 0.22)).astype(np.float64)
    plus = (((np.abs(xx - cx) <= s * 0.12) | (np.abs(yy - cy) <= s * 0.12)) & (r <= s * 0.46))
    diamond = (np.abs(xx - cx) + np.abs(yy - cy) <= s * 0.45).astype(np.float64)
    cross = ((np.abs(xx - yy) <= s * 0.10) | (np.abs(xx + yy - (s - 1)) <= s * 0.10)).astype(
        np.float64
    )
    return np.stack([ring, plus.astype(np.float64), diamond, cross])


def fold_position(start: float, velocity: float, t: float, span: float) -> float:
    """Elastically reflected position inside [0, span] after time t."""
    if span <= 0:
        return 0.0
    q = (start + velocity * t) % (2.0 * span)
    return q if q <= span else 2.0 * span - q


def gen_bouncing(
    n_seqs: int,
    frames: int,
    height: int = 64,
    width: int = 64,
    n_glyphs: int = 2,
    seed: int = 0,
    glyph_size: int = 16,
    speed_range: tuple[float, float] = (0.8, 2.4),
) -> TrajectoryDataset:
    """Generate (n_seqs, frames, 1, height, width) bouncing-glyph videos."""
    if glyph_size > height or glyph_size > width:
        raise ConfigurationError(
            f"glyph size {glyph_size} exceeds the {height}x{width} frame"
        )
    glyphs = make_glyphs(glyph_size)
    span_y = float(height - glyph_size)
    span_x = float(width - glyph_size)
    data = np.zeros((n_seqs, frames, 1, height, width), dtype=np.float32)

    for i in range(n_seqs):
        rng = np.random.default_rng([seed, i])
        sprite_ids = rng.integers(0, len(glyphs), size=n_glyphs)
        y0 = rng.uniform(0.0, span_y, size=n_glyphs) if span_y > 0 else np.zeros(n_glyphs)
        x0 = rng.uniform(0.0, span_x, size=n_glyphs) if span_x > 0 else np.zeros(n_glyphs)
        angle = rng.uniform(0.0, 2.0 * np.pi, size=n_glyphs)
        speed = rng.uniform(speed_range[0], speed_range[1], size=n_glyphs)
        vy = speed * np.sin(angle)
        vx = speed * np.cos(angle)

        for t in range(frames):
            frame = data[i, t, 0]
            for g in range(n_glyphs):
                py = int(round(fold_position(y0[g], vy[g], t, span_y)))
                px = int(round(fold_position(x0[g], vx[g], t, span_x)))
                patch = frame[py : py + glyph_size, px : px + glyph_size]
                np.maximum(patch, glyphs[sprite_ids[g]], out=patch)

    params = {
        "frames": frames,
        "height": height,
        "width": width,
        "n_glyphs": n_glyphs,
        "glyph_size": glyph_size,
        "speed_range": list(speed_range),
    }
    return TrajectoryDataset(data=data, generator="bounce", params=params, seed=seed)
