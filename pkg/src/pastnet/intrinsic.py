"""Nearest-neighbor maximum-likelihood intrinsic dimension estimation.

The latent width of the discrete branch is chosen by estimating the number of
degrees of freedom in encoder features. Per anchor vector, the log-ratio
statistic over its R nearest neighbors is

    raw_j = (1/(R-2)) * sum_{m=1..R-1} log(d(h_j, h_jR) / d(h_j, h_jm)),

whose reciprocal is the local maximum-likelihood dimension. The global
estimate is the ceiling of the mean local dimension over a seeded subsample.

Euclidean distance is the default; it recovers planted low-dimensional
structure, while cosine distance is available but collapses the radial degree
of freedom and locally squares the metric, which halves estimates.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = ["DimEstimate", "local_dim_estimate", "intrinsic_dim", "combine_local_estimates"]

DISTANCE_FLOOR = 1e-12


@dataclass
class DimEstimate:
    """Result of a dimension-estimation run."""

    local_dims: np.ndarray
    neighbors: int
    sample_size: int
    dim: int
    distance: str = "euclidean"
    excluded: int = 0


def _pairwise(block: np.ndarray, points: np.ndarray, distance: str) -> np.ndarray:
    if distance == "euclidean":
        d2 = (
            (block**2).sum(-1)[:, None]
            + (points**2).sum(-1)[None, :]
            - 2.0 * block @ points.T
        )
        return np.sqrt(np.maximum(d2, 0.0))
    if distance == "cosine":
        bn = np.linalg.norm(block, axis=1, keepdims=True)
        pn = np.linalg.norm(points, axis=1, keepdims=True)
        bn = np.maximum(bn, DISTANCE_FLOOR)
        pn = np.maximum(pn, DISTANCE_FLOOR)
        sim = (block / bn) @ (points / pn).T
        return np.clip(1.0 - sim, 0.0, None)
    raise ConfigurationError(f"unknown distance {distance!r}")


def _raw_statistic(sorted_dists: np.ndarray, neighbors: int) -> float:
    """Log-ratio statistic from ascending distances to the R nearest neighbors.

    Zero-distance neighbors are skipped after flooring at 1e-12; if the
    farthest distance is zero the statistic is undefined and NaN is returned.
    """
    d = np.asarray(sorted_dists, dtype=np.float64)
    if d.shape[-1] != neighbors:
        raise ConfigurationError(f"expected {neighbors} neighbor distances, got {d.shape[-1]}")
    if d[-1] <= 0.0:
        return math.nan
    keep = d[:-1] > 0.0
    if not keep.any():
        return math.nan
    floored = np.maximum(d, DISTANCE_FLOOR)
    terms = np.log(floored[-1] / floored[:-1])[keep]
    return float(terms.sum() / (neighbors - 2))


def local_dim_estimate(anchor, neighbors, distance: str = "euclidean") -> float:
    """Log-ratio statistic for one anchor against its ordered nearest neighbors.

    neighbors: (R, dim) array, ordered by increasing distance to the anchor,
    R >= 3. Returns NaN when all distances vanish (estimator undefined).
    """
    anchor = np.atleast_1d(np.asarray(anchor, dtype=np.float64))
    pts = np.atleast_2d(np.asarray(neighbors, dtype=np.float64))
    r = pts.shape[0]
    if r < 3:
        raise ConfigurationError(f"need at least 3 neighbors, got {r}")
    dists = _pairwise(anchor[None, :], pts, distance)[0]
    return _raw_statistic(dists, r)


def combine_local_estimates(local_dims) -> int:
    """Final integer dimension: ceiling of the mean local estimate, >= 1."""
    vals = np.asarray(local_dims, dtype=np.float64)
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        raise ConfigurationError("no finite local dimension estimates to combine")
    return max(1, math.ceil(vals.mean()))


def intrinsic_dim(
    features,
    neighbors: int = 20,
    sample: int = 10000,
    seed: int = 0,
    distance: str = "euclidean",
    chunk: int = 2048,
) -> DimEstimate:
    """Estimate the intrinsic dimension of per-location feature vectors.

    features: (T, C, H, W) array or tensor; each spatial location at each time
    step contributes one C-dimensional vector. A subsample of at most `sample`
    vectors is drawn without replacement under `seed`; each keeps its
    `neighbors` nearest within the subsample. Anchors whose statistic is
    undefined (all-zero distances) or non-positive are excluded.
    """
    if hasattr(features, "detach"):  # torch tensor
        features = features.detach().cpu().numpy()
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 4:
        t, c, h, w = x.shape
        vectors = x.transpose(0, 2, 3, 1).reshape(-1, c)
    elif x.ndim == 2:
        vectors = x
    else:
        raise ConfigurationError(f"expected (T, C, H, W) or (N, dim) features, got shape {x.shape}")

    if neighbors < 3:
        raise ConfigurationError(f"neighbor count must be >= 3, got {neighbors}")
    n_total = vectors.shape[0]
    j = min(sample, n_total)
    if j < neighbors + 1:
        raise ConfigurationError(
            f"sample size {j} must be at least neighbors+1 = {neighbors + 1}"
        )

    rng = np.random.default_rng(seed)
    idx = rng.choice(n_total, size=j, replace=False)
    pts = vectors[idx]

    raw = np.empty(j, dtype=np.float64)
    for start in range(0, j, chunk):
        block = pts[start : start + chunk]
        dists = _pairwise(block, pts, distance)
        for k in range(block.shape[0]):
            row = dists[k]
            row[start + k] = np.inf  # exclude self
            nearest = np.sort(np.partition(row, neighbors - 1)[:neighbors])
            raw[start + k] = _raw_statistic(nearest, neighbors)

    with np.errstate(divide="ignore"):
        local = np.where(np.isfinite(raw) & (raw > 0.0), 1.0 / raw, np.nan)
    excluded = int(np.count_nonzero(~np.isfinite(local)))
    if excluded == j:
        # fully degenerate features (e.g. all vectors identical): no anchor
        # has a defined estimator, so fall back to the minimal width
        dim = 1
    else:
        dim = combine_local_estimates(local)
    return DimEstimate(
        local_dims=local,
        neighbors=neighbors,
        sample_size=j,
        dim=dim,
        distance=distance,
        excluded=excluded,
    )
