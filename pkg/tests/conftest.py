"""Shared test helpers: naive DFT oracles and finite-difference gradients."""

import numpy as np
import torch


def dft2_naive(grid: np.ndarray) -> np.ndarray:
    """Direct O(n^2) per-mode 2D DFT, unnormalized forward convention."""
    gh, gw = grid.shape
    out = np.zeros((gh, gw), dtype=complex)
    for u in range(gh):
        for v in range(gw):
            total = 0.0 + 0.0j
            for x in range(gh):
                for y in range(gw):
                    total += grid[x, y] * np.exp(-2j * np.pi * (u * x / gh + v * y / gw))
            out[u, v] = total
    return out


def idft2_naive(spec_full: np.ndarray) -> np.ndarray:
    """Direct inverse DFT with the 1/(gh*gw) normalization."""
    gh, gw = spec_full.shape
    out = np.zeros((gh, gw), dtype=complex)
    for x in range(gh):
        for y in range(gw):
            total = 0.0 + 0.0j
            for u in range(gh):
                for v in range(gw):
                    total += spec_full[u, v] * np.exp(2j * np.pi * (u * x / gh + v * y / gw))
            out[x, y] = total / (gh * gw)
    return out


def hermitian_extend(half: np.ndarray, gw: int) -> np.ndarray:
    """Rebuild the full (gh, gw) spectrum from the stored half-spectrum."""
    gh = half.shape[0]
    full = np.zeros((gh, gw), dtype=complex)
    cols = half.shape[1]
    full[:, :cols] = half
    for v in range(cols, gw):
        for u in range(gh):
            full[u, v] = np.conj(half[(-u) % gh, (gw - v) % gw])
    return full


def central_difference_grads(loss_fn, entries, h=1e-6):
    """Finite-difference gradients of loss_fn() at selected parameter entries.

    entries: list of (param, flat_index). Returns (analytic, numeric) lists;
    loss_fn must rebuild the graph each call from the current parameter values.
    """
    loss = loss_fn()
    grads = torch.autograd.grad(loss, [p for p, _ in entries], allow_unused=True)
    analytic = []
    numeric = []
    for (param, flat_idx), grad in zip(entries, grads):
        g = 0.0 if grad is None else float(grad.reshape(-1)[flat_idx])
        analytic.append(g)
        with torch.no_grad():
            flat = param.reshape(-1)
            original = float(flat[flat_idx])
            flat[flat_idx] = original + h
            up = float(loss_fn())
            flat[flat_idx] = original - h
            down = float(loss_fn())
            flat[flat_idx] = original
        numeric.append((up - down) / (2 * h))
    return analytic, numeric


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-7):
    for a, n in zip(analytic, numeric):
        denom = max(abs(a), abs(n))
        if denom < atol:
            continue
        assert abs(a - n) / denom < rtol, f"analytic {a} vs numeric {n}"
