"""Spectral-filter branch operating on patch tokens.

Frames are cut into non-overlapping patches and linearly projected to a token
grid. A stack of spectral filter layers then alternates a 2D FFT over the
token grid, channel mixing applied separately to the real and imaginary
coefficients, and the inverse FFT. A small convolutional head refines the
result, which is projected back to pixel space and mapped from the T observed
frames to the T_f predicted frames.

The DFT convention is unnormalized forward / 1/(grid_h*grid_w) inverse, i.e.
torch's default "backward" normalization. Only the nonredundant half-spectrum
of the real token grid is stored; the full spectrum is implied by Hermitian
symmetry.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ConfigurationError

__all__ = [
    "PatchSpec",
    "ChannelMLP",
    "SpectralMixer",
    "SpectralLayer",
    "SpatialExtractor",
    "FourierBranch",
    "spectral_forward",
    "spectral_inverse",
]


@dataclass(frozen=True)
class PatchSpec:
    """Patch geometry and token width for the spectral branch."""

    patch_h: int = 8
    patch_w: int = 8
    embed_dim: int = 128

    def __post_init__(self):
        if self.patch_h < 1 or self.patch_w < 1:
            raise ConfigurationError(f"patch sizes must be >= 1, got {self.patch_h}x{self.patch_w}")
        if self.embed_dim < 1:
            raise ConfigurationError(f"embed_dim must be >= 1, got {self.embed_dim}")

    def grid(self, height: int, width: int) -> tuple[int, int]:
        """Token-grid extent for a frame, rejecting non-divisible shapes."""
        if height % self.patch_h != 0:
            raise ConfigurationError(
                f"patch_h={self.patch_h} does not divide frame height {height}"
            )
        if width % self.patch_w != 0:
            raise ConfigurationError(
                f"patch_w={self.patch_w} does not divide frame width {width}"
            )
        return height // self.patch_h, width // self.patch_w


def spectral_forward(tokens: torch.Tensor) -> torch.Tensor:
    """Unnormalized 2D DFT of a real token grid over its spatial axes.

    tokens: (..., grid_h, grid_w, dim) real. Returns the half-spectrum
    (..., grid_h, grid_w//2 + 1, dim) complex.
    """
    return torch.fft.rfft2(tokens, dim=(-3, -2), norm="backward")


def spectral_inverse(spec: torch.Tensor, grid_w: int | None = None) -> torch.Tensor:
    """Normalized inverse of :func:`spectral_forward`.

    The stored half-spectrum is Hermitian-extended, so the two index ranges of
    the written inverse transform collapse into one real-output inverse FFT.
    grid_w defaults to the even width 2*(cols-1).
    """
    if grid_w is None:
        grid_w = 2 * (spec.shape[-2] - 1)
    return torch.fft.irfft2(spec, s=(spec.shape[-3], grid_w), dim=(-3, -2), norm="backward")


class ChannelMLP(nn.Module):
    """MLP over the token channel dim; depth 1 is a single linear map."""

    def __init__(self, dim: int, hidden: int | None = None, depth: int = 2):
        super().__init__()
        if depth == 1:
            self.net = nn.Linear(dim, dim)
        else:
            hidden = hidden or dim
            self.net = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def forward(self, x):
        return self.net(x)


class SpectralMixer(nn.Module):
    """Per-mode channel mixing with disjoint weights for the two parts.

    The real and imaginary coefficient grids pass through separate MLPs that
    act on the channel dimension only; no coupling across (u, v) positions.
    """

    def __init__(self, dim: int, hidden: int | None = None, depth: int = 2):
        super().__init__()
        self.real_mlp = ChannelMLP(dim, hidden, depth)
        self.imag_mlp = ChannelMLP(dim, hidden, depth)

    def forward(self, spec: torch.Tensor) -> torch.Tensor:
        return torch.complex(self.real_mlp(spec.real), self.imag_mlp(spec.imag))


class SpectralLayer(nn.Module):
    """One filter layer: FFT, mix real/imag channels, inverse FFT."""

    def __init__(self, dim: int, hidden: int | None = None, depth: int = 2):
        super().__init__()
        self.mixer = SpectralMixer(dim, hidden, depth)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        spec = spectral_forward(tokens)
        spec = self.mixer(spec)
        return spectral_inverse(spec, grid_w=tokens.shape[-2])


class SpatialExtractor(nn.Module):
    """Tanh(Conv2d(MLP(y) + y)) over the token grid, per time step."""

    def __init__(self, dim: int, kernel_size: int = 3):
        super().__init__()
        self.mlp = ChannelMLP(dim)
        self.conv = nn.Conv2d(dim, dim, kernel_size, padding=kernel_size // 2)

    def pre_activation(self, tokens: torch.Tensor) -> torch.Tensor:
        y = self.mlp(tokens) + tokens
        lead = y.shape[:-3]
        gh, gw, d = y.shape[-3:]
        y = y.reshape(-1, gh, gw, d).permute(0, 3, 1, 2)
        y = self.conv(y)
        return y.permute(0, 2, 3, 1).reshape(*lead, gh, gw, d)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.pre_activation(tokens))


class FourierBranch(nn.Module):
    """Full spectral branch: (T, C, H, W) video in, (T_f, C, H, W) out.

    Patch tokens are flattened in (C, patch_h, patch_w) row-major order before
    the linear projection. The temporal head is a bias-free linear map over
    the frame axis shared across channels and pixels, so zeroing either the
    de-patchify projection or the temporal weights forces an all-zero output.
    """

    def __init__(
        self,
        in_frames: int,
        out_frames: int,
        channels: int,
        height: int,
        width: int,
        patch: PatchSpec | None = None,
        depth: int = 8,
    ):
        super().__init__()
        patch = patch or PatchSpec()
        grid_h, grid_w = patch.grid(height, width)
        self.patch = patch
        self.in_frames = in_frames
        self.out_frames = out_frames
        self.channels = channels
        self.height = height
        self.width = width
        self.grid_h = grid_h
        self.grid_w = grid_w
        self.depth = depth

        patch_pixels = patch.patch_h * patch.patch_w * channels
        self.proj = nn.Linear(patch_pixels, patch.embed_dim)
        self.pos_embed = nn.Parameter(0.02 * torch.randn(grid_h, grid_w, patch.embed_dim))
        self.layers = nn.ModuleList(SpectralLayer(patch.embed_dim) for _ in range(depth))
        self.extract = SpatialExtractor(patch.embed_dim)
        self.unproj = nn.Linear(patch.embed_dim, patch_pixels)
        self.time_proj = nn.Parameter(
            torch.full((out_frames, in_frames), 1.0 / in_frames)
            + 0.02 * torch.randn(out_frames, in_frames)
        )

    def patchify(self, video: torch.Tensor) -> torch.Tensor:
        """Project non-overlapping patches to tokens and add position embeddings.

        video: (T, C, H, W) or (B, T, C, H, W); tokens come back with the same
        leading layout and trailing shape (grid_h, grid_w, embed_dim).
        """
        t, c, h, w = video.shape[-4:]
        if c != self.channels:
            raise ConfigurationError(f"expected {self.channels} channels, got {c}")
        if (h, w) != (self.height, self.width):
            self.patch.grid(h, w)  # raises with the offending dimension named
            raise ConfigurationError(
                f"frame size {h}x{w} does not match the configured {self.height}x{self.width}"
            )
        ph, pw = self.patch.patch_h, self.patch.patch_w
        lead = video.shape[:-3]
        x = video.reshape(-1, c, self.grid_h, ph, self.grid_w, pw)
        x = x.permute(0, 2, 4, 1, 3, 5)  # (N, gh, gw, c, ph, pw)
        x = x.reshape(*lead, self.grid_h, self.grid_w, c * ph * pw)
        return self.proj(x) + self.pos_embed

    def depatchify(self, tokens: torch.Tensor) -> torch.Tensor:
        """Linear map back to patch pixels and spatial reassembly."""
        ph, pw = self.patch.patch_h, self.patch.patch_w
        lead = tokens.shape[:-3]
        x = self.unproj(tokens)
        x = x.reshape(-1, self.grid_h, self.grid_w, self.channels, ph, pw)
        x = x.permute(0, 3, 1, 4, 2, 5)  # (N, c, gh, ph, gw, pw)
        return x.reshape(*lead, self.channels, self.height, self.width)

    def temporal_map(self, frames: torch.Tensor) -> torch.Tensor:
        """Bias-free linear projection of the frame axis, T -> T_f."""
        w = self.time_proj.to(frames.dtype)
        if frames.dim() == 4:
            return torch.einsum("ft,tchw->fchw", w, frames)
        return torch.einsum("ft,btchw->bfchw", w, frames)

    def forward(self, video: torch.Tensor) -> torch.Tensor:
        tokens = self.patchify(video)
        for layer in self.layers:
            tokens = layer(tokens)
        tokens = self.extract(tokens)
        frames = self.depatchify(tokens)
        return self.temporal_map(frames)
