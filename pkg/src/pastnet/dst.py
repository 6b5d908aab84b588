"""Discrete spatio-temporal branch: encode, quantize, propagate, decode.

A convolutional encoder downsamples frames by 4x, a memory bank snaps each
latent location onto its nearest codeword, a temporal block stack evolves the
quantized features with time folded into channels, and a deconvolutional
decoder restores full-resolution frames.

Quantization is an exact nearest-neighbor scan over the bank (no approximate
structures), with ties broken toward the lowest codeword index.
"""

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigurationError

__all__ = [
    "ChannelLayerNorm",
    "ConvBlock",
    "ResidualBlock",
    "Encoder",
    "MemoryBank",
    "quantize",
    "vq_loss",
    "Propagator",
    "Decoder",
    "DiscreteBranch",
]


class ChannelLayerNorm(nn.Module):
    """Layer normalization over the channel dim of (N, C, H, W) maps."""

    def __init__(self, channels: int, eps: float = 1e-6):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x):
        x = x.permute(0, 2, 3, 1)
        x = F.layer_norm(x, (x.shape[-1],), self.weight, self.bias, self.eps)
        return x.permute(0, 3, 1, 2)


class ConvBlock(nn.Module):
    """Conv2d -> layer norm -> ReLU; stride 2 halves the resolution."""

    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        if stride == 2:
            self.conv = nn.Conv2d(in_ch, out_ch, 4, stride=2, padding=1)
        else:
            self.conv = nn.Conv2d(in_ch, out_ch, 3, stride=1, padding=1)
        self.norm = ChannelLayerNorm(out_ch)

    def forward(self, x):
        return F.relu(self.norm(self.conv(x)))


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            ChannelLayerNorm(channels),
            nn.ReLU(),
            nn.Conv2d(channels, channels, 3, padding=1),
            ChannelLayerNorm(channels),
        )

    def forward(self, x):
        return x + self.body(x)


class Encoder(nn.Module):
    """Three conv blocks (stride 2, 2, 1), three residual blocks, 1x1 head.

    Total stride 4. The head projects the trunk width to `out_channels`; it is
    rebuilt once the latent width has been fixed by dimension estimation.
    """

    def __init__(self, in_channels: int, width: int = 64, out_channels: int | None = None):
        super().__init__()
        out_channels = out_channels or width
        self.in_channels = in_channels
        self.width = width
        self.out_channels = out_channels
        self.conv_blocks = nn.ModuleList(
            [
                ConvBlock(in_channels, width // 2, stride=2),
                ConvBlock(width // 2, width, stride=2),
                ConvBlock(width, width, stride=1),
            ]
        )
        self.res_blocks = nn.ModuleList([ResidualBlock(width) for _ in range(3)])
        self.head = nn.Conv2d(width, out_channels, 1)

    @property
    def total_stride(self) -> int:
        return 4

    def rebuild_head(self, out_channels: int) -> None:
        """Replace the projection head with a freshly initialized one."""
        self.head = nn.Conv2d(self.width, out_channels, 1)
        self.out_channels = out_channels

    def forward(self, x):
        n, c, h, w = x.shape
        if h % self.total_stride or w % self.total_stride:
            raise ConfigurationError(
                f"frame size {h}x{w} not divisible by the encoder stride {self.total_stride}"
            )
        for block in self.conv_blocks:
            x = block(x)
        for block in self.res_blocks:
            x = block(x)
        return self.head(x)


class MemoryBank(nn.Module):
    """Learnable codebook of size^2 vectors of width `dim` (by default).

    Rows are initialized uniform in [-1/num, 1/num]. `freeze()` stops gradient
    flow into the codewords for the joint-training stage.
    """

    def __init__(self, dim: int, num: int | None = None):
        super().__init__()
        if dim < 1:
            raise ConfigurationError(f"codeword dim must be >= 1, got {dim}")
        num = num if num is not None else dim * dim
        bound = 1.0 / num
        self.codewords = nn.Parameter(torch.empty(num, dim).uniform_(-bound, bound))
        self.frozen = False

    @property
    def dim(self) -> int:
        return self.codewords.shape[1]

    @property
    def num_codewords(self) -> int:
        return self.codewords.shape[0]

    def freeze(self) -> None:
        self.codewords.requires_grad_(False)
        self.frozen = True

    @torch.no_grad()
    def assign(self, vectors: torch.Tensor, chunk: int = 8192) -> torch.Tensor:
        """Exact nearest-codeword indices for (N, dim) vectors.

        Distances are computed by direct subtraction so that a brute-force
        scan reproduces them bit-for-bit; argmin takes the first minimum,
        i.e. ties resolve to the lowest index.
        """
        if vectors.shape[-1] != self.dim:
            raise ConfigurationError(
                f"vector dim {vectors.shape[-1]} != codeword dim {self.dim}"
            )
        book = self.codewords.detach()
        if torch.isnan(book).any():
            raise ConfigurationError("memory bank contains NaN codewords")
        out = torch.empty(vectors.shape[0], dtype=torch.long, device=vectors.device)
        for start in range(0, vectors.shape[0], chunk):
            block = vectors[start : start + chunk]
            d2 = ((block[:, None, :] - book[None, :, :]) ** 2).sum(-1)
            out[start : start + chunk] = torch.argmin(d2, dim=1)
        return out

    def lookup(self, indices: torch.Tensor) -> torch.Tensor:
        return self.codewords[indices]


def quantize(features: torch.Tensor, bank: MemoryBank) -> tuple[torch.Tensor, torch.Tensor]:
    """Snap every spatial-location vector onto its nearest codeword.

    features: (..., dim, H, W). Returns (quantized, indices) with quantized
    the same shape as the input and indices shaped (..., H, W). The quantized
    values carry gradients to the codewords (not to the input); callers add a
    straight-through copy when training the encoder.
    """
    if features.shape[-3] != bank.dim:
        raise ConfigurationError(
            f"feature channels {features.shape[-3]} != codeword dim {bank.dim}"
        )
    lead = features.shape[:-3]
    d, h, w = features.shape[-3:]
    flat = features.reshape(-1, d, h, w).permute(0, 2, 3, 1).reshape(-1, d)
    idx = bank.assign(flat)
    quant = bank.lookup(idx)
    quant = quant.reshape(-1, h, w, d).permute(0, 3, 1, 2).reshape(*lead, d, h, w)
    return quant, idx.reshape(*lead, h, w)


def vq_loss(
    video: torch.Tensor,
    recon: torch.Tensor,
    pre_quant: torch.Tensor,
    quantized: torch.Tensor,
    beta: float,
) -> torch.Tensor:
    """Three-term quantization training loss (squared L2 throughout).

    reconstruction + ||sg[quantized] - pre_quant||^2 + beta * ||quantized - sg[pre_quant]||^2.
    The middle term reaches only the encoder, the last only the codewords; the
    reconstruction term reaches the encoder through the straight-through copy
    made by the caller.
    """
    if beta < 0:
        raise ConfigurationError(f"beta must be >= 0, got {beta}")
    if video.shape != recon.shape:
        raise ConfigurationError(f"video {tuple(video.shape)} vs recon {tuple(recon.shape)}")
    if pre_quant.shape != quantized.shape:
        raise ConfigurationError(
            f"pre_quant {tuple(pre_quant.shape)} vs quantized {tuple(quantized.shape)}"
        )
    rec = ((video - recon) ** 2).sum()
    encoder_term = ((quantized.detach() - pre_quant) ** 2).sum()
    codebook_term = ((quantized - pre_quant.detach()) ** 2).sum()
    return rec + encoder_term + beta * codebook_term


class Propagator(nn.Module):
    """Temporal evolution with time folded into channels.

    Each block is a 1x1 bottleneck conv followed by a grouped 3x3 conv and a
    LeakyReLU; a final 1x1 expansion emits out_frames*dim channels. The group
    count is clamped to gcd(groups, hidden) so it always divides the width.
    """

    def __init__(
        self,
        in_frames: int,
        out_frames: int,
        dim: int,
        blocks: int = 4,
        hidden_mult: int = 4,
        groups: int = 8,
    ):
        super().__init__()
        self.in_frames = in_frames
        self.out_frames = out_frames
        self.dim = dim
        hidden = hidden_mult * dim
        self.hidden = hidden
        self.groups = math.gcd(groups, hidden)
        layers = []
        ch = in_frames * dim
        for _ in range(blocks):
            layers.append(nn.Conv2d(ch, hidden, 1))
            layers.append(nn.Conv2d(hidden, hidden, 3, padding=1, groups=self.groups))
            layers.append(nn.LeakyReLU(0.2))
            ch = hidden
        self.blocks = nn.Sequential(*layers)
        self.expand = nn.Conv2d(hidden, out_frames * dim, 1)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        lead = features.shape[:-4]
        t, d, h, w = features.shape[-4:]
        if t != self.in_frames or d != self.dim:
            raise ConfigurationError(
                f"expected ({self.in_frames}, {self.dim}, H, W) features, got {tuple(features.shape[-4:])}"
            )
        x = features.reshape(-1, t * d, h, w)
        x = self.expand(self.blocks(x))
        return x.reshape(*lead, self.out_frames, d, h, w)


class Decoder(nn.Module):
    """One conv block, four residual blocks, two stride-2 deconv stages.

    The final transposed conv is bare (no norm/activation) so outputs are
    unbounded; together the two stride-2 stages undo the encoder's 4x
    downsampling.
    """

    def __init__(self, in_channels: int, out_channels: int, width: int = 64):
        super().__init__()
        self.stem = ConvBlock(in_channels, width, stride=1)
        self.res_blocks = nn.ModuleList([ResidualBlock(width) for _ in range(4)])
        self.up1 = nn.ConvTranspose2d(width, width // 2, 4, stride=2, padding=1)
        self.up1_norm = ChannelLayerNorm(width // 2)
        self.up2 = nn.ConvTranspose2d(width // 2, out_channels, 4, stride=2, padding=1)

    def forward(self, x):
        x = self.stem(x)
        for block in self.res_blocks:
            x = block(x)
        x = F.relu(self.up1_norm(self.up1(x)))
        return self.up2(x)


class DiscreteBranch(nn.Module):
    """Encoder -> memory bank -> propagation -> decoder, end to end.

    In training mode the quantized features are replaced by a straight-through
    copy so reconstruction gradients reach the encoder unchanged; in eval mode
    the hard codeword values are used directly.
    """

    def __init__(
        self,
        in_frames: int,
        out_frames: int,
        channels: int,
        latent_dim: int,
        enc_width: int = 64,
        dec_width: int = 64,
        prop_blocks: int = 4,
        prop_hidden_mult: int = 4,
        prop_groups: int = 8,
    ):
        super().__init__()
        self.in_frames = in_frames
        self.out_frames = out_frames
        self.channels = channels
        self.latent_dim = latent_dim
        self.encoder = Encoder(channels, enc_width, latent_dim)
        self.bank = MemoryBank(latent_dim)
        self.propagator = Propagator(
            in_frames, out_frames, latent_dim, prop_blocks, prop_hidden_mult, prop_groups
        )
        self.decoder = Decoder(latent_dim, channels, dec_width)

    def encode(self, video: torch.Tensor) -> torch.Tensor:
        """Per-frame encoding; accepts (T, C, H, W) or (B, T, C, H, W)."""
        lead = video.shape[:-3]
        c, h, w = video.shape[-3:]
        z = self.encoder(video.reshape(-1, c, h, w))
        return z.reshape(*lead, *z.shape[-3:])

    def decode(self, features: torch.Tensor) -> torch.Tensor:
        lead = features.shape[:-3]
        d, h, w = features.shape[-3:]
        y = self.decoder(features.reshape(-1, d, h, w))
        return y.reshape(*lead, *y.shape[-3:])

    def forward(self, video: torch.Tensor) -> torch.Tensor:
        z = self.encode(video)
        quant, _ = quantize(z, self.bank)
        if self.training:
            # straight-through: exact codeword values, gradients pass to z
            quant = quant.detach() + (z - z.detach())
        evolved = self.propagator(quant)
        return self.decode(evolved)
