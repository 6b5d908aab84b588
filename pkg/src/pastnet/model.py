"""Two-branch predictor: element-wise fusion of the spectral and discrete paths."""

import numpy as np
import torch
import torch.nn as nn

from .config import ModelConfig
from .dst import DiscreteBranch
from .errors import CheckpointError, ConfigurationError, ShapeMismatchError
from .fpg import FourierBranch, PatchSpec

__all__ = ["fuse", "PastNet", "build_model", "predict"]


def fuse(fpg_out: torch.Tensor, dst_out: torch.Tensor) -> torch.Tensor:
    """Element-wise sum of the two branch predictions."""
    if fpg_out.shape != dst_out.shape:
        raise ShapeMismatchError(
            f"branch outputs disagree: {tuple(fpg_out.shape)} vs {tuple(dst_out.shape)}"
        )
    return fpg_out + dst_out


class PastNet(nn.Module):
    """Spectral branch plus discrete branch, fused by addition."""

    def __init__(self, config: ModelConfig, latent_dim: int):
        super().__init__()
        config.check()
        self.config = config
        self.latent_dim = latent_dim
        self.fourier = FourierBranch(
            in_frames=config.input_frames,
            out_frames=config.output_frames,
            channels=config.channels,
            height=config.height,
            width=config.width,
            patch=PatchSpec(config.patch_h, config.patch_w, config.embed_dim),
            depth=config.fpg_depth,
        )
        self.discrete = DiscreteBranch(
            in_frames=config.input_frames,
            out_frames=config.output_frames,
            channels=config.channels,
            latent_dim=latent_dim,
            enc_width=config.enc_width,
            dec_width=config.dec_width,
            prop_blocks=config.prop_blocks,
            prop_hidden_mult=config.prop_hidden_mult,
            prop_groups=config.prop_groups,
        )

    def forward(self, video: torch.Tensor) -> torch.Tensor:
        return fuse(self.fourier(video), self.discrete(video))


def build_model(config: ModelConfig, latent_dim: int, seed_offset: int = 0) -> PastNet:
    """Construct a model with deterministic parameter initialization."""
    torch.manual_seed(config.seed + seed_offset)
    return PastNet(config, latent_dim)


def predict(checkpoint, video) -> torch.Tensor:
    """Deterministic full-model prediction from a trained checkpoint.

    video: (input_frames, C, H, W) array or tensor in the original data units;
    the stored normalization is applied on the way in and inverted on the way
    out. Quantization runs in eval mode (hard assignment, no straight-through
    bookkeeping).
    """
    from .checkpoint import restore_model  # local import to avoid a cycle

    if checkpoint.phase != "full":
        raise CheckpointError(f"predict requires a phase 'full' checkpoint, got {checkpoint.phase!r}")
    cfg = checkpoint.config
    if isinstance(video, np.ndarray):
        video = torch.from_numpy(np.ascontiguousarray(video, dtype=np.float32))
    expected = (cfg.input_frames, cfg.channels, cfg.height, cfg.width)
    if tuple(video.shape) != expected:
        raise ConfigurationError(f"input shape {tuple(video.shape)} does not match config {expected}")

    model = restore_model(checkpoint)
    model.eval()
    offset, scale = checkpoint.norm
    with torch.no_grad():
        x = (video - offset) / scale
        out = model(x)
        return out * scale + offset
