"""Model configuration shared by training, checkpointing, and the CLI."""

from dataclasses import asdict, dataclass, fields

from .errors import ConfigurationError

__all__ = ["ModelConfig"]


@dataclass
class ModelConfig:
    # sequence geometry
    input_frames: int = 10
    output_frames: int = 10
    channels: int = 1
    height: int = 64
    width: int = 64
    # spectral branch
    patch_h: int = 8
    patch_w: int = 8
    embed_dim: int = 128
    fpg_depth: int = 8
    # discrete branch
    enc_width: int = 64
    latent_dim: int | None = None  # None: estimated after the autoencoder stage
    neighbors: int = 20
    dim_sample: int = 10000
    beta: float = 0.25
    prop_blocks: int = 4
    prop_hidden_mult: int = 4
    prop_groups: int = 8
    dec_width: int = 64
    # optimization
    lr: float = 1e-3
    batch_size: int = 4
    phase0_epochs: int = 5
    phase1_epochs: int = 20
    phase2_epochs: int = 50
    checkpoint_every: int = 200
    seed: int = 0

    def validate(self) -> list[str]:
        """All constraint violations, not just the first."""
        problems = []
        for name in ("input_frames", "output_frames", "channels", "height", "width",
                     "patch_h", "patch_w", "embed_dim", "fpg_depth", "enc_width",
                     "prop_blocks", "prop_hidden_mult", "prop_groups", "dec_width",
                     "batch_size", "checkpoint_every"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                problems.append(f"{name} must be a positive integer, got {value!r}")
        for name in ("phase0_epochs", "phase1_epochs", "phase2_epochs"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                problems.append(f"{name} must be a non-negative integer, got {value!r}")
        if isinstance(self.height, int) and isinstance(self.patch_h, int) and self.patch_h >= 1:
            if self.height % self.patch_h != 0:
                problems.append(f"patch_h={self.patch_h} does not divide height {self.height}")
        if isinstance(self.width, int) and isinstance(self.patch_w, int) and self.patch_w >= 1:
            if self.width % self.patch_w != 0:
                problems.append(f"patch_w={self.patch_w} does not divide width {self.width}")
        if isinstance(self.height, int) and self.height % 4 != 0:
            problems.append(f"height {self.height} must be divisible by the encoder stride 4")
        if isinstance(self.width, int) and self.width % 4 != 0:
            problems.append(f"width {self.width} must be divisible by the encoder stride 4")
        if self.latent_dim is not None and (not isinstance(self.latent_dim, int) or self.latent_dim < 1):
            problems.append(f"latent_dim must be a positive integer or null, got {self.latent_dim!r}")
        if not isinstance(self.beta, (int, float)) or self.beta < 0:
            problems.append(f"beta must be >= 0, got {self.beta!r}")
        if not isinstance(self.lr, (int, float)) or self.lr <= 0:
            problems.append(f"lr must be > 0, got {self.lr!r}")
        if not isinstance(self.neighbors, int) or self.neighbors < 3:
            problems.append(f"neighbors must be an integer >= 3, got {self.neighbors!r}")
        if not isinstance(self.dim_sample, int) or (
            isinstance(self.neighbors, int) and self.dim_sample < self.neighbors + 1
        ):
            problems.append(
                f"dim_sample must be an integer >= neighbors+1, got {self.dim_sample!r}"
            )
        if not isinstance(self.seed, int):
            problems.append(f"seed must be an integer, got {self.seed!r}")
        return problems

    def check(self) -> "ModelConfig":
        problems = self.validate()
        if problems:
            raise ConfigurationError("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)
