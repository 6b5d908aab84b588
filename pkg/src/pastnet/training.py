"""Three-stage training: frame autoencoding, quantized pretraining, full model.

Stage 0 trains a wide frame autoencoder and estimates the latent width from
its features. Stage 1 rebuilds the encoder head at that width and trains the
quantization loss end to end with a straight-through copy. Stage 2 freezes
the codebook and jointly trains both branches under the prediction MSE.

Determinism contract: parameter init is seeded per stage, batch order is
drawn from a generator seeded by (seed, stage, epoch), and no other
randomness enters the loop, so fixed seed + fixed data order reproduces
losses bit-for-bit on one platform and resuming from a checkpoint matches an
uninterrupted run step for step.
"""

import logging
import math

import numpy as np
import torch
import torch.nn.functional as F

from .checkpoint import Checkpoint, checkpoint_from_model, restore_model, restore_optimizer, save_checkpoint
from .config import ModelConfig
from .dst import Decoder, Encoder, MemoryBank, quantize, vq_loss
from .errors import ConfigurationError, TrainingDivergedError
from .intrinsic import DimEstimate, intrinsic_dim
from .model import PastNet, build_model

logger = logging.getLogger(__name__)

COLLAPSE_FRACTION = 0.99
COLLAPSE_PATIENCE = 100


class CollapseMonitor:
    """Flags codebook collapse: one codeword taking >= `fraction` of the
    assignments for `patience` consecutive steps. A warning event, not a
    failure; fires at most once per run."""

    def __init__(self, num_codewords: int, fraction: float = COLLAPSE_FRACTION,
                 patience: int = COLLAPSE_PATIENCE):
        self.num_codewords = num_codewords
        self.fraction = fraction
        self.patience = patience
        self.run_length = 0
        self.fired = False

    def update(self, indices: torch.Tensor, step: int) -> dict | None:
        counts = torch.bincount(indices.reshape(-1), minlength=self.num_codewords)
        top_fraction = float(counts.max()) / float(indices.numel())
        self.run_length = self.run_length + 1 if top_fraction >= self.fraction else 0
        if self.run_length >= self.patience and not self.fired:
            self.fired = True
            return {"step": step, "type": "codebook_collapse", "top_fraction": top_fraction}
        return None

__all__ = [
    "normalization_stats",
    "copy_last_baseline_mse",
    "train_phase0_autoencoder",
    "train_phase1_vqvae",
    "train_phase2_full",
    "run_pipeline",
]


def normalization_stats(data: np.ndarray) -> tuple[float, float]:
    """(offset, scale) mapping data into [0, 1]; degenerate data maps to 0."""
    lo = float(data.min())
    hi = float(data.max())
    scale = hi - lo
    return lo, scale if scale > 0 else 1.0


def _check_finite(loss: float, stage: str, step: int) -> None:
    if not math.isfinite(loss):
        raise TrainingDivergedError(
            f"{stage} loss became {loss} at step {step}; "
            "the learning rate is likely too high for this configuration"
        )


def _epoch_order(seed: int, stage: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, stage, epoch]).permutation(n)


def _batches(order: np.ndarray, batch_size: int):
    return [order[i : i + batch_size] for i in range(0, len(order), batch_size)]


def _input_window(data: np.ndarray, cfg: ModelConfig, idx: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(data[idx, : cfg.input_frames])


def _target_window(data: np.ndarray, cfg: ModelConfig, idx: np.ndarray) -> torch.Tensor:
    t0 = cfg.input_frames
    return torch.from_numpy(data[idx, t0 : t0 + cfg.output_frames])


def _require_window(data: np.ndarray, cfg: ModelConfig, need_future: bool) -> None:
    needed = cfg.input_frames + (cfg.output_frames if need_future else 0)
    if data.shape[0] < 1:
        raise ConfigurationError("dataset is empty")
    if data.shape[1] < needed:
        raise ConfigurationError(
            f"trajectories provide {data.shape[1]} frames but the config needs {needed}"
        )


def copy_last_baseline_mse(data: np.ndarray, cfg: ModelConfig) -> float:
    """Mean squared error of repeating the last observed frame, in data units."""
    _require_window(data, cfg, need_future=True)
    last = data[:, cfg.input_frames - 1 : cfg.input_frames]
    target = data[:, cfg.input_frames : cfg.input_frames + cfg.output_frames]
    return float(((target - last) ** 2).mean())


def _encode_frames(encoder: Encoder, frames: torch.Tensor) -> torch.Tensor:
    lead = frames.shape[:-3]
    c, h, w = frames.shape[-3:]
    z = encoder(frames.reshape(-1, c, h, w))
    return z.reshape(*lead, *z.shape[-3:])


def _decode_frames(decoder: Decoder, feats: torch.Tensor) -> torch.Tensor:
    lead = feats.shape[:-3]
    d, h, w = feats.shape[-3:]
    y = decoder(feats.reshape(-1, d, h, w))
    return y.reshape(*lead, *y.shape[-3:])


def train_phase0_autoencoder(
    data: np.ndarray, cfg: ModelConfig, max_steps: int | None = None
):
    """Stage 0: wide autoencoder plus intrinsic-dimension estimate.

    data: normalized trajectories (N, T_total, C, H, W). Returns
    (encoder, recon_decoder, DimEstimate, history).
    """
    cfg.check()
    _require_window(data, cfg, need_future=False)
    torch.manual_seed(cfg.seed)
    encoder = Encoder(cfg.channels, cfg.enc_width, cfg.enc_width)
    decoder = Decoder(cfg.enc_width, cfg.channels, cfg.dec_width)
    opt = torch.optim.Adam(list(encoder.parameters()) + list(decoder.parameters()), lr=cfg.lr)

    n = data.shape[0]
    n_held = min(cfg.batch_size, n)
    train_idx_max = n - n_held if n > n_held else n

    history = {"losses": [], "events": []}
    step = 0
    done = False
    for epoch in range(cfg.phase0_epochs):
        if done:
            break
        for batch in _batches(_epoch_order(cfg.seed, 0, epoch, train_idx_max), cfg.batch_size):
            frames = _input_window(data, cfg, batch)
            z = _encode_frames(encoder, frames)
            recon = _decode_frames(decoder, z)
            loss = ((frames - recon) ** 2).sum()
            opt.zero_grad()
            loss.backward()
            opt.step()
            step += 1
            value = float(loss.detach())
            _check_finite(value, "autoencoder", step)
            history["losses"].append(value)
            if max_steps is not None and step >= max_steps:
                done = True
                break

    held = data[n - n_held :]
    with torch.no_grad():
        feats = _encode_frames(encoder, torch.from_numpy(held[:, : cfg.input_frames]))
    flat_feats = feats.reshape(-1, *feats.shape[2:])
    estimate = intrinsic_dim(
        flat_feats.numpy(),
        neighbors=cfg.neighbors,
        sample=cfg.dim_sample,
        seed=cfg.seed,
    )
    return encoder, decoder, estimate, history


def train_phase1_vqvae(
    data: np.ndarray,
    cfg: ModelConfig,
    latent_dim: int,
    encoder: Encoder | None = None,
    max_steps: int | None = None,
):
    """Stage 1: quantized autoencoder at the estimated latent width.

    Rebuilds the encoder head at `latent_dim` channels, trains encoder,
    codebook (latent_dim^2 rows) and a fresh reconstruction decoder under the
    three-term quantization loss. Returns (encoder, bank, recon_decoder,
    history); the reconstruction decoder is discarded downstream.
    """
    cfg.check()
    _require_window(data, cfg, need_future=False)
    torch.manual_seed(cfg.seed + 1)
    if encoder is None:
        encoder = Encoder(cfg.channels, cfg.enc_width, latent_dim)
    else:
        encoder.rebuild_head(latent_dim)
    bank = MemoryBank(latent_dim)
    decoder = Decoder(latent_dim, cfg.channels, cfg.dec_width)
    opt = torch.optim.Adam(
        list(encoder.parameters()) + list(bank.parameters()) + list(decoder.parameters()),
        lr=cfg.lr,
    )

    history = {"losses": [], "events": []}
    monitor = CollapseMonitor(bank.num_codewords)
    step = 0
    done = False
    n = data.shape[0]
    for epoch in range(cfg.phase1_epochs):
        if done:
            break
        for batch in _batches(_epoch_order(cfg.seed, 1, epoch, n), cfg.batch_size):
            frames = _input_window(data, cfg, batch)
            z = _encode_frames(encoder, frames)
            quant, idx = quantize(z, bank)
            z_st = quant.detach() + (z - z.detach())
            recon = _decode_frames(decoder, z_st)
            loss = vq_loss(frames, recon, z, quant, cfg.beta)
            opt.zero_grad()
            loss.backward()
            opt.step()
            step += 1
            value = float(loss.detach())
            _check_finite(value, "vqvae", step)
            history["losses"].append(value)

            event = monitor.update(idx, step)
            if event is not None:
                history["events"].append(event)
                logger.warning(
                    "codebook collapse: one codeword received >= %.0f%% of assignments "
                    "for %d consecutive steps (step %d)",
                    100 * monitor.fraction, monitor.patience, step,
                )
            if max_steps is not None and step >= max_steps:
                done = True
                break
    return encoder, bank, decoder, history


def _assemble_full_model(cfg: ModelConfig, latent_dim: int, encoder, bank) -> PastNet:
    model = build_model(cfg, latent_dim, seed_offset=2)
    if encoder is not None:
        model.discrete.encoder = encoder
    if bank is not None:
        model.discrete.bank = bank
    model.discrete.bank.freeze()
    return model


def train_phase2_full(
    data: np.ndarray,
    cfg: ModelConfig,
    latent_dim: int | None = None,
    encoder: Encoder | None = None,
    bank: MemoryBank | None = None,
    norm: tuple[float, float] = (0.0, 1.0),
    resume: Checkpoint | None = None,
    out_dir=None,
    max_steps: int | None = None,
):
    """Stage 2: joint prediction training with the codebook frozen.

    data must be normalized already; `norm` records the mapping back to data
    units inside the emitted checkpoints. Returns (checkpoint, history).
    """
    cfg.check()
    _require_window(data, cfg, need_future=True)
    if resume is not None:
        model = restore_model(resume)
        opt = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=cfg.lr)
        restore_optimizer(resume, model, opt)
        start_epoch = int(resume.rng_state.get("epoch", 0))
        start_batch = int(resume.rng_state.get("batch_index", 0))
        step = resume.step
        norm = resume.norm
        latent_dim = resume.latent_dim
    else:
        if latent_dim is None:
            raise ConfigurationError("latent_dim is required when not resuming")
        model = _assemble_full_model(cfg, latent_dim, encoder, bank)
        opt = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=cfg.lr)
        start_epoch, start_batch, step = 0, 0, 0

    model.train()
    history = {"losses": [], "events": []}
    n = data.shape[0]
    done = False

    def snapshot(next_epoch: int, next_batch: int) -> Checkpoint:
        rng_state = {"epoch": next_epoch, "batch_index": next_batch}
        return checkpoint_from_model(
            model, "full", step=step, rng_state=rng_state, norm=norm, optimizer=opt
        )

    for epoch in range(start_epoch, cfg.phase2_epochs):
        if done:
            break
        batches = _batches(_epoch_order(cfg.seed, 2, epoch, n), cfg.batch_size)
        for bi, batch in enumerate(batches):
            if epoch == start_epoch and bi < start_batch:
                continue
            if max_steps is not None and step >= max_steps:
                done = True
                final_pos = (epoch, bi)
                break
            past = _input_window(data, cfg, batch)
            future = _target_window(data, cfg, batch)
            pred = model(past)
            loss = F.mse_loss(pred, future)
            opt.zero_grad()
            loss.backward()
            opt.step()
            step += 1
            value = float(loss.detach())
            _check_finite(value, "full", step)
            history["losses"].append(value)

            at_end = bi + 1 == len(batches)
            next_pos = (epoch + 1, 0) if at_end else (epoch, bi + 1)
            if out_dir is not None and step % cfg.checkpoint_every == 0:
                save_checkpoint(snapshot(*next_pos), f"{out_dir}/ckpt_step{step:06d}.pstc")
            if max_steps is not None and step >= max_steps:
                done = True
                final_pos = next_pos
                break
        else:
            final_pos = (epoch + 1, 0)
    if start_epoch >= cfg.phase2_epochs:
        final_pos = (start_epoch, start_batch)

    ckpt = snapshot(*final_pos)
    return ckpt, history


def run_pipeline(raw_data: np.ndarray, cfg: ModelConfig, out_dir=None, stop_after: str = "full"):
    """Run stages 0 to 2 on raw (unnormalized) trajectories.

    Returns (checkpoint, logs) where logs maps stage names to histories and
    records the dimension estimate. `stop_after` in {"autoencoder", "vqvae",
    "full"} truncates the pipeline for staged CLI use.
    """
    cfg.check()
    offset, scale = normalization_stats(raw_data)
    data = ((raw_data - offset) / scale).astype(np.float32)
    logs: dict = {"norm": [offset, scale]}

    encoder = None
    estimate: DimEstimate | None = None
    if cfg.phase0_epochs > 0:
        encoder, _, estimate, history0 = train_phase0_autoencoder(data, cfg)
        logs["autoencoder"] = history0
        logs["dim_estimate"] = {
            "dim": estimate.dim,
            "neighbors": estimate.neighbors,
            "sample_size": estimate.sample_size,
            "excluded": estimate.excluded,
        }
    latent_dim = cfg.latent_dim if cfg.latent_dim is not None else (
        estimate.dim if estimate is not None else None
    )
    if latent_dim is None:
        raise ConfigurationError(
            "latent_dim is unset and phase0_epochs=0 left nothing to estimate it from"
        )
    if stop_after == "autoencoder":
        if encoder is None:
            raise ConfigurationError("phase0_epochs=0; nothing to run for stage 'autoencoder'")
        model = _assemble_full_model(cfg, latent_dim, encoder, None)
        ckpt = checkpoint_from_model(model, "autoencoder", norm=(offset, scale))
        return ckpt, logs

    encoder, bank, _, history1 = train_phase1_vqvae(data, cfg, latent_dim, encoder)
    logs["vqvae"] = history1
    if stop_after == "vqvae":
        model = _assemble_full_model(cfg, latent_dim, encoder, bank)
        ckpt = checkpoint_from_model(model, "vqvae", norm=(offset, scale))
        return ckpt, logs

    ckpt, history2 = train_phase2_full(
        data, cfg, latent_dim, encoder, bank, norm=(offset, scale), out_dir=out_dir
    )
    logs["full"] = history2
    return ckpt, logs
