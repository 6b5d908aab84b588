"""Checkpoint persistence.

Binary layout: magic b"PSTCKPT1", a u32 little-endian length followed by a
UTF-8 JSON header (config, phase, step, RNG state, latent width,
normalization, optimizer step counts, blob shapes), then one record per named
float32 blob: u32 name length, the UTF-8 name, u64 byte length, and the raw
little-endian float32 data. Save -> load -> resume is bit-identical on one
platform because parameters and optimizer moments are float32 end to end.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np
import torch

from .config import ModelConfig
from .errors import CheckpointError

MAGIC = b"PSTCKPT1"
PHASES = ("autoencoder", "vqvae", "full")

__all__ = [
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "checkpoint_from_model",
    "restore_model",
    "restore_optimizer",
    "MAGIC",
]


@dataclass
class Checkpoint:
    config: ModelConfig
    phase: str
    step: int
    rng_state: dict
    latent_dim: int
    norm: tuple[float, float] = (0.0, 1.0)  # (offset, scale)
    params: dict = field(default_factory=dict)  # name -> float32 ndarray
    opt_state: dict = field(default_factory=dict)  # name -> float32 ndarray
    opt_steps: dict = field(default_factory=dict)  # param name -> int
    bank_frozen: bool = False

    def __post_init__(self):
        if self.phase not in PHASES:
            raise CheckpointError(f"unknown phase {self.phase!r}, expected one of {PHASES}")


def checkpoint_from_model(
    model,
    phase: str,
    step: int = 0,
    rng_state: dict | None = None,
    norm: tuple[float, float] = (0.0, 1.0),
    optimizer=None,
) -> Checkpoint:
    """Snapshot model parameters (and Adam moments, if given) as float32 arrays."""
    params = {
        name: tensor.detach().cpu().to(torch.float32).numpy().copy()
        for name, tensor in model.state_dict().items()
    }
    opt_state: dict = {}
    opt_steps: dict = {}
    if optimizer is not None:
        name_of = {id(p): n for n, p in model.named_parameters()}
        for group in optimizer.param_groups:
            for p in group["params"]:
                state = optimizer.state.get(p)
                if not state:
                    continue
                pname = name_of[id(p)]
                opt_state[f"{pname}.exp_avg"] = (
                    state["exp_avg"].detach().cpu().to(torch.float32).numpy().copy()
                )
                opt_state[f"{pname}.exp_avg_sq"] = (
                    state["exp_avg_sq"].detach().cpu().to(torch.float32).numpy().copy()
                )
                opt_steps[pname] = int(state["step"])
    return Checkpoint(
        config=model.config,
        phase=phase,
        step=step,
        rng_state=rng_state or {},
        latent_dim=model.latent_dim,
        norm=norm,
        params=params,
        opt_state=opt_state,
        opt_steps=opt_steps,
        bank_frozen=getattr(model.discrete.bank, "frozen", False),
    )


def restore_model(ckpt: Checkpoint):
    """Rebuild a model and load the stored parameters into it."""
    from .model import build_model

    model = build_model(ckpt.config, ckpt.latent_dim)
    state = {name: torch.from_numpy(arr.copy()) for name, arr in ckpt.params.items()}
    model.load_state_dict(state)
    if ckpt.bank_frozen:
        model.discrete.bank.freeze()
    return model


def restore_optimizer(ckpt: Checkpoint, model, optimizer) -> None:
    """Inject stored Adam moments into a freshly built optimizer."""
    params_by_name = dict(model.named_parameters())
    for pname, step in ckpt.opt_steps.items():
        p = params_by_name[pname]
        optimizer.state[p] = {
            "step": torch.tensor(float(step)),
            "exp_avg": torch.from_numpy(ckpt.opt_state[f"{pname}.exp_avg"].copy()),
            "exp_avg_sq": torch.from_numpy(ckpt.opt_state[f"{pname}.exp_avg_sq"].copy()),
        }


def _write_blob(fh, name: str, arr: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    data = np.ascontiguousarray(arr, dtype="<f4").tobytes(order="C")
    fh.write(struct.pack("<I", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<Q", len(data)))
    fh.write(data)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    blobs = {f"param.{k}": v for k, v in ckpt.params.items()}
    blobs.update({f"opt.{k}": v for k, v in ckpt.opt_state.items()})
    header = {
        "format_version": 1,
        "config": ckpt.config.to_dict(),
        "phase": ckpt.phase,
        "step": ckpt.step,
        "rng_state": ckpt.rng_state,
        "latent_dim": ckpt.latent_dim,
        "norm": [float(ckpt.norm[0]), float(ckpt.norm[1])],
        "opt_steps": ckpt.opt_steps,
        "bank_frozen": ckpt.bank_frozen,
        "blob_count": len(blobs),
        "shapes": {k: list(v.shape) for k, v in blobs.items()},
    }
    payload = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(payload)))
        fh.write(payload)
        for name in sorted(blobs):
            _write_blob(fh, name, blobs[name])


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint: wanted {n} bytes for {what}, got {len(data)}")
    return data


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        try:
            header = json.loads(_read_exact(fh, header_len, "header").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"unparseable checkpoint header: {exc}") from exc

        shapes = header["shapes"]
        blobs: dict[str, np.ndarray] = {}
        for _ in range(int(header["blob_count"])):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, "blob name length"))
            name = _read_exact(fh, name_len, "blob name").decode("utf-8")
            (nbytes,) = struct.unpack("<Q", _read_exact(fh, 8, "blob byte length"))
            if name not in shapes:
                raise CheckpointError(f"blob {name!r} missing from the header shape table")
            expected = 4 * int(np.prod(shapes[name])) if shapes[name] else 4
            if nbytes != expected:
                raise CheckpointError(
                    f"blob {name!r} declares {nbytes} bytes but the shape implies {expected}"
                )
            raw = _read_exact(fh, nbytes, f"blob {name!r}")
            blobs[name] = np.frombuffer(raw, dtype="<f4").reshape(shapes[name]).copy()

    params = {k[len("param.") :]: v for k, v in blobs.items() if k.startswith("param.")}
    opt_state = {k[len("opt.") :]: v for k, v in blobs.items() if k.startswith("opt.")}
    return Checkpoint(
        config=ModelConfig.from_dict(header["config"]),
        phase=header["phase"],
        step=int(header["step"]),
        rng_state=header.get("rng_state", {}),
        latent_dim=int(header["latent_dim"]),
        norm=(float(header["norm"][0]), float(header["norm"][1])),
        params=params,
        opt_state=opt_state,
        opt_steps={k: int(v) for k, v in header.get("opt_steps", {}).items()},
        bank_frozen=bool(header.get("bank_frozen", False)),
    )
