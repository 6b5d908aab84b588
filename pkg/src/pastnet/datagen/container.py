"""Trajectory container format.

Layout: magic b"PSTJ1\\n", one UTF-8 JSON metadata line terminated by "\\n"
(fields: generator, params, seed, dtype="f32", shape=[N, T, C, H, W],
byte_order="LE", split), then the raw C-order little-endian float32 payload of
exactly 4*N*T*C*H*W bytes. Write-then-read is bit-identical.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import BadMagicError, MetadataError, TrailingBytesError, TruncatedPayloadError

MAGIC = b"PSTJ1\n"

__all__ = ["TrajectoryDataset", "write_dataset", "read_dataset", "MAGIC"]


@dataclass
class TrajectoryDataset:
    """A set of trajectories (N, T, C, H, W) plus generator provenance."""

    data: np.ndarray
    generator: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    split: str = "train"

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 5:
            raise MetadataError(f"trajectory data must be 5-dimensional, got {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise MetadataError("trajectory data contains non-finite entries")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def metadata(self) -> dict:
        return {
            "generator": self.generator,
            "params": self.params,
            "seed": self.seed,
            "dtype": "f32",
            "shape": list(self.data.shape),
            "byte_order": "LE",
            "split": self.split,
        }


def write_dataset(dataset: TrajectoryDataset, path) -> None:
    header = json.dumps(dataset.metadata(), sort_keys=True, separators=(",", ":"))
    payload = dataset.data.astype("<f4", copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def read_dataset(path) -> TrajectoryDataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
        line = fh.readline()
        if not line.endswith(b"\n"):
            raise MetadataError("metadata line is not newline-terminated")
        try:
            meta = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MetadataError(f"unparseable metadata line: {exc}") from exc
        for key in ("generator", "params", "seed", "dtype", "shape", "byte_order"):
            if key not in meta:
                raise MetadataError(f"metadata missing required field {key!r}")
        if meta["dtype"] != "f32" or meta["byte_order"] != "LE":
            raise MetadataError(
                f"unsupported dtype/byte_order {meta['dtype']!r}/{meta['byte_order']!r}"
            )
        shape = tuple(int(s) for s in meta["shape"])
        if len(shape) != 5 or any(s < 0 for s in shape):
            raise MetadataError(f"invalid shape {shape}")
        expected = 4 * int(np.prod(shape))
        payload = fh.read()
        if len(payload) < expected:
            raise TruncatedPayloadError(
                f"payload truncated: expected {expected} bytes, got {len(payload)}"
            )
        if len(payload) > expected:
            raise TrailingBytesError(
                f"payload has {len(payload) - expected} trailing bytes beyond the declared {expected}"
            )
        data = np.frombuffer(payload, dtype="<f4").reshape(shape)
        return TrajectoryDataset(
            data=data.copy(),
            generator=meta["generator"],
            params=meta["params"],
            seed=int(meta["seed"]),
            split=meta.get("split", "train"),
        )
