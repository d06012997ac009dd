"""Checkpoint files: one JSON header line, then named float32 arrays.

Layout: a UTF-8 JSON header terminated by a newline, followed by one record
per array in the header's ``arrays`` order — u32 little-endian name length,
the name bytes, u64 little-endian payload length, then raw little-endian
float32 data.  Array order is sorted by name so save -> load -> save is
byte-identical.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor import Tensor

FORMAT_VERSION = 1
MODEL_KINDS = ("GEN", "RWD_A", "RWD_B", "RWD_C", "RWD_D")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    """Loaded model state: header metadata plus named float32 arrays."""

    kind: str
    scheme: str
    config: dict
    rng_seed: int
    arrays: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def tensors(self) -> dict[str, Tensor]:
        return {k: Tensor(v, requires_grad=True) for k, v in self.arrays.items()}


def save_checkpoint(path: str | Path, kind: str, scheme: str, config: dict,
                    params: dict[str, Tensor | np.ndarray], rng_seed: int,
                    metadata: dict | None = None) -> None:
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")
    names = sorted(params)
    arrays = {}
    for name in names:
        p = params[name]
        arrays[name] = (p.data if isinstance(p, Tensor) else np.asarray(p)).astype("<f4")
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "scheme": scheme,
        "config": config,
        "rng_seed": rng_seed,
        "metadata": metadata or {},
        "arrays": [{"name": n, "shape": list(arrays[n].shape)} for n in names],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for name in names:
            raw = arrays[name].tobytes()
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)) + nb)
            fh.write(struct.pack("<Q", len(raw)) + raw)


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: bad header: {e}") from e
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: format_version {header.get('format_version')} unsupported")
        arrays: dict[str, np.ndarray] = {}
        for spec in header["arrays"]:
            (nlen,) = struct.unpack("<I", fh.read(4))
            name = fh.read(nlen).decode("utf-8")
            if name != spec["name"]:
                raise CheckpointError(f"{path}: array order mismatch at {name!r}")
            (blen,) = struct.unpack("<Q", fh.read(8))
            raw = fh.read(blen)
            if len(raw) != blen:
                raise CheckpointError(f"{path}: truncated array {name!r}")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(spec["shape"]).copy()
    return Checkpoint(kind=header["kind"], scheme=header["scheme"], config=header["config"],
                      rng_seed=header["rng_seed"], arrays=arrays, metadata=header["metadata"])
