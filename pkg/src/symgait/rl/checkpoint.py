"""Self-describing binary checkpoints.

Layout (all integers little-endian)::

    8 bytes   magic  b"SYMGAIT\\x00"
    u32       format version
    u32       header length H
    H bytes   UTF-8 JSON header: network topology, tensor names and shapes,
              free-form metadata
    ...       every tensor in header order as float64 little-endian
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from .networks import ActorCritic, NetworkConfig

MAGIC = b"SYMGAIT\x00"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model: ActorCritic, metadata: dict | None = None) -> Path:
    path = Path(path)
    state = model.state_dict()
    tensors = [{"name": k, "shape": list(v.shape)} for k, v in state.items()]
    header = {
        "topology": model.cfg.to_dict(),
        "tensors": tensors,
        "metadata": metadata or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    values = [v.detach().cpu().to(torch.float64).numpy().ravel() for v in state.values()]
    payload = np.concatenate(values).astype("<f8") if values else np.zeros(0, "<f8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(payload.tobytes())
    return path


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh)


def _read_header(fh) -> dict:
    if fh.read(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a gait checkpoint (bad magic)")
    raw = fh.read(8)
    if len(raw) != 8:
        raise CheckpointError("truncated checkpoint header")
    version, length = struct.unpack("<II", raw)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        return json.loads(fh.read(length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None


def load_checkpoint(path, expect: NetworkConfig | None = None) -> tuple[ActorCritic, dict]:
    """Rebuild the network; ``expect`` guards against a topology mismatch."""
    with open(path, "rb") as fh:
        header = _read_header(fh)
        payload = np.frombuffer(fh.read(), dtype="<f8")
    cfg = NetworkConfig.from_dict(header["topology"])
    if expect is not None and expect != cfg:
        raise CheckpointError(f"checkpoint topology {cfg} does not match expected {expect}")
    model = ActorCritic(cfg)
    state = model.state_dict()
    names = [t["name"] for t in header["tensors"]]
    if names != list(state.keys()):
        raise CheckpointError("checkpoint tensors do not match the network topology")
    offset = 0
    loaded = {}
    for spec in header["tensors"]:
        ref = state[spec["name"]]
        if list(ref.shape) != spec["shape"]:
            raise CheckpointError(f"shape mismatch for {spec['name']}")
        size = int(np.prod(spec["shape"], dtype=int))
        chunk = payload[offset:offset + size]
        if chunk.size != size:
            raise CheckpointError("truncated checkpoint payload")
        loaded[spec["name"]] = torch.as_tensor(chunk.reshape(spec["shape"]).copy(), dtype=ref.dtype)
        offset += size
    if offset != payload.size:
        raise CheckpointError("trailing data in checkpoint payload")
    model.load_state_dict(loaded)
    return model, header.get("metadata", {})
