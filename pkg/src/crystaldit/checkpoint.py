"""Versioned binary checkpoint container.

Layout::

    b"CDITCKPT"  u32 format version  u32 header length  JSON header
    tensor data, little-endian float32, in header order

The header records the configuration, epoch, seed, producing command and
the name and shape of every tensor.
"""

import json
import struct
from pathlib import Path

import numpy as np
import torch

from .artifacts import atomic_write
from .errors import ConfigMismatch, ParseError

MAGIC = b"CDITCKPT"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")


def save_checkpoint(path, model, config, epoch=0, seed=0, extra=None):
    """Write ``model``'s parameters with a JSON header.

    ``config`` is any JSON-serializable dict; ``extra`` is merged into the
    header.
    """
    state = model.state_dict()
    names = sorted(state)
    header = {"format_version": FORMAT_VERSION, "config": config, "epoch": int(epoch),
              "seed": int(seed), **(extra or {}),
              "tensors": [{"name": n, "shape": list(state[n].shape)} for n in names]}
    blob = json.dumps(header, sort_keys=True).encode()
    parts = [_PREFIX.pack(MAGIC, FORMAT_VERSION, len(blob)), blob]
    for n in names:
        parts.append(state[n].detach().cpu().numpy().astype("<f4").tobytes())
    atomic_write(path, b"".join(parts))


def read_checkpoint(path):
    """``(header, {name: float32 array})`` from a checkpoint file."""
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise ParseError(f"{path}: truncated checkpoint")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"{path}: not a checkpoint file")
    if version != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(data[start:start + hlen])
    except ValueError as err:
        raise ParseError(f"{path}: corrupt header") from err
    offset = start + hlen
    tensors = {}
    for spec in header["tensors"]:
        count = int(np.prod(spec["shape"], dtype=np.int64))
        end = offset + 4 * count
        if end > len(data):
            raise ParseError(f"{path}: truncated tensor {spec['name']}")
        tensors[spec["name"]] = np.frombuffer(data[offset:end], dtype="<f4").reshape(spec["shape"])
        offset = end
    if offset != len(data):
        raise ParseError(f"{path}: trailing bytes after tensors")
    return header, tensors


def check_config(header, expected, keys=None):
    """Raise ConfigMismatch when the stored config disagrees with ``expected``."""
    stored = header.get("config", {})
    keys = expected.keys() if keys is None else keys
    diff = {k: (stored.get(k), expected.get(k)) for k in keys if stored.get(k) != expected.get(k)}
    if diff:
        detail = ", ".join(f"{k}: stored {a!r} vs expected {b!r}" for k, (a, b) in diff.items())
        raise ConfigMismatch(f"checkpoint config differs ({detail})")


def load_into(model, tensors):
    state = model.state_dict()
    if set(state) != set(tensors):
        raise ConfigMismatch("checkpoint tensors do not match the model")
    for name, value in tensors.items():
        if tuple(state[name].shape) != value.shape:
            raise ConfigMismatch(f"shape of {name} differs")
    model.load_state_dict({n: torch.from_numpy(v.copy()).to(state[n].dtype) for n, v in tensors.items()})
    return model
