"""Helpers for writing reproducible output files."""

import hashlib
import io
import json
import zipfile
from pathlib import Path

import numpy as np


def dumps(obj):
    """Canonical JSON: fixed key order as given, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def atomic_write(path, data):
    """Write text or bytes via a temporary sibling and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, bytes):
        tmp.write_bytes(data)
    else:
        tmp.write_text(data)
    tmp.replace(path)


def write_npz(path, arrays):
    """``np.savez`` equivalent with fixed zip timestamps, so reruns are byte-identical."""
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name, value in arrays.items():
            member = io.BytesIO()
            np.save(member, np.asarray(value), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)),
                        member.getvalue())
    atomic_write(path, buf.getvalue())


def provenance(command, config, seed):
    """Header fields every artifact carries."""
    return {"command": command, "config_hash": config_hash(config), "seed": int(seed)}
