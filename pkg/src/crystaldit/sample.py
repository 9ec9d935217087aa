"""Reverse diffusion from pure noise followed by atomic decoding."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .artifacts import atomic_write, dumps
from .chem import DecoderConfig
from .cif import write_cif
from .diffusion import ddpm_step
from .errors import NonFinite
from .net import NUM_LATTICE_TOKENS
from .tensorize import MAX_ATOMS, from_arrays

DECODE_LOG = "decode_log.json"


@dataclass
class GenerationResult:
    structures: list
    sample_ids: list
    log: list = field(default_factory=list)
    n_attempted: int = 0
    steps_run: int = 0

    @property
    def n_dropped(self):
        return sum(entry["dropped"] for entry in self.log)


def item_seeds(seed, n):
    """Independent per-sample seeds derived from one master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _randn(generators, shape, dtype):
    return torch.stack([torch.randn(shape, generator=g, dtype=dtype) for g in generators])


@torch.no_grad()
def reverse_diffusion(model, sched, generators):
    """Run all T reverse steps for one chunk; returns final (lattice, atoms) arrays."""
    dtype = next(model.parameters()).dtype
    F_ = model.config.num_features
    x_lat = _randn(generators, (NUM_LATTICE_TOKENS, 3), dtype)
    x_atoms = _randn(generators, (MAX_ATOMS, F_), dtype)
    steps = 0
    for t in range(sched.T, 0, -1):
        eps = model(x_lat, x_atoms, t)
        if t > 1:
            noise_lat = _randn(generators, (NUM_LATTICE_TOKENS, 3), dtype)
            noise_atoms = _randn(generators, (MAX_ATOMS, F_), dtype)
        else:
            noise_lat = noise_atoms = None
        x_lat = ddpm_step(x_lat, eps.lattice, t, sched, noise_lat)
        x_atoms = ddpm_step(x_atoms, eps.atoms, t, sched, noise_atoms)
        steps += 1
    if not (torch.isfinite(x_lat).all() and torch.isfinite(x_atoms).all()):
        raise NonFinite("reverse trajectory diverged")
    return x_lat.double().numpy(), x_atoms.double().numpy(), steps


def generate(model, sched, n, seed=0, decoder=DecoderConfig(), chunk_size=256):
    """Sample ``n`` crystals.

    Samples whose rows all decode to the null atom are dropped from
    ``structures`` but kept in ``log`` with ``dropped = True``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    model.eval()
    mode = model.config.mode
    seeds = item_seeds(seed, n)
    result = GenerationResult([], [], n_attempted=n)
    for start in range(0, n, chunk_size):
        gens = [torch.Generator().manual_seed(s) for s in seeds[start:start + chunk_size]]
        lat, atoms, steps = reverse_diffusion(model, sched, gens)
        result.steps_run = steps
        for k in range(len(gens)):
            sid = start + k
            s, n_null = from_arrays(lat[k], atoms[k], mode, decoder)
            result.log.append({
                "sample_id": sid,
                "n_atoms": 0 if s is None else s.num_atoms,
                "n_null": n_null,
                "dropped": s is None,
            })
            if s is not None:
                result.structures.append(s)
                result.sample_ids.append(sid)
    return result


def sample_filename(sample_id, n_attempted):
    return f"sample_{sample_id:0{max(5, len(str(n_attempted)))}d}.cif"


def write_samples(result, out_dir, header):
    """One CIF per kept sample plus ``decode_log.json``.

    ``header`` is a dict echoed into the log and, as comments, into every CIF.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comments = [f"{k}: {v}" for k, v in header.items()]
    for sid, s in zip(result.sample_ids, result.structures):
        atomic_write(out / sample_filename(sid, result.n_attempted), write_cif(s, comments))
    log = {
        "header": header,
        "n_attempted": result.n_attempted,
        "n_dropped": result.n_dropped,
        "reverse_steps": result.steps_run,
        "samples": result.log,
    }
    atomic_write(out / DECODE_LOG, dumps(log))

