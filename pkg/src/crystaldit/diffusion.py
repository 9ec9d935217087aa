"""Gaussian diffusion: noise schedule, forward noising, reverse step and loss.

Timesteps are 1-based throughout (t = 1..T).  The array helpers accept
numpy arrays or torch tensors; ``t`` may be a scalar or one step per batch
item along the leading axis.
"""

from dataclasses import dataclass

import numpy as np
import torch

from .errors import InvalidRange, ShapeMismatch

DEFAULT_CHANNEL_WEIGHTS_2D = (1.5, 2.0, 1.0, 1.0, 1.0)
DEFAULT_CHANNEL_WEIGHTS_1D = (2.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    betas: np.ndarray
    variance: str = "beta"

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if self.variance not in ("beta", "posterior"):
            raise InvalidRange(f"reverse variance must be 'beta' or 'posterior', got {self.variance!r}")
        alphas = 1.0 - betas
        alpha_bars = np.cumprod(alphas)
        prev = np.concatenate([[1.0], alpha_bars[:-1]])
        if self.variance == "beta":
            sigmas2 = betas.copy()
        else:
            sigmas2 = betas * (1.0 - prev) / (1.0 - alpha_bars)
        for name, value in (("betas", betas), ("alphas", alphas), ("alpha_bars", alpha_bars),
                            ("sigmas2", sigmas2)):
            value.flags.writeable = False
            object.__setattr__(self, name, value)

    @property
    def T(self):
        return len(self.betas)


def linear_schedule(T=1000, beta_start=1e-4, beta_end=0.02, variance="beta"):
    if int(T) != T or T < 1:
        raise InvalidRange(f"T must be a positive integer, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise InvalidRange(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    return NoiseSchedule(np.linspace(beta_start, beta_end, int(T)), variance)


def _coef(table, t, like):
    """Gather ``table[t-1]`` shaped to broadcast against ``like``."""
    if torch.is_tensor(like):
        idx = torch.as_tensor(t, dtype=torch.long) - 1
        out = torch.tensor(np.array(table), dtype=like.dtype, device=like.device)[idx]
        return out.reshape(out.shape + (1,) * (like.dim() - out.dim()))
    out = np.asarray(table)[np.asarray(t) - 1]
    return out.reshape(out.shape + (1,) * (np.ndim(like) - np.ndim(out)))


def _check_t(t, sched):
    tt = np.asarray(t.cpu() if torch.is_tensor(t) else t)
    if tt.size and (tt.min() < 1 or tt.max() > sched.T):
        raise InvalidRange(f"timestep outside 1..{sched.T}")


def _check_shapes(a, b, what):
    if tuple(a.shape) != tuple(b.shape):
        raise ShapeMismatch(f"{what}: {tuple(a.shape)} vs {tuple(b.shape)}")


def q_sample(x0, t, eps, sched):
    """Noised sample ``sqrt(abar_t) x0 + sqrt(1 - abar_t) eps``.

    ``x0`` and ``eps`` may be single arrays or matching tuples of arrays
    (lattice block, atom block), noised jointly at the same step.
    """
    if isinstance(x0, (tuple, list)):
        if len(x0) != len(eps):
            raise ShapeMismatch("x0 and eps have a different number of blocks")
        return type(x0)(q_sample(a, t, e, sched) for a, e in zip(x0, eps))
    _check_shapes(x0, eps, "q_sample")
    _check_t(t, sched)
    abar = _coef(sched.alpha_bars, t, x0)
    return abar ** 0.5 * x0 + (1 - abar) ** 0.5 * eps


def ddpm_step(x_t, eps_hat, t, sched, noise=None):
    """One reverse step from ``t`` to ``t - 1`` with a scalar timestep.

    ``noise`` is a standard-normal draw shaped like ``x_t``; it is required
    for t > 1 and ignored at t = 1, where the mean is returned.
    """
    _check_shapes(x_t, eps_hat, "ddpm_step")
    if not 1 <= t <= sched.T:
        raise InvalidRange(f"timestep {t} outside 1..{sched.T}")
    eps_coef = float(sched.betas[t - 1] / np.sqrt(1.0 - sched.alpha_bars[t - 1]))
    mean = (x_t - eps_coef * eps_hat) / float(np.sqrt(sched.alphas[t - 1]))
    if t == 1:
        return mean
    if noise is None:
        raise ValueError("noise is required for t > 1")
    _check_shapes(x_t, noise, "ddpm_step noise")
    return mean + float(np.sqrt(sched.sigmas2[t - 1])) * noise


@dataclass(frozen=True)
class LossWeights:
    lambda_atoms: float = 100.0
    channel_weights: tuple = DEFAULT_CHANNEL_WEIGHTS_2D

    def __post_init__(self):
        if self.lambda_atoms <= 0 or any(w <= 0 for w in self.channel_weights):
            raise InvalidRange("loss weights must be positive")

    @classmethod
    def for_mode(cls, mode, lambda_atoms=100.0):
        w = DEFAULT_CHANNEL_WEIGHTS_2D if mode == "2d" else DEFAULT_CHANNEL_WEIGHTS_1D
        return cls(lambda_atoms, w)


def weighted_loss(eps_true, eps_pred, weights=LossWeights()):
    """Weighted noise-prediction loss.

    ``eps_true`` and ``eps_pred`` are ``(lattice, atoms)`` pairs with shapes
    (..., 3, 3) and (..., 20, F).  Each part is a mean of squared errors
    over its entries, per item, then averaged over any leading batch axes.
    Returns ``(total, {"lattice": ..., "atoms": ...})``.
    """
    (lat_true, atom_true), (lat_pred, atom_pred) = eps_true, eps_pred
    _check_shapes(lat_true, lat_pred, "lattice noise")
    _check_shapes(atom_true, atom_pred, "atom noise")
    if tuple(lat_true.shape[-2:]) != (3, 3):
        raise ShapeMismatch(f"lattice block must be 3x3, got {tuple(lat_true.shape[-2:])}")
    if atom_true.shape[-1] != len(weights.channel_weights):
        raise ShapeMismatch(
            f"{atom_true.shape[-1]} atom channels but {len(weights.channel_weights)} weights")
    if torch.is_tensor(atom_true):
        w = torch.as_tensor(weights.channel_weights, dtype=atom_true.dtype)
    else:
        w = np.asarray(weights.channel_weights, dtype=np.float64)
    lat_err = (lat_true - lat_pred) ** 2
    atom_err = w * (atom_true - atom_pred) ** 2
    l_lat = lat_err.reshape(*lat_err.shape[:-2], -1).mean(-1).mean()
    l_atoms = atom_err.reshape(*atom_err.shape[:-2], -1).mean(-1).mean()
    total = l_lat + weights.lambda_atoms * l_atoms
    return total, {"lattice": l_lat, "atoms": l_atoms}
