"""Noise-prediction loss, gradients, Adam updates and the training loop."""

import math
from dataclasses import dataclass

import numpy as np
import torch

from .diffusion import LossWeights, q_sample, weighted_loss
from .errors import NonFinite


def as_batch(lattice, atoms, dtype=torch.float32):
    return (torch.as_tensor(np.asarray(lattice), dtype=dtype),
            torch.as_tensor(np.asarray(atoms), dtype=dtype))


def draw_noise(batch, sched, generator):
    """Uniform steps in 1..T and standard-normal noise for every batch item."""
    lattice, atoms = batch
    t = torch.randint(1, sched.T + 1, (lattice.shape[0],), generator=generator)
    eps_lat = torch.randn(lattice.shape, generator=generator, dtype=lattice.dtype)
    eps_atoms = torch.randn(atoms.shape, generator=generator, dtype=atoms.dtype)
    return t, (eps_lat, eps_atoms)


def diffusion_loss(model, batch, t, eps, sched, weights=LossWeights()):
    """Batch-averaged weighted loss for fixed steps and noise."""
    x_lat, x_atoms = q_sample(tuple(batch), t, tuple(eps), sched)
    pred = model(x_lat, x_atoms, t)
    return weighted_loss(tuple(eps), (pred.lattice, pred.atoms), weights)


def loss_and_gradients(model, batch, sched, weights, generator):
    """Draw (t, eps), evaluate the loss and backpropagate.

    Returns ``(loss, grads)`` with ``grads`` mapping parameter names to
    copies of their gradients.  Gradients are also left in ``.grad``.
    """
    t, eps = draw_noise(batch, sched, generator)
    loss, _ = diffusion_loss(model, batch, t, eps, sched, weights)
    model.zero_grad(set_to_none=False)
    loss.backward()
    value = loss.item()
    if not math.isfinite(value):
        raise NonFinite(f"loss is {value}")
    grads = {}
    for name, p in model.named_parameters():
        if not torch.isfinite(p.grad).all():
            raise NonFinite(f"gradient of {name} is not finite")
        grads[name] = p.grad.detach().clone()
    return value, grads


def make_optimizer(model, lr=1e-4):
    return torch.optim.Adam(model.parameters(), lr=lr, betas=(0.9, 0.999), eps=1e-8)


def optimizer_step(model, optimizer):
    """Apply one Adam update from the gradients stored on ``model``."""
    optimizer.step()
    for name, p in model.named_parameters():
        if not torch.isfinite(p).all():
            raise NonFinite(f"parameter {name} became non-finite")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 64
    seed: int = 0


class Trainer:
    """Mini-batch training over a fixed in-memory dataset.

    One epoch visits every structure once in a seeded random order.
    """

    def __init__(self, model, lattice, atoms, sched, weights, config=TrainConfig()):
        self.model = model
        dtype = next(model.parameters()).dtype
        self.lattice, self.atoms = as_batch(lattice, atoms, dtype)
        self.sched = sched
        self.weights = weights
        self.config = config
        self.optimizer = make_optimizer(model, config.lr)
        self.generator = torch.Generator().manual_seed(config.seed)
        self.epoch = 0
        self.step = 0

    def train_step(self, idx):
        batch = (self.lattice[idx], self.atoms[idx])
        loss, _ = loss_and_gradients(self.model, batch, self.sched, self.weights, self.generator)
        optimizer_step(self.model, self.optimizer)
        self.step += 1
        return loss

    def run_epoch(self):
        n = len(self.lattice)
        order = torch.randperm(n, generator=self.generator)
        losses = [self.train_step(order[k:k + self.config.batch_size])
                  for k in range(0, n, self.config.batch_size)]
        self.epoch += 1
        return losses

    def run_steps(self, steps, batch_indices=None):
        """Run ``steps`` updates; on the full dataset unless indices are given."""
        idx = torch.arange(len(self.lattice)) if batch_indices is None else torch.as_tensor(batch_indices)
        return [self.train_step(idx) for _ in range(steps)]


@torch.no_grad()
def evaluation_loss(model, lattice, atoms, sched, weights, seed=0, repeats=8):
    """Loss on fixed (t, eps) draws; comparable across training steps."""
    dtype = next(model.parameters()).dtype
    batch = as_batch(lattice, atoms, dtype)
    batch = (batch[0].repeat(repeats, 1, 1), batch[1].repeat(repeats, 1, 1))
    t, eps = draw_noise(batch, sched, torch.Generator().manual_seed(seed))
    return diffusion_loss(model, batch, t, eps, sched, weights)[0].item()
