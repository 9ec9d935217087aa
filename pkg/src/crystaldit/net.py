"""Diffusion transformers over the 23-token crystal sequence.

Two variants share the same input/output contract:

* :class:`CrystalDiT` runs every DiT block over all 23 tokens (3 lattice
  rows followed by 20 atom rows).
* :class:`DualStreamDiT` processes atoms and lattice in separate stacks and
  fuses them with joint blocks that use bidirectional cross-attention.

All AdaLN modulation layers and both output heads start at zero, so a
freshly built model predicts exactly zero noise.
"""

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeMismatch
from .tensorize import MAX_ATOMS, NUM_FEATURES

NUM_LATTICE_TOKENS = 3
NUM_TOKENS = NUM_LATTICE_TOKENS + MAX_ATOMS


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 64
    num_layers: int = 4
    num_heads: int = 4
    mlp_ratio: float = 4.0
    variant: str = "unified"
    mode: str = "2d"
    dual_split: tuple | None = None

    def __post_init__(self):
        if self.hidden_dim % self.num_heads:
            raise ValueError(f"hidden_dim {self.hidden_dim} not divisible by {self.num_heads} heads")
        if self.variant not in ("unified", "dual"):
            raise ValueError(f"variant must be 'unified' or 'dual', got {self.variant!r}")
        if self.mode not in NUM_FEATURES:
            raise ValueError(f"mode must be '2d' or '1d', got {self.mode!r}")
        if self.dual_split is not None:
            object.__setattr__(self, "dual_split", tuple(int(n) for n in self.dual_split))

    @classmethod
    def full(cls, **overrides):
        return cls(**{"hidden_dim": 512, "num_layers": 18, "num_heads": 8, **overrides})

    @classmethod
    def desk(cls, **overrides):
        return cls(**overrides)

    @property
    def num_features(self):
        return NUM_FEATURES[self.mode]

    @property
    def split(self):
        """(atom-only, lattice-only, joint) block counts for the dual-stream variant."""
        if self.dual_split is not None:
            return self.dual_split
        if self.num_layers == 18:
            return (12, 2, 2)
        n = self.num_layers
        return (max(1, n // 2), max(1, n // 4), max(1, n // 4))

    def as_dict(self):
        d = asdict(self)
        d["dual_split"] = list(self.split)
        return d


class NoisePrediction(NamedTuple):
    atoms: torch.Tensor
    lattice: torch.Tensor


def modulate(x, shift, scale):
    return x * (1 + scale.unsqueeze(1)) + shift.unsqueeze(1)


class TimestepEmbedder(nn.Module):
    """Sinusoidal features of the step index followed by a two-layer MLP."""

    def __init__(self, hidden_dim, max_period=10000):
        super().__init__()
        self.freq_dim = hidden_dim
        self.max_period = max_period
        self.mlp = nn.Sequential(
            nn.Linear(hidden_dim, hidden_dim),
            nn.SiLU(),
            nn.Linear(hidden_dim, hidden_dim),
        )

    def sinusoidal(self, t, dtype):
        half = self.freq_dim // 2
        freqs = torch.exp(-math.log(self.max_period) * torch.arange(half, dtype=dtype) / half)
        args = t.to(dtype)[:, None] * freqs[None]
        emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
        if self.freq_dim % 2:
            emb = torch.cat([emb, torch.zeros_like(emb[:, :1])], dim=-1)
        return emb

    def forward(self, t):
        return self.mlp(self.sinusoidal(t, self.mlp[0].weight.dtype))


class Attention(nn.Module):
    """Multi-head attention; self-attention when no context is given."""

    def __init__(self, dim, num_heads):
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.q = nn.Linear(dim, dim)
        self.kv = nn.Linear(dim, 2 * dim)
        self.proj = nn.Linear(dim, dim)

    def _heads(self, x):
        B, N, _ = x.shape
        return x.reshape(B, N, self.num_heads, self.head_dim).transpose(1, 2)

    def _attend(self, x, context):
        context = x if context is None else context
        B, N, D = x.shape
        q = self._heads(self.q(x))
        k, v = self.kv(context).chunk(2, dim=-1)
        k, v = self._heads(k), self._heads(v)
        attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(self.head_dim), dim=-1)
        return self.proj((attn @ v).transpose(1, 2).reshape(B, N, D)), attn

    def weights(self, x, context=None):
        """Attention probabilities, shape (B, heads, len(x), len(context))."""
        return self._attend(x, context)[1]

    def forward(self, x, context=None):
        return self._attend(x, context)[0]


class Mlp(nn.Module):
    def __init__(self, dim, hidden):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(F.gelu(self.fc1(x)))


def _layer_norm(x):
    return F.layer_norm(x, x.shape[-1:], eps=1e-6)


class DiTBlock(nn.Module):
    """Pre-norm transformer block with AdaLN-Zero conditioning."""

    def __init__(self, dim, num_heads, mlp_ratio=4.0):
        super().__init__()
        self.attn = Attention(dim, num_heads)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))
        self.adaLN_modulation = nn.Sequential(nn.SiLU(), nn.Linear(dim, 6 * dim))

    def forward(self, x, c):
        shift_a, scale_a, gate_a, shift_m, scale_m, gate_m = self.adaLN_modulation(c).chunk(6, dim=1)
        x = x + gate_a.unsqueeze(1) * self.attn(modulate(_layer_norm(x), shift_a, scale_a))
        x = x + gate_m.unsqueeze(1) * self.mlp(modulate(_layer_norm(x), shift_m, scale_m))
        return x


class StreamSublayers(nn.Module):
    """One stream's half of a joint block."""

    def __init__(self, dim, num_heads, mlp_ratio):
        super().__init__()
        self.self_attn = Attention(dim, num_heads)
        self.cross_attn = Attention(dim, num_heads)
        self.post_attn = Attention(dim, num_heads)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))
        self.adaLN_modulation = nn.Sequential(nn.SiLU(), nn.Linear(dim, 9 * dim))


class JointBlock(nn.Module):
    """Self-attention per stream, bidirectional cross-attention, then a
    post-cross self-attention and MLP applied in parallel per stream."""

    def __init__(self, dim, num_heads, mlp_ratio=4.0):
        super().__init__()
        self.atom = StreamSublayers(dim, num_heads, mlp_ratio)
        self.lattice = StreamSublayers(dim, num_heads, mlp_ratio)

    def forward(self, a, l, c):
        ma = self.atom.adaLN_modulation(c).chunk(9, dim=1)
        ml = self.lattice.adaLN_modulation(c).chunk(9, dim=1)

        a1 = a + ma[2].unsqueeze(1) * self.atom.self_attn(modulate(_layer_norm(a), ma[0], ma[1]))
        l1 = l + ml[2].unsqueeze(1) * self.lattice.self_attn(modulate(_layer_norm(l), ml[0], ml[1]))

        a2 = a1 + ma[5].unsqueeze(1) * self.atom.cross_attn(
            modulate(_layer_norm(a1), ma[3], ma[4]), _layer_norm(l1))
        l2 = l1 + ml[5].unsqueeze(1) * self.lattice.cross_attn(
            modulate(_layer_norm(l1), ml[3], ml[4]), _layer_norm(a1))

        ha = modulate(_layer_norm(a2), ma[6], ma[7])
        hl = modulate(_layer_norm(l2), ml[6], ml[7])
        a_out = a2 + ma[8].unsqueeze(1) * (self.atom.post_attn(ha) + self.atom.mlp(ha))
        l_out = l2 + ml[8].unsqueeze(1) * (self.lattice.post_attn(hl) + self.lattice.mlp(hl))
        return a_out, l_out


class FinalLayer(nn.Module):
    def __init__(self, dim, num_features):
        super().__init__()
        self.adaLN_modulation = nn.Sequential(nn.SiLU(), nn.Linear(dim, 2 * dim))
        self.atom_head = nn.Linear(dim, num_features)
        self.lattice_head = nn.Linear(dim, 3)

    def forward(self, h_atoms, h_lattice, c):
        shift, scale = self.adaLN_modulation(c).chunk(2, dim=1)
        return NoisePrediction(
            atoms=self.atom_head(modulate(_layer_norm(h_atoms), shift, scale)),
            lattice=self.lattice_head(modulate(_layer_norm(h_lattice), shift, scale)),
        )


class _Base(nn.Module):
    def __init__(self, config):
        super().__init__()
        self.config = config
        d = config.hidden_dim
        self.lattice_embed = nn.Linear(3, d)
        self.atom_embed = nn.Linear(config.num_features, d)
        self.type_embed = nn.Parameter(torch.zeros(2, d))
        self.t_embedder = TimestepEmbedder(d)
        self.final_layer = FinalLayer(d, config.num_features)

    def initialize_weights(self):
        for m in self.modules():
            if isinstance(m, nn.Linear):
                nn.init.xavier_uniform_(m.weight)
                nn.init.zeros_(m.bias)
        for p in self._token_embeddings():
            nn.init.normal_(p, std=0.02)
        for lin in self.t_embedder.mlp:
            if isinstance(lin, nn.Linear):
                nn.init.normal_(lin.weight, std=0.02)
        for m in self.modules():
            if isinstance(m, (DiTBlock, StreamSublayers, FinalLayer)):
                nn.init.zeros_(m.adaLN_modulation[-1].weight)
                nn.init.zeros_(m.adaLN_modulation[-1].bias)
        for head in (self.final_layer.atom_head, self.final_layer.lattice_head):
            nn.init.zeros_(head.weight)
            nn.init.zeros_(head.bias)

    def _check_inputs(self, lattice, atoms):
        F_ = self.config.num_features
        if lattice.dim() != 3 or tuple(lattice.shape[1:]) != (3, 3):
            raise ShapeMismatch(f"lattice must be (B, 3, 3), got {tuple(lattice.shape)}")
        if atoms.dim() != 3 or tuple(atoms.shape[1:]) != (MAX_ATOMS, F_):
            raise ShapeMismatch(f"atoms must be (B, {MAX_ATOMS}, {F_}), got {tuple(atoms.shape)}")
        if atoms.shape[0] != lattice.shape[0]:
            raise ShapeMismatch("lattice and atoms batch sizes differ")

    def _timesteps(self, t, batch):
        t = torch.as_tensor(t)
        if t.dim() == 0:
            t = t.expand(batch)
        return self.t_embedder(t)


class CrystalDiT(_Base):
    """Unified variant: one attention pathway over all 23 tokens."""

    def __init__(self, config=ModelConfig()):
        super().__init__(config)
        d = config.hidden_dim
        self.pos_embed = nn.Parameter(torch.zeros(NUM_TOKENS, d))
        self.blocks = nn.ModuleList(
            DiTBlock(d, config.num_heads, config.mlp_ratio) for _ in range(config.num_layers))
        self.initialize_weights()

    def _token_embeddings(self):
        return (self.pos_embed, self.type_embed)

    def embed(self, lattice, atoms):
        """(B, 23, d) token sequence: lattice rows at 0..2, atom rows at 3..22."""
        self._check_inputs(lattice, atoms)
        h_lat = self.lattice_embed(lattice) + self.type_embed[1]
        h_atoms = self.atom_embed(atoms) + self.type_embed[0]
        return torch.cat([h_lat, h_atoms], dim=1) + self.pos_embed

    def forward(self, lattice, atoms, t):
        h = self.embed(lattice, atoms)
        c = self._timesteps(t, h.shape[0])
        for block in self.blocks:
            h = block(h, c)
        return self.final_layer(h[:, NUM_LATTICE_TOKENS:], h[:, :NUM_LATTICE_TOKENS], c)


class DualStreamDiT(_Base):
    """Cascade of atom-only blocks, lattice-only blocks and joint blocks."""

    def __init__(self, config=ModelConfig(variant="dual")):
        super().__init__(config)
        d = config.hidden_dim
        n_atom, n_lat, n_joint = config.split
        self.atom_pos = nn.Parameter(torch.zeros(MAX_ATOMS, d))
        self.lattice_pos = nn.Parameter(torch.zeros(NUM_LATTICE_TOKENS, d))
        self.atom_blocks = nn.ModuleList(
            DiTBlock(d, config.num_heads, config.mlp_ratio) for _ in range(n_atom))
        self.lattice_blocks = nn.ModuleList(
            DiTBlock(d, config.num_heads, config.mlp_ratio) for _ in range(n_lat))
        self.joint_blocks = nn.ModuleList(
            JointBlock(d, config.num_heads, config.mlp_ratio) for _ in range(n_joint))
        self.initialize_weights()

    def _token_embeddings(self):
        return (self.atom_pos, self.lattice_pos, self.type_embed)

    def embed(self, lattice, atoms):
        """Token sequence in the unified layout, for inspection and tests."""
        self._check_inputs(lattice, atoms)
        h_lat = self.lattice_embed(lattice) + self.type_embed[1] + self.lattice_pos
        h_atoms = self.atom_embed(atoms) + self.type_embed[0] + self.atom_pos
        return torch.cat([h_lat, h_atoms], dim=1)

    def forward(self, lattice, atoms, t):
        h = self.embed(lattice, atoms)
        c = self._timesteps(t, h.shape[0])
        l, a = h[:, :NUM_LATTICE_TOKENS], h[:, NUM_LATTICE_TOKENS:]
        for block in self.atom_blocks:
            a = block(a, c)
        for block in self.lattice_blocks:
            l = block(l, c)
        for block in self.joint_blocks:
            a, l = block(a, l, c)
        return self.final_layer(a, l, c)


def build_model(config):
    return (CrystalDiT if config.variant == "unified" else DualStreamDiT)(config)


def count_parameters(model):
    return sum(p.numel() for p in model.parameters())
