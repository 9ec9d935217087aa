"""Flat ``key = value`` run configuration with desk and full-scale presets.

Documented keys (all optional; unset keys keep the preset value):

    variant          unified | dual
    mode             2d | 1d
    hidden_dim       transformer width d
    num_layers       transformer depth L
    num_heads        attention heads
    mlp_ratio        MLP hidden width as a multiple of d
    timesteps        diffusion steps T
    beta_start       first beta of the linear schedule
    beta_end         last beta of the linear schedule
    variance         reverse-step variance: beta | posterior
    lambda_atoms     weight of the atom term in the loss
    channel_weights  comma-separated per-channel atom weights
    lr               Adam learning rate
    batch_size       training mini-batch size
    checkpoint_every epochs between checkpoints
    sigma            decoder Gaussian width
    ltol, stol, angle_tol   structure matcher tolerances
    alpha            comma-separated Balance Score exponents

Blank lines and ``#`` comments are ignored.
"""

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .chem import DecoderConfig
from .diffusion import LossWeights, linear_schedule
from .errors import ParseError, UsageError
from .matcher import MatcherTolerances
from .net import ModelConfig


@dataclass(frozen=True)
class RunConfig:
    variant: str = "unified"
    mode: str = "2d"
    hidden_dim: int = 64
    num_layers: int = 4
    num_heads: int = 4
    mlp_ratio: float = 4.0
    timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    variance: str = "beta"
    lambda_atoms: float = 100.0
    channel_weights: tuple | None = None
    lr: float = 1e-3
    batch_size: int = 64
    checkpoint_every: int = 250
    sigma: float = 0.1
    ltol: float = 0.2
    stol: float = 0.3
    angle_tol: float = 5.0
    alpha: tuple = (1.0,)

    def model_config(self):
        return ModelConfig(hidden_dim=self.hidden_dim, num_layers=self.num_layers,
                           num_heads=self.num_heads, mlp_ratio=self.mlp_ratio,
                           variant=self.variant, mode=self.mode)

    def schedule(self):
        return linear_schedule(self.timesteps, self.beta_start, self.beta_end, self.variance)

    def loss_weights(self):
        if self.channel_weights is None:
            return LossWeights.for_mode(self.mode, self.lambda_atoms)
        return LossWeights(self.lambda_atoms, tuple(self.channel_weights))

    def decoder(self):
        return DecoderConfig(self.sigma)

    def tolerances(self):
        return MatcherTolerances(self.ltol, self.stol, self.angle_tol)

    def model_dict(self):
        """Keys that determine the network and its schedule; checked on checkpoint load."""
        keys = ("variant", "mode", "hidden_dim", "num_layers", "num_heads", "mlp_ratio",
                "timesteps", "beta_start", "beta_end", "variance")
        return {k: getattr(self, k) for k in keys}

    def as_dict(self):
        d = asdict(self)
        for k in ("channel_weights", "alpha"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d


PRESETS = {
    "desk": RunConfig(),
    "full": RunConfig(hidden_dim=512, num_layers=18, num_heads=8, lr=1e-4, batch_size=256),
}

_TUPLE_KEYS = {"channel_weights", "alpha"}


def _coerce(name, raw, lineno=None):
    if name not in {f.name for f in fields(RunConfig)}:
        raise ParseError(f"unknown config key {name!r}", line=lineno, field=name)
    try:
        if name in _TUPLE_KEYS:
            return tuple(float(x) for x in str(raw).split(",") if x.strip())
        default = getattr(PRESETS["desk"], name)
        if isinstance(default, bool):
            return str(raw).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return str(raw).strip()
    except ValueError as err:
        raise ParseError(f"bad value {raw!r}", line=lineno, field=name) from err


def parse_config_text(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = value", line=lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = _coerce(key, raw, lineno)
    return values


def resolve_config(path=None, preset="desk", overrides=None):
    """Preset, then file values, then explicit overrides (later wins)."""
    if preset not in PRESETS:
        raise UsageError(f"unknown preset {preset!r}")
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = _coerce(k, v) if isinstance(v, str) else v
    try:
        cfg = replace(PRESETS[preset], **values)
        cfg.model_config()
        cfg.loss_weights()
        cfg.schedule()
        cfg.decoder()
        cfg.tolerances()
    except ValueError as err:
        raise UsageError(f"invalid configuration: {err}") from err
    return cfg


def format_config(cfg):
    lines = []
    for k, v in cfg.as_dict().items():
        if v is None:
            continue
        if isinstance(v, list):
            v = ",".join(repr(float(x)) for x in v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


__all__ = ["PRESETS", "RunConfig", "format_config", "parse_config_text", "resolve_config"]
