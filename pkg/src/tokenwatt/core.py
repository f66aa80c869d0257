"""Shared domain types: requests, bin grids, hardware/model configs, energy units.

Everything here is an immutable value type, safe to share across workers.
All internal energy arithmetic is in joules; kWh/Wh conversions happen only
at file and CLI boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

J_PER_KWH = 3.6e6
J_PER_WH = 3.6e3

# Ceiling-bin lattice used throughout: requests are mapped to the smallest
# cap >= their token length. Note the input set jumps 32 -> 128 (no 64).
DEFAULT_INPUT_BINS = (32, 128, 256, 512, 1024, 2048, 4096, 8192)
DEFAULT_OUTPUT_BINS = (8, 16, 32, 64, 128, 256, 512)


class ValidationError(ValueError):
    """Data or contract violation; mapped to exit code 2 by the CLI."""


@dataclass(frozen=True)
class Request:
    """One inference call: prompt length and generation length, in tokens."""

    input_tokens: int
    output_tokens: int

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValidationError(
                f"token counts must be nonnegative, got "
                f"({self.input_tokens}, {self.output_tokens})"
            )


@dataclass(frozen=True, order=True)
class Bin:
    """A cell of the bin grid: the (input_cap, output_cap) a request rounds up to."""

    input_cap: int
    output_cap: int

    def __post_init__(self) -> None:
        if self.input_cap <= 0 or self.output_cap <= 0:
            raise ValidationError(
                f"bin caps must be positive, got ({self.input_cap}, {self.output_cap})"
            )


@dataclass(frozen=True)
class BinGrid:
    """The discrete lattice of input/output token caps."""

    input_bins: tuple[int, ...] = DEFAULT_INPUT_BINS
    output_bins: tuple[int, ...] = DEFAULT_OUTPUT_BINS

    def __post_init__(self) -> None:
        for name, bins in (("input_bins", self.input_bins), ("output_bins", self.output_bins)):
            bins = tuple(bins)
            object.__setattr__(self, name, bins)
            if not bins:
                raise ValidationError(f"{name} must be non-empty")
            if any(b <= 0 for b in bins):
                raise ValidationError(f"{name} must be positive, got {bins}")
            if any(a >= b for a, b in zip(bins, bins[1:])):
                raise ValidationError(f"{name} must be strictly increasing, got {bins}")

    @property
    def max_input(self) -> int:
        return self.input_bins[-1]

    @property
    def max_output(self) -> int:
        return self.output_bins[-1]

    def bins(self) -> list[Bin]:
        """All grid cells, sorted by (input_cap, output_cap)."""
        return [Bin(i, o) for i in self.input_bins for o in self.output_bins]

    def contains(self, b: Bin) -> bool:
        return b.input_cap in self.input_bins and b.output_cap in self.output_bins


DEFAULT_GRID = BinGrid()


@dataclass(frozen=True)
class HardwareSpec:
    """Accelerator nameplate figures used for the idealized baseline."""

    name: str
    tdp: float  # watts
    peak_flops: float  # FLOP/s

    def __post_init__(self) -> None:
        if self.tdp <= 0:
            raise ValidationError(f"tdp must be positive, got {self.tdp}")
        if self.peak_flops <= 0:
            raise ValidationError(f"peak_flops must be positive, got {self.peak_flops}")

    @classmethod
    def from_file(cls, path: str | Path) -> "HardwareSpec":
        kv = read_config_file(path)
        required = {"name", "tdp", "peak_flops"}
        _check_keys(kv, required, required, path)
        return cls(name=kv["name"], tdp=_parse_float(kv, "tdp", path),
                   peak_flops=_parse_float(kv, "peak_flops", path))


@dataclass(frozen=True)
class ModelConfig:
    """Dense decoder-only architecture shape.

    n_params defaults to the closed-form dense parameter count (see
    derive_param_count); pass it explicitly to pin a published figure.
    """

    n_layers: int
    d_model: int
    n_heads: int
    n_kv_heads: int
    d_ff: int
    vocab_size: int
    n_params: Optional[int] = None
    tied_embeddings: bool = False

    def __post_init__(self) -> None:
        for name in ("n_layers", "d_model", "n_heads", "n_kv_heads", "d_ff", "vocab_size"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if self.d_model % self.n_heads != 0:
            raise ValidationError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if self.n_heads % self.n_kv_heads != 0:
            raise ValidationError(
                f"n_heads ({self.n_heads}) must be divisible by n_kv_heads ({self.n_kv_heads})"
            )
        if self.n_params is not None and self.n_params <= 0:
            raise ValidationError(f"n_params must be positive, got {self.n_params}")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def param_count(self) -> int:
        if self.n_params is not None:
            return self.n_params
        return derive_param_count(self)

    @classmethod
    def from_file(cls, path: str | Path) -> "ModelConfig":
        kv = read_config_file(path)
        required = {"n_layers", "d_model", "n_heads", "n_kv_heads", "d_ff", "vocab_size"}
        allowed = required | {"n_params", "tied_embeddings"}
        _check_keys(kv, required, allowed, path)
        kwargs = {k: _parse_int(kv, k, path) for k in required}
        if "n_params" in kv:
            kwargs["n_params"] = _parse_int(kv, "n_params", path)
        if "tied_embeddings" in kv:
            kwargs["tied_embeddings"] = _parse_bool(kv, "tied_embeddings", path)
        return cls(**kwargs)


def derive_param_count(config: ModelConfig) -> int:
    """Closed-form weight count of a dense decoder-only transformer.

    Counts embeddings, per-layer attention projections (grouped-query K/V)
    and gated feed-forward weights, and the output head (skipped when
    embeddings are tied). Biases and normalization weights are excluded:
    they are below 0.1% of the total for realistic shapes.
    """
    d = config.d_model
    kv_dim = config.head_dim * config.n_kv_heads
    attn = d * d + 2 * d * kv_dim + d * d  # Q, K, V, output projection
    ffn = 3 * d * config.d_ff  # gate, up, down
    embeddings = config.vocab_size * d
    head = 0 if config.tied_embeddings else config.vocab_size * d
    return embeddings + config.n_layers * (attn + ffn) + head


@dataclass(frozen=True)
class Energy:
    """Nonnegative energy amount; canonical unit is joules."""

    joules: float

    def __post_init__(self) -> None:
        if self.joules < 0:
            raise ValidationError(f"energy must be nonnegative, got {self.joules} J")

    @classmethod
    def from_wh(cls, wh: float) -> "Energy":
        return cls(wh * J_PER_WH)

    @classmethod
    def from_kwh(cls, kwh: float) -> "Energy":
        return cls(kwh * J_PER_KWH)

    @property
    def wh(self) -> float:
        return self.joules / J_PER_WH

    @property
    def kwh(self) -> float:
        return self.joules / J_PER_KWH

    def __add__(self, other: "Energy") -> "Energy":
        if not isinstance(other, Energy):
            return NotImplemented
        return Energy(self.joules + other.joules)

    def __radd__(self, other):  # lets sum() start from 0
        if other == 0:
            return self
        return NotImplemented

    def __mul__(self, factor: float) -> "Energy":
        if not isinstance(factor, (int, float)):
            return NotImplemented
        if factor < 0:
            raise ValidationError(f"energy scale factor must be nonnegative, got {factor}")
        return Energy(self.joules * factor)

    __rmul__ = __mul__


ZERO_ENERGY = Energy(0.0)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a plain-text `key = value` config file. `#` starts a comment."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected `key = value`, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ValidationError(f"{path}:{lineno}: empty key")
        if key in out:
            raise ValidationError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _check_keys(kv: dict[str, str], required: set[str], allowed: set[str], path) -> None:
    missing = required - kv.keys()
    if missing:
        raise ValidationError(f"{path}: missing keys: {', '.join(sorted(missing))}")
    unknown = kv.keys() - allowed
    if unknown:
        raise ValidationError(f"{path}: unknown keys: {', '.join(sorted(unknown))}")


def _parse_int(kv: dict[str, str], key: str, path) -> int:
    try:
        return int(kv[key])
    except ValueError:
        raise ValidationError(f"{path}: {key} must be an integer, got {kv[key]!r}") from None


def _parse_float(kv: dict[str, str], key: str, path) -> float:
    try:
        return float(kv[key])
    except ValueError:
        raise ValidationError(f"{path}: {key} must be a number, got {kv[key]!r}") from None


def _parse_bool(kv: dict[str, str], key: str, path) -> bool:
    value = kv[key].lower()
    if value in ("true", "1", "yes"):
        return True
    if value in ("false", "0", "no"):
        return False
    raise ValidationError(f"{path}: {key} must be a boolean, got {kv[key]!r}")
