"""Model and hardware configuration types, JSON ingestion, named fixtures.

Model configs are plain dataclasses validated at construction.  JSON
documents must carry exactly the documented keys; anything missing or
unknown is rejected so that typos never silently fall back to defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Literal

from .errors import ConfigError

Activation = Literal["swiglu", "squared_relu"]
Variant = Literal["standard", "latent_eff", "latent_acc"]

ACTIVATIONS = ("swiglu", "squared_relu")
VARIANTS = ("standard", "latent_eff", "latent_acc")

MODEL_CONFIG_KEYS = (
    "layers",
    "hidden_dim",
    "latent_dim",
    "routed_experts",
    "active_experts",
    "shared_experts",
    "intermediate_dim",
    "activation",
    "variant",
)

HARDWARE_CONFIG_KEYS = (
    "peak_flops",
    "bw_hbm",
    "bw_nvl",
    "ep",
    "bytes_dispatch",
    "bytes_aggregate",
    "bytes_weight",
)

# Byte widths default to FP4 dispatch / BF16 aggregation / FP4 weights.
DEFAULT_BYTES_DISPATCH = 0.5
DEFAULT_BYTES_AGGREGATE = 2.0
DEFAULT_BYTES_WEIGHT = 0.5

MODEL_FIXTURES = ("16BT-2BA", "95BT-8BA", "Hybrid-73BT-8BA")
HARDWARE_FIXTURES = ("GB200-NVL72-EP64",)

FIXTURES_DIR_ENV = "MOELAB_FIXTURES_DIR"


@dataclass(frozen=True)
class MoEConfig:
    """Architectural hyperparameters of one MoE layer stack.

    ``routed_experts`` and ``active_experts`` are the base counts; the
    latent variants expand them by ``alpha = hidden_dim / latent_dim``
    (derived, not stored).
    """

    layers: int
    hidden_dim: int
    latent_dim: int
    routed_experts: int
    active_experts: int
    shared_experts: int
    intermediate_dim: int
    activation: Activation
    variant: Variant

    def __post_init__(self) -> None:
        for name in ("layers", "hidden_dim", "latent_dim", "routed_experts",
                     "active_experts", "intermediate_dim"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.shared_experts, int) or isinstance(self.shared_experts, bool) \
                or self.shared_experts < 0:
            raise ConfigError(f"shared_experts must be a non-negative integer, got "
                              f"{self.shared_experts!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}, got "
                              f"{self.activation!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.latent_dim > self.hidden_dim:
            raise ConfigError(f"latent_dim {self.latent_dim} exceeds hidden_dim "
                              f"{self.hidden_dim}")
        if self.is_latent and self.hidden_dim % self.latent_dim != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} is not a multiple of latent_dim "
                f"{self.latent_dim}; the compression ratio must be an integer")
        if self.k_active > self.n_routed_eff:
            raise ConfigError(
                f"active experts {self.k_active} exceed routed experts "
                f"{self.n_routed_eff} for variant {self.variant}")

    @property
    def is_latent(self) -> bool:
        return self.variant in ("latent_eff", "latent_acc")

    @property
    def alpha(self) -> int:
        """Compression ratio hidden_dim / latent_dim (1 for standard)."""
        return self.hidden_dim // self.latent_dim if self.is_latent else 1

    @property
    def n_routed_eff(self) -> int:
        """Routed expert count actually instantiated (alpha * N for latent)."""
        return self.alpha * self.routed_experts

    @property
    def k_active(self) -> int:
        """Experts selected per token (alpha * K for the acc variant)."""
        return self.alpha * self.active_experts if self.variant == "latent_acc" \
            else self.active_experts

    @property
    def routed_in_dim(self) -> int:
        """Input width of routed experts: latent_dim for latent variants."""
        return self.latent_dim if self.is_latent else self.hidden_dim

    @property
    def gate_matrices(self) -> int:
        """Weight matrices per expert: 3 for swiglu, 2 for squared_relu."""
        return 3 if self.activation == "swiglu" else 2

    def to_dict(self) -> dict[str, Any]:
        return {key: getattr(self, key) for key in MODEL_CONFIG_KEYS}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MoEConfig":
        _require_exact_keys(data, MODEL_CONFIG_KEYS, required=MODEL_CONFIG_KEYS,
                            what="model config")
        return cls(**{key: data[key] for key in MODEL_CONFIG_KEYS})


@dataclass(frozen=True)
class HardwareSpec:
    """Per-GPU hardware envelope used by the serving-cost model."""

    peak_flops: float
    bw_hbm: float
    bw_nvl: float
    ep: int
    bytes_dispatch: float = DEFAULT_BYTES_DISPATCH
    bytes_aggregate: float = DEFAULT_BYTES_AGGREGATE
    bytes_weight: float = DEFAULT_BYTES_WEIGHT

    def __post_init__(self) -> None:
        for name in ("peak_flops", "bw_hbm", "bw_nvl", "bytes_dispatch",
                     "bytes_aggregate", "bytes_weight"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and not isinstance(value, bool)
                    and value > 0):
                raise ConfigError(f"{name} must be a positive number, got {value!r}")
        if not isinstance(self.ep, int) or isinstance(self.ep, bool) or self.ep < 1:
            raise ConfigError(f"ep must be an integer >= 1, got {self.ep!r}")

    def to_dict(self) -> dict[str, Any]:
        return {key: getattr(self, key) for key in HARDWARE_CONFIG_KEYS}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "HardwareSpec":
        required = ("peak_flops", "bw_hbm", "bw_nvl", "ep")
        _require_exact_keys(data, HARDWARE_CONFIG_KEYS, required=required,
                            what="hardware config")
        kwargs = {key: data[key] for key in HARDWARE_CONFIG_KEYS if key in data}
        for key in ("peak_flops", "bw_hbm", "bw_nvl", "bytes_dispatch",
                    "bytes_aggregate", "bytes_weight"):
            if key in kwargs and isinstance(kwargs[key], int):
                kwargs[key] = float(kwargs[key])
        return cls(**kwargs)


def _require_exact_keys(data: dict[str, Any], allowed: tuple[str, ...],
                        required: tuple[str, ...], what: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{what} must be a JSON object, got {type(data).__name__}")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{what} has unknown keys: {', '.join(unknown)}")
    missing = sorted(set(required) - set(data))
    if missing:
        raise ConfigError(f"{what} is missing keys: {', '.join(missing)}")


def with_variant(config: MoEConfig, variant: Variant, alpha: int = 1) -> MoEConfig:
    """Derive a sibling config of the given variant and compression ratio.

    The base counts (N, K) are kept; for latent variants the latent
    width becomes ``hidden_dim // alpha``.
    """
    if variant == "standard":
        return replace(config, variant="standard", latent_dim=config.hidden_dim)
    if not isinstance(alpha, int) or alpha < 1:
        raise ConfigError(f"alpha must be a positive integer, got {alpha!r}")
    if config.hidden_dim % alpha != 0:
        raise ConfigError(f"hidden_dim {config.hidden_dim} is not divisible by "
                          f"alpha {alpha}")
    return replace(config, variant=variant, latent_dim=config.hidden_dim // alpha)


def fixtures_dir() -> Path:
    """Directory holding the named fixture JSON files."""
    override = os.environ.get(FIXTURES_DIR_ENV)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "fixtures"


def _load_json(path: Path) -> dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None


def load_model_config(source: str | Path) -> MoEConfig:
    """Load a model config from a fixture name or a JSON file path."""
    name = str(source)
    if name in MODEL_FIXTURES:
        return MoEConfig.from_dict(_load_json(fixtures_dir() / f"{name}.json"))
    return MoEConfig.from_dict(_load_json(Path(source)))


def load_hardware_spec(source: str | Path) -> HardwareSpec:
    """Load a hardware spec from a fixture name or a JSON file path."""
    name = str(source)
    if name in HARDWARE_FIXTURES:
        return HardwareSpec.from_dict(_load_json(fixtures_dir() / f"{name}.json"))
    return HardwareSpec.from_dict(_load_json(Path(source)))
