"""Low-rank adapters over a frozen decoder-only base model.

Each targeted weight matrix W (d_out x d_in) gains a trainable pair
A (d_in x r), B (r x d_out); the forward pass adds dropout(x) @ A @ B scaled
by alpha / r. B starts at zero, so attachment is an exact identity at step 0,
and the trainable-parameter count is r * (d_in + d_out) per target.

Targets are named by role, not by module path: "fused_attention_qkv_projection"
and "mlp_first_projection" resolve to the GPT-2 family's attn.c_attn and
mlp.c_fc. Both torch.nn.Linear and the transformers Conv1D layout are
supported (Conv1D stores weight as (d_in, d_out)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import torch
from torch import nn


class TargetModuleNotFound(LookupError):
    """The architecture exposes no module for a requested target role."""


ROLE_NAME_SUFFIXES: dict[str, tuple[str, ...]] = {
    "fused_attention_qkv_projection": ("attn.c_attn",),
    "mlp_first_projection": ("mlp.c_fc",),
}

DEFAULT_TARGET_ROLES = frozenset(ROLE_NAME_SUFFIXES)


@dataclass(frozen=True)
class AdapterConfig:
    rank: int = 3
    alpha: float = 16.0
    dropout: float = 0.1
    bias_mode: str = "none"
    target_roles: frozenset[str] = field(default_factory=lambda: DEFAULT_TARGET_ROLES)
    task: str = "causal_lm"

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.bias_mode != "none":
            raise ValueError("only bias_mode='none' is supported")
        unknown = set(self.target_roles) - set(ROLE_NAME_SUFFIXES)
        if unknown:
            raise ValueError(f"unknown target roles: {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "alpha": self.alpha,
            "dropout": self.dropout,
            "bias_mode": self.bias_mode,
            "target_roles": sorted(self.target_roles),
            "task": self.task,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdapterConfig":
        return cls(
            rank=d["rank"],
            alpha=d["alpha"],
            dropout=d["dropout"],
            bias_mode=d.get("bias_mode", "none"),
            target_roles=frozenset(d.get("target_roles", DEFAULT_TARGET_ROLES)),
            task=d.get("task", "causal_lm"),
        )


def _module_dims(module: nn.Module) -> tuple[int, int]:
    """(d_in, d_out) for Linear or transformers Conv1D."""
    if isinstance(module, nn.Linear):
        return module.in_features, module.out_features
    weight = getattr(module, "weight", None)
    if type(module).__name__ == "Conv1D" and weight is not None and weight.dim() == 2:
        return weight.shape[0], weight.shape[1]
    raise TypeError(f"cannot adapt module of type {type(module).__name__}")


class LowRankAdapter(nn.Module):
    """Wraps one projection module with a trainable low-rank residual."""

    def __init__(self, base: nn.Module, rank: int, alpha: float, dropout: float):
        super().__init__()
        d_in, d_out = _module_dims(base)
        self.base = base
        self.rank = rank
        self.scaling = alpha / rank
        self.lora_a = nn.Parameter(torch.empty(d_in, rank))
        self.lora_b = nn.Parameter(torch.zeros(rank, d_out))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))
        self.lora_dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        delta = self.lora_dropout(x) @ self.lora_a @ self.lora_b
        return self.base(x) + delta * self.scaling

    def adapter_parameter_count(self) -> int:
        return self.lora_a.numel() + self.lora_b.numel()


def find_target_modules(model: nn.Module, roles: Iterable[str]) -> dict[str, list[str]]:
    """Map each role to the module paths it resolves to; error on empty roles."""
    found: dict[str, list[str]] = {role: [] for role in roles}
    for name, module in model.named_modules():
        if isinstance(module, LowRankAdapter):
            continue
        for role, suffixes in ROLE_NAME_SUFFIXES.items():
            if role in found and any(name.endswith(s) for s in suffixes):
                found[role].append(name)
    missing = [role for role, names in found.items() if not names]
    if missing:
        raise TargetModuleNotFound(
            f"architecture exposes no modules for roles {sorted(missing)}")
    return found


def attach_adapters(model: nn.Module, cfg: AdapterConfig) -> nn.Module:
    """Freeze the base model and wrap every targeted projection in place.

    All pre-existing parameters are frozen; only the new adapter pairs are
    trainable afterwards. With B initialized to zero the wrapped model's
    forward pass is bit-identical to the unwrapped one.
    """
    targets = find_target_modules(model, cfg.target_roles)
    for param in model.parameters():
        param.requires_grad_(False)
    for names in targets.values():
        for name in names:
            parent_name, _, attr = name.rpartition(".")
            parent = model.get_submodule(parent_name) if parent_name else model
            base = getattr(parent, attr)
            adapter = LowRankAdapter(base, cfg.rank, cfg.alpha, cfg.dropout)
            adapter.train(model.training)  # fresh modules default to train mode
            setattr(parent, attr, adapter)
    return model


def expected_adapter_parameters(dims: Iterable[tuple[int, int]], rank: int) -> int:
    """Closed form: sum of rank * (d_in + d_out) over targeted matrices."""
    return sum(rank * (d_in + d_out) for d_in, d_out in dims)


def trainable_parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def adapter_state_dict(model: nn.Module) -> dict[str, torch.Tensor]:
    """Only the trainable adapter tensors, keyed by their module paths."""
    return {name: p.detach().clone()
            for name, p in model.named_parameters() if p.requires_grad}


def load_adapter_state(model: nn.Module, state: dict[str, torch.Tensor]) -> None:
    params = dict(model.named_parameters())
    missing = [k for k in state if k not in params]
    if missing:
        raise KeyError(f"adapter state has unknown keys: {missing[:4]}")
    with torch.no_grad():
        for key, value in state.items():
            if params[key].shape != value.shape:
                raise ValueError(
                    f"{key}: shape {tuple(value.shape)} does not match "
                    f"model parameter {tuple(params[key].shape)}")
            params[key].copy_(value)
