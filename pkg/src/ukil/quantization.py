"""4-bit NF4 weight quantization with double-quantized scale constants.

Weights are grouped into blocks of 64, normalized by the block absmax, and
snapped to the 16-value NF4 codebook. The absmax constants are themselves
quantized: per superblock of 256 constants, an 8-bit signed code against one
fp32 offset (the superblock mean) and one fp32 scale. That second pass is the
"double" in double quantization and brings storage to ~4.13 bits per weight.

This reference implementation runs anywhere torch does. Weight tensors are
materialized at their 4-bit-representable values for compute (so the forward
pass equals what a packed-storage backend computes); the packed codes are kept
so storage claims stay auditable. When 16-bit compute is unavailable (CPU) the
model runs in fp32 and the fallback is recorded for the config snapshot.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import torch
from torch import nn

NF4_CODEBOOK = torch.tensor([
    -1.0, -0.6961928009986877, -0.5250730514526367, -0.39491748809814453,
    -0.28444138169288635, -0.18477343022823334, -0.09105003625154495, 0.0,
    0.07958029955625534, 0.16093020141124725, 0.24611230194568634,
    0.33791524171829224, 0.44070982933044434, 0.5626170039176941,
    0.7229568362236023, 1.0,
])

BLOCK_SIZE = 64
CONSTANT_BLOCK_SIZE = 256


class UnsupportedHardwareWarning(UserWarning):
    """Emitted when the runtime lacks 4-bit support and training proceeds
    on unquantized weights."""


@dataclass(frozen=True)
class QuantConfig:
    scheme: str = "nf4_double_quantization"
    compute_dtype: str = "float16"

    def __post_init__(self):
        if self.scheme not in ("nf4_double_quantization", "none"):
            raise ValueError(f"unsupported quantization scheme {self.scheme!r}")

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "compute_dtype": self.compute_dtype}

    @classmethod
    def from_dict(cls, d: dict) -> "QuantConfig":
        return cls(scheme=d.get("scheme", "nf4_double_quantization"),
                   compute_dtype=d.get("compute_dtype", "float16"))


@dataclass
class Nf4Tensor:
    """Packed 4-bit codes plus double-quantized block constants."""

    codes: torch.Tensor          # uint8, two 4-bit codes per byte
    absmax_codes: torch.Tensor   # int8 codes for block constants
    absmax_offset: torch.Tensor  # fp32, one per superblock
    absmax_scale: torch.Tensor   # fp32, one per superblock
    numel: int
    shape: tuple[int, ...]

    def storage_bits_per_weight(self) -> float:
        bits = self.codes.numel() * 8 + self.absmax_codes.numel() * 8
        bits += (self.absmax_offset.numel() + self.absmax_scale.numel()) * 32
        return bits / self.numel


def _dequantize_absmax(q: Nf4Tensor) -> torch.Tensor:
    blocks = q.absmax_codes.reshape(-1, CONSTANT_BLOCK_SIZE).to(torch.float32)
    absmax = blocks / 127.0 * q.absmax_scale.unsqueeze(1) + q.absmax_offset.unsqueeze(1)
    return absmax.reshape(-1)


def nf4_compress(tensor: torch.Tensor) -> Nf4Tensor:
    """Quantize a tensor to packed NF4 codes with double-quantized constants."""
    flat = tensor.detach().reshape(-1).to(torch.float32)
    numel = flat.numel()
    pad = (-numel) % BLOCK_SIZE
    if pad:
        flat = torch.cat([flat, flat.new_zeros(pad)])
    blocks = flat.reshape(-1, BLOCK_SIZE)
    absmax = blocks.abs().amax(dim=1)
    absmax = torch.where(absmax == 0, torch.ones_like(absmax), absmax)

    n_blocks = absmax.numel()
    cpad = (-n_blocks) % CONSTANT_BLOCK_SIZE
    padded_absmax = torch.cat([absmax, absmax.new_zeros(cpad)]) if cpad else absmax
    groups = padded_absmax.reshape(-1, CONSTANT_BLOCK_SIZE)
    offset = groups.mean(dim=1)
    centered = groups - offset.unsqueeze(1)
    scale = centered.abs().amax(dim=1)
    scale = torch.where(scale == 0, torch.ones_like(scale), scale)
    absmax_codes = torch.round(centered / scale.unsqueeze(1) * 127).clamp(-127, 127).to(torch.int8)

    quantized = Nf4Tensor(
        codes=torch.empty(0, dtype=torch.uint8),
        absmax_codes=absmax_codes.reshape(-1),
        absmax_offset=offset,
        absmax_scale=scale,
        numel=numel,
        shape=tuple(tensor.shape),
    )
    deq_absmax = _dequantize_absmax(quantized)[:n_blocks]
    deq_absmax = torch.where(deq_absmax <= 0, torch.full_like(deq_absmax, 1e-8), deq_absmax)

    normalized = blocks / deq_absmax.unsqueeze(1)
    codebook = NF4_CODEBOOK.to(normalized.dtype)
    idx = (normalized.unsqueeze(-1) - codebook).abs().argmin(dim=-1).to(torch.uint8)
    idx = idx.reshape(-1)
    if idx.numel() % 2:
        idx = torch.cat([idx, idx.new_zeros(1)])
    pairs = idx.reshape(-1, 2)
    quantized.codes = (pairs[:, 0] << 4 | pairs[:, 1]).to(torch.uint8)
    return quantized


def nf4_restore(q: Nf4Tensor) -> torch.Tensor:
    """Exact dequantization of the packed representation."""
    high = (q.codes >> 4).to(torch.long)
    low = (q.codes & 0x0F).to(torch.long)
    idx = torch.stack([high, low], dim=1).reshape(-1)
    padded_numel = -(-q.numel // BLOCK_SIZE) * BLOCK_SIZE
    idx = idx[:padded_numel]
    values = NF4_CODEBOOK[idx].reshape(-1, BLOCK_SIZE)
    n_blocks = values.shape[0]
    absmax = _dequantize_absmax(q)[:n_blocks]
    absmax = torch.where(absmax <= 0, torch.full_like(absmax, 1e-8), absmax)
    out = values * absmax.unsqueeze(1)
    return out.reshape(-1)[: q.numel].reshape(q.shape)


@dataclass
class QuantizationResult:
    model: nn.Module
    scheme: str
    backend: str
    fallback: bool = False
    fallback_reason: str = ""
    packed: dict[str, Nf4Tensor] = field(default_factory=dict)

    def snapshot(self) -> dict:
        return {
            "scheme": self.scheme,
            "backend": self.backend,
            "fallback": self.fallback,
            "fallback_reason": self.fallback_reason,
            "quantized_tensors": len(self.packed),
        }


def reference_backend_available() -> bool:
    """The reference emulation needs nothing beyond torch; exists as an
    injection point so the no-4-bit fallback path stays testable."""
    return True


def quantize_base(model: nn.Module, cfg: QuantConfig,
                  min_dims: int = 2) -> QuantizationResult:
    """Quantize every weight matrix of the base model in place.

    Only tensors with >= ``min_dims`` dimensions are touched (matrices and
    embeddings), matching what packed 4-bit backends quantize; biases and
    layer norms stay in full precision. Without a working 4-bit backend the
    model is returned unquantized with a warning, and the fallback is recorded
    so the training config snapshot can carry it.
    """
    if cfg.scheme == "none":
        return QuantizationResult(model, scheme="none", backend="none")
    if not reference_backend_available():
        warnings.warn(
            "4-bit support unavailable on this runtime; continuing with "
            "unquantized weights", UnsupportedHardwareWarning, stacklevel=2)
        return QuantizationResult(
            model, scheme="none", backend="none", fallback=True,
            fallback_reason="runtime lacks 4-bit support")
    packed: dict[str, Nf4Tensor] = {}
    with torch.no_grad():
        for name, param in model.named_parameters():
            if param.dim() < min_dims:
                continue
            q = nf4_compress(param)
            packed[name] = q
            param.copy_(nf4_restore(q).to(param.dtype))
    return QuantizationResult(model, scheme=cfg.scheme, backend="reference",
                              packed=packed)
