"""Adapter fine-tuning loop for the instruction-tuned legal assistant.

The recipe trains only the low-rank adapter parameters on top of a frozen
(optionally 4-bit-quantized) base: AdamW with zero weight decay, linear
warmup over ``warmup_steps`` then linear decay to zero, one optimizer step
per ``effective_batch`` examples consumed via gradient accumulation of
micro-batches. Micro-batch losses are token-count weighted so an accumulated
step matches the loss of one full batch.

Every run writes an auditable artifact: adapter weights, a config snapshot
sufficient to replay the run (including any precision or quantization
fallbacks), a per-step training-loss log, per-epoch validation losses, and a
content fingerprint of the training data.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import torch
from torch import nn

from .adapters import AdapterConfig, adapter_state_dict, trainable_parameter_count
from .encoding import LABEL_IGNORE, EncodedExample
from .quantization import QuantConfig, QuantizationResult


class DivergenceDetected(RuntimeError):
    """Training loss went non-finite; the last good checkpoint is kept."""


class TrainingOutOfMemory(RuntimeError):
    """Runtime ran out of memory; reduce micro_batch and retry."""


@dataclass
class TrainConfig:
    effective_batch: int = 64
    micro_batch: int = 8
    grad_accumulation: int = 8
    epochs: int = 13
    learning_rate: float = 3e-4
    warmup_steps: int = 2
    mixed_precision: str = "fp16"
    seed: int = 42
    max_length: int = 768

    def __post_init__(self):
        if self.effective_batch != self.micro_batch * self.grad_accumulation:
            raise ValueError(
                f"effective_batch {self.effective_batch} != micro_batch "
                f"{self.micro_batch} x grad_accumulation {self.grad_accumulation}")
        if self.epochs < 1 or self.micro_batch < 1 or self.grad_accumulation < 1:
            raise ValueError("epochs, micro_batch and grad_accumulation must be >= 1")

    def to_dict(self) -> dict:
        return {
            "effective_batch": self.effective_batch,
            "micro_batch": self.micro_batch,
            "grad_accumulation": self.grad_accumulation,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "warmup_steps": self.warmup_steps,
            "mixed_precision": self.mixed_precision,
            "seed": self.seed,
            "max_length": self.max_length,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{k: d[k] for k in cls().to_dict() if k in d})


@dataclass
class TrainArtifact:
    adapter_weights: dict[str, torch.Tensor]
    config_snapshot: dict
    loss_log: list[tuple[int, float]]
    val_losses: list[tuple[int, float]]        # (epoch, loss)
    dataset_fingerprint: str
    out_dir: Path | None = None
    best_epoch: int | None = None


def dataset_fingerprint(examples: Sequence[EncodedExample]) -> str:
    h = hashlib.sha256()
    for ex in examples:
        h.update(bytes(str(ex.token_ids), "ascii"))
        h.update(bytes(str(ex.label_ids), "ascii"))
    return h.hexdigest()


def _to_tensors(examples: Sequence[EncodedExample], device: torch.device):
    ids = torch.tensor([ex.token_ids for ex in examples], dtype=torch.long, device=device)
    mask = torch.tensor([ex.attention_mask for ex in examples], dtype=torch.long, device=device)
    labels = torch.tensor([ex.label_ids for ex in examples], dtype=torch.long, device=device)
    return ids, mask, labels


def _logits(model: nn.Module, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    out = model(input_ids=ids, attention_mask=mask)
    return out.logits if hasattr(out, "logits") else out


def batch_loss_sum(model: nn.Module, ids: torch.Tensor, mask: torch.Tensor,
                   labels: torch.Tensor) -> tuple[torch.Tensor, int]:
    """Summed next-token cross entropy over unmasked label positions."""
    logits = _logits(model, ids, mask)
    shifted_logits = logits[:, :-1, :]
    shifted_labels = labels[:, 1:]
    loss = nn.functional.cross_entropy(
        shifted_logits.reshape(-1, shifted_logits.shape[-1]),
        shifted_labels.reshape(-1),
        ignore_index=LABEL_IGNORE,
        reduction="sum",
    )
    return loss, int((shifted_labels != LABEL_IGNORE).sum())


def evaluate_loss(model: nn.Module, examples: Sequence[EncodedExample],
                  micro_batch: int = 8, device: torch.device | None = None) -> float:
    """Token-weighted mean loss over a dataset, eval mode, no grad."""
    device = device or next(model.parameters()).device
    ids, mask, labels = _to_tensors(examples, device)
    was_training = model.training
    model.eval()
    total, tokens = 0.0, 0
    with torch.no_grad():
        for i in range(0, len(examples), micro_batch):
            loss, n = batch_loss_sum(model, ids[i:i + micro_batch],
                                     mask[i:i + micro_batch], labels[i:i + micro_batch])
            total += float(loss)
            tokens += n
    if was_training:
        model.train()
    return total / max(1, tokens)


def _base_fingerprint(frozen_params: list[torch.Tensor]) -> str:
    h = hashlib.sha256()
    for p in frozen_params:
        h.update(p.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def _set_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


def lr_at_step(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup to learning_rate over warmup_steps, then linear decay
    to zero at total_steps. ``step`` is 1-based."""
    if cfg.warmup_steps > 0 and step <= cfg.warmup_steps:
        return cfg.learning_rate * step / cfg.warmup_steps
    remaining = max(1, total_steps - cfg.warmup_steps)
    return cfg.learning_rate * max(0.0, (total_steps - step) / remaining)


def train(
    model: nn.Module,
    train_set: Sequence[EncodedExample],
    val_set: Sequence[EncodedExample],
    cfg: TrainConfig,
    adapter_cfg: AdapterConfig | None = None,
    quant_result: QuantizationResult | None = None,
    out_dir: str | Path | None = None,
    on_step: Callable[[int, float], None] | None = None,
) -> TrainArtifact:
    """Run the fine-tuning recipe on an adapter-attached model.

    The model must already carry adapters (only its trainable parameters are
    optimized; everything else is bitwise-checked frozen each epoch).
    """
    if not train_set:
        raise ValueError("train_set is empty")
    torch.manual_seed(cfg.seed)
    random.seed(cfg.seed)

    device = next(model.parameters()).device
    use_fp16 = cfg.mixed_precision in ("fp16", "16-bit") and device.type == "cuda"
    precision_note = cfg.mixed_precision if use_fp16 else (
        f"fp32 (requested {cfg.mixed_precision}; "
        f"unavailable on {device.type})" if cfg.mixed_precision != "fp32" else "fp32")

    trainable = [p for p in model.parameters() if p.requires_grad]
    if not trainable:
        raise ValueError("model has no trainable parameters; attach adapters first")
    frozen = [p for p in model.parameters() if not p.requires_grad]
    frozen_before = _base_fingerprint(frozen)

    optimizer = torch.optim.AdamW(trainable, lr=cfg.learning_rate, weight_decay=0.0)
    ids, mask, labels = _to_tensors(train_set, device)
    n = len(train_set)
    steps_per_epoch = math.ceil(n / cfg.effective_batch)
    total_steps = cfg.epochs * steps_per_epoch

    out_path = Path(out_dir) if out_dir is not None else None
    ckpt_dir = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        ckpt_dir = out_path / "checkpoints"
        ckpt_dir.mkdir(exist_ok=True)

    loss_log: list[tuple[int, float]] = []
    val_losses: list[tuple[int, float]] = []
    best_val = math.inf
    best_epoch: int | None = None
    shuffler = torch.Generator().manual_seed(cfg.seed)
    step = 0
    model.train()

    def _save_ckpt(name: str) -> None:
        if ckpt_dir is not None:
            torch.save(adapter_state_dict(model), ckpt_dir / f"{name}.pt")

    for epoch in range(1, cfg.epochs + 1):
        perm = torch.randperm(n, generator=shuffler).to(device)
        for s in range(steps_per_epoch):
            batch = perm[s * cfg.effective_batch:(s + 1) * cfg.effective_batch]
            optimizer.zero_grad(set_to_none=True)
            step_tokens = int((labels[batch][:, 1:] != LABEL_IGNORE).sum())
            step_loss = 0.0
            try:
                for k in range(0, len(batch), cfg.micro_batch):
                    mb = batch[k:k + cfg.micro_batch]
                    if use_fp16:
                        with torch.autocast(device_type=device.type, dtype=torch.float16):
                            loss_sum, _ = batch_loss_sum(model, ids[mb], mask[mb], labels[mb])
                    else:
                        loss_sum, _ = batch_loss_sum(model, ids[mb], mask[mb], labels[mb])
                    loss = loss_sum / max(1, step_tokens)
                    loss.backward()
                    step_loss += float(loss.detach())
            except torch.cuda.OutOfMemoryError as exc:
                raise TrainingOutOfMemory(
                    f"out of memory at step {step + 1}; reduce micro_batch "
                    f"(currently {cfg.micro_batch})") from exc
            if not math.isfinite(step_loss):
                _save_ckpt("last")
                raise DivergenceDetected(
                    f"non-finite training loss at step {step + 1}; "
                    f"last good checkpoint is from epoch {epoch - 1}")
            step += 1
            _set_lr(optimizer, lr_at_step(step, total_steps, cfg))
            optimizer.step()
            loss_log.append((step, step_loss))
            if on_step is not None:
                on_step(step, step_loss)

        if _base_fingerprint(frozen) != frozen_before:
            raise RuntimeError(f"frozen base weights changed during epoch {epoch}")
        if val_set:
            vloss = evaluate_loss(model, val_set, cfg.micro_batch, device)
            val_losses.append((epoch, vloss))
            if vloss < best_val:
                best_val = vloss
                best_epoch = epoch
                _save_ckpt("best")
        _save_ckpt("last")

    snapshot = {
        "train": cfg.to_dict(),
        "adapter": adapter_cfg.to_dict() if adapter_cfg else None,
        "quantization": quant_result.snapshot() if quant_result else {"scheme": "none"},
        "optimizer": {"name": "AdamW", "betas": [0.9, 0.999], "weight_decay": 0.0},
        "schedule": {"warmup_steps": cfg.warmup_steps,
                     "decay": "linear_to_zero", "total_steps": total_steps},
        "precision": precision_note,
        "trainable_parameters": trainable_parameter_count(model),
        "steps_per_epoch": steps_per_epoch,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    artifact = TrainArtifact(
        adapter_weights=adapter_state_dict(model),
        config_snapshot=snapshot,
        loss_log=loss_log,
        val_losses=val_losses,
        dataset_fingerprint=dataset_fingerprint(train_set),
        out_dir=out_path,
        best_epoch=best_epoch,
    )
    if out_path is not None:
        save_artifact(artifact, out_path)
    return artifact


def save_artifact(artifact: TrainArtifact, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(artifact.adapter_weights, out / "adapter.pt")
    snapshot = dict(artifact.config_snapshot)
    snapshot["dataset_fingerprint"] = artifact.dataset_fingerprint
    snapshot["best_epoch"] = artifact.best_epoch
    (out / "config.json").write_text(
        json.dumps(snapshot, indent=2) + "\n", encoding="utf-8")
    with open(out / "losses.csv", "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["step", "loss"])
        for step, loss in artifact.loss_log:
            writer.writerow([step, f"{loss:.6f}"])
    with open(out / "val_losses.csv", "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["epoch", "loss"])
        for epoch, loss in artifact.val_losses:
            writer.writerow([epoch, f"{loss:.6f}"])
