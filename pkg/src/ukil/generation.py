"""Question answering over a loaded base-plus-adapter model.

Greedy decoding is the default so every transcript is reproducible; sampling
is available but opt-in. Generation never lets prompt plus new tokens exceed
the model's context window, and flags truncation whenever the budget runs out
before the end-of-sequence token.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import torch

from .adapters import AdapterConfig, attach_adapters, load_adapter_state
from .encoding import MAX_LENGTH, PROMPT_RESPONSE_SEPARATOR
from .quantization import QuantConfig, quantize_base


class PromptTooLong(ValueError):
    """Question does not fit the model context window."""


class GenerationError(RuntimeError):
    """Decoding failed."""


class LoadError(RuntimeError):
    """Base model or adapter files are missing or unreadable."""


class AdapterMismatch(RuntimeError):
    """Adapter snapshot is incompatible with the requested base model."""


@dataclass
class GenerationParams:
    strategy: str = "greedy"  # "greedy" | "sampled"
    max_new_tokens: int | None = None  # default: 768 minus prompt length
    temperature: float = 1.0
    seed: int = 42

    def __post_init__(self):
        if self.strategy not in ("greedy", "sampled"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class Transcript:
    case_id: int | None
    question: str
    answer: str
    truncated: bool
    latency_ms: float
    model_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "question": self.question,
            "answer": self.answer,
            "truncated": self.truncated,
            "latency_ms": round(self.latency_ms, 3),
            "model_fingerprint": self.model_fingerprint,
        }


class Answerer(Protocol):
    fingerprint: str

    def answer(self, question: str, params: GenerationParams | None = None,
               case_id: int | None = None) -> Transcript: ...


class ModelHandle:
    """A ready-to-generate (model, tokenizer) pair."""

    def __init__(self, model, tokenizer, fingerprint: str = "",
                 context_window: int | None = None):
        self.model = model
        self.tokenizer = tokenizer
        self.fingerprint = fingerprint or "unfingerprinted"
        config = getattr(model, "config", None)
        self.context_window = context_window or getattr(config, "n_positions", MAX_LENGTH)
        model.eval()

    def answer(self, question: str, params: GenerationParams | None = None,
               case_id: int | None = None) -> Transcript:
        params = params or GenerationParams()
        question = question.strip()
        if not question:
            raise ValueError("question is empty")
        start = time.perf_counter()
        prompt_ids = list(self.tokenizer.encode(question + PROMPT_RESPONSE_SEPARATOR))
        if len(prompt_ids) >= self.context_window:
            raise PromptTooLong(
                f"prompt is {len(prompt_ids)} tokens; context window is "
                f"{self.context_window}")
        budget = params.max_new_tokens
        if budget is None:
            budget = MAX_LENGTH - len(prompt_ids)
        budget = max(1, min(budget, self.context_window - len(prompt_ids)))

        eos_id = getattr(self.tokenizer, "eos_token_id", None)
        sampler = None
        if params.strategy == "sampled":
            sampler = torch.Generator().manual_seed(params.seed)
        generated: list[int] = []
        try:
            with torch.no_grad():
                ids = torch.tensor([prompt_ids], dtype=torch.long)
                for _ in range(budget):
                    logits = self.model(input_ids=ids).logits[0, -1]
                    if params.strategy == "greedy":
                        next_id = int(torch.argmax(logits))
                    else:
                        probs = torch.softmax(logits / params.temperature, dim=-1)
                        next_id = int(torch.multinomial(probs, 1, generator=sampler))
                    if eos_id is not None and next_id == eos_id:
                        break
                    generated.append(next_id)
                    ids = torch.cat(
                        [ids, torch.tensor([[next_id]], dtype=torch.long)], dim=1)
        except (PromptTooLong, ValueError):
            raise
        except Exception as exc:  # noqa: BLE001 - decoding failures get one type
            raise GenerationError(f"decoding failed: {exc}") from exc
        truncated = len(generated) >= budget
        answer_text = self.tokenizer.decode(generated)
        return Transcript(
            case_id=case_id,
            question=question,
            answer=answer_text,
            truncated=truncated,
            latency_ms=(time.perf_counter() - start) * 1000.0,
            model_fingerprint=self.fingerprint,
        )


class StubAnswerer:
    """Deterministic stand-in for API tests; no model weights involved."""

    def __init__(self, fingerprint: str = "stub-0", truncate_marker: str = "[long]"):
        self.fingerprint = fingerprint
        self.truncate_marker = truncate_marker

    def answer(self, question: str, params: GenerationParams | None = None,
               case_id: int | None = None) -> Transcript:
        question = question.strip()
        if not question:
            raise ValueError("question is empty")
        start = time.perf_counter()
        digest = hashlib.sha256(question.encode("utf-8")).hexdigest()[:8]
        truncated = self.truncate_marker in question
        return Transcript(
            case_id=case_id,
            question=question,
            answer=f"Stub answer {digest} to: {question[:60]}",
            truncated=truncated,
            latency_ms=(time.perf_counter() - start) * 1000.0 + 0.001,
            model_fingerprint=self.fingerprint,
        )


def _fingerprint_bytes(*chunks: bytes) -> str:
    h = hashlib.sha256()
    for chunk in chunks:
        h.update(chunk)
    return h.hexdigest()[:16]


def load(base_id: str | Path, adapter_path: str | Path | None = None,
         quant: QuantConfig | None = None) -> ModelHandle:
    """Load a base model, optionally quantize it and attach trained adapters.

    ``base_id`` is a directory produced by :func:`ukil.toybase.save_toy_base`
    (or any transformers model directory; a word-level ``vocab.json`` marks
    the bundled toy tokenizer). ``adapter_path`` is a training run directory
    holding ``adapter.pt`` and ``config.json``; its snapshot decides the
    quantization scheme unless ``quant`` overrides it.
    """
    from transformers import GPT2LMHeadModel

    base_dir = Path(base_id)
    if not base_dir.exists():
        raise LoadError(f"base model directory {base_dir} does not exist")
    try:
        model = GPT2LMHeadModel.from_pretrained(base_dir)
    except Exception as exc:  # noqa: BLE001
        raise LoadError(f"cannot load base model from {base_dir}: {exc}") from exc
    vocab_path = base_dir / "vocab.json"
    if vocab_path.exists():
        from .encoding import WordTokenizer
        tokenizer = WordTokenizer.load(vocab_path)
    else:
        raise LoadError(f"{base_dir} has no vocab.json tokenizer")

    fingerprint_parts = [json.dumps(model.config.to_dict(), sort_keys=True).encode()]
    if adapter_path is not None:
        run_dir = Path(adapter_path)
        weights_file = run_dir / "adapter.pt"
        config_file = run_dir / "config.json"
        if not weights_file.exists() or not config_file.exists():
            raise LoadError(f"{run_dir} is missing adapter.pt or config.json")
        snapshot = json.loads(config_file.read_text(encoding="utf-8"))
        adapter_cfg = AdapterConfig.from_dict(snapshot["adapter"]) \
            if snapshot.get("adapter") else AdapterConfig()
        if quant is None:
            scheme = (snapshot.get("quantization") or {}).get("scheme", "none")
            quant = QuantConfig(scheme=scheme if scheme != "none" else "none")
        if quant.scheme != "none":
            quantize_base(model, quant)
        attach_adapters(model, adapter_cfg)
        state = torch.load(weights_file, map_location="cpu", weights_only=True)
        try:
            load_adapter_state(model, state)
        except (KeyError, ValueError) as exc:
            raise AdapterMismatch(
                f"adapter snapshot from {run_dir} does not fit this base: {exc}"
            ) from exc
        fingerprint_parts.append(weights_file.read_bytes())
    elif quant is not None and quant.scheme != "none":
        quantize_base(model, quant)

    handle = ModelHandle(
        model, tokenizer,
        fingerprint=_fingerprint_bytes(*fingerprint_parts),
    )
    return handle
