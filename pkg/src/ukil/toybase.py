"""Desk-scale stand-in for the pretrained base model.

Full-scale runs fine-tune a pretrained hub model; this environment-free
alternative pretrains a tiny word-level GPT-2 on bundled boilerplate statute
text so the adapter recipe, quantization, generation, and evaluation paths
can be exercised end to end in minutes on a CPU.

The bundled toy corpus leans on a real property of statute law: acts repeat
near-identical boilerplate sections ("Power to make rules", penalty clauses,
savings clauses) with the act's own name substituted in. The pretraining
stream covers those patterns for a disjoint set of acts, so the toy base
knows the language of the domain but has never seen the fine-tuning acts or
the question-answer format.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Sequence

import torch
from torch import nn

from .corpus import Act, Section
from .encoding import WordTokenizer
from .prompts import build_qa_records

BOILERPLATE = {
    "Short title and commencement":
        "This Act may be called {act} and it shall come into force at once.",
    "Power to make rules":
        "The Government may by notification in the official Gazette make rules "
        "for carrying out the purposes of {act}.",
    "Penalty":
        "Whoever contravenes any provision of {act} shall be punished with fine "
        "which may extend to one thousand Taka.",
    "Delegation of powers":
        "The Government may by order direct that any power exercisable by it "
        "under {act} shall be exercisable also by any officer so authorised.",
    "Savings":
        "Nothing in {act} shall affect any liability incurred before the "
        "commencement of {act}.",
}

_TOY_ACT_NAMES = [f"The Toy Act No {k}, {1870 + k}" for k in range(10)]
_PRETRAIN_ACT_NAMES = [f"The Sample Act No {k}, {1900 + k}" for k in range(40)]

DEFAULT_PRETRAIN_STEPS = 800
DEFAULT_SEQ_LEN = 80


def _make_act(act_id: int, name: str) -> Act:
    sections = [
        Section(section_id=i + 1, name=sec_name,
                details=pattern.format(act=name), act_id=act_id)
        for i, (sec_name, pattern) in enumerate(BOILERPLATE.items())
    ]
    return Act(id=act_id, name=name, text=f"An Act to consolidate the law known as {name}.",
               num_of_sections=len(sections), sections=sections)


def toy_corpus() -> list[Act]:
    """Ten acts of five boilerplate sections each; 50 section records."""
    return [_make_act(i + 1, name) for i, name in enumerate(_TOY_ACT_NAMES)]


def pretraining_texts() -> list[str]:
    """Raw statute text for a disjoint set of acts, section name included."""
    return [f"{sec_name}. {pattern.format(act=act_name)}"
            for act_name in _PRETRAIN_ACT_NAMES
            for sec_name, pattern in BOILERPLATE.items()]


def build_toy_tokenizer() -> WordTokenizer:
    """Word vocabulary covering pretraining text and the rendered QA records."""
    texts = list(pretraining_texts())
    for record in build_qa_records(toy_corpus()):
        texts.append(record.prompt)
        texts.append(record.response)
    return WordTokenizer.train(texts)


def _pretrain_batch(texts: Sequence[list[int]], idx: torch.Tensor, seq_len: int,
                    pad_id: int, ignore: int = -100):
    ids = torch.full((len(idx), seq_len), pad_id, dtype=torch.long)
    labels = torch.full((len(idx), seq_len), ignore, dtype=torch.long)
    mask = torch.zeros((len(idx), seq_len), dtype=torch.long)
    for row, i in enumerate(idx.tolist()):
        toks = texts[i][:seq_len]
        ids[row, : len(toks)] = torch.tensor(toks)
        labels[row, : len(toks)] = torch.tensor(toks)
        mask[row, : len(toks)] = 1
    return ids, mask, labels


def pretrain_toy_base(
    tokenizer: WordTokenizer | None = None,
    steps: int = DEFAULT_PRETRAIN_STEPS,
    n_embd: int = 192,
    n_layer: int = 3,
    n_head: int = 4,
    n_positions: int = 256,
    seq_len: int = DEFAULT_SEQ_LEN,
    batch_size: int = 16,
    learning_rate: float = 1e-3,
    seed: int = 7,
    on_step: Callable[[int, float], None] | None = None,
):
    """Pretrain the tiny base with a plain causal-LM objective.

    Returns (model, tokenizer). Deterministic for fixed arguments.
    """
    from transformers import GPT2Config, GPT2LMHeadModel

    tokenizer = tokenizer or build_toy_tokenizer()
    encoded = [tok + [tokenizer.eos_token_id]
               for tok in (tokenizer.encode(t) for t in pretraining_texts())]

    torch.manual_seed(42)
    config = GPT2Config(
        vocab_size=tokenizer.vocab_size,
        n_positions=n_positions,
        n_embd=n_embd,
        n_layer=n_layer,
        n_head=n_head,
        bos_token_id=tokenizer.eos_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    model = GPT2LMHeadModel(config)
    optimizer = torch.optim.AdamW(model.parameters(), lr=learning_rate, weight_decay=0.0)
    sampler = torch.Generator().manual_seed(seed)
    model.train()
    for step in range(1, steps + 1):
        idx = torch.randint(0, len(encoded), (batch_size,), generator=sampler)
        ids, mask, labels = _pretrain_batch(encoded, idx, seq_len, tokenizer.pad_token_id)
        logits = model(input_ids=ids, attention_mask=mask).logits
        loss = nn.functional.cross_entropy(
            logits[:, :-1].reshape(-1, config.vocab_size),
            labels[:, 1:].reshape(-1),
            ignore_index=-100,
        )
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
        if on_step is not None:
            on_step(step, float(loss))
    model.eval()
    return model, tokenizer


def save_toy_base(model: nn.Module, tokenizer: WordTokenizer, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    tokenizer.save(out / "vocab.json")
    (out / "tokenizer_kind.json").write_text(
        json.dumps({"kind": "word-level"}), encoding="utf-8")
    return out


def load_toy_base(path: str | Path):
    from transformers import GPT2LMHeadModel

    base_dir = Path(path)
    model = GPT2LMHeadModel.from_pretrained(base_dir)
    model.eval()
    tokenizer = WordTokenizer.load(base_dir / "vocab.json")
    return model, tokenizer
