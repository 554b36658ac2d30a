"""Token encoding under the fixed-length training contract.

Every encoded example is exactly ``max_length`` (default 768) positions long:
prompt and response tokenized as one causal sequence, truncated then padded,
with loss labels masked (-100) on prompt and padding positions.

Any tokenizer exposing ``encode(text) -> list[int]`` plus a ``pad_token_id``
works here, which covers the pretrained model tokenizers from ``transformers``
(set ``pad_token = eos_token`` for GPT-2 style vocabularies) as well as the
package's own word-level tokenizer used at toy scale.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .prompts import PromptRecord

MAX_LENGTH = 768
LABEL_IGNORE = -100

PROMPT_RESPONSE_SEPARATOR = "\n"


class TokenizerError(RuntimeError):
    """Tokenizer missing required attributes or unable to encode."""


class SupportsEncode(Protocol):
    pad_token_id: int

    def encode(self, text: str) -> list[int]: ...


@dataclass
class EncodedExample:
    token_ids: list[int]
    attention_mask: list[int]
    label_ids: list[int]

    def __post_init__(self):
        if not (len(self.token_ids) == len(self.attention_mask) == len(self.label_ids)):
            raise ValueError("encoded sequences must share one length")


def encode(record: PromptRecord, tokenizer: SupportsEncode,
           max_length: int = MAX_LENGTH) -> EncodedExample:
    """Encode one record to exactly ``max_length`` positions."""
    pad_id = getattr(tokenizer, "pad_token_id", None)
    if pad_id is None:
        raise TokenizerError("tokenizer must define pad_token_id")
    try:
        prompt_ids = list(tokenizer.encode(record.prompt + PROMPT_RESPONSE_SEPARATOR))
        response_ids = list(tokenizer.encode(record.response)) if record.response else []
    except Exception as exc:  # noqa: BLE001 - surface a typed error
        raise TokenizerError(f"failed to encode record {record.key}: {exc}") from exc
    eos_id = getattr(tokenizer, "eos_token_id", None)
    if eos_id is not None and record.response:
        response_ids.append(eos_id)

    ids = (prompt_ids + response_ids)[:max_length]
    labels = ([LABEL_IGNORE] * len(prompt_ids) + response_ids)[:max_length]
    mask = [1] * len(ids)

    pad_count = max_length - len(ids)
    ids += [pad_id] * pad_count
    labels += [LABEL_IGNORE] * pad_count
    mask += [0] * pad_count
    return EncodedExample(token_ids=ids, attention_mask=mask, label_ids=labels)


def encode_records(records: Sequence[PromptRecord], tokenizer: SupportsEncode,
                   max_length: int = MAX_LENGTH) -> list[EncodedExample]:
    return [encode(r, tokenizer, max_length) for r in records]


# ---------------------------------------------------------------------------
# Word-level tokenizer for toy-scale runs
# ---------------------------------------------------------------------------

_WORD_OR_PUNCT = re.compile(r"[^\W_]+|[^\w\s]", re.UNICODE)


def word_split(text: str) -> list[str]:
    return _WORD_OR_PUNCT.findall(text)


class WordTokenizer:
    """Deterministic word-level vocabulary built from a text sample.

    ids 0..2 are reserved: pad, unk, eos. Decoding joins tokens with spaces,
    which is rough but adequate for toy-scale similarity checks.
    """

    PAD, UNK, EOS = 0, 1, 2

    def __init__(self, vocab: dict[str, int]):
        self.vocab = vocab
        self.inverse = {i: w for w, i in vocab.items()}
        self.pad_token_id = self.PAD
        self.eos_token_id = self.EOS
        self.unk_token_id = self.UNK

    @classmethod
    def train(cls, texts: Iterable[str]) -> "WordTokenizer":
        words = sorted({w for t in texts for w in word_split(t)})
        return cls({w: i + 3 for i, w in enumerate(words)})

    @property
    def vocab_size(self) -> int:
        return len(self.vocab) + 3

    def encode(self, text: str) -> list[int]:
        return [self.vocab.get(w, self.UNK) for w in word_split(text)]

    def decode(self, ids: Iterable[int]) -> str:
        words = []
        for i in ids:
            if i in (self.PAD, self.EOS):
                continue
            words.append(self.inverse.get(i, "<unk>"))
        return " ".join(words)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.vocab, ensure_ascii=False, indent=0), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordTokenizer":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))
