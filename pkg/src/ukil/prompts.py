"""Instruction-tuning records rendered from the curated corpus.

Two templates, one per record kind:

  act:     What do you know about "NAME", "YEAR", Bangladesh?
  section: What do you know about "SECTION" from "NAME", "YEAR", Bangladesh?

The reference answer for an act is the blank-line-joined details of its
sections in ascending section_id order; for a section it is that section's
cleaned details.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .corpus import Act, Section, clean_text


class SplitTooLarge(ValueError):
    """validation_size must leave at least one training record."""


_TRAILING_YEAR = re.compile(r",\s*(\d{4})\s*$")


def split_name_year(act_name: str) -> tuple[str, str]:
    """Break "The Pensions Act, 1871" into ("The Pensions Act", "1871").

    Names without a trailing ", YYYY" keep their full text and get an empty
    year; callers surface that as a build warning.
    """
    m = _TRAILING_YEAR.search(act_name)
    if not m:
        return act_name.strip(), ""
    return act_name[: m.start()].strip(), m.group(1)


def render_act_prompt(act: Act) -> str:
    if not act.name.strip():
        raise ValueError(f"act {act.id} has an empty name")
    name, year = split_name_year(act.name)
    return f'What do you know about "{name}", "{year}", Bangladesh?'


def render_section_prompt(section: Section, act: Act) -> str:
    if not section.name.strip():
        raise ValueError(
            f"section {section.section_id} of act {act.id} has an empty name")
    name, year = split_name_year(act.name)
    return f'What do you know about "{section.name}" from "{name}", "{year}", Bangladesh?'


@dataclass
class PromptRecord:
    prompt: str
    response: str
    kind: str  # "act" | "section"
    act_id: int
    section_id: int | None = None

    @property
    def key(self) -> str:
        if self.kind == "act":
            return f"act:{self.act_id}"
        return f"sec:{self.act_id}:{self.section_id}"

    def to_dict(self) -> dict:
        d = {
            "prompt": self.prompt,
            "response": self.response,
            "kind": self.kind,
            "act_id": self.act_id,
        }
        if self.kind == "section":
            d["section_id"] = self.section_id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PromptRecord":
        return cls(
            prompt=d["prompt"],
            response=d["response"],
            kind=d["kind"],
            act_id=int(d["act_id"]),
            section_id=int(d["section_id"]) if d.get("section_id") is not None else None,
        )


def act_reference_answer(act: Act) -> str:
    """Concatenate section details, ascending section_id, one blank line apart."""
    ordered = sorted(act.sections, key=lambda s: s.section_id)
    return "\n\n".join(clean_text(s.details) for s in ordered)


def build_qa_records(
    corpus: Sequence[Act],
    on_warning: Callable[[str], None] | None = None,
) -> list[PromptRecord]:
    """One act-kind record per act plus one section-kind record per section.

    Order is deterministic: acts ascending by id, sections within each act
    ascending by section_id. The corpus is expected to be curated already
    (repealed acts filtered out).
    """
    warn = on_warning or (lambda msg: None)
    records: list[PromptRecord] = []
    for act in sorted(corpus, key=lambda a: a.id):
        _, year = split_name_year(act.name)
        if not year:
            warn(f"act {act.id} ({act.name!r}) has no parseable year; rendered empty")
        if not act.sections:
            warn(f"act {act.id} has no sections; act record has an empty response")
        records.append(PromptRecord(
            prompt=render_act_prompt(act),
            response=act_reference_answer(act),
            kind="act",
            act_id=act.id,
        ))
        for sec in sorted(act.sections, key=lambda s: s.section_id):
            records.append(PromptRecord(
                prompt=render_section_prompt(sec, act),
                response=clean_text(sec.details),
                kind="section",
                act_id=act.id,
                section_id=sec.section_id,
            ))
    return records


@dataclass
class SplitSpec:
    validation_size: int = 2000
    seed: int = 42


def split(records: Sequence[PromptRecord], spec: SplitSpec) -> tuple[list[PromptRecord], list[PromptRecord]]:
    """Seeded uniform partition into (train, validation).

    Only the seed drives the draw, so two runs (on any platform) produce
    element-wise identical splits. Both halves keep the original record order.
    """
    if not 0 < spec.validation_size < len(records):
        raise SplitTooLarge(
            f"validation_size {spec.validation_size} out of range for "
            f"{len(records)} records")
    positions = list(range(len(records)))
    random.Random(spec.seed).shuffle(positions)
    chosen = set(positions[: spec.validation_size])
    train = [r for i, r in enumerate(records) if i not in chosen]
    validation = [r for i, r in enumerate(records) if i in chosen]
    return train, validation


def save_records(records: Sequence[PromptRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for rec in records:
            fp.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")


def load_records(path: str | Path) -> list[PromptRecord]:
    records = []
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if line:
                records.append(PromptRecord.from_dict(json.loads(line)))
    return records
