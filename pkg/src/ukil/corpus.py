"""Hierarchical act/section corpus: schema, cleaning, validation, statistics.

The on-disk corpus is a UTF-8 JSON array of act objects. Field names follow
the published dataset exactly, including the historical spelling "repelled"
for the repealed flag; ``Act.repealed`` is the readable accessor.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class EmptyCorpus(ValueError):
    """Raised when an operation needs at least one act."""


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

@dataclass
class Section:
    section_id: int
    name: str
    details: str
    related_acts: list[int] = field(default_factory=list)
    act_id: int = 0

    def to_dict(self) -> dict:
        return {
            "section_id": self.section_id,
            "name": self.name,
            "details": self.details,
            "related_acts": list(self.related_acts),
            "act_id": self.act_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Section":
        return cls(
            section_id=int(d["section_id"]),
            name=d.get("name", ""),
            details=d.get("details", ""),
            related_acts=[int(x) for x in d.get("related_acts", [])],
            act_id=int(d.get("act_id", 0)),
        )


@dataclass
class Act:
    id: int
    name: str
    repelled: bool = False
    text: str = ""
    published_date: str | None = None
    related_act: list[int] = field(default_factory=list)
    lower_text: list[str] = field(default_factory=list)
    num_of_sections: int = 0
    sections: list[Section] = field(default_factory=list)

    @property
    def repealed(self) -> bool:
        """Readable alias for the dataset's "repelled" flag."""
        return self.repelled

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "repelled": self.repelled,
            "text": self.text,
            "published_date": self.published_date,
            "related_act": list(self.related_act),
            "lower_text": list(self.lower_text),
            "num_of_sections": self.num_of_sections,
            "sections": [s.to_dict() for s in self.sections],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Act":
        return cls(
            id=int(d["id"]),
            name=d.get("name", ""),
            repelled=bool(d.get("repelled", False)),
            text=d.get("text", ""),
            published_date=d.get("published_date"),
            related_act=[int(x) for x in d.get("related_act", [])],
            lower_text=list(d.get("lower_text", [])),
            num_of_sections=int(d.get("num_of_sections", 0)),
            sections=[Section.from_dict(s) for s in d.get("sections", [])],
        )


def corpus_to_json(corpus: Sequence[Act]) -> str:
    """Canonical serialization; stable key order so round-trips are byte-exact."""
    return json.dumps([a.to_dict() for a in corpus], ensure_ascii=False, indent=2) + "\n"


def corpus_from_json(text: str) -> list[Act]:
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("corpus file must be a top-level JSON array of acts")
    return [Act.from_dict(d) for d in data]


def save_corpus(corpus: Sequence[Act], path: str | Path) -> None:
    Path(path).write_text(corpus_to_json(corpus), encoding="utf-8")


def load_corpus(path: str | Path) -> list[Act]:
    return corpus_from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Cleaning
# ---------------------------------------------------------------------------

_NON_NEWLINE_WS = re.compile(r"[^\S\n]+")
_NEWLINE_RUN = re.compile(r"[ \n]*\n[ \n]*")
_SPACE_RUN = re.compile(r" {2,}")


def clean_text(raw: str) -> str:
    """Normalize scraped text.

    Control characters are dropped, every whitespace run collapses to a single
    space, except runs containing a newline, which collapse to a single newline
    (block structure survives). Non-breaking spaces count as spaces. Idempotent.
    """
    s = raw.replace("\r\n", "\n").replace("\r", "\n")
    s = _NON_NEWLINE_WS.sub(" ", s)
    s = "".join(ch for ch in s if ch == "\n" or ch == " " or unicodedata.category(ch) != "Cc")
    s = _NEWLINE_RUN.sub("\n", s)
    s = _SPACE_RUN.sub(" ", s)
    return s.strip()


# ---------------------------------------------------------------------------
# Curation
# ---------------------------------------------------------------------------

def filter_repealed(corpus: Sequence[Act]) -> list[Act]:
    """Drop acts flagged repelled=true. Pure: the input list is untouched."""
    return [act for act in corpus if not act.repelled]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationIssue:
    act_id: int
    section_id: int | None
    rule: str
    message: str


@dataclass
class ValidationReport:
    errors: list[ValidationIssue] = field(default_factory=list)
    warnings: list[ValidationIssue] = field(default_factory=list)
    checked_acts: int = 0

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_corpus(corpus: Sequence[Act]) -> ValidationReport:
    """Check the hard schema rules; every violation lands in the report.

    Rules: unique act ids, num_of_sections agreeing with the sections list,
    section act_id back-references, unique section ids within an act,
    resolvable related-act links, non-empty section details after cleaning.
    """
    report = ValidationReport(checked_acts=len(corpus))
    known_ids: dict[int, int] = {}
    for act in corpus:
        known_ids[act.id] = known_ids.get(act.id, 0) + 1
    for act_id, count in sorted(known_ids.items()):
        if count > 1:
            report.errors.append(ValidationIssue(
                act_id, None, "unique_act_id",
                f"act id {act_id} appears {count} times"))

    for act in corpus:
        if act.num_of_sections != len(act.sections):
            report.errors.append(ValidationIssue(
                act.id, None, "num_of_sections",
                f"declares {act.num_of_sections} sections but holds {len(act.sections)}"))
        if not act.sections:
            report.warnings.append(ValidationIssue(
                act.id, None, "empty_act", "act has no sections"))
        for ref in act.related_act:
            if ref not in known_ids:
                report.errors.append(ValidationIssue(
                    act.id, None, "related_act_resolvable",
                    f"related_act {ref} not present in corpus"))
        seen_sections: set[int] = set()
        for sec in act.sections:
            if sec.section_id in seen_sections:
                report.errors.append(ValidationIssue(
                    act.id, sec.section_id, "unique_section_id",
                    f"section id {sec.section_id} repeated within act {act.id}"))
            seen_sections.add(sec.section_id)
            if sec.act_id != act.id:
                report.errors.append(ValidationIssue(
                    act.id, sec.section_id, "section_act_backref",
                    f"section {sec.section_id} points at act {sec.act_id}, not owner {act.id}"))
            if not clean_text(sec.details):
                report.errors.append(ValidationIssue(
                    act.id, sec.section_id, "nonempty_details",
                    f"section {sec.section_id} has empty details after cleaning"))
            for ref in sec.related_acts:
                if ref not in known_ids:
                    report.errors.append(ValidationIssue(
                        act.id, sec.section_id, "related_act_resolvable",
                        f"section {sec.section_id} links to missing act {ref}"))
    return report


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass
class CorpusStats:
    act_count: int
    section_count: int
    mean_sections_per_act: float
    mean_act_name_len: float
    mean_act_detail_len: float
    mean_section_name_len: float
    mean_section_detail_len: float

    def to_dict(self) -> dict:
        return {
            "act_count": self.act_count,
            "section_count": self.section_count,
            "mean_sections_per_act": self.mean_sections_per_act,
            "mean_act_name_len": self.mean_act_name_len,
            "mean_act_detail_len": self.mean_act_detail_len,
            "mean_section_name_len": self.mean_section_name_len,
            "mean_section_detail_len": self.mean_section_detail_len,
        }


def _mean(values: Iterable[int]) -> float:
    vals = list(values)
    return sum(vals) / len(vals) if vals else 0.0


def corpus_stats(corpus: Sequence[Act]) -> CorpusStats:
    """Counts and character-length means over the whole corpus.

    Lengths are Unicode code points measured on cleaned text.
    """
    if not corpus:
        raise EmptyCorpus("cannot compute statistics over an empty corpus")
    sections = [s for act in corpus for s in act.sections]
    return CorpusStats(
        act_count=len(corpus),
        section_count=len(sections),
        mean_sections_per_act=len(sections) / len(corpus),
        mean_act_name_len=_mean(len(clean_text(a.name)) for a in corpus),
        mean_act_detail_len=_mean(len(clean_text(a.text)) for a in corpus),
        mean_section_name_len=_mean(len(clean_text(s.name)) for s in sections),
        mean_section_detail_len=_mean(len(clean_text(s.details)) for s in sections),
    )
