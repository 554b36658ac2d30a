"""Model-output scoring and benchmark reporting.

``evaluate_model`` pairs generated answers with reference answers by key,
scores each pair with cosine (tf-idf, idf fitted on the references) and
Jaccard, and aggregates arithmetic means. ``comparison_report`` renders rows
of per-model aggregates as CSV plus an aligned text table.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .metrics import (DEFAULT_TOKENIZATION, IdfTable, MetricTokenization,
                      cosine_similarity, jaccard)


class KeyMismatch(ValueError):
    """Output keys and reference keys are not the same set."""


@dataclass
class ExampleScore:
    key: str
    cosine: float
    jaccard: float


@dataclass
class EvalResult:
    model_name: str
    mean_cosine: float
    mean_jaccard: float
    per_example: list[ExampleScore]
    n: int
    tokenization: str = ""
    weighting: str = "tfidf"


def evaluate_model(
    outputs: Sequence[tuple[str, str]],
    references: Sequence[tuple[str, str]],
    model_name: str = "model",
    idf: IdfTable | None = None,
    tokenization: MetricTokenization = DEFAULT_TOKENIZATION,
) -> EvalResult:
    """Score (key, text) outputs against (key, text) references.

    When no idf table is supplied one is fitted on the reference texts, per
    the evaluation design: both sides are weighted with reference-corpus idf.
    """
    out_map = dict(outputs)
    ref_map = dict(references)
    if set(out_map) != set(ref_map):
        missing = set(ref_map) - set(out_map)
        extra = set(out_map) - set(ref_map)
        raise KeyMismatch(f"missing={sorted(missing)[:5]} extra={sorted(extra)[:5]}")
    if idf is None:
        idf = IdfTable.fit(ref_map.values(), tokenization)
    scores = []
    for key in sorted(ref_map):
        scores.append(ExampleScore(
            key=key,
            cosine=cosine_similarity(out_map[key], ref_map[key], idf, tokenization),
            jaccard=jaccard(out_map[key], ref_map[key], tokenization),
        ))
    n = len(scores)
    return EvalResult(
        model_name=model_name,
        mean_cosine=sum(s.cosine for s in scores) / n if n else 0.0,
        mean_jaccard=sum(s.jaccard for s in scores) / n if n else 0.0,
        per_example=scores,
        n=n,
        tokenization=tokenization.describe(),
        weighting="tfidf",
    )


# ---------------------------------------------------------------------------
# Comparison table
# ---------------------------------------------------------------------------

@dataclass
class ComparisonRow:
    model: str
    parameters: str
    fine_tuned: bool
    cosine: float
    jaccard: float


_HEADERS = ("Model", "Parameters", "Fine-tuned?", "Cosine Sim.", "Jaccard Sim.")


def _row_cells(row: ComparisonRow) -> tuple[str, ...]:
    return (row.model, row.parameters, "Yes" if row.fine_tuned else "No",
            f"{row.cosine:.3f}", f"{row.jaccard:.3f}")


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    if not rows:
        raise ValueError("comparison needs at least one row")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_HEADERS)
    for row in rows:
        writer.writerow(_row_cells(row))
    return buf.getvalue()


def comparison_text(rows: Sequence[ComparisonRow]) -> str:
    if not rows:
        raise ValueError("comparison needs at least one row")
    table = [_HEADERS] + [_row_cells(r) for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(_HEADERS))]
    lines = []
    for idx, line in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def comparison_report(rows: Sequence[ComparisonRow], out_dir: str | Path | None = None) -> dict:
    """Render the comparison as CSV and aligned text; optionally write both."""
    artifact = {"csv": comparison_csv(rows), "text": comparison_text(rows)}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.csv").write_text(artifact["csv"], encoding="utf-8")
        (out / "comparison.txt").write_text(artifact["text"], encoding="utf-8")
    return artifact


# ---------------------------------------------------------------------------
# Error-analysis dossiers
# ---------------------------------------------------------------------------

@dataclass
class ErrorCase:
    question: str
    expected: str
    actual: str
    cosine: float
    jaccard: float
    annotations: str = ""

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "expected": self.expected,
            "actual": self.actual,
            "cosine": self.cosine,
            "jaccard": self.jaccard,
            "annotations": self.annotations,
        }


def error_case(question: str, expected: str, actual: str,
               idf: IdfTable | None = None, annotations: str = "") -> ErrorCase:
    """Bundle a question/expected/actual triple with both metric scores."""
    return ErrorCase(
        question=question,
        expected=expected,
        actual=actual,
        cosine=cosine_similarity(expected, actual, idf),
        jaccard=jaccard(expected, actual),
        annotations=annotations,
    )


def write_error_cases(cases: Sequence[ErrorCase], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, case in enumerate(cases, start=1):
        slug = re.sub(r"[^a-z0-9]+", "-", case.question.lower()).strip("-")[:48] or "case"
        path = out / f"{i:03d}-{slug}.json"
        path.write_text(json.dumps(case.to_dict(), ensure_ascii=False, indent=2),
                        encoding="utf-8")
        paths.append(path)
    return paths


def write_scores_csv(result: EvalResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["key", "cosine", "jaccard"])
        for s in result.per_example:
            writer.writerow([s.key, f"{s.cosine:.6f}", f"{s.jaccard:.6f}"])
        writer.writerow(["mean", f"{result.mean_cosine:.6f}", f"{result.mean_jaccard:.6f}"])
