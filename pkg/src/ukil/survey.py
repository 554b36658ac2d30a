"""Expert case-study survey aggregation and reconciliation.

The expert panel rated each of three demonstration cases against seven
affirmative statements on a 1..7 Likert scale (Strongly Disagree .. Strongly
Agree). Responses arrive as per-(case, statement) histograms over the seven
ratings, matching the released asterisk-count tables; a per-expert long
format is also accepted and collapsed into histograms.

All aggregation is unweighted arithmetic means: a statement mean is the
rating-weighted mean of its histogram, a per-case average is the mean of the
seven statement means, the overall score is the mean of the per-case
averages. The consistency report recomputes everything from the raw counts
and flags disagreements with the published summary instead of patching them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

RATINGS = (1, 2, 3, 4, 5, 6, 7)
EXPECTED_PANEL_SIZE = 4
MEAN_TOLERANCE = 0.005


class FormatError(ValueError):
    """Malformed survey input file."""


class EmptyHistogram(ValueError):
    """A statement mean needs at least one response."""


class MissingStatement(KeyError):
    """A case average needs all seven statements."""


class MissingCase(KeyError):
    """A cross-case average needs every case."""


Histogram = tuple[int, int, int, int, int, int, int]


def statement_mean(hist: Sequence[int]) -> float:
    """Rating-weighted arithmetic mean of a 7-bin histogram."""
    if len(hist) != 7:
        raise ValueError(f"expected 7 bins, got {len(hist)}")
    if any(c < 0 for c in hist):
        raise ValueError("histogram bins must be non-negative")
    total = sum(hist)
    if total == 0:
        raise EmptyHistogram("no responses recorded")
    return sum(r * c for r, c in zip(RATINGS, hist)) / total


def mean_of(values: Sequence[float]) -> float:
    return sum(values) / len(values)


@dataclass
class ResponseMatrix:
    cases: list[int]
    statements: list[str]
    counts: dict[tuple[int, int], Histogram] = field(default_factory=dict)

    def histogram(self, case_id: int, statement: int) -> Histogram:
        try:
            return self.counts[(case_id, statement)]
        except KeyError:
            raise MissingStatement(f"case {case_id} statement {statement}") from None

    def statement_mean(self, case_id: int, statement: int) -> float:
        return statement_mean(self.histogram(case_id, statement))


@dataclass
class StatementSummary:
    case_id: int
    statement: int
    mean: float
    n_responses: int


def summarize(matrix: ResponseMatrix) -> list[StatementSummary]:
    out = []
    for case_id in matrix.cases:
        for idx in range(1, len(matrix.statements) + 1):
            hist = matrix.histogram(case_id, idx)
            out.append(StatementSummary(case_id, idx, statement_mean(hist), sum(hist)))
    return out


def case_average(matrix: ResponseMatrix, case_id: int) -> float:
    """Mean of the seven statement means for one case."""
    if case_id not in matrix.cases:
        raise MissingCase(str(case_id))
    means = [matrix.statement_mean(case_id, idx)
             for idx in range(1, len(matrix.statements) + 1)]
    return mean_of(means)


def statement_cross_case_average(matrix: ResponseMatrix, statement: int) -> float:
    """Mean of one statement's per-case means across all cases."""
    means = [matrix.statement_mean(case_id, statement) for case_id in matrix.cases]
    return mean_of(means)


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _parse_count(value: str, line_no: int) -> int:
    try:
        n = int(value)
    except ValueError as exc:
        raise FormatError(f"line {line_no}: count {value!r} is not an integer") from exc
    if n < 0:
        raise FormatError(f"line {line_no}: negative count {n}")
    return n


def ingest_star_table(path: str | Path, statements: Sequence[str] | None = None) -> ResponseMatrix:
    """Read a histogram CSV: case, statement, count_1 .. count_7.

    A per-expert long format (case, statement, rating) is detected by header
    and collapsed into histograms. Malformed rows are rejected with their line
    numbers.
    """
    rows = list(csv.reader(Path(path).read_text(encoding="utf-8").splitlines()))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    counts: dict[tuple[int, int], list[int]] = {}
    if header[:2] == ["case", "statement"] and "rating" in header:
        rating_col = header.index("rating")
        for line_no, row in enumerate(rows[1:], start=2):
            if len(row) <= rating_col:
                raise FormatError(f"line {line_no}: expected a rating column")
            case_id = _parse_count(row[0], line_no)
            statement = _parse_count(row[1], line_no)
            rating = _parse_count(row[rating_col], line_no)
            if rating not in RATINGS:
                raise FormatError(f"line {line_no}: rating {rating} outside 1..7")
            hist = counts.setdefault((case_id, statement), [0] * 7)
            hist[rating - 1] += 1
    elif header == ["case", "statement"] + [f"count_{r}" for r in RATINGS]:
        for line_no, row in enumerate(rows[1:], start=2):
            if len(row) != 9:
                raise FormatError(f"line {line_no}: expected 9 columns, got {len(row)}")
            case_id = _parse_count(row[0], line_no)
            statement = _parse_count(row[1], line_no)
            if (case_id, statement) in counts:
                raise FormatError(f"line {line_no}: duplicate (case, statement)")
            counts[(case_id, statement)] = [
                _parse_count(cell, line_no) for cell in row[2:9]]
    else:
        raise FormatError(f"{path}: unrecognized header {rows[0]!r}")

    cases = sorted({c for c, _ in counts})
    n_statements = max((s for _, s in counts), default=0)
    if statements is None:
        statements = [f"Statement {i}" for i in range(1, n_statements + 1)]
    return ResponseMatrix(
        cases=cases,
        statements=list(statements),
        counts={k: tuple(v) for k, v in counts.items()},
    )


@dataclass
class PublishedMeans:
    """The released summary: per-statement means by case, row averages,
    per-case averages, and the overall score."""

    statements: list[str]
    by_case: dict[tuple[int, int], float]        # (case, statement) -> mean
    row_average: dict[int, float]                # statement -> cross-case mean
    case_average: dict[int, float]               # case -> per-case average
    overall: float


def load_published_means(path: str | Path) -> PublishedMeans:
    rows = list(csv.DictReader(Path(path).read_text(encoding="utf-8").splitlines()))
    if not rows:
        raise FormatError(f"{path}: empty file")
    statements: list[str] = []
    by_case: dict[tuple[int, int], float] = {}
    row_average: dict[int, float] = {}
    case_avg: dict[int, float] = {}
    overall = None
    case_cols = [c for c in rows[0] if c.startswith("case_")]
    for row in rows:
        label = row["statement"].strip()
        if label == "per_case_average":
            for col in case_cols:
                case_avg[int(col.split("_")[1])] = float(row[col])
            overall = float(row["average"])
            continue
        idx = int(label)
        statements.append(row.get("text", f"Statement {idx}"))
        for col in case_cols:
            by_case[(int(col.split("_")[1]), idx)] = float(row[col])
        row_average[idx] = float(row["average"])
    if overall is None:
        raise FormatError(f"{path}: missing per_case_average row")
    return PublishedMeans(statements, by_case, row_average, case_avg, overall)


# ---------------------------------------------------------------------------
# Consistency reconciliation
# ---------------------------------------------------------------------------

@dataclass
class MeanMismatch:
    case_id: int
    statement: int | None  # None marks a per-case average comparison
    published: float
    computed: float

    @property
    def delta(self) -> float:
        return self.computed - self.published


@dataclass
class ConsistencyReport:
    expected_panel_size: int
    rows_off_count: list[tuple[int, int, int]]            # (case, statement, n)
    published_vs_computed: list[MeanMismatch]             # statement-level, all rows
    case_average_comparisons: list[MeanMismatch]          # per-case level, all rows
    overall_published: float
    overall_computed: float

    def statement_flags(self) -> list[MeanMismatch]:
        return [m for m in self.published_vs_computed if abs(m.delta) > MEAN_TOLERANCE]

    def case_average_flags(self) -> list[MeanMismatch]:
        return [m for m in self.case_average_comparisons if abs(m.delta) > MEAN_TOLERANCE]

    def flags(self) -> list[str]:
        """Stable labels for everything the reconciliation flagged."""
        labels = [f"count:C{c}S{s}(n={n})" for c, s, n in self.rows_off_count]
        labels += [f"mean:C{m.case_id}S{m.statement}" for m in self.statement_flags()]
        labels += [f"case_average:C{m.case_id}" for m in self.case_average_flags()]
        if abs(self.overall_computed - self.overall_published) > MEAN_TOLERANCE:
            labels.append("overall")
        return labels

    def to_dict(self) -> dict:
        return {
            "expected_panel_size": self.expected_panel_size,
            "rows_off_count": [
                {"case": c, "statement": s, "n": n} for c, s, n in self.rows_off_count],
            "published_vs_computed": [
                {"case": m.case_id, "statement": m.statement,
                 "published": m.published, "computed": round(m.computed, 4),
                 "delta": round(m.delta, 4)}
                for m in self.published_vs_computed],
            "case_average_comparisons": [
                {"case": m.case_id, "published": m.published,
                 "computed": round(m.computed, 4), "delta": round(m.delta, 4)}
                for m in self.case_average_comparisons],
            "overall": {"published": self.overall_published,
                        "computed": round(self.overall_computed, 4)},
            "flags": self.flags(),
        }


def consistency_report(matrix: ResponseMatrix, published: PublishedMeans) -> ConsistencyReport:
    """Reconcile raw counts against the published summary.

    Statement means are recomputed from histograms. Per-case averages are
    recomputed from the published statement means (that is the arithmetic the
    summary table claims), so a summary whose own rows disagree with its
    averages is flagged even when the raw counts agree with the rows.
    """
    rows_off = []
    statement_cmp = []
    for case_id in matrix.cases:
        for idx in range(1, len(matrix.statements) + 1):
            hist = matrix.histogram(case_id, idx)
            n = sum(hist)
            if n != EXPECTED_PANEL_SIZE:
                rows_off.append((case_id, idx, n))
            if (case_id, idx) in published.by_case:
                statement_cmp.append(MeanMismatch(
                    case_id, idx,
                    published=published.by_case[(case_id, idx)],
                    computed=statement_mean(hist),
                ))
    case_cmp = []
    for case_id in matrix.cases:
        if case_id not in published.case_average:
            continue
        published_statement_means = [
            published.by_case[(case_id, idx)]
            for idx in range(1, len(matrix.statements) + 1)
            if (case_id, idx) in published.by_case]
        case_cmp.append(MeanMismatch(
            case_id, None,
            published=published.case_average[case_id],
            computed=mean_of(published_statement_means),
        ))
    overall_computed = mean_of([published.case_average[c]
                                for c in sorted(published.case_average)])
    return ConsistencyReport(
        expected_panel_size=EXPECTED_PANEL_SIZE,
        rows_off_count=rows_off,
        published_vs_computed=statement_cmp,
        case_average_comparisons=case_cmp,
        overall_published=published.overall,
        overall_computed=overall_computed,
    )


def write_report(report: ConsistencyReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8")


# ---------------------------------------------------------------------------
# Bundled transcriptions
# ---------------------------------------------------------------------------

def _data_path(name: str) -> Path:
    return Path(str(resources.files("ukil.data") / name))


def bundled_response_counts() -> Path:
    """Histogram transcription of the released detailed results table."""
    return _data_path("case_study_response_counts.csv")


def bundled_published_means() -> Path:
    """Transcription of the released summary means table."""
    return _data_path("case_study_published_means.csv")


def load_bundled_matrix() -> ResponseMatrix:
    published = load_published_means(bundled_published_means())
    return ingest_star_table(bundled_response_counts(), statements=published.statements)
