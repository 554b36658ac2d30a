from __future__ import annotations

import textwrap

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ukil.survey import (EXPECTED_PANEL_SIZE, EmptyHistogram, FormatError,
                         MissingCase, PublishedMeans, ResponseMatrix,
                         case_average, consistency_report, ingest_star_table,
                         load_bundled_matrix, load_published_means, mean_of,
                         bundled_published_means, statement_cross_case_average,
                         statement_mean, summarize)


def hist(**ratings: int) -> tuple[int, ...]:
    out = [0] * 7
    for key, count in ratings.items():
        out[int(key[1]) - 1] = count
    return tuple(out)


# ---------------------------------------------------------------------------
# statement_mean
# ---------------------------------------------------------------------------

def test_mean_case1_statement1():
    assert statement_mean(hist(r2=1, r4=1, r5=1, r6=1)) == pytest.approx(4.25)


def test_mean_case3_statement1():
    assert statement_mean(hist(r1=1, r2=1, r3=2)) == pytest.approx(2.25)


def test_mean_constant_histogram():
    assert statement_mean(hist(r5=4)) == pytest.approx(5.00)


def test_mean_empty_histogram_raises():
    with pytest.raises(EmptyHistogram):
        statement_mean((0,) * 7)


def test_mean_rejects_negative_bins():
    with pytest.raises(ValueError):
        statement_mean((1, -1, 0, 0, 0, 0, 0))


def test_mean_equals_expanded_brute_force():
    h = hist(r1=2, r3=1, r7=3)
    expanded = [1] * 2 + [3] * 1 + [7] * 3
    assert statement_mean(h) == pytest.approx(sum(expanded) / len(expanded))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=9), min_size=7, max_size=7)
       .filter(lambda h: sum(h) > 0),
       st.integers(min_value=1, max_value=5))
def test_mean_bounded_and_scale_invariant(h, k):
    m = statement_mean(h)
    assert 1.0 <= m <= 7.0
    scaled = [c * k for c in h]
    assert statement_mean(scaled) == pytest.approx(m)


# ---------------------------------------------------------------------------
# aggregation on published numbers
# ---------------------------------------------------------------------------

def test_case2_average_from_published_statement_means():
    means = (5.25, 5.25, 6.00, 5.50, 4.75, 4.75, 5.75)
    assert mean_of(means) == pytest.approx(5.32, abs=0.005)


def test_case3_average_from_published_statement_means():
    means = (2.25, 3.00, 5.00, 5.25, 4.00, 3.75, 5.50)
    assert mean_of(means) == pytest.approx(4.11, abs=0.005)


def test_overall_average_from_published_case_values():
    assert mean_of((5.00, 5.32, 4.11)) == pytest.approx(4.81, abs=0.005)


def test_statement1_cross_case_average():
    assert mean_of((4.25, 5.25, 2.25)) == pytest.approx(3.92, abs=0.005)


def test_statement7_cross_case_average():
    assert mean_of((5.50, 5.75, 5.50)) == pytest.approx(5.58, abs=0.005)


def test_constant_statement_averages_are_identity():
    matrix = ResponseMatrix(
        cases=[1, 2], statements=["only"],
        counts={(1, 1): hist(r4=4), (2, 1): hist(r4=4)})
    assert statement_cross_case_average(matrix, 1) == pytest.approx(4.0)
    assert case_average(matrix, 1) == pytest.approx(4.0)


def test_case_average_permutation_invariant():
    counts = {(1, i): hist(**{f"r{i % 7 + 1}": 4}) for i in range(1, 8)}
    matrix = ResponseMatrix(cases=[1], statements=[f"s{i}" for i in range(1, 8)],
                            counts=counts)
    value = case_average(matrix, 1)
    shuffled = ResponseMatrix(
        cases=[1], statements=matrix.statements,
        counts={(1, i): counts[(1, 8 - i)] for i in range(1, 8)})
    assert case_average(shuffled, 1) == pytest.approx(value)


def test_case_average_missing_case():
    matrix = ResponseMatrix(cases=[1], statements=["s"], counts={(1, 1): hist(r4=4)})
    with pytest.raises(MissingCase):
        case_average(matrix, 9)


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def test_ingest_histogram_row(tmp_path):
    path = tmp_path / "counts.csv"
    path.write_text(textwrap.dedent("""\
        case,statement,count_1,count_2,count_3,count_4,count_5,count_6,count_7
        1,1,0,1,0,1,1,1,0
    """))
    matrix = ingest_star_table(path)
    assert matrix.histogram(1, 1) == hist(r2=1, r4=1, r5=1, r6=1)


def test_ingest_rejects_negative_count(tmp_path):
    path = tmp_path / "counts.csv"
    path.write_text("case,statement,count_1,count_2,count_3,count_4,count_5,count_6,count_7\n"
                    "1,1,0,-1,0,0,0,0,0\n")
    with pytest.raises(FormatError) as info:
        ingest_star_table(path)
    assert "line 2" in str(info.value)


def test_ingest_rejects_empty_file(tmp_path):
    path = tmp_path / "counts.csv"
    path.write_text("")
    with pytest.raises(FormatError):
        ingest_star_table(path)


def test_ingest_rejects_wrong_column_count(tmp_path):
    path = tmp_path / "counts.csv"
    path.write_text("case,statement,count_1,count_2,count_3,count_4,count_5,count_6,count_7\n"
                    "1,1,0,0\n")
    with pytest.raises(FormatError) as info:
        ingest_star_table(path)
    assert "line 2" in str(info.value)


def test_ingest_long_format_collapses_to_histograms(tmp_path):
    path = tmp_path / "long.csv"
    path.write_text(textwrap.dedent("""\
        case,statement,rating
        1,1,2
        1,1,4
        1,1,5
        1,1,6
    """))
    matrix = ingest_star_table(path)
    assert matrix.histogram(1, 1) == hist(r2=1, r4=1, r5=1, r6=1)
    assert matrix.statement_mean(1, 1) == pytest.approx(4.25)


# ---------------------------------------------------------------------------
# bundled transcription and consistency reconciliation
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def bundled():
    matrix = load_bundled_matrix()
    published = load_published_means(bundled_published_means())
    return matrix, published


def test_bundled_matrix_shape(bundled):
    matrix, _ = bundled
    assert matrix.cases == [1, 2, 3]
    assert len(matrix.statements) == 7
    assert len(matrix.counts) == 21


def test_bundled_statement_means_match_published(bundled):
    matrix, _ = bundled
    assert matrix.statement_mean(1, 1) == pytest.approx(4.25, abs=0.005)
    assert matrix.statement_mean(1, 2) == pytest.approx(5.00, abs=0.005)
    assert matrix.statement_mean(3, 1) == pytest.approx(2.25, abs=0.005)
    assert matrix.statement_mean(3, 6) == pytest.approx(3.75, abs=0.005)
    assert matrix.statement_mean(3, 5) == pytest.approx(4.00, abs=0.005)


def test_five_asterisk_row_flagged(bundled):
    matrix, published = bundled
    report = consistency_report(matrix, published)
    assert (2, 2, 5) in report.rows_off_count
    assert len(report.rows_off_count) == 1


def test_known_discrepancies_and_nothing_else(bundled):
    matrix, published = bundled
    report = consistency_report(matrix, published)
    mean_flags = {(m.case_id, m.statement) for m in report.statement_flags()}
    assert mean_flags == {(2, 2), (2, 5), (2, 6)}
    case_flags = {m.case_id for m in report.case_average_flags()}
    assert case_flags == {1}
    assert abs(report.overall_computed - report.overall_published) <= 0.005


def test_matching_rows_are_not_flagged(bundled):
    matrix, published = bundled
    report = consistency_report(matrix, published)
    deltas = {(m.case_id, m.statement): m.delta for m in report.published_vs_computed}
    assert deltas[(1, 1)] == pytest.approx(0.0, abs=1e-12)
    assert abs(deltas[(3, 5)]) <= 0.005


def test_consistency_rows_off_iff_counts_off():
    matrix = ResponseMatrix(cases=[1], statements=["s"],
                            counts={(1, 1): hist(r4=5)})
    published = PublishedMeans(["s"], {(1, 1): 4.0}, {1: 4.0}, {1: 4.0}, 4.0)
    report = consistency_report(matrix, published)
    assert report.rows_off_count == [(1, 1, 5)]

    ok = ResponseMatrix(cases=[1], statements=["s"], counts={(1, 1): hist(r4=4)})
    assert consistency_report(ok, published).rows_off_count == []


def test_summarize_counts_panel_responses(bundled):
    matrix, _ = bundled
    rows = summarize(matrix)
    assert len(rows) == 21
    off = [r for r in rows if r.n_responses != EXPECTED_PANEL_SIZE]
    assert [(r.case_id, r.statement) for r in off] == [(2, 2)]


def test_report_serializes(bundled, tmp_path):
    import json

    from ukil.survey import write_report
    matrix, published = bundled
    report = consistency_report(matrix, published)
    write_report(report, tmp_path / "report.json")
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["expected_panel_size"] == 4
    assert payload["flags"]
