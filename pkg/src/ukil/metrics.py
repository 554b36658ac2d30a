"""Text-similarity metrics: Jaccard index over token sets and cosine
similarity over (optionally idf-weighted) term-frequency vectors.

Both metrics share one tokenization rule, configured in a single place and
recorded alongside every aggregate result: lowercase, then split on any
maximal run of non-alphanumeric characters. Jaccard dedupes tokens into sets;
cosine keeps frequencies.

Conventions for degenerate inputs: two empty token collections are identical,
so Jaccard is 1.0; exactly one empty side gives 0.0 for both metrics (a
zero-norm vector has no direction).
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping


@dataclass(frozen=True)
class MetricTokenization:
    lowercase: bool = True
    token_pattern: str = r"[^\W_]+"

    def describe(self) -> str:
        return f"lowercase={self.lowercase}, pattern={self.token_pattern}"


DEFAULT_TOKENIZATION = MetricTokenization()
_PATTERN_CACHE: dict[str, re.Pattern] = {}


def metric_tokens(text: str, tokenization: MetricTokenization = DEFAULT_TOKENIZATION) -> list[str]:
    pattern = _PATTERN_CACHE.get(tokenization.token_pattern)
    if pattern is None:
        pattern = re.compile(tokenization.token_pattern, re.UNICODE)
        _PATTERN_CACHE[tokenization.token_pattern] = pattern
    if tokenization.lowercase:
        text = text.lower()
    return pattern.findall(text)


def jaccard(a: str, b: str,
            tokenization: MetricTokenization = DEFAULT_TOKENIZATION) -> float:
    """|T(a) ∩ T(b)| / |T(a) ∪ T(b)| over unique-token sets."""
    sa, sb = set(metric_tokens(a, tokenization)), set(metric_tokens(b, tokenization))
    if not sa and not sb:
        return 1.0
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


class IdfTable:
    """Smoothed inverse document frequencies fitted on a reference corpus.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1; terms never seen during fitting
    take df = 0. The +1 smoothing keeps every weight positive so cosine stays
    within [0, 1] for non-negative term frequencies.
    """

    def __init__(self, doc_count: int, doc_freq: Mapping[str, int],
                 tokenization: MetricTokenization = DEFAULT_TOKENIZATION):
        self.doc_count = doc_count
        self.doc_freq = dict(doc_freq)
        self.tokenization = tokenization

    @classmethod
    def fit(cls, documents: Iterable[str],
            tokenization: MetricTokenization = DEFAULT_TOKENIZATION) -> "IdfTable":
        df: Counter[str] = Counter()
        n = 0
        for doc in documents:
            n += 1
            df.update(set(metric_tokens(doc, tokenization)))
        return cls(n, df, tokenization)

    def idf(self, term: str) -> float:
        return math.log((1 + self.doc_count) / (1 + self.doc_freq.get(term, 0))) + 1.0


def _weighted_tf(text: str, idf: IdfTable | None,
                 tokenization: MetricTokenization) -> dict[str, float]:
    tf = Counter(metric_tokens(text, tokenization))
    if idf is None:
        return dict(tf)
    return {t: c * idf.idf(t) for t, c in tf.items()}


def cosine_similarity(a: str, b: str, idf: IdfTable | None = None,
                      tokenization: MetricTokenization = DEFAULT_TOKENIZATION) -> float:
    """Cosine of the two non-negative weighted term-frequency vectors.

    ``idf=None`` means uniform weights (raw term frequencies). Either side
    having a zero-norm vector yields 0.0.
    """
    va = _weighted_tf(a, idf, tokenization)
    vb = _weighted_tf(b, idf, tokenization)
    norm_a = math.sqrt(sum(x * x for x in va.values()))
    norm_b = math.sqrt(sum(x * x for x in vb.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    shorter, longer = (va, vb) if len(va) <= len(vb) else (vb, va)
    dot = sum(w * longer.get(t, 0.0) for t, w in shorter.items())
    return dot / (norm_a * norm_b)
