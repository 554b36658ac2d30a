"""Statute-portal scraping: polite fetching with an on-disk cache, and layout
adapters that turn fetched pages into :class:`~ukil.corpus.Act` records.

Two layouts ship by default: a semantic-HTML act page (the format our fixture
snapshots use, with ``act-title`` / ``section`` / ``section-body`` classes and
``data-`` attributes for ids) and a JSON document holding an already-structured
act, so a released corpus file can be ingested through the same path.
"""

from __future__ import annotations

import hashlib
import html.parser
import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import requests

from .corpus import Act, Section, clean_text


class NetworkError(RuntimeError):
    """Transport failure that survived the retry budget."""


class NotFound(RuntimeError):
    """Terminal 4xx from the portal."""


class RateLimited(RuntimeError):
    """The limiter would have to sleep past its configured ceiling."""


class ParseError(ValueError):
    """No layout adapter recognizes the document."""


class EncodingError(ValueError):
    """Document bytes are not decodable text."""


# ---------------------------------------------------------------------------
# Fetching
# ---------------------------------------------------------------------------

@dataclass
class RawDocument:
    locator: str
    body: bytes
    fetched_at: float
    from_cache: bool = False


class TokenBucket:
    """Thread-safe limiter shared by all in-flight fetches."""

    def __init__(self, rate_per_sec: float = 1.0, burst: int = 1):
        self.rate = rate_per_sec
        self.capacity = burst
        self._tokens = float(burst)
        self._stamp = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self, max_wait: float) -> None:
        """Block until a token is available; raise RateLimited past max_wait."""
        with self._lock:
            now = time.monotonic()
            self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
            self._stamp = now
            if self._tokens >= 1.0:
                self._tokens -= 1.0
                return
            wait = (1.0 - self._tokens) / self.rate
            if wait > max_wait:
                raise RateLimited(f"would need to wait {wait:.1f}s, ceiling is {max_wait:.1f}s")
            self._tokens -= 1.0
        time.sleep(wait)


class DocumentCache:
    """One file per locator under a content-addressed directory.

    The key is the sha256 of the locator; ``index.json`` maps locator to key.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.objects = self.root / "objects"
        self.index_path = self.root / "index.json"
        self.objects.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    @staticmethod
    def key_for(locator: str) -> str:
        return hashlib.sha256(locator.encode("utf-8")).hexdigest()

    def _load_index(self) -> dict:
        if self.index_path.exists():
            return json.loads(self.index_path.read_text(encoding="utf-8"))
        return {}

    def get(self, locator: str) -> RawDocument | None:
        key = self.key_for(locator)
        path = self.objects / key[:2] / key
        if not path.exists():
            return None
        meta = self._load_index().get(locator, {})
        return RawDocument(
            locator=locator,
            body=path.read_bytes(),
            fetched_at=meta.get("fetched_at", path.stat().st_mtime),
            from_cache=True,
        )

    def put(self, doc: RawDocument) -> None:
        key = self.key_for(doc.locator)
        path = self.objects / key[:2] / key
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(doc.body)
        with self._lock:
            index = self._load_index()
            index[doc.locator] = {"key": key, "fetched_at": doc.fetched_at}
            self.index_path.write_text(
                json.dumps(index, ensure_ascii=False, indent=2), encoding="utf-8")

    def locators(self) -> list[str]:
        return sorted(self._load_index())


@dataclass
class FetchSettings:
    rate_per_sec: float = 1.0
    burst: int = 1
    max_retries: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    timeout: float = 20.0
    max_rate_wait: float = 30.0
    user_agent: str = "ukil-corpus-builder/0.1"


class Fetcher:
    """Rate-limited, retrying, cache-backed HTTP fetcher."""

    def __init__(self, cache: DocumentCache, settings: FetchSettings | None = None,
                 session: requests.Session | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.cache = cache
        self.settings = settings or FetchSettings()
        self.session = session or requests.Session()
        self.bucket = TokenBucket(self.settings.rate_per_sec, self.settings.burst)
        self._sleep = sleep

    def fetch_document(self, locator: str, cache_policy: str = "prefer_cache") -> RawDocument:
        """Fetch one page. Successful bodies are written to the cache.

        cache_policy "prefer_cache" returns the cached copy when present;
        "refresh" always goes to the network.
        """
        if cache_policy not in ("prefer_cache", "refresh"):
            raise ValueError(f"unknown cache policy {cache_policy!r}")
        if not locator.startswith(("http://", "https://")):
            raise ValueError(f"locator {locator!r} is not an http(s) URL")
        if cache_policy == "prefer_cache":
            hit = self.cache.get(locator)
            if hit is not None:
                return hit

        last_exc: Exception | None = None
        for attempt in range(self.settings.max_retries):
            self.bucket.acquire(self.settings.max_rate_wait)
            try:
                resp = self.session.get(
                    locator,
                    timeout=self.settings.timeout,
                    headers={"User-Agent": self.settings.user_agent},
                )
            except requests.RequestException as exc:
                last_exc = exc
                self._sleep(min(self.settings.backoff_cap,
                                self.settings.backoff_base * 2 ** attempt))
                continue
            if 400 <= resp.status_code < 500:
                raise NotFound(f"{locator}: HTTP {resp.status_code}")
            if resp.status_code >= 500:
                last_exc = NetworkError(f"{locator}: HTTP {resp.status_code}")
                self._sleep(min(self.settings.backoff_cap,
                                self.settings.backoff_base * 2 ** attempt))
                continue
            doc = RawDocument(locator=locator, body=resp.content,
                              fetched_at=time.time(), from_cache=False)
            if not doc.body:
                raise NetworkError(f"{locator}: empty body")
            self.cache.put(doc)
            return doc
        raise NetworkError(
            f"{locator}: gave up after {self.settings.max_retries} attempts ({last_exc})")


# ---------------------------------------------------------------------------
# Layout adapters
# ---------------------------------------------------------------------------

_BLOCK_TAGS = frozenset({"p", "div", "br", "li", "tr"})
_BLOCK_BOUNDARY = "\x00"  # sentinel; swapped for a newline before cleaning


class _ActPageParser(html.parser.HTMLParser):
    """Collects the semantic act-page layout into plain dicts.

    Recognized structure (all ids carried in data attributes):
      div#act-details[data-act-id][data-repealed]
        h1.act-title, p.act-meta (optional "Published: YYYY-MM-DD"),
        div.act-text, p.lower-text*, a.related-act[data-act-id]*,
        div.section[data-section-id]* containing h3.section-title,
        div.section-body and a.related-act[data-act-id]*.

    Whitespace follows HTML semantics: source newlines inside flow text are
    spaces; only nested block elements produce structural newlines.
    """

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.act: dict = {"lower_text": [], "related_act": [], "sections": []}
        self.found_root = False
        self._stack: list[str] = []
        self._current_section: dict | None = None
        self._buffer: list[str] | None = None
        self._buffer_role: str | None = None
        self._depth_at_capture = 0

    def handle_starttag(self, tag, attrs):
        attrs = dict(attrs)
        classes = set((attrs.get("class") or "").split())
        if self._buffer is not None and tag in _BLOCK_TAGS:
            self._buffer.append(_BLOCK_BOUNDARY)
        self._stack.append(tag)
        if tag == "div" and attrs.get("id") == "act-details":
            self.found_root = True
            if "data-act-id" in attrs:
                self.act["id"] = int(attrs["data-act-id"])
            self.act["repelled"] = attrs.get("data-repealed", "").lower() in ("true", "1", "yes")
        elif tag == "div" and "section" in classes:
            self._current_section = {
                "section_id": int(attrs.get("data-section-id", 0)),
                "related_acts": [],
            }
            self.act["sections"].append(self._current_section)
        elif tag == "a" and "related-act" in classes and "data-act-id" in attrs:
            target = int(attrs["data-act-id"])
            if self._current_section is not None:
                self._current_section["related_acts"].append(target)
            else:
                self.act["related_act"].append(target)
        role = None
        if tag == "h1" and "act-title" in classes:
            role = "name"
        elif tag == "p" and "act-meta" in classes:
            role = "meta"
        elif tag == "div" and "act-text" in classes:
            role = "text"
        elif tag == "p" and "lower-text" in classes:
            role = "lower"
        elif tag == "h3" and "section-title" in classes:
            role = "section_name"
        elif tag == "div" and "section-body" in classes:
            role = "section_details"
        if role is not None:
            self._buffer = []
            self._buffer_role = role
            self._depth_at_capture = len(self._stack)

    def handle_endtag(self, tag):
        if self._stack:
            depth = len(self._stack)
            self._stack.pop()
            if self._buffer is not None:
                if depth == self._depth_at_capture:
                    self._finish_buffer()
                elif tag in _BLOCK_TAGS:
                    self._buffer.append(_BLOCK_BOUNDARY)

    def handle_data(self, data):
        if self._buffer is not None:
            self._buffer.append(data)

    def _finish_buffer(self):
        raw = "".join(self._buffer or [])
        raw = re.sub(r"\s+", " ", raw)
        text = raw.replace(_BLOCK_BOUNDARY, "\n")
        role = self._buffer_role
        self._buffer = None
        self._buffer_role = None
        if role == "name":
            self.act["name"] = clean_text(text)
        elif role == "meta":
            cleaned = clean_text(text)
            if cleaned.lower().startswith("published:"):
                self.act["published_date"] = cleaned.split(":", 1)[1].strip()
        elif role == "text":
            self.act["text"] = clean_text(text)
        elif role == "lower":
            self.act["lower_text"].append(clean_text(text))
        elif role == "section_name" and self._current_section is not None:
            self._current_section["name"] = clean_text(text)
        elif role == "section_details" and self._current_section is not None:
            self._current_section["details"] = clean_text(text)


class ActPageLayout:
    """Adapter for the semantic act-page HTML layout."""

    name = "act-page-html"

    def matches(self, text: str) -> bool:
        return 'id="act-details"' in text

    def parse(self, text: str, locator: str = "") -> Act:
        parser = _ActPageParser()
        parser.feed(text)
        parser.close()
        if not parser.found_root or "name" not in parser.act:
            raise ParseError(f"{locator or 'document'}: act-details block incomplete")
        data = parser.act
        sections = [
            Section(
                section_id=s.get("section_id", i + 1),
                name=s.get("name", ""),
                details=s.get("details", ""),
                related_acts=s.get("related_acts", []),
                act_id=data.get("id", 0),
            )
            for i, s in enumerate(data["sections"])
        ]
        return Act(
            id=data.get("id", 0),
            name=data["name"],
            repelled=data.get("repelled", False),
            text=data.get("text", ""),
            published_date=data.get("published_date"),
            related_act=data["related_act"],
            lower_text=data["lower_text"],
            num_of_sections=len(sections),
            sections=sections,
        )


class ActJsonLayout:
    """Adapter for a JSON document carrying one structured act."""

    name = "act-json"

    def matches(self, text: str) -> bool:
        stripped = text.lstrip()
        return stripped.startswith("{") and '"sections"' in stripped

    def parse(self, text: str, locator: str = "") -> Act:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{locator or 'document'}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict) or "id" not in data or "name" not in data:
            raise ParseError(f"{locator or 'document'}: JSON act missing id/name")
        act = Act.from_dict(data)
        act.name = clean_text(act.name)
        act.text = clean_text(act.text)
        for sec in act.sections:
            sec.name = clean_text(sec.name)
            sec.details = clean_text(sec.details)
        return act


DEFAULT_LAYOUTS: tuple = (ActPageLayout(), ActJsonLayout())


def parse_act(doc: RawDocument, layouts: Sequence = DEFAULT_LAYOUTS) -> Act:
    """Decode a fetched document and parse it with the first matching layout."""
    if not doc.body:
        raise ParseError(f"{doc.locator}: empty document")
    try:
        text = doc.body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{doc.locator}: body is not UTF-8 ({exc})") from exc
    for layout in layouts:
        if layout.matches(text):
            return layout.parse(text, doc.locator)
    raise ParseError(f"{doc.locator}: no layout adapter recognizes this page")
