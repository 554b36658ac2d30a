from __future__ import annotations

import http.server
import json
import threading
import time

import pytest
import requests

from conftest import ACCOUNTANTS_ACT_HTML, PENSIONS_ACT_HTML, REPEALED_ACT_HTML, make_act
from ukil.corpus import validate_corpus
from ukil.scraper import (DocumentCache, EncodingError, Fetcher, FetchSettings,
                          NetworkError, NotFound, ParseError, RateLimited,
                          RawDocument, TokenBucket, parse_act)


class _StubResponse:
    def __init__(self, status_code=200, content=b""):
        self.status_code = status_code
        self.content = content


class _StubSession:
    """Scripted responses; raises entries that are exceptions."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = 0

    def get(self, url, **kwargs):
        self.calls += 1
        item = self.script.pop(0) if self.script else self.script_exhausted()
        if isinstance(item, Exception):
            raise item
        return item

    def script_exhausted(self):
        raise AssertionError("no scripted response left")


def fast_fetcher(tmp_path, script, **settings_kw):
    settings = FetchSettings(rate_per_sec=10_000, backoff_base=0.0, **settings_kw)
    return Fetcher(DocumentCache(tmp_path / "cache"), settings,
                   session=_StubSession(script), sleep=lambda s: None)


def test_unreachable_host_raises_after_three_retries(tmp_path):
    errors = [requests.ConnectionError("no route")] * 3
    fetcher = fast_fetcher(tmp_path, errors)
    with pytest.raises(NetworkError):
        fetcher.fetch_document("http://portal.example/act-1")
    assert fetcher.session.calls == 3


def test_cache_hit_returns_identical_bytes(tmp_path):
    body = PENSIONS_ACT_HTML.encode("utf-8")
    fetcher = fast_fetcher(tmp_path, [_StubResponse(200, body)])
    first = fetcher.fetch_document("http://portal.example/act-31")
    assert not first.from_cache and first.body == body
    again = fetcher.fetch_document("http://portal.example/act-31")
    assert again.from_cache
    assert again.body == body
    assert fetcher.session.calls == 1


def test_refresh_policy_goes_to_network(tmp_path):
    body = b"<div id=\"act-details\"></div>"
    fetcher = fast_fetcher(tmp_path, [_StubResponse(200, body),
                                      _StubResponse(200, body)])
    fetcher.fetch_document("http://portal.example/a")
    fetcher.fetch_document("http://portal.example/a", cache_policy="refresh")
    assert fetcher.session.calls == 2


def test_terminal_4xx_raises_not_found(tmp_path):
    fetcher = fast_fetcher(tmp_path, [_StubResponse(404, b"")])
    with pytest.raises(NotFound):
        fetcher.fetch_document("http://portal.example/missing")


def test_5xx_retried_then_succeeds(tmp_path):
    body = b"recovered page body"
    fetcher = fast_fetcher(tmp_path, [_StubResponse(500, b""), _StubResponse(200, body)])
    doc = fetcher.fetch_document("http://portal.example/flaky")
    assert doc.body == body
    assert fetcher.session.calls == 2


def test_rate_limiter_surfaces_instead_of_oversleeping():
    bucket = TokenBucket(rate_per_sec=0.001, burst=1)
    bucket.acquire(max_wait=60)
    with pytest.raises(RateLimited):
        bucket.acquire(max_wait=0.5)


def test_cache_layout_content_addressed(tmp_path):
    cache = DocumentCache(tmp_path / "cache")
    doc = RawDocument("http://portal.example/x", b"payload", time.time())
    cache.put(doc)
    key = DocumentCache.key_for(doc.locator)
    assert (tmp_path / "cache" / "objects" / key[:2] / key).read_bytes() == b"payload"
    index = json.loads((tmp_path / "cache" / "index.json").read_text())
    assert index[doc.locator]["key"] == key


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _doc(text: str, locator="http://portal.example/act") -> RawDocument:
    return RawDocument(locator, text.encode("utf-8"), time.time())


def test_parse_pensions_act_fixture():
    act = parse_act(_doc(PENSIONS_ACT_HTML))
    assert "Pensions Act" in act.name
    assert act.id == 31
    assert act.published_date == "1871-08-08"
    assert [s.name for s in act.sections] == ["Short title", "Power to make rules"]
    assert act.num_of_sections == 2
    assert act.sections[1].related_acts == [12]
    assert act.related_act == [12]
    assert act.lower_text and "substituted" in act.lower_text[0]
    assert validate_corpus([act, make_act(12)]).errors == []


def test_parse_appendix_sample_fixture():
    act = parse_act(_doc(ACCOUNTANTS_ACT_HTML))
    section = act.sections[0]
    assert section.section_id == 1
    assert section.name == "Public Accountants to give security"
    assert section.act_id == 2
    assert "security for the due discharge" in section.details


def test_parse_repealed_flag():
    act = parse_act(_doc(REPEALED_ACT_HTML))
    assert act.repelled is True
    assert act.repealed is True


def test_parse_empty_body_is_parse_error():
    with pytest.raises(ParseError):
        parse_act(_doc(""))


def test_parse_unknown_layout_is_parse_error():
    with pytest.raises(ParseError):
        parse_act(_doc("<html><body><p>nothing recognizable</p></body></html>"))


def test_parse_non_utf8_is_encoding_error():
    doc = RawDocument("http://x", b"\xff\xfe\x00bad", time.time())
    with pytest.raises(EncodingError):
        parse_act(doc)


def test_parse_json_layout_round_trips_act():
    act = make_act(9)
    doc = _doc(json.dumps(act.to_dict()))
    parsed = parse_act(doc)
    assert parsed.to_dict() == act.to_dict()


def test_parse_cleans_whitespace_in_html():
    act = parse_act(_doc(PENSIONS_ACT_HTML))
    for sec in act.sections:
        assert "  " not in sec.details
        assert sec.details == sec.details.strip()


# ---------------------------------------------------------------------------
# end-to-end against a local fixture server
# ---------------------------------------------------------------------------

@pytest.fixture()
def fixture_server(tmp_path):
    root = tmp_path / "www"
    root.mkdir()
    (root / "act-31.html").write_text(PENSIONS_ACT_HTML, encoding="utf-8")
    (root / "act-2.html").write_text(ACCOUNTANTS_ACT_HTML, encoding="utf-8")

    class Handler(http.server.SimpleHTTPRequestHandler):
        def __init__(self, *args, **kwargs):
            super().__init__(*args, directory=str(root), **kwargs)

        def log_message(self, *args):
            pass

    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def test_fetch_and_parse_from_fixture_server(tmp_path, fixture_server):
    cache = DocumentCache(tmp_path / "cache")
    fetcher = Fetcher(cache, FetchSettings(rate_per_sec=1000))
    doc = fetcher.fetch_document(f"{fixture_server}/act-31.html")
    assert doc.body
    act = parse_act(doc)
    assert act.name == "The Pensions Act, 1871"
    cached = fetcher.fetch_document(f"{fixture_server}/act-31.html")
    assert cached.from_cache and cached.body == doc.body


def test_concurrent_fetches_share_one_limiter(tmp_path, fixture_server):
    import concurrent.futures

    cache = DocumentCache(tmp_path / "cache")
    fetcher = Fetcher(cache, FetchSettings(rate_per_sec=1000))
    urls = [f"{fixture_server}/act-31.html", f"{fixture_server}/act-2.html"] * 4
    with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
        docs = list(pool.map(lambda u: fetcher.fetch_document(u, "refresh"), urls))
    assert all(d.body for d in docs)
    assert len(cache.locators()) == 2
    by_locator = {}
    for doc in docs:
        by_locator.setdefault(doc.locator, set()).add(doc.body)
    assert all(len(bodies) == 1 for bodies in by_locator.values())
