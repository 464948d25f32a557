"""External-service client interfaces and fixture (record/replay) versions.

Every network-facing dependency of store construction sits behind one of
these small protocols, so the whole build can run offline from recorded
fixtures. Fixture files are JSON:

    {
      "search": {"<query>": [{"url": ..., "published": "YYYY-MM-DD"|null}]},
      "image_search": {"<query>": [{"url": ..., "published": ...}]},
      "ris": {"<image digest>": ["url", ...]},
      "dates": {"<url>": "YYYY-MM-DD"|null},
      "pages": {"<url>": {"content_type": ..., "body_b64": ..., "status": 200}}
    }
"""

from __future__ import annotations

import base64
import datetime as dt
import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol
from urllib.parse import urlsplit


@dataclass(frozen=True)
class SearchResult:
    url: str
    published: Optional[dt.date] = None


@dataclass(frozen=True)
class FetchResult:
    status: int
    content_type: str
    body: bytes


class SearchClient(Protocol):
    def search(self, query: str) -> list[SearchResult]: ...


class ImageSearchClient(Protocol):
    def search_images(self, query: str) -> list[SearchResult]: ...


class RisClient(Protocol):
    def search(self, image: bytes) -> list[str]: ...


class DateExtractor(Protocol):
    def extract_date(self, url: str) -> Optional[dt.date]: ...


class Fetcher(Protocol):
    def fetch(self, url: str) -> FetchResult: ...


def _parse_date(value) -> Optional[dt.date]:
    return dt.date.fromisoformat(value) if value else None


class FixtureClients:
    """All five client interfaces, replayed from one recorded fixture file."""

    def __init__(self, fixture: dict | str | Path):
        if not isinstance(fixture, dict):
            fixture = json.loads(Path(fixture).read_text())
        self._data = fixture

    def search(self, query: str) -> list[SearchResult]:
        return [
            SearchResult(url=r["url"], published=_parse_date(r.get("published")))
            for r in self._data.get("search", {}).get(query, [])
        ]

    def search_images(self, query: str) -> list[SearchResult]:
        return [
            SearchResult(url=r["url"], published=_parse_date(r.get("published")))
            for r in self._data.get("image_search", {}).get(query, [])
        ]

    def search_by_image(self, image: bytes) -> list[str]:
        digest = hashlib.sha256(image).hexdigest()
        return list(self._data.get("ris", {}).get(digest, []))

    # RisClient protocol name
    search_ris = search_by_image

    def extract_date(self, url: str) -> Optional[dt.date]:
        return _parse_date(self._data.get("dates", {}).get(url))

    def fetch(self, url: str) -> FetchResult:
        page = self._data.get("pages", {}).get(url)
        if page is None:
            return FetchResult(status=404, content_type="text/plain", body=b"")
        return FetchResult(
            status=int(page.get("status", 200)),
            content_type=page.get("content_type", "text/html"),
            body=base64.b64decode(page.get("body_b64", "")),
        )


class FixtureRisClient:
    """Adapts a FixtureClients instance to the RisClient protocol."""

    def __init__(self, fixtures: FixtureClients):
        self._fixtures = fixtures

    def search(self, image: bytes) -> list[str]:
        return self._fixtures.search_by_image(image)


class HttpFetcher:
    """Plain HTTP fetcher used for live store construction."""

    def __init__(self, timeout: float = 30.0, user_agent: str = "averimatec-store/0.1"):
        import httpx

        self._client = httpx.Client(
            timeout=timeout, headers={"User-Agent": user_agent}, follow_redirects=True
        )

    def fetch(self, url: str) -> FetchResult:
        resp = self._client.get(url)
        return FetchResult(
            status=resp.status_code,
            content_type=resp.headers.get("content-type", ""),
            body=resp.content,
        )


class HostRateLimiter:
    """Minimum spacing between requests to the same host."""

    def __init__(self, min_interval: float = 0.5):
        self.min_interval = min_interval
        self._last: dict[str, float] = {}
        self._lock = threading.Lock()

    def wait(self, url: str) -> None:
        host = urlsplit(url).netloc
        while True:
            with self._lock:
                now = time.monotonic()
                last = self._last.get(host, 0.0)
                if now - last >= self.min_interval:
                    self._last[host] = now
                    return
                delay = self.min_interval - (now - last)
            time.sleep(delay)
