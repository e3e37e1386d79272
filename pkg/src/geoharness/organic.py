"""Organic (non-synthetic) search results and page content: fixtures, synthetic distractors, live HTTP."""

from __future__ import annotations

import hashlib
import json
import logging
import random
import threading
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path
from typing import Protocol

import httpx

from .errors import HarnessError, ProtocolError, TransportError
from .markdown import link
from .textutil import slugify

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OrganicResult:
    title: str
    link: str
    snippet: str

    def to_dict(self) -> dict:
        return {"title": self.title, "link": self.link, "snippet": self.snippet}

    @classmethod
    def from_dict(cls, d: dict) -> "OrganicResult":
        return cls(str(d["title"]), str(d["link"]), str(d.get("snippet", "")))


class OrganicProvider(Protocol):
    def search(self, query: str) -> list[OrganicResult]: ...


class FetchError(HarnessError):
    pass


class PageStore(Protocol):
    def fetch(self, url: str) -> str: ...


def url_key(url: str) -> str:
    return hashlib.sha1(url.encode("utf-8")).hexdigest()


def query_file_name(query: str) -> str:
    digest = hashlib.sha1(query.encode("utf-8")).hexdigest()[:10]
    return f"{slugify(query)[:60]}-{digest}.json"


class FixtureProvider:
    """Recorded result lists, one JSON file per query, padded from ``pool.json``.

    Layout::

        <root>/queries/<slug>-<hash>.json   {"query": ..., "results": [{title, link, snippet}, ...]}
        <root>/pool.json                    [{title, link, snippet}, ...]
    """

    def __init__(self, root: str | Path, *, min_results: int = 9):
        self.root = Path(root)
        self.min_results = min_results
        pool_path = self.root / "pool.json"
        self.pool = []
        if pool_path.exists():
            self.pool = [OrganicResult.from_dict(d) for d in json.loads(pool_path.read_text(encoding="utf-8"))]

    def recorded(self, query: str) -> list[OrganicResult] | None:
        path = self.root / "queries" / query_file_name(query)
        if not path.exists():
            return None
        data = json.loads(path.read_text(encoding="utf-8"))
        return [OrganicResult.from_dict(d) for d in data["results"]]

    def search(self, query: str) -> list[OrganicResult]:
        results = list(self.recorded(query) or [])
        if len(results) < self.min_results:
            have = {r.link for r in results}
            for r in self.pool:
                if len(results) >= self.min_results:
                    break
                if r.link not in have:
                    results.append(r)
                    have.add(r.link)
        return results

    @staticmethod
    def write_query(root: str | Path, query: str, results: list[OrganicResult]) -> Path:
        path = Path(root) / "queries" / query_file_name(query)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"query": query, "results": [r.to_dict() for r in results]}
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return path


class DirectoryPageStore:
    """Markdown files named by url hash plus an ``index.json`` manifest (url -> file)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        index_path = self.root / "index.json"
        self.index: dict[str, str] = {}
        if index_path.exists():
            self.index = json.loads(index_path.read_text(encoding="utf-8"))

    def fetch(self, url: str) -> str:
        name = self.index.get(url)
        if name is None:
            raise FetchError(f"no stored page for {url}")
        return (self.root / name).read_text(encoding="utf-8")

    def save(self, url: str, content: str) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        name = f"{url_key(url)}.md"
        (self.root / name).write_text(content, encoding="utf-8")
        self.index[url] = name
        (self.root / "index.json").write_text(
            json.dumps(self.index, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


_NOUNS = ["earbuds", "headphones", "blender", "backpack", "monitor", "keyboard", "kettle", "mattress",
          "air purifier", "running shoes", "desk lamp", "coffee grinder", "tent", "smartwatch", "router"]
_ADJ = ["budget", "premium", "compact", "durable", "lightweight", "quiet", "portable", "ergonomic"]
_SITES = ["shopwise", "dealscout", "gearfinder", "homebasics", "reviewcorner", "buyersdigest",
          "techmarket", "everydaypicks", "valuehunt", "outfitters"]
_FILLER = ("Our editors compared dozens of models on comfort, build quality, warranty terms and "
           "long-term value before choosing these picks for most shoppers this season.")


class SyntheticProvider:
    """Deterministic lorem-commerce distractors for fully offline runs; also serves their pages."""

    def __init__(self, seed: int = 0, n_results: int = 9):
        self.seed = seed
        self.n_results = n_results

    def _rng(self, key: str) -> random.Random:
        return random.Random(f"{self.seed}|{key}")

    def search(self, query: str) -> list[OrganicResult]:
        rng = self._rng(query)
        topic = " ".join(query.split()[:6]) or "products"
        out = []
        for i in range(self.n_results):
            site = rng.choice(_SITES)
            noun = rng.choice(_NOUNS)
            adj = rng.choice(_ADJ)
            slug = f"{slugify(topic)[:40]}-{i + 1}-{rng.randint(100, 999)}"
            url = f"https://www.{site}.example.org/guides/{slug}"
            title = f"{adj.title()} {noun} picks: {topic} ({site})"
            snippet = f"{adj.capitalize()} {noun} options related to {topic}. {_FILLER}"[:150]
            out.append(OrganicResult(title, url, snippet.rsplit(" ", 1)[0]))
        return out

    def fetch(self, url: str) -> str:
        rng = self._rng(url)
        paras = [f"# {rng.choice(_ADJ).title()} {rng.choice(_NOUNS)} guide", ""]
        for _ in range(3):
            paras += [f"The {rng.choice(_ADJ)} {rng.choice(_NOUNS)} category keeps growing. {_FILLER}", ""]
        other = f"https://www.{rng.choice(_SITES)}.example.org/deals/{rng.randint(1000, 9999)}"
        paras.append(f"More in our {link('deals roundup', other)}.")
        return "\n".join(paras) + "\n"


class LiveProvider:
    """HTTP search client. ``GET endpoint?q=<query>&num=<n>`` returning a list of
    ``{title, link, snippet}`` (bare list, or under ``results``/``organic``/``items``)."""

    def __init__(self, endpoint: str, *, n_results: int = 9, api_key_env: str = "SEARCH_API_KEY",
                 timeout: float = 30.0, max_retries: int = 2, transport: httpx.BaseTransport | None = None):
        import os

        self.endpoint = endpoint
        self.n_results = n_results
        self.max_retries = max_retries
        headers = {}
        key = os.environ.get(api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def search(self, query: str) -> list[OrganicResult]:
        last: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                resp = self._http.get(self.endpoint, params={"q": query, "num": self.n_results})
                resp.raise_for_status()
                data = resp.json()
                break
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last = exc
        else:
            raise TransportError(f"search provider unreachable: {last}") from last
        if isinstance(data, dict):
            data = data.get("results") or data.get("organic") or data.get("items") or []
        try:
            return [OrganicResult.from_dict(d) for d in data]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed search response: {exc}") from exc


class CachedProvider:
    """Per-run cache keyed by the exact query string; the first stored answer wins."""

    def __init__(self, inner: OrganicProvider):
        self.inner = inner
        self._cache: dict[str, list[OrganicResult]] = {}
        self._lock = threading.Lock()

    def search(self, query: str) -> list[OrganicResult]:
        with self._lock:
            hit = self._cache.get(query)
        if hit is not None:
            return list(hit)
        results = self.inner.search(query)
        with self._lock:
            stored = self._cache.setdefault(query, results)
        return list(stored)


# -- live page conversion ----------------------------------------------------

_BLOCKS = {"p", "li", "h1", "h2", "h3", "h4", "h5", "h6", "pre", "blockquote", "td", "th", "dd", "dt", "div", "section", "article"}
_SKIP = {"script", "style", "noscript", "nav", "footer", "header", "svg", "form"}


class _MarkdownExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.blocks: list[tuple[str, str]] = []
        self._buf: list[str] = []
        self._tag = "p"
        self._skip = 0
        self._href: str | None = None
        self._anchor: list[str] = []

    def _flush(self):
        text = " ".join("".join(self._buf).split())
        if text:
            self.blocks.append((self._tag, text))
        self._buf = []

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP:
            self._skip += 1
        elif tag in _BLOCKS:
            self._flush()
            self._tag = tag
        elif tag == "a":
            self._href = dict(attrs).get("href")
            self._anchor = []

    def handle_endtag(self, tag):
        if tag in _SKIP and self._skip:
            self._skip -= 1
        elif tag in _BLOCKS:
            self._flush()
            self._tag = "p"
        elif tag == "a" and self._href is not None:
            text = " ".join("".join(self._anchor).split())
            if text and self._href.startswith("http"):
                self._buf.append(link(text, self._href))
            else:
                self._buf.append(text)
            self._href = None

    def handle_data(self, data):
        if self._skip:
            return
        if self._href is not None:
            self._anchor.append(data)
        else:
            self._buf.append(data)


def html_to_markdown(html: str, *, word_count_threshold: int = 15, min_word_threshold: int = 20) -> str:
    """Keep headings and text blocks of at least ``word_count_threshold`` words.

    Raises FetchError when fewer than ``min_word_threshold`` words survive.
    """
    parser = _MarkdownExtractor()
    parser.feed(html)
    parser.close()
    parser._flush()
    out, words = [], 0
    for tag, text in parser.blocks:
        n = len(text.split())
        if tag.startswith("h") and len(tag) == 2:
            out.append("#" * int(tag[1]) + " " + text)
        elif n >= word_count_threshold:
            out.append(f"- {text}" if tag == "li" else text)
            words += n
    if words < min_word_threshold:
        raise FetchError(f"page kept only {words} words (< {min_word_threshold})")
    return "\n\n".join(out) + "\n"


class LivePageStore:
    def __init__(self, *, timeout: float = 20.0, word_count_threshold: int = 15, min_word_threshold: int = 20,
                 transport: httpx.BaseTransport | None = None):
        self.word_count_threshold = word_count_threshold
        self.min_word_threshold = min_word_threshold
        self._http = httpx.Client(timeout=timeout, follow_redirects=True, transport=transport,
                                  headers={"User-Agent": "Mozilla/5.0 (compatible; geoharness)"})

    def fetch(self, url: str) -> str:
        try:
            resp = self._http.get(url)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise FetchError(f"fetch of {url} failed: {exc}") from exc
        return html_to_markdown(resp.text, word_count_threshold=self.word_count_threshold,
                                min_word_threshold=self.min_word_threshold)
