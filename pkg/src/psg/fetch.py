"""Codeforces client: problem metadata via the public API, statement text
via problem pages, joined into the JSONL interchange format.

The API serves tags and ratings but not statement bodies, so pages are
fetched separately and cached on disk (one file per problem).  All
network access goes through an injectable transport and a rate limiter
with injectable clock/sleep, so the test suite never touches the live
site and politeness is testable against a simulated clock.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path

import requests
from filelock import FileLock

from .corpus import ProblemRecord, save_jsonl
from .errors import ExtractionError, NetworkError, RateLimitError

log = logging.getLogger("psg.fetch")

API_URL = "https://codeforces.com/api/problemset.problems"
PROBLEM_URL = "https://codeforces.com/problemset/problem/{contest_id}/{index}"

# Provider tags are lowercase; the shipped vocabulary uses display names.
TAG_DISPLAY_NAMES = {
    "implementation": "Implementation",
    "math": "Math",
    "greedy": "Greedy",
    "dp": "DP",
    "data structures": "Data Structures",
    "brute force": "Brute Force",
    "graphs": "Graphs",
    "sortings": "Sortings",
    "binary search": "Binary Search",
    "dfs and similar": "DFS and Similar",
    "trees": "Trees",
    "strings": "Strings",
    "number theory": "Number Theory",
    "combinatorics": "Combinatorics",
    "bitmasks": "Bitmasks",
    "two pointers": "Two Pointers",
    "geometry": "Geometry",
    "dsu": "DSU",
    "shortest paths": "Shortest Paths",
    "divide and conquer": "Divide and Conquer",
}


def normalize_tag(provider_tag: str) -> str:
    """Map a provider tag spelling to its display name; unknown tags pass
    through verbatim (they fall out of vocabulary downstream)."""
    return TAG_DISPLAY_NAMES.get(provider_tag, provider_tag)


def default_cache_dir() -> Path:
    env = os.environ.get("PSG_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "psg"


@dataclass(frozen=True)
class FetchConfig:
    out_path: Path
    cache_dir: Path | None = None
    min_interval: float = 2.0
    max_retries: int = 3
    user_agent: str = "psg-dataset-builder/0.1"
    resume: bool = True

    def __post_init__(self):
        if self.min_interval < 2.0:
            raise ValueError("min_interval below the 2 s provider courtesy limit")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def resolved_cache_dir(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir else default_cache_dir()


@dataclass(frozen=True)
class RawProblemMeta:
    contest_id: int
    index: str
    name: str
    tags: tuple[str, ...]  # provider spelling, verbatim
    rating: int | None = None

    @property
    def key(self) -> tuple[int, str]:
        return (self.contest_id, self.index)

    @property
    def problem_id(self) -> str:
        return f"{self.contest_id}{self.index}"


class RateLimiter:
    """Serializes requests with a minimum spacing; clock and sleep are
    injectable so tests can drive a simulated timeline."""

    def __init__(self, min_interval: float, clock=time.monotonic, sleep=time.sleep):
        self.min_interval = min_interval
        self.clock = clock
        self.sleep = sleep
        self._last: float | None = None

    def wait(self) -> None:
        now = self.clock()
        if self._last is not None:
            remaining = self._last + self.min_interval - now
            if remaining > 0:
                self.sleep(remaining)
                now = self.clock()
        self._last = now


class RequestsTransport:
    """Thin requests wrapper returning (status_code, body_text)."""

    def __init__(self, user_agent: str, timeout: float = 30.0):
        self.session = requests.Session()
        self.session.headers["User-Agent"] = user_agent
        self.timeout = timeout

    def get(self, url: str) -> tuple[int, str]:
        try:
            resp = self.session.get(url, timeout=self.timeout)
        except requests.RequestException as e:
            return 0, str(e)  # status 0 = connection-level failure, retryable
        return resp.status_code, resp.text


_RETRYABLE = {0, 429, 500, 502, 503, 504}


def _get_with_retries(transport, limiter: RateLimiter, url: str, max_retries: int):
    """GET with rate limiting; retries transient statuses up to
    max_retries.  Exhausted 429s raise RateLimitError, anything else
    NetworkError with the last status."""
    status, body = 0, ""
    for _ in range(max_retries + 1):
        limiter.wait()
        status, body = transport.get(url)
        if status not in _RETRYABLE:
            return status, body
        log.warning("transient status %s for %s, retrying", status, url)
    if status == 429:
        raise RateLimitError(f"rate-limited (429) after {max_retries} retries: {url}")
    raise NetworkError(f"request failed after {max_retries} retries, last status {status}: {url}")


def fetch_problem_index(
    config: FetchConfig,
    transport=None,
    limiter: RateLimiter | None = None,
) -> list[RawProblemMeta]:
    """Download the full problem listing (metadata only).

    With resume set, the raw API response is cached on disk so a rerun
    makes no network calls.  Provider tag spellings are kept verbatim.
    """
    transport = transport or RequestsTransport(config.user_agent)
    limiter = limiter or RateLimiter(config.min_interval)
    cache = config.resolved_cache_dir()
    cache_file = cache / "problemset.json"
    if config.resume and cache_file.exists():
        body = cache_file.read_text(encoding="utf-8")
    else:
        status, body = _get_with_retries(transport, limiter, API_URL, config.max_retries)
        if status != 200:
            raise NetworkError(f"problem index request returned HTTP {status}")
        if config.resume:
            cache.mkdir(parents=True, exist_ok=True)
            with FileLock(str(cache / ".lock")):
                cache_file.write_text(body, encoding="utf-8")
    payload = json.loads(body)
    if payload.get("status") != "OK":
        raise NetworkError(
            f"provider status {payload.get('status')!r}: {payload.get('comment', 'no comment')}"
        )
    metas: list[RawProblemMeta] = []
    seen: set[tuple[int, str]] = set()
    for p in payload["result"]["problems"]:
        meta = RawProblemMeta(
            contest_id=int(p["contestId"]),
            index=str(p["index"]),
            name=p.get("name", ""),
            tags=tuple(p.get("tags", [])),
            rating=p.get("rating"),
        )
        if meta.key in seen:
            raise NetworkError(f"provider listed {meta.key} twice")
        seen.add(meta.key)
        metas.append(meta)
    return metas


def fetch_statement_html(
    config: FetchConfig,
    contest_id: int,
    index: str,
    transport=None,
    limiter: RateLimiter | None = None,
) -> str | None:
    """Fetch one problem page's raw HTML, reading/writing the disk cache.

    Returns None for pages that 404 (the problem is skipped and a miss
    marker is cached so reruns stay quiet).
    """
    transport = transport or RequestsTransport(config.user_agent)
    limiter = limiter or RateLimiter(config.min_interval)
    cache = config.resolved_cache_dir()
    page_file = cache / f"{contest_id}_{index}.html"
    miss_file = cache / f"{contest_id}_{index}.missing"
    if config.resume:
        if page_file.exists():
            return page_file.read_text(encoding="utf-8")
        if miss_file.exists():
            return None
    url = PROBLEM_URL.format(contest_id=contest_id, index=index)
    status, body = _get_with_retries(transport, limiter, url, config.max_retries)
    if status == 404:
        log.info("problem page missing (404): %s%s", contest_id, index)
        if config.resume:
            cache.mkdir(parents=True, exist_ok=True)
            with FileLock(str(cache / ".lock")):
                miss_file.write_text("", encoding="utf-8")
        return None
    if status != 200:
        raise NetworkError(f"problem page {contest_id}{index} returned HTTP {status}")
    if config.resume:
        cache.mkdir(parents=True, exist_ok=True)
        with FileLock(str(cache / ".lock")):
            page_file.write_text(body, encoding="utf-8")
    return body


class _StatementExtractor(HTMLParser):
    """Collects text inside <div class="problem-statement">, skipping the
    sample-tests subtree and script/style content."""

    _BLOCK_TAGS = {
        "div", "p", "br", "li", "ul", "ol", "table", "tr", "td", "th",
        "pre", "h1", "h2", "h3", "h4", "center", "blockquote",
    }

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self.found = False
        self._depth = 0       # div nesting inside the statement; 0 = outside
        self._skip_depth = 0  # div nesting inside an excluded subtree
        self._in_script = False

    def handle_starttag(self, tag, attrs):
        if tag == "div":
            classes = (dict(attrs).get("class") or "").split()
            if self._skip_depth:
                self._skip_depth += 1
            elif self._depth:
                if "sample-tests" in classes or "sample-test" in classes:
                    self._skip_depth = 1
                else:
                    self._depth += 1
            elif "problem-statement" in classes:
                self._depth = 1
                self.found = True
        elif tag in ("script", "style"):
            self._in_script = True
        if self._capturing() and tag in self._BLOCK_TAGS:
            self.parts.append(" ")

    def handle_startendtag(self, tag, attrs):
        if self._capturing() and tag in self._BLOCK_TAGS:
            self.parts.append(" ")

    def handle_endtag(self, tag):
        if tag == "div":
            if self._skip_depth:
                self._skip_depth -= 1
            elif self._depth:
                self._depth -= 1
        elif tag in ("script", "style"):
            self._in_script = False
        if self._capturing() and tag in self._BLOCK_TAGS:
            self.parts.append(" ")

    def _capturing(self) -> bool:
        return self._depth > 0 and self._skip_depth == 0 and not self._in_script

    def handle_data(self, data):
        if self._capturing():
            self.parts.append(data)


# Longest delimiter first so $$$...$$$ (the provider's MathJax fencing)
# never degenerates into a stray $.
_MATH_SPANS = [
    re.compile(r"\$\$\$.*?\$\$\$", re.DOTALL),
    re.compile(r"\$\$.*?\$\$", re.DOTALL),
    re.compile(r"\$[^$]*\$", re.DOTALL),
]


def extract_statement_text(html: str, problem_id: str = "?") -> str:
    """Plain statement text from a problem page.

    Keeps the statement body plus input/output/note sections, drops the
    sample test blocks, replaces LaTeX math spans with a single space,
    and collapses whitespace.  Raises ExtractionError when the statement
    region is absent or empty.
    """
    parser = _StatementExtractor()
    parser.feed(html)
    parser.close()
    if not parser.found:
        raise ExtractionError(f"no statement region found for problem {problem_id}")
    text = "".join(parser.parts)
    for pattern in _MATH_SPANS:
        text = pattern.sub(" ", text)
    text = re.sub(r"\s+", " ", text).strip()
    if not text:
        raise ExtractionError(f"empty statement for problem {problem_id}")
    return text


@dataclass
class AssembleSummary:
    emitted: int
    dropped_tagless: int
    missing_statement: int

    def line(self) -> str:
        return (
            f"emitted {self.emitted} records "
            f"({self.dropped_tagless} dropped without tags, "
            f"{self.missing_statement} without statements)"
        )


def assemble_records(
    metas: list[RawProblemMeta],
    statements: dict[tuple[int, str], str],
    out_path: str | Path,
) -> AssembleSummary:
    """Join metadata and statement text into ProblemRecord JSONL.

    Problems with an empty tag list are dropped here (and counted), as
    are metas with no extracted statement.  Output is sorted by
    (contest_id, index) so reruns are byte-identical.
    """
    records = []
    dropped_tagless = 0
    missing_statement = 0
    for meta in sorted(metas, key=lambda m: m.key):
        if not meta.tags:
            dropped_tagless += 1
            continue
        statement = statements.get(meta.key)
        if not statement:
            missing_statement += 1
            log.info("no statement for %s, skipping", meta.problem_id)
            continue
        records.append(ProblemRecord(
            id=meta.problem_id,
            contest_id=meta.contest_id,
            index=meta.index,
            title=meta.name,
            statement=statement,
            tags=frozenset(normalize_tag(t) for t in meta.tags),
            rating=meta.rating,
            source="codeforces",
        ))
    save_jsonl(records, out_path)
    return AssembleSummary(
        emitted=len(records),
        dropped_tagless=dropped_tagless,
        missing_statement=missing_statement,
    )


def run_fetch(
    config: FetchConfig,
    transport=None,
    limiter: RateLimiter | None = None,
    limit: int | None = None,
) -> AssembleSummary:
    """Full reconstruction pipeline: index, pages, extraction, assembly."""
    transport = transport or RequestsTransport(config.user_agent)
    limiter = limiter or RateLimiter(config.min_interval)
    metas = fetch_problem_index(config, transport, limiter)
    if limit is not None:
        metas = metas[:limit]
    statements: dict[tuple[int, str], str] = {}
    for meta in metas:
        if not meta.tags:
            continue  # dropped at assembly; no point fetching the page
        html = fetch_statement_html(config, meta.contest_id, meta.index, transport, limiter)
        if html is None:
            continue
        try:
            statements[meta.key] = extract_statement_text(html, meta.problem_id)
        except ExtractionError as e:
            log.warning("%s", e)
    return assemble_records(metas, statements, config.out_path)
