"""Knowledge-store construction: query generation, temporally-safe search,
reverse image search, scraping, and deterministic assembly."""

from __future__ import annotations

import base64
import datetime as dt
import logging
import random
import re
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Optional, Sequence
from urllib.parse import urlsplit

from .. import prompts
from ..adapters import ModelAdapter, with_retries
from ..model import Claim, QAPair
from ..retrieval import Bm25Index
from .clients import (
    DateExtractor,
    Fetcher,
    ImageSearchClient,
    RisClient,
    SearchClient,
)
from .core import (
    ADVERSARIAL_FAMILIES,
    Channel,
    GOLD_DERIVED_FAMILIES,
    KnowledgeStore,
    KnowledgeStoreEntry,
    QueryFamily,
    QuerySpec,
    content_digest,
    normalize_url,
)

logger = logging.getLogger(__name__)

# Hosts excluded from search results to avoid label leakage. Configurable;
# this default covers the major fact-checking outlets.
DEFAULT_BLOCKLIST = frozenset(
    {
        "www.snopes.com",
        "snopes.com",
        "www.politifact.com",
        "politifact.com",
        "www.factcheck.org",
        "factcheck.org",
        "fullfact.org",
        "www.fullfact.org",
        "factcheck.afp.com",
        "leadstories.com",
        "www.truthorfiction.com",
        "checkyourfact.com",
        "misbar.com",
        "www.boomlive.in",
        "factly.in",
    }
)


@dataclass
class BuildFailure:
    stage: str
    subject: str
    reason: str


def _parse_lines(text: str) -> list[str]:
    """Adapter outputs arrive as numbered or bulleted lines; strip the markers."""
    out = []
    for line in text.splitlines():
        line = re.sub(r"^\s*(?:\d+[.)]|[-*•])\s*", "", line).strip()
        if line:
            out.append(line)
    return out


def _most_similar_gold_paragraph(claim: Claim, gold: Sequence[QAPair]) -> Optional[str]:
    paragraphs = []
    for qa in gold:
        for para in re.split(r"\n\s*\n", qa.answer.text):
            if para.strip():
                paragraphs.append(para.strip())
    if not paragraphs:
        return None
    index = Bm25Index.build({str(i): p for i, p in enumerate(paragraphs)})
    top = index.topk(claim.text, 1)
    return paragraphs[int(top[0])] if top else None


def generate_queries(
    claim: Claim,
    gold: Sequence[QAPair],
    generator: ModelAdapter,
    failures: Optional[list[BuildFailure]] = None,
) -> list[QuerySpec]:
    """Emit search queries for every applicable query family.

    Gold-derived families are skipped when no gold QA pairs exist. A
    generator failure in one family is recorded and the others proceed.
    """
    out: list[QuerySpec] = []

    def emit(family: QueryFamily, texts: Sequence[str]) -> None:
        for text in texts:
            if text.strip():
                out.append(QuerySpec(claim_id=claim.id, query_text=text.strip(), family=family))

    def generate(family: QueryFamily, prompt: str) -> list[str]:
        try:
            return _parse_lines(generator.complete(prompt))
        except Exception as exc:
            logger.warning("query family %s failed for claim %s: %s", family.value, claim.id, exc)
            if failures is not None:
                failures.append(BuildFailure("generate_queries", family.value, str(exc)))
            return []

    emit(
        QueryFamily.GENERATED_QUESTIONS,
        generate(
            QueryFamily.GENERATED_QUESTIONS,
            prompts.GENERATED_QUESTIONS.format(claim=claim.text),
        ),
    )
    emit(
        QueryFamily.BACKGROUND_QUERIES,
        generate(
            QueryFamily.BACKGROUND_QUERIES, prompts.BACKGROUND_QUERIES.format(claim=claim.text)
        ),
    )
    emit(
        QueryFamily.PROVENANCE_QUERIES,
        generate(
            QueryFamily.PROVENANCE_QUERIES, prompts.PROVENANCE_QUERIES.format(claim=claim.text)
        ),
    )

    entities = generate(
        QueryFamily.CLAIM_NAMED_ENTITIES, prompts.EXTRACT_ENTITIES.format(claim=claim.text)
    )
    if entities:
        # one query per entity, plus one query containing all entities
        emit(QueryFamily.CLAIM_NAMED_ENTITIES, entities + [" ".join(entities)])

    for family in ADVERSARIAL_FAMILIES:
        template = (
            prompts.DIFFERENT_EVENT_SAME_ENTITY
            if family == QueryFamily.DIFFERENT_EVENT_SAME_ENTITY
            else prompts.SIMILAR_ENTITIES
        )
        emit(family, generate(family, template.format(claim=claim.text)))

    if gold:
        para = _most_similar_gold_paragraph(claim, gold)
        if para:
            emit(QueryFamily.MOST_SIMILAR_GOLD_EVIDENCE, [para])
        gold_urls = sorted({qa.answer.url for qa in gold if qa.answer.url})
        for url in gold_urls:
            emit(
                QueryFamily.GOLD_URL_QUESTIONS,
                generate(
                    QueryFamily.GOLD_URL_QUESTIONS, prompts.GOLD_URL_QUESTIONS.format(url=url)
                ),
            )
        emit(QueryFamily.GOLD_QUESTIONS, [qa.question for qa in gold])
        emit(
            QueryFamily.CLAIM_PLUS_GOLD_QUESTION,
            [f"{claim.text} {qa.question}" for qa in gold],
        )
        emit(
            QueryFamily.REPHRASED_GOLD_QUESTIONS,
            [
                q
                for qa in gold
                for q in generate(
                    QueryFamily.REPHRASED_GOLD_QUESTIONS,
                    prompts.REPHRASE.format(text=qa.question),
                )
            ],
        )
        emit(QueryFamily.GOLD_ANSWERS, [qa.answer.text for qa in gold if qa.answer.text.strip()])
        emit(
            QueryFamily.REPHRASED_GOLD_ANSWERS,
            [
                a
                for qa in gold
                if qa.answer.text.strip()
                for a in generate(
                    QueryFamily.REPHRASED_GOLD_ANSWERS,
                    prompts.REPHRASE.format(text=qa.answer.text),
                )
            ],
        )
    return out


def search_text(
    q: QuerySpec,
    before: dt.date,
    client: SearchClient,
    blocklist: frozenset[str] = DEFAULT_BLOCKLIST,
    failures: Optional[list[BuildFailure]] = None,
) -> list[str]:
    """First-page result URLs, date-restricted to before ``before`` and with
    fact-checking hosts removed."""
    try:
        results = with_retries(lambda: client.search(q.query_text))
    except Exception as exc:
        logger.warning("search failed for query %r: %s", q.query_text, exc)
        if failures is not None:
            failures.append(BuildFailure("search_text", q.query_text, str(exc)))
        return []
    urls = []
    for r in results:
        if r.published is not None and r.published >= before:
            continue
        if urlsplit(r.url).netloc in blocklist:
            continue
        urls.append(r.url)
    return urls


def reverse_image_search(
    image: bytes,
    claim_date: dt.date,
    ris: RisClient,
    dater: DateExtractor,
    strict: bool = False,
    flagged: Optional[list[str]] = None,
    failures: Optional[list[BuildFailure]] = None,
) -> list[str]:
    """Pages containing the same or visually similar images, restricted to
    those published before the claim date.

    Pages with no extractable date are kept and flagged (dropped in strict
    mode), since dropping them silently would starve image evidence.
    """
    try:
        pages = ris.search(image)
    except Exception as exc:
        logger.warning("reverse image search failed: %s", exc)
        if failures is not None:
            failures.append(BuildFailure("reverse_image_search", "<image>", str(exc)))
        return []
    kept = []
    for url in pages:
        published = dater.extract_date(url)
        if published is None:
            if strict:
                continue
            if flagged is not None:
                flagged.append(url)
            kept.append(url)
        elif published < claim_date:
            kept.append(url)
    return kept


# ---------------------------------------------------------------------------
# scraping


class _TextExtractor(HTMLParser):
    _SKIP = {"script", "style", "nav", "header", "footer", "aside", "form", "noscript"}
    _BLOCK = {"p", "div", "br", "li", "h1", "h2", "h3", "h4", "h5", "h6", "tr", "section"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self._chunks: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._SKIP:
            self._skip_depth += 1
        elif tag in self._BLOCK:
            self._chunks.append("\n")

    def handle_endtag(self, tag):
        if tag in self._SKIP and self._skip_depth > 0:
            self._skip_depth -= 1
        elif tag in self._BLOCK:
            self._chunks.append("\n")

    def handle_data(self, data):
        if self._skip_depth == 0:
            self._chunks.append(data)

    def text(self) -> str:
        raw = "".join(self._chunks)
        lines = [re.sub(r"\s+", " ", line).strip() for line in raw.split("\n")]
        return "\n".join(line for line in lines if line)


def extract_html_text(html: str) -> str:
    parser = _TextExtractor()
    parser.feed(html)
    return parser.text()


_PDF_STREAM_RE = re.compile(rb"stream\r?\n(.*?)\s*endstream", re.DOTALL)
_PDF_TEXT_RE = re.compile(rb"\((?:\\.|[^\\()])*\)")


def _pdf_unescape(raw: bytes) -> str:
    out = []
    i = 0
    while i < len(raw):
        c = raw[i : i + 1]
        if c == b"\\" and i + 1 < len(raw):
            nxt = raw[i + 1 : i + 2]
            mapping = {b"n": "\n", b"r": "\r", b"t": "\t", b"(": "(", b")": ")", b"\\": "\\"}
            out.append(mapping.get(nxt, nxt.decode("latin-1")))
            i += 2
        else:
            out.append(c.decode("latin-1"))
            i += 1
    return "".join(out)


def extract_pdf_text(data: bytes) -> str:
    """Text from PDF content streams (Tj/TJ string operands).

    Covers straightforwardly generated PDFs with Flate or plain streams; no
    support for exotic encodings or encrypted files.
    """
    texts: list[str] = []
    for match in _PDF_STREAM_RE.finditer(data):
        stream = match.group(1).strip()
        # ASCII85 framing (ends with ~>) wraps the Flate data in some writers
        if stream.endswith(b"~>"):
            try:
                stream = base64.a85decode(stream[:-2], ignorechars=b" \t\n\r\x0b\x0c")
            except ValueError:
                pass
        try:
            stream = zlib.decompress(stream)
        except zlib.error:
            pass
        if b"Tj" not in stream and b"TJ" not in stream:
            continue
        for s in _PDF_TEXT_RE.findall(stream):
            texts.append(_pdf_unescape(s[1:-1]))
    return " ".join(t for t in texts if t.strip())


def scrape(
    url: str,
    fetcher: Fetcher,
    failures: Optional[list[BuildFailure]] = None,
) -> str:
    """Main text of a page, dispatching on content type (HTML vs PDF).

    Empty text is a legitimate outcome (login walls, fetch errors); the
    reason is recorded in ``failures``.
    """
    try:
        result = fetcher.fetch(url)
    except Exception as exc:
        if failures is not None:
            failures.append(BuildFailure("scrape", url, f"fetch error: {exc}"))
        return ""
    if result.status >= 400:
        if failures is not None:
            failures.append(BuildFailure("scrape", url, f"HTTP {result.status}"))
        return ""
    ctype = result.content_type.split(";")[0].strip().lower()
    if ctype == "application/pdf" or url.lower().endswith(".pdf"):
        return extract_pdf_text(result.body)
    return extract_html_text(result.body.decode("utf-8", errors="replace"))


# ---------------------------------------------------------------------------
# assembly


def assemble_store(
    entries: Sequence[KnowledgeStoreEntry],
    gold_urls: Sequence[tuple[str, str]],
    seed: int,
    images: Optional[dict[str, bytes]] = None,
) -> KnowledgeStore:
    """Dedup (first occurrence wins), force gold URLs in, shuffle by seed.

    ``gold_urls`` is (claim_id, url) pairs; a gold URL absent from the crawl
    is added as an empty-text entry so the gold-inclusion invariant holds.
    """
    deduped: list[KnowledgeStoreEntry] = []
    seen: set[str] = set()
    for entry in entries:
        key = normalize_url(entry.url)
        if key in seen:
            continue
        seen.add(key)
        deduped.append(entry)
    for claim_id, url in gold_urls:
        key = normalize_url(url)
        if key not in seen:
            seen.add(key)
            deduped.append(
                KnowledgeStoreEntry(
                    url=url, text="", channel=Channel.GOOGLE_SEARCH_TEXT, claim_id=claim_id
                )
            )
    rng = random.Random(seed)
    rng.shuffle(deduped)
    return KnowledgeStore(
        entries=deduped,
        images=dict(images or {}),
        gold_urls=[url for _, url in gold_urls],
    )


def collect_images(
    queries: Sequence[QuerySpec],
    client: ImageSearchClient,
    cap: int,
    fetcher: Fetcher,
    claim_dates: Optional[dict[str, dt.date]] = None,
    failures: Optional[list[BuildFailure]] = None,
) -> tuple[list[KnowledgeStoreEntry], dict[str, bytes]]:
    """Download image evidence, at most ``cap`` top result URLs per query.

    Duplicate image URLs across queries are stored once; downloads are
    content-addressed by digest.
    """
    if cap < 0:
        raise ValueError("cap must be >= 0")
    entries: list[KnowledgeStoreEntry] = []
    blobs: dict[str, bytes] = {}
    seen: set[str] = set()
    for q in queries:
        before = (claim_dates or {}).get(q.claim_id)
        try:
            results = client.search_images(q.query_text)
        except Exception as exc:
            if failures is not None:
                failures.append(BuildFailure("collect_images", q.query_text, str(exc)))
            continue
        kept = 0
        for r in results:
            if kept >= cap:
                break
            if before is not None and r.published is not None and r.published >= before:
                continue
            kept += 1
            key = normalize_url(r.url)
            if key in seen:
                continue
            seen.add(key)
            try:
                fetched = fetcher.fetch(r.url)
                if fetched.status >= 400:
                    raise RuntimeError(f"HTTP {fetched.status}")
            except Exception as exc:
                if failures is not None:
                    failures.append(BuildFailure("collect_images", r.url, str(exc)))
                continue
            digest = content_digest(fetched.body)
            blobs[digest] = fetched.body
            entries.append(
                KnowledgeStoreEntry(
                    url=r.url,
                    text="",
                    channel=Channel.GOOGLE_SEARCH_IMAGE,
                    claim_id=q.claim_id,
                    publication_date=r.published,
                    media_digest=digest,
                )
            )
    return entries, blobs


@dataclass
class BuildReport:
    failures: list[BuildFailure] = field(default_factory=list)
    flagged_undated: list[str] = field(default_factory=list)


def build_store(
    claims: Sequence[Claim],
    generator: ModelAdapter,
    search_client: SearchClient,
    image_client: ImageSearchClient,
    ris_client: RisClient,
    dater: DateExtractor,
    fetcher: Fetcher,
    seed: int = 0,
    image_cap: int = 100,
    blocklist: frozenset[str] = DEFAULT_BLOCKLIST,
    strict_ris_dates: bool = False,
    workers: int = 4,
) -> tuple[KnowledgeStore, BuildReport]:
    """End-to-end construction over a claim set.

    Fan-out over queries and URLs is bounded by ``workers``; the returned
    store is immutable and safe to share.
    """
    report = BuildReport()
    claim_dates = {c.id: c.claim_date for c in claims}
    all_queries: list[QuerySpec] = []
    gold_urls: list[tuple[str, str]] = []
    entries: list[KnowledgeStoreEntry] = []
    flagged = report.flagged_undated

    for claim in claims:
        queries = generate_queries(claim, claim.gold_qas, generator, failures=report.failures)
        all_queries.extend(queries)
        for qa in claim.gold_qas:
            if qa.answer.url:
                gold_urls.append((claim.id, qa.answer.url))

        url_channel: list[tuple[str, Channel]] = []
        for q in queries:
            for url in search_text(
                q, claim.claim_date, search_client, blocklist, failures=report.failures
            ):
                url_channel.append((url, Channel.GOOGLE_SEARCH_TEXT))
        for image in claim.images:
            for url in reverse_image_search(
                image.to_bytes(),
                claim.claim_date,
                ris_client,
                dater,
                strict=strict_ris_dates,
                flagged=flagged,
                failures=report.failures,
            ):
                url_channel.append((url, Channel.REVERSE_IMAGE_SEARCH))

        def scrape_one(item: tuple[str, Channel]) -> KnowledgeStoreEntry:
            url, channel = item
            text = scrape(url, fetcher, failures=report.failures)
            return KnowledgeStoreEntry(
                url=url,
                text=text,
                channel=channel,
                claim_id=claim.id,
                publication_date=dater.extract_date(url),
            )

        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries.extend(pool.map(scrape_one, url_channel))

    image_entries, blobs = collect_images(
        all_queries,
        image_client,
        image_cap,
        fetcher,
        claim_dates=claim_dates,
        failures=report.failures,
    )
    entries.extend(image_entries)
    store = assemble_store(entries, gold_urls, seed=seed, images=blobs)
    return store, report
