"""Knowledge-store data types and statistics."""

from __future__ import annotations

import datetime as dt
import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
from urllib.parse import urlsplit, urlunsplit


class Channel(Enum):
    GOOGLE_SEARCH_TEXT = "google_search_text"
    REVERSE_IMAGE_SEARCH = "reverse_image_search"
    GOOGLE_SEARCH_IMAGE = "google_search_image"


class QueryFamily(Enum):
    GENERATED_QUESTIONS = "generated_questions"
    BACKGROUND_QUERIES = "background_queries"
    PROVENANCE_QUERIES = "provenance_queries"
    CLAIM_NAMED_ENTITIES = "claim_named_entities"
    MOST_SIMILAR_GOLD_EVIDENCE = "most_similar_gold_evidence"
    GOLD_URL_QUESTIONS = "gold_url_questions"
    DIFFERENT_EVENT_SAME_ENTITY = "different_event_same_entity"
    SIMILAR_ENTITIES = "similar_entities"
    GOLD_QUESTIONS = "gold_questions"
    CLAIM_PLUS_GOLD_QUESTION = "claim_plus_gold_question"
    REPHRASED_GOLD_QUESTIONS = "rephrased_gold_questions"
    GOLD_ANSWERS = "gold_answers"
    REPHRASED_GOLD_ANSWERS = "rephrased_gold_answers"


# Distractor families built by perturbing entities/dates/events.
ADVERSARIAL_FAMILIES = frozenset(
    {QueryFamily.DIFFERENT_EVENT_SAME_ENTITY, QueryFamily.SIMILAR_ENTITIES}
)

# Families that need gold QA annotations to exist.
GOLD_DERIVED_FAMILIES = frozenset(
    {
        QueryFamily.MOST_SIMILAR_GOLD_EVIDENCE,
        QueryFamily.GOLD_URL_QUESTIONS,
        QueryFamily.GOLD_QUESTIONS,
        QueryFamily.CLAIM_PLUS_GOLD_QUESTION,
        QueryFamily.REPHRASED_GOLD_QUESTIONS,
        QueryFamily.GOLD_ANSWERS,
        QueryFamily.REPHRASED_GOLD_ANSWERS,
    }
)


@dataclass(frozen=True)
class QuerySpec:
    claim_id: str
    query_text: str
    family: QueryFamily

    @property
    def adversarial(self) -> bool:
        return self.family in ADVERSARIAL_FAMILIES


@dataclass(frozen=True)
class KnowledgeStoreEntry:
    url: str
    text: str
    channel: Channel
    claim_id: str
    publication_date: Optional[dt.date] = None
    media_digest: Optional[str] = None  # key into KnowledgeStore.images
    undated: bool = False  # RIS page kept without an extractable date


@dataclass
class KnowledgeStore:
    """Assembled evidence pool; treat as immutable once assembled."""

    entries: list[KnowledgeStoreEntry] = field(default_factory=list)
    images: dict[str, bytes] = field(default_factory=dict)  # digest -> raw bytes
    gold_urls: list[str] = field(default_factory=list)

    def urls(self) -> list[str]:
        return [e.url for e in self.entries]

    def for_claim(self, claim_id: str) -> list[KnowledgeStoreEntry]:
        return [e for e in self.entries if e.claim_id == claim_id]

    def text_entries(self, channel: Optional[Channel] = None) -> list[KnowledgeStoreEntry]:
        out = []
        for e in self.entries:
            if e.channel == Channel.GOOGLE_SEARCH_IMAGE:
                continue
            if channel is not None and e.channel != channel:
                continue
            out.append(e)
        return out

    def image_entries(self) -> list[KnowledgeStoreEntry]:
        return [e for e in self.entries if e.channel == Channel.GOOGLE_SEARCH_IMAGE]


@dataclass(frozen=True)
class StoreStats:
    url_count_total: int
    url_count_scraped: int
    word_count: int
    ris_url_total: int
    ris_url_scraped: int
    ris_word_count: int
    image_count: int

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.url_count_scraped > self.url_count_total:
            raise ValueError("scraped count cannot exceed total count")
        if self.ris_url_scraped > self.ris_url_total:
            raise ValueError("RIS scraped count cannot exceed RIS total count")


def compute_stats(store: KnowledgeStore) -> StoreStats:
    """Counts over the assembled store; word counts are whitespace tokens."""
    text_entries = store.text_entries()
    ris = [e for e in text_entries if e.channel == Channel.REVERSE_IMAGE_SEARCH]
    return StoreStats(
        url_count_total=len(text_entries),
        url_count_scraped=sum(1 for e in text_entries if e.text.strip()),
        word_count=sum(len(e.text.split()) for e in text_entries),
        ris_url_total=len(ris),
        ris_url_scraped=sum(1 for e in ris if e.text.strip()),
        ris_word_count=sum(len(e.text.split()) for e in ris),
        image_count=len(store.image_entries()),
    )


def normalize_url(url: str) -> str:
    """Dedup key: drop the fragment and any trailing slash on the path."""
    parts = urlsplit(url.strip())
    path = parts.path.rstrip("/") if parts.path != "/" else ""
    return urlunsplit((parts.scheme, parts.netloc, path, parts.query, ""))


def content_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
