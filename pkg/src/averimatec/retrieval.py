"""Evidence ranking: BM25 over an inverted index, dense reranking, and
image-text similarity retrieval.

Index tokenization is lowercase Unicode-alphanumeric word segmentation with
no stemming; defaults k1=1.2, b=0.75. IDF uses the ln((N - df + 0.5)/(df +
0.5) + 1) form, so scores are non-negative.
"""

from __future__ import annotations

import json
import logging
import math
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .adapters import EmbeddingProvider

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"\w+", re.UNICODE)

INDEX_FORMAT_VERSION = 1
INDEX_MAGIC = b"BM25IDX1"


def tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


@dataclass
class Bm25Index:
    k1: float = 1.2
    b: float = 0.75
    # doc_id -> term frequency map; insertion order is the corpus order
    _docs: dict[str, Counter] = field(default_factory=dict)
    _df: Counter = field(default_factory=Counter)
    _total_len: int = 0
    _frozen: bool = False

    @property
    def size(self) -> int:
        return len(self._docs)

    @property
    def avgdl(self) -> float:
        return self._total_len / len(self._docs) if self._docs else 0.0

    def doc_ids(self) -> list[str]:
        return list(self._docs)

    def add(self, doc_id: str, text: str) -> None:
        if self._frozen:
            raise RuntimeError("index is frozen; build a new one to add documents")
        if doc_id in self._docs:
            raise ValueError(f"duplicate doc id: {doc_id!r}")
        tf = Counter(tokenize(text))
        self._docs[doc_id] = tf
        self._total_len += sum(tf.values())
        for term in tf:
            self._df[term] += 1

    def freeze(self) -> "Bm25Index":
        """After freezing the index is immutable and safe to query concurrently."""
        self._frozen = True
        return self

    @classmethod
    def build(cls, docs: dict[str, str], k1: float = 1.2, b: float = 0.75) -> "Bm25Index":
        index = cls(k1=k1, b=b)
        for doc_id, text in docs.items():
            index.add(doc_id, text)
        return index.freeze()

    def idf(self, term: str) -> float:
        df = self._df.get(term, 0)
        n = len(self._docs)
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def score(self, query_tokens: Sequence[str], doc_id: str) -> float:
        """BM25 score of one document; duplicated query terms count each time."""
        tf = self._docs[doc_id]
        dl = sum(tf.values())
        avgdl = self.avgdl
        norm = self.k1 * (1.0 - self.b + self.b * dl / avgdl) if avgdl > 0 else self.k1
        total = 0.0
        for term in query_tokens:
            f = tf.get(term, 0)
            if f == 0:
                continue
            total += self.idf(term) * (f * (self.k1 + 1.0)) / (f + norm)
        return total

    def topk(self, query: str, k: int) -> list[str]:
        """Top-k doc ids by BM25 score; ties broken by ascending doc id."""
        if k < 0:
            raise ValueError("k must be >= 0")
        query_tokens = tokenize(query)
        scored = [(-self.score(query_tokens, d), d) for d in self._docs]
        scored.sort()
        return [d for _, d in scored[:k]]

    # ------------------------------------------------------------------
    # persistence: magic + version header, then a JSON payload

    def save(self, path: str | Path) -> None:
        payload = {
            "version": INDEX_FORMAT_VERSION,
            "k1": self.k1,
            "b": self.b,
            "docs": {doc_id: dict(tf) for doc_id, tf in self._docs.items()},
        }
        blob = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(INDEX_MAGIC)
            fh.write(struct.pack(">I", INDEX_FORMAT_VERSION))
            fh.write(blob)

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        with open(path, "rb") as fh:
            magic = fh.read(len(INDEX_MAGIC))
            if magic != INDEX_MAGIC:
                raise ValueError(f"{path}: not a BM25 index file")
            (version,) = struct.unpack(">I", fh.read(4))
            if version != INDEX_FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported index version {version}")
            payload = json.loads(fh.read().decode("utf-8"))
        index = cls(k1=payload["k1"], b=payload["b"])
        for doc_id, tf_map in payload["docs"].items():
            tf = Counter({t: int(f) for t, f in tf_map.items()})
            index._docs[doc_id] = tf
            index._total_len += sum(tf.values())
            for term in tf:
                index._df[term] += 1
        return index.freeze()


def bm25_score(index: Bm25Index, query_tokens: Sequence[str], doc_id: str) -> float:
    return index.score(query_tokens, doc_id)


def topk_text(index: Bm25Index, query: str, k: int) -> list[str]:
    return index.topk(query, k)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def rerank_dense(
    candidates: Sequence[str],
    texts: dict[str, str],
    query: str,
    provider: EmbeddingProvider,
    m: int,
) -> list[str]:
    """Keep the top-m candidates by query/document cosine similarity.

    Degenerate cases keep the incoming (BM25) order: a zero query vector, or
    any provider failure, falls back with a logged warning.
    """
    if m > len(candidates):
        raise ValueError("m must not exceed the candidate count")
    try:
        qvec = provider.embed_text(query)
        if np.linalg.norm(qvec) == 0.0:
            logger.warning("zero query embedding; keeping sparse order")
            return list(candidates)[:m]
        scored = []
        for pos, doc_id in enumerate(candidates):
            dvec = provider.embed_text(texts[doc_id])
            # stable on score ties: earlier candidate first
            scored.append((-_cosine(qvec, dvec), pos, doc_id))
        scored.sort()
        return [doc_id for _, _, doc_id in scored[:m]]
    except Exception as exc:
        logger.warning("dense rerank failed (%s); keeping sparse order", exc)
        return list(candidates)[:m]


def topk_images(
    images: Sequence[tuple[str, bytes]],
    query: str,
    provider: EmbeddingProvider,
    k: int,
    skipped: Optional[list[str]] = None,
) -> list[str]:
    """Rank stored images by text-image cosine similarity and keep the top k.

    ``images`` is (image_id, raw bytes). Unreadable entries are skipped and
    recorded in ``skipped`` when provided.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    qvec = provider.embed_text(query)
    scored = []
    for image_id, data in images:
        try:
            ivec = provider.embed_image(data)
        except Exception as exc:
            logger.warning("skipping unreadable image %s: %s", image_id, exc)
            if skipped is not None:
                skipped.append(image_id)
            continue
        scored.append((-_cosine(qvec, ivec), image_id))
    scored.sort()
    return [image_id for _, image_id in scored[:k]]
