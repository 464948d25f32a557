"""Pluggable external-model interfaces and their deterministic offline mocks.

Three adapter families are used across the harness:

* text/vision generation (``ModelAdapter``): ``complete(prompt, images) -> str``
* embeddings (``EmbeddingProvider``): text or image bytes -> fixed-dim vector
* judging (``TextJudge`` / ``VisualJudge``): reference-coverage decisions and
  0-10 image-similarity scores

HTTP variants speak small JSON contracts (documented per class); mocks are
pure functions of their inputs so every test runs offline and reproducibly.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import numpy as np


class AdapterError(RuntimeError):
    """An external adapter failed after retries."""


def _digest(*parts: bytes | str) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, str):
            p = p.encode("utf-8")
        h.update(len(p).to_bytes(8, "big"))
        h.update(p)
    return h.hexdigest()


def with_retries(fn: Callable[[], object], attempts: int = 3, base_delay: float = 0.2):
    """Run ``fn`` with bounded exponential backoff; re-raise the last failure."""
    last: Optional[Exception] = None
    for i in range(attempts):
        try:
            return fn()
        except Exception as exc:  # adapter backends raise all sorts
            last = exc
            if i + 1 < attempts:
                time.sleep(base_delay * (2**i))
    raise AdapterError(f"adapter call failed after {attempts} attempts: {last}") from last


# ---------------------------------------------------------------------------
# generation


class ModelAdapter(Protocol):
    name: str

    def complete(self, prompt: str, images: Sequence[bytes] = ()) -> str: ...


@dataclass
class MockModelAdapter:
    """Deterministic stand-in for an LLM/MLLM.

    Rules map a regex over the prompt to a responder; the first match wins.
    With no match the adapter echoes the prompt, which is enough for
    fixture-driven tests that only care about determinism.
    """

    name: str = "mock"
    rules: list[tuple[str, Callable[[str, Sequence[bytes]], str]]] = field(default_factory=list)
    calls: list[str] = field(default_factory=list)

    def complete(self, prompt: str, images: Sequence[bytes] = ()) -> str:
        self.calls.append(prompt)
        for pattern, responder in self.rules:
            if re.search(pattern, prompt):
                return responder(prompt, images)
        return prompt


@dataclass
class FailingModelAdapter:
    name: str = "failing"

    def complete(self, prompt: str, images: Sequence[bytes] = ()) -> str:
        raise AdapterError("adapter configured to fail")


class HttpModelAdapter:
    """POST {prompt, images?: [base64]} -> {text} against a generation service.

    Base URL comes from the constructor or the MODEL_ADAPTER_URL environment
    variable; an optional bearer token from MODEL_ADAPTER_TOKEN.
    """

    def __init__(self, base_url: Optional[str] = None, name: str = "http", timeout: float = 60.0):
        import httpx

        self.name = name
        self.base_url = base_url or os.environ.get("MODEL_ADAPTER_URL", "")
        if not self.base_url:
            raise ValueError("no model adapter URL configured")
        headers = {}
        token = os.environ.get("MODEL_ADAPTER_TOKEN")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(base_url=self.base_url, headers=headers, timeout=timeout)

    def complete(self, prompt: str, images: Sequence[bytes] = ()) -> str:
        import base64

        body = {"prompt": prompt}
        if images:
            body["images"] = [base64.b64encode(i).decode("ascii") for i in images]

        def call():
            resp = self._client.post("/complete", json=body)
            resp.raise_for_status()
            return resp.json()["text"]

        return with_retries(call)


# ---------------------------------------------------------------------------
# embeddings


class EmbeddingProvider(Protocol):
    dim: int

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_image(self, data: bytes) -> np.ndarray: ...


class HashEmbeddingProvider:
    """Deterministic pseudo-embeddings derived from a content digest.

    Not semantically meaningful, but stable across runs and platforms, which
    is what retrieval tests need.
    """

    def __init__(self, dim: int = 32):
        self.dim = dim

    def _vector(self, payload: bytes, kind: str) -> np.ndarray:
        seed = int(_digest(kind, payload)[:16], 16) % (2**32)
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dim)
        norm = np.linalg.norm(v)
        return v / norm if norm > 0 else v

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector(text.encode("utf-8"), "text")

    def embed_image(self, data: bytes) -> np.ndarray:
        return self._vector(data, "image")


class HttpEmbeddingProvider:
    """POST {kind: "text"|"image", payload} -> {vector: [d floats]}."""

    def __init__(self, base_url: str, dim: int, timeout: float = 60.0):
        import httpx

        self.dim = dim
        self._client = httpx.Client(base_url=base_url, timeout=timeout)

    def _embed(self, kind: str, payload: str) -> np.ndarray:
        def call():
            resp = self._client.post("/embed", json={"kind": kind, "payload": payload})
            resp.raise_for_status()
            return np.asarray(resp.json()["vector"], dtype=float)

        vec = with_retries(call)
        if vec.shape != (self.dim,):
            raise AdapterError(f"embedding dimension mismatch: {vec.shape} != ({self.dim},)")
        return vec

    def embed_text(self, text: str) -> np.ndarray:
        return self._embed("text", text)

    def embed_image(self, data: bytes) -> np.ndarray:
        import base64

        return self._embed("image", base64.b64encode(data).decode("ascii"))


# ---------------------------------------------------------------------------
# judging


@dataclass(frozen=True)
class CoverageDecision:
    """Per-reference outcome of a coverage judgement."""

    covered: bool
    matched_index: Optional[int] = None  # index into the predictions list


class TextJudge(Protocol):
    def coverage(
        self, references: Sequence[str], predictions: Sequence[str]
    ) -> list[CoverageDecision]: ...


class VisualJudge(Protocol):
    def similarity(self, image_a: bytes, image_b: bytes) -> int: ...


def _normalize_for_match(text: str) -> str:
    return re.sub(r"\W+", " ", text.lower()).strip()


class MockTextJudge:
    """Coverage by normalized-substring containment; pure and monotone."""

    def coverage(
        self, references: Sequence[str], predictions: Sequence[str]
    ) -> list[CoverageDecision]:
        norm_preds = [_normalize_for_match(p) for p in predictions]
        out = []
        for ref in references:
            norm_ref = _normalize_for_match(ref)
            matched = None
            if norm_ref:
                for i, pred in enumerate(norm_preds):
                    if norm_ref in pred:
                        matched = i
                        break
            out.append(CoverageDecision(covered=matched is not None, matched_index=matched))
        return out


@dataclass
class MockVisualJudge:
    """Byte-identical images score 10; otherwise a configurable table or default."""

    default_score: int = 0
    score_table: dict[tuple[str, str], int] = field(default_factory=dict)

    def similarity(self, image_a: bytes, image_b: bytes) -> int:
        if image_a == image_b:
            return 10
        key = (_digest(image_a), _digest(image_b))
        return self.score_table.get(key, self.default_score)


class HttpJudge:
    """HTTP judge speaking both interfaces.

    POST /coverage {references: [..], predictions: [..]}
        -> {decisions: [{covered, matched_index}]}
    POST /visual {image_a: base64, image_b: base64} -> {score: 0..10}
    """

    def __init__(self, base_url: str, timeout: float = 120.0):
        import httpx

        self._client = httpx.Client(base_url=base_url, timeout=timeout)

    def coverage(self, references, predictions):
        def call():
            resp = self._client.post(
                "/coverage",
                json={"references": list(references), "predictions": list(predictions)},
            )
            resp.raise_for_status()
            return resp.json()["decisions"]

        return [
            CoverageDecision(covered=bool(d["covered"]), matched_index=d.get("matched_index"))
            for d in with_retries(call)
        ]

    def similarity(self, image_a: bytes, image_b: bytes) -> int:
        import base64

        def call():
            resp = self._client.post(
                "/visual",
                json={
                    "image_a": base64.b64encode(image_a).decode("ascii"),
                    "image_b": base64.b64encode(image_b).decode("ascii"),
                },
            )
            resp.raise_for_status()
            return int(resp.json()["score"])

        return with_retries(call)


class CachingJudge:
    """Digest-keyed cache around a judge; warm hits never touch the backend.

    Concurrent callers of the same key share one in-flight computation. An
    optional cache directory persists entries as JSON files across runs.
    """

    def __init__(self, inner, cache_dir: Optional[str | Path] = None):
        self._inner = inner
        self._mem: dict[str, object] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self._dir = Path(cache_dir) if cache_dir else None
        if self._dir:
            self._dir.mkdir(parents=True, exist_ok=True)
        self.backend_calls = 0

    def _lock_for(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def _get(self, key: str, compute: Callable[[], object], encode, decode):
        if key in self._mem:
            return self._mem[key]
        with self._lock_for(key):
            if key in self._mem:
                return self._mem[key]
            path = self._dir / f"{key}.json" if self._dir else None
            if path and path.exists():
                value = decode(json.loads(path.read_text()))
            else:
                value = compute()
                self.backend_calls += 1
                if path:
                    path.write_text(json.dumps(encode(value)))
            self._mem[key] = value
            return value

    def coverage(self, references, predictions):
        key = _digest("coverage", json.dumps([list(references), list(predictions)]))
        return self._get(
            key,
            lambda: self._inner.coverage(references, predictions),
            encode=lambda ds: [
                {"covered": d.covered, "matched_index": d.matched_index} for d in ds
            ],
            decode=lambda raw: [
                CoverageDecision(covered=d["covered"], matched_index=d["matched_index"])
                for d in raw
            ],
        )

    def similarity(self, image_a: bytes, image_b: bytes) -> int:
        key = _digest("visual", image_a, image_b)
        return self._get(
            key,
            lambda: self._inner.similarity(image_a, image_b),
            encode=lambda s: s,
            decode=lambda raw: int(raw),
        )
