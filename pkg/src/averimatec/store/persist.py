"""On-disk store layout (versioned):

    <root>/store.json                  manifest: format_version, gold URLs
    <root>/claims/<claim_id>/entries.jsonl
    <root>/images/<sha256 digest>      raw image bytes, content-addressed
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

from .core import Channel, KnowledgeStore, KnowledgeStoreEntry

STORE_FORMAT_VERSION = 1


def _entry_to_dict(e: KnowledgeStoreEntry) -> dict:
    return {
        "url": e.url,
        "text": e.text,
        "channel": e.channel.value,
        "claim_id": e.claim_id,
        "publication_date": e.publication_date.isoformat() if e.publication_date else None,
        "media_digest": e.media_digest,
        "undated": e.undated,
    }


def _entry_from_dict(d: dict) -> KnowledgeStoreEntry:
    return KnowledgeStoreEntry(
        url=d["url"],
        text=d.get("text", ""),
        channel=Channel(d["channel"]),
        claim_id=d["claim_id"],
        publication_date=(
            dt.date.fromisoformat(d["publication_date"]) if d.get("publication_date") else None
        ),
        media_digest=d.get("media_digest"),
        undated=bool(d.get("undated", False)),
    )


def save_store(store: KnowledgeStore, root: str | Path) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "store.json").write_text(
        json.dumps(
            {
                "format_version": STORE_FORMAT_VERSION,
                "gold_urls": store.gold_urls,
                # claim order within the file preserves the assembled shuffle
                "claim_order": [e.claim_id for e in store.entries],
            }
        )
    )
    by_claim: dict[str, list[KnowledgeStoreEntry]] = {}
    for entry in store.entries:
        by_claim.setdefault(entry.claim_id, []).append(entry)
    claims_dir = root / "claims"
    for claim_id, entries in by_claim.items():
        d = claims_dir / claim_id
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "entries.jsonl", "w", encoding="utf-8") as fh:
            for entry in entries:
                fh.write(json.dumps(_entry_to_dict(entry), ensure_ascii=False) + "\n")
    images_dir = root / "images"
    if store.images:
        images_dir.mkdir(parents=True, exist_ok=True)
        for digest, blob in store.images.items():
            path = images_dir / digest
            if not path.exists():
                path.write_bytes(blob)


def load_store(root: str | Path) -> KnowledgeStore:
    root = Path(root)
    manifest = json.loads((root / "store.json").read_text())
    if manifest.get("format_version") != STORE_FORMAT_VERSION:
        raise ValueError(f"unsupported store format version: {manifest.get('format_version')}")
    per_claim: dict[str, list[KnowledgeStoreEntry]] = {}
    claims_dir = root / "claims"
    if claims_dir.exists():
        for claim_dir in sorted(claims_dir.iterdir()):
            entries_file = claim_dir / "entries.jsonl"
            if not entries_file.exists():
                continue
            entries = [
                _entry_from_dict(json.loads(line))
                for line in entries_file.read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
            per_claim[claim_dir.name] = entries
    # reconstruct the assembled order from the manifest
    cursors = {cid: iter(entries) for cid, entries in per_claim.items()}
    ordered: list[KnowledgeStoreEntry] = []
    for claim_id in manifest.get("claim_order", []):
        ordered.append(next(cursors[claim_id]))
    # any entries not covered by claim_order (older manifests) go at the end
    for cursor in cursors.values():
        ordered.extend(cursor)
    images: dict[str, bytes] = {}
    images_dir = root / "images"
    if images_dir.exists():
        for path in images_dir.iterdir():
            images[path.name] = path.read_bytes()
    return KnowledgeStore(
        entries=ordered, images=images, gold_urls=list(manifest.get("gold_urls", []))
    )
