from .core import (
    Channel,
    KnowledgeStore,
    KnowledgeStoreEntry,
    QueryFamily,
    QuerySpec,
    StoreStats,
    compute_stats,
    normalize_url,
)
from .build import (
    assemble_store,
    build_store,
    collect_images,
    generate_queries,
    reverse_image_search,
    scrape,
    search_text,
    DEFAULT_BLOCKLIST,
)
from .persist import load_store, save_store

__all__ = [
    "Channel",
    "KnowledgeStore",
    "KnowledgeStoreEntry",
    "QueryFamily",
    "QuerySpec",
    "StoreStats",
    "DEFAULT_BLOCKLIST",
    "assemble_store",
    "build_store",
    "collect_images",
    "compute_stats",
    "generate_queries",
    "load_store",
    "normalize_url",
    "reverse_image_search",
    "save_store",
    "scrape",
    "search_text",
]
