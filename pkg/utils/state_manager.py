import json
import logging
import os
import sqlite3
from contextlib import closing
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, Optional

from config.settings import settings
from oracle.results import ComplexityQuery, ComplexityResult

logger = logging.getLogger(__name__)


@dataclass
class CacheEntry:
    query_hash: str
    predicate_kind: str
    result: Dict[str, Any] = field(default_factory=dict)
    created_at: str = field(default_factory=lambda: datetime.now().isoformat())


class ComplexityCache:
    """Complexity results keyed by the sha256 of their query, so long searches survive restarts."""

    def __init__(self, db_path: Optional[str] = None, enabled: Optional[bool] = None):
        config = settings.get_cache_config()
        self.db_path = db_path or config['path']
        self.enabled = config['enabled'] if enabled is None else enabled
        self.hits = 0
        self.misses = 0
        if self.enabled:
            self._init_db()

    def _connect(self):
        return closing(sqlite3.connect(self.db_path))

    def _init_db(self):
        '''Initialize cache database'''
        directory = os.path.dirname(self.db_path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        with self._connect() as conn, conn:
            conn.execute('''
                CREATE TABLE IF NOT EXISTS complexity_results (
                    query_hash TEXT PRIMARY KEY,
                    predicate_kind TEXT,
                    result TEXT,
                    created_at TEXT
                )
            ''')

    def get_entry(self, query_hash: str) -> Optional[CacheEntry]:
        '''Get a cached entry by query hash'''
        if not self.enabled:
            return None
        with self._connect() as conn:
            row = conn.execute("SELECT * FROM complexity_results WHERE query_hash = ?", (query_hash,)).fetchone()

        if row:
            return CacheEntry(query_hash=row[0], predicate_kind=row[1],
                              result=json.loads(row[2]) if row[2] else {}, created_at=row[3])
        return None

    def save_entry(self, entry: CacheEntry):
        '''Save a cache entry'''
        if not self.enabled:
            return
        with self._connect() as conn, conn:
            conn.execute('''
                INSERT OR REPLACE INTO complexity_results
                (query_hash, predicate_kind, result, created_at)
                VALUES (?, ?, ?, ?)
            ''', (
                entry.query_hash,
                entry.predicate_kind,
                json.dumps(entry.result, sort_keys=True),
                entry.created_at,
            ))

    def get_result(self, query: ComplexityQuery) -> Optional[ComplexityResult]:
        entry = self.get_entry(query.cache_key())
        if entry is None:
            self.misses += 1
            return None
        self.hits += 1
        return ComplexityResult.from_dict(entry.result, query.gate_set)

    def save_result(self, query: ComplexityQuery, result: ComplexityResult):
        self.save_entry(CacheEntry(query.cache_key(), query.predicate.kind, result.to_dict()))

    def count(self) -> int:
        if not self.enabled:
            return 0
        with self._connect() as conn:
            (total,) = conn.execute("SELECT COUNT(*) FROM complexity_results").fetchone()
        return int(total)

    def clear(self):
        '''Drop every cached result'''
        if not self.enabled:
            return
        with self._connect() as conn, conn:
            conn.execute("DELETE FROM complexity_results")
        logger.info("complexity cache cleared at %s", self.db_path)
