import hashlib
import json
import logging
import os
import threading
from typing import Callable, Dict, Optional, Sequence

from pkg.core.errors import StorageError
from pkg.model.dataset import ViewTriple

logger = logging.getLogger(__name__)


def view_cache_key(version: str, config_digest: str, anchor: Sequence[int]) -> str:
    """SHA-256(生成器版本, 视图配置摘要, 锚点序列)"""
    payload = json.dumps([version, config_digest, [int(i) for i in anchor]], separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ViewCacheRepository:
    """
    视图缓存，JSONL 文件，每行一个 key

    读取时损坏的行跳过并告警；追加通过锁串行化。path 为 None 时只在内存中缓存。
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self._lock = threading.Lock()
        self._entries: Dict[str, ViewTriple] = {}
        if path and os.path.exists(path):
            self._load()

    def _load(self) -> None:
        try:
            with open(self.path, "r", encoding="utf-8") as f:
                for line_no, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                        self._entries[record["key"]] = ViewTriple.from_record(record)
                    except Exception as e:
                        logger.warning(f"Skipping corrupt view cache line {self.path}:{line_no}: {e}")
        except (OSError, UnicodeDecodeError) as e:
            raise StorageError(f"cannot read view cache {self.path}: {e}") from e
        logger.info(f"Loaded {len(self._entries)} cached view triples from {self.path}")

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> Optional[ViewTriple]:
        return self._entries.get(key)

    def put(self, key: str, triple: ViewTriple) -> None:
        """写入内存并追加到文件"""
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = triple
            if not self.path:
                return
            try:
                directory = os.path.dirname(self.path)
                if directory:
                    os.makedirs(directory, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(triple.to_record(key)) + "\n")
            except OSError as e:
                raise StorageError(f"cannot append to view cache {self.path}: {e}") from e


def cache_get_or_generate(
    cache: ViewCacheRepository,
    key: str,
    generator: Callable[[], ViewTriple],
    store: Callable[[ViewTriple], bool] = lambda triple: True,
) -> ViewTriple:
    """
    命中时返回缓存（来源标记为 cache），否则生成并写入缓存

    Args:
        cache: 缓存仓库
        key: 缓存键
        generator: 生成视图的闭包
        store: 判断生成结果是否值得缓存
    """
    cached = cache.get(key)
    if cached is not None:
        return cached.with_provenance(("cache", "cache", "cache"))
    triple = generator()
    if store(triple):
        cache.put(key, triple)
    return triple
