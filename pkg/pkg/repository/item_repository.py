import json
import logging
import os
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from pkg.core.errors import DataFormatError, StorageError
from pkg.model.items import ItemCatalog, ItemMeta

logger = logging.getLogger(__name__)

DEFAULT_CATEGORY = "item"


class ItemRecord(BaseModel):
    """商品元数据行 {"item", "title", "category", "latent"?}"""
    model_config = ConfigDict(coerce_numbers_to_str=True, extra="ignore")

    item: str
    title: str = Field(min_length=1)
    category: str = Field(min_length=1)
    latent: Optional[List[float]] = None


class ItemRepository:
    """商品元数据 JSONL 文件，原始 item 字符串经词表映射到 0..M-1"""

    def __init__(self, path: str):
        self.path = path

    def load(self, vocab: Dict[str, int]) -> ItemCatalog:
        """
        读取元数据并按词表构建目录

        词表之外的商品忽略；词表中缺少元数据的商品以原始 id 作标题。

        Raises:
            StorageError: 文件不可读
            DataFormatError: 行格式错误（带行号）
        """
        if not os.path.isfile(self.path):
            raise StorageError(f"item metadata file not found: {self.path}")
        found: Dict[int, ItemMeta] = {}
        try:
            with open(self.path, "r", encoding="utf-8") as f:
                for line_no, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = ItemRecord.model_validate(json.loads(line))
                    except (json.JSONDecodeError, ValidationError) as e:
                        raise DataFormatError(f"bad item record: {e}", self.path, line_no) from None
                    if record.item not in vocab:
                        continue
                    item_id = vocab[record.item]
                    latent = tuple(record.latent) if record.latent is not None else None
                    found[item_id] = ItemMeta(item_id, record.title, record.category, latent, record.item)
        except OSError as e:
            raise StorageError(f"cannot read {self.path}: {e}") from e
        except UnicodeDecodeError as e:
            raise DataFormatError(f"not valid UTF-8 at byte {e.start}", self.path) from None

        missing = [raw for raw, i in vocab.items() if i not in found]
        if missing:
            logger.warning(f"{len(missing)} items have no metadata in {self.path}, using their ids as titles")
        metas = [found.get(i) or ItemMeta(i, raw, DEFAULT_CATEGORY, None, raw) for raw, i in vocab.items()]
        logger.info(f"Loaded metadata for {len(found)} of {len(vocab)} items from {self.path}")
        return ItemCatalog(metas)

    def save(self, catalog: ItemCatalog) -> None:
        try:
            directory = os.path.dirname(self.path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(self.path, "w", encoding="utf-8") as f:
                for meta in catalog.items:
                    record = {
                        "item": meta.raw_id if meta.raw_id is not None else str(meta.item_id),
                        "title": meta.title,
                        "category": meta.category,
                    }
                    if meta.latent is not None:
                        record["latent"] = list(meta.latent)
                    f.write(json.dumps(record) + "\n")
        except OSError as e:
            raise StorageError(f"cannot write {self.path}: {e}") from e
        logger.info(f"Wrote {catalog.n_items} item records to {self.path}")


def default_catalog(vocab: Dict[str, int]) -> ItemCatalog:
    """没有元数据文件时：标题为原始 id，单一类别"""
    return ItemCatalog([ItemMeta(i, raw, DEFAULT_CATEGORY, None, raw) for raw, i in vocab.items()])
