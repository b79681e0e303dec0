"""Item metadata and the catalog used for view generation and title grounding."""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from pkg.core.errors import DataFormatError


def normalize_title(title: str) -> str:
    """小写、去首尾空白、合并连续空白"""
    return " ".join(str(title).lower().split())


@dataclass(frozen=True)
class ItemMeta:
    """单个商品的元数据"""
    item_id: int
    title: str
    category: str
    latent: Optional[Tuple[float, ...]] = None
    raw_id: Optional[str] = None


class ItemCatalog:
    """
    商品目录，按 item_id 0..M-1 索引

    Raises:
        DataFormatError: id 不连续、标题归一化后重复、类别为空或隐向量维度不一致
    """

    def __init__(self, items: Sequence[ItemMeta]):
        ordered = sorted(items, key=lambda m: m.item_id)
        if [m.item_id for m in ordered] != list(range(len(ordered))):
            raise DataFormatError("item ids must be exactly 0..M-1")
        if not ordered:
            raise DataFormatError("item catalog is empty")

        self.items: List[ItemMeta] = ordered
        self.title_index: Dict[str, int] = {}
        for meta in ordered:
            if not meta.category:
                raise DataFormatError(f"item {meta.item_id} has an empty category")
            key = normalize_title(meta.title)
            if key in self.title_index:
                raise DataFormatError(
                    f"items {self.title_index[key]} and {meta.item_id} share the title {key!r}"
                )
            self.title_index[key] = meta.item_id

        self.categories: List[str] = [m.category for m in ordered]
        self.category_labels: List[str] = sorted(set(self.categories))
        self.members: Dict[str, np.ndarray] = {
            label: np.array([m.item_id for m in ordered if m.category == label], dtype=np.int64)
            for label in self.category_labels
        }

        self.latents: Optional[np.ndarray] = None
        if all(m.latent is not None for m in ordered):
            dims = {len(m.latent) for m in ordered}
            if len(dims) != 1:
                raise DataFormatError(f"latent vectors have inconsistent sizes {sorted(dims)}")
            self.latents = np.array([m.latent for m in ordered], dtype=np.float64)
        self._neighbors: Optional[np.ndarray] = None

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def has_latents(self) -> bool:
        return self.latents is not None

    def title(self, item_id: int) -> str:
        return self.items[item_id].title

    def titles(self, ids: Sequence[int]) -> List[str]:
        return [self.items[i].title for i in ids]

    def lookup_title(self, title: str) -> Optional[int]:
        return self.title_index.get(normalize_title(title))

    def category_of(self, item_id: int) -> str:
        return self.categories[item_id]

    def nearest_same_category(self, item_id: int) -> int:
        """同类别中最近的其他商品；单例类别返回自身"""
        if self._neighbors is None:
            self._neighbors = self._build_neighbors()
        return int(self._neighbors[item_id])

    def _build_neighbors(self) -> np.ndarray:
        neighbors = np.arange(self.n_items, dtype=np.int64)
        for ids in self.members.values():
            if len(ids) < 2:
                continue
            for i in ids:
                others = ids[ids != i]
                if self.latents is not None:
                    dist = np.linalg.norm(self.latents[others] - self.latents[i], axis=1)
                else:
                    dist = np.abs(others - i).astype(np.float64)
                # argmin 取第一个最小值，others 升序，所以并列时取较小 id
                neighbors[i] = others[int(np.argmin(dist))]
        return neighbors
