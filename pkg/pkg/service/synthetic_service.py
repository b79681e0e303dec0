"""Synthetic interaction data with latent ground truth.

Items get unit latent vectors and a category from the nearest of
``n_categories`` random centroids; each user walks the catalog by sampling
softmax(preference · latent / temperature) without replacement while the
preference drifts.
"""
import logging
import os
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from pkg.core.config import SynthConfig
from pkg.core.errors import ConfigError
from pkg.core.seeding import rng_for
from pkg.model.dataset import RawInteraction
from pkg.model.items import ItemCatalog, ItemMeta
from pkg.repository.interaction_repository import InteractionRepository
from pkg.repository.item_repository import ItemRepository
from pkg.repository.prepared_repository import PreparedDatasetRepository
from pkg.service.data_service import PreparedDataset, split_leave_two, truncate_and_prune

logger = logging.getLogger(__name__)

INTERACTIONS_FILE = "interactions.jsonl"
ITEMS_FILE = "items.jsonl"
PREPARED_DIR = "prepared"


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def user_id_for(index: int) -> str:
    return f"u{index:05d}"


def item_key_for(index: int) -> str:
    return f"i{index:05d}"


def sample_user_sequence(
    preference: np.ndarray,
    latents: np.ndarray,
    length: int,
    temperature: float,
    drift: float,
    rng: np.random.Generator,
) -> List[int]:
    """
    逐步无放回采样一个用户序列

    Args:
        preference: 用户偏好向量（单位长度）
        latents: 商品隐向量 (M, k)
        length: 序列长度
        temperature: softmax 温度，0 表示贪心取最大
        drift: 每步偏好扰动的标准差
        rng: 该用户专属的随机数发生器

    Returns:
        商品 id 列表
    """
    if length > latents.shape[0]:
        raise ConfigError(f"sequence length {length} exceeds catalog size {latents.shape[0]}")
    available = np.ones(latents.shape[0], dtype=bool)
    pref = np.array(preference, dtype=np.float64)
    out: List[int] = []
    for _ in range(length):
        scores = latents @ pref
        if temperature <= 0:
            masked = np.where(available, scores, -np.inf)
            choice = int(np.argmax(masked))
        else:
            logits = np.where(available, scores / temperature, -np.inf)
            probs = np.exp(logits - logits[available].max())
            probs /= probs.sum()
            choice = int(rng.choice(latents.shape[0], p=probs))
        out.append(choice)
        available[choice] = False
        step = rng.standard_normal(pref.shape[0])
        if drift > 0:
            pref = _normalize_rows(pref + drift * step)
    return out


@dataclass
class SyntheticDataset(PreparedDataset):
    """合成数据：在 PreparedDataset 之上保留真实偏好与原始交互"""
    preferences: np.ndarray = None
    sequences: Dict[str, List[int]] = None

    def interactions(self) -> List[RawInteraction]:
        return [
            RawInteraction(user, item_key_for(item), ts)
            for user, items in self.sequences.items()
            for ts, item in enumerate(items)
        ]


class SyntheticDataGenerator:
    """按 SynthConfig 生成可复现的数据集"""

    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg

    def item_space(self):
        """商品隐向量 (M, k) 与类别下标"""
        cfg = self.cfg
        rng = rng_for(cfg.seed, "items")
        latents = _normalize_rows(rng.standard_normal((cfg.n_items, cfg.latent_dim)))
        centroids = _normalize_rows(rng.standard_normal((cfg.n_categories, cfg.latent_dim)))
        categories = np.argmax(latents @ centroids.T, axis=1)
        return latents, categories

    def generate(self) -> SyntheticDataset:
        cfg = self.cfg
        latents, categories = self.item_space()
        metas = [
            ItemMeta(
                item_id=i,
                title=f"category-{int(categories[i]):02d} #{i}",
                category=f"category-{int(categories[i]):02d}",
                latent=tuple(float(v) for v in latents[i]),
                raw_id=item_key_for(i),
            )
            for i in range(cfg.n_items)
        ]
        catalog = ItemCatalog(metas)

        preferences = np.zeros((cfg.n_users, cfg.latent_dim))
        sequences: Dict[str, List[int]] = {}
        for u in range(cfg.n_users):
            rng = rng_for(cfg.seed, "user", u)
            preferences[u] = _normalize_rows(rng.standard_normal(cfg.latent_dim))
            length = int(rng.integers(cfg.seq_len_min, cfg.seq_len_max + 1))
            sequences[user_id_for(u)] = sample_user_sequence(
                preferences[u], latents, length, cfg.preference_temperature, cfg.drift, rng
            )

        records = [
            RawInteraction(user, str(item), ts)
            for user, items in sequences.items()
            for ts, item in enumerate(items)
        ]
        vocab = {str(i): i for i in range(cfg.n_items)}
        clients = truncate_and_prune(split_leave_two(records, vocab))
        dataset = SyntheticDataset(clients, catalog, preferences, sequences)
        logger.info(f"Generated synthetic dataset: {dataset.summary()}")
        return dataset

    def export(self, dataset: SyntheticDataset, output_dir: str) -> Dict[str, str]:
        """
        写出原始交互、商品元数据与预处理目录

        Returns:
            文件名到路径的映射
        """
        paths = {
            "interactions": os.path.join(output_dir, INTERACTIONS_FILE),
            "items": os.path.join(output_dir, ITEMS_FILE),
            "prepared": os.path.join(output_dir, PREPARED_DIR),
        }
        InteractionRepository(paths["interactions"], "jsonl").save(dataset.interactions())
        ItemRepository(paths["items"]).save(dataset.catalog)
        PreparedDatasetRepository(paths["prepared"]).save(dataset.clients, dataset.catalog)
        return paths


def generate_synthetic(cfg: SynthConfig) -> SyntheticDataset:
    return SyntheticDataGenerator(cfg).generate()
