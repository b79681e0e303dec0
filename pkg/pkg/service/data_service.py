"""Interaction preprocessing: k-core filtering, leave-two-out split, truncation."""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from pkg.core.config import DataConfig
from pkg.core.errors import ConfigError, ContractError, DataFormatError
from pkg.model.dataset import ClientDataset, RawInteraction
from pkg.model.encoder import InteractionSequence
from pkg.model.items import ItemCatalog
from pkg.repository.interaction_repository import load_interactions
from pkg.repository.item_repository import ItemRepository, default_catalog
from pkg.repository.prepared_repository import PreparedDatasetRepository

logger = logging.getLogger(__name__)

COLUMNS = ["user", "item", "ts"]


def _frame(records: Sequence[RawInteraction]) -> pd.DataFrame:
    df = pd.DataFrame(
        [(r.user, r.item, r.ts) for r in records],
        columns=COLUMNS,
    )
    df["order"] = range(len(df))
    return df


def _records(df: pd.DataFrame) -> List[RawInteraction]:
    return [RawInteraction(str(u), str(i), int(t)) for u, i, t in df[COLUMNS].itertuples(index=False)]


def k_core_filter(records: Sequence[RawInteraction], min_count: int = 5) -> List[RawInteraction]:
    """
    反复删除交互数少于 min_count 的用户与商品，直到不动点

    Args:
        records: 原始交互（顺序保留）
        min_count: 最少交互数

    Returns:
        过滤后的交互，可能为空
    """
    if min_count < 1:
        raise ContractError(f"min_count must be >= 1, got {min_count}")
    df = _frame(records)
    passes = 0
    while len(df):
        user_counts = df.groupby("user")["item"].transform("size")
        item_counts = df.groupby("item")["user"].transform("size")
        keep = (user_counts >= min_count) & (item_counts >= min_count)
        if keep.all():
            break
        df = df[keep]
        passes += 1
    logger.info(f"{min_count}-core filter kept {len(df)} of {len(records)} interactions after {passes} passes")
    return _records(df)


def build_vocabulary(records: Sequence[RawInteraction]) -> Dict[str, int]:
    """按首次出现顺序为商品分配 0..M-1"""
    vocab: Dict[str, int] = {}
    for r in records:
        if r.item not in vocab:
            vocab[r.item] = len(vocab)
    return vocab


def split_leave_two(
    records: Sequence[RawInteraction],
    vocab: Optional[Dict[str, int]] = None,
) -> List[ClientDataset]:
    """
    每个用户按 (ts, 输入顺序) 排序，最后一个为测试目标，倒数第二个为验证目标

    不足 3 条交互的用户没有训练序列，直接丢弃。客户端按 user_id 排序。
    """
    vocab = vocab if vocab is not None else build_vocabulary(records)
    df = _frame(records)
    if df.empty:
        return []
    df["item_id"] = df["item"].map(vocab)
    if df["item_id"].isna().any():
        missing = sorted(df.loc[df["item_id"].isna(), "item"].unique())[:5]
        raise ContractError(f"items missing from vocabulary: {missing}")
    df = df.sort_values(["user", "ts", "order"], kind="stable")

    clients: List[ClientDataset] = []
    dropped = 0
    for user, group in df.groupby("user", sort=True):
        items = [int(i) for i in group["item_id"]]
        stamps = [int(t) for t in group["ts"]]
        if len(items) < 3:
            dropped += 1
            continue
        train = InteractionSequence(str(user), tuple(items[:-2]), tuple(stamps[:-2]))
        clients.append(ClientDataset(str(user), train, items[-2], items[-1], frozenset(items)))
    if dropped:
        logger.warning(f"Dropped {dropped} users with fewer than 3 interactions during the split")
    return clients


def truncate_and_prune(
    datasets: Sequence[ClientDataset],
    max_len: int = 50,
    min_len: int = 5,
) -> List[ClientDataset]:
    """
    训练序列只保留最近 max_len − 2 个商品；完整序列短于 min_len 的用户丢弃

    seen 仍是用户的全部历史。
    """
    if max_len < 3:
        raise ContractError(f"max_len must be >= 3, got {max_len}")
    keep = max_len - 2
    out: List[ClientDataset] = []
    for client in datasets:
        if len(client.train) + 2 < min_len:
            continue
        train = client.train
        if len(train) > keep:
            stamps = train.timestamps[-keep:] if train.timestamps is not None else None
            train = InteractionSequence(train.user_id, train.items[-keep:], stamps)
        out.append(ClientDataset(client.user_id, train, client.valid_target, client.test_target, client.seen))
    logger.info(f"Truncation kept {len(out)} of {len(datasets)} clients (max_len={max_len}, min_len={min_len})")
    return out


@dataclass
class PreparedDataset:
    """流水线产物：客户端列表与商品目录"""
    clients: List[ClientDataset]
    catalog: ItemCatalog

    @property
    def n_items(self) -> int:
        return self.catalog.n_items

    def summary(self) -> Dict[str, float]:
        lengths = [len(c.train) + 2 for c in self.clients]
        return {
            "users": len(self.clients),
            "items": self.n_items,
            "mean_length": round(sum(lengths) / len(lengths), 4) if lengths else 0.0,
        }


def prepare_records(
    records: Sequence[RawInteraction],
    min_count: int = 5,
    max_len: int = 50,
    min_len: int = 5,
) -> Tuple[List[ClientDataset], Dict[str, int]]:
    """k-core → 词表 → 切分 → 截断"""
    filtered = k_core_filter(records, min_count)
    vocab = build_vocabulary(filtered)
    clients = truncate_and_prune(split_leave_two(filtered, vocab), max_len, min_len)
    return clients, vocab


def prepare_dataset(cfg: DataConfig) -> PreparedDataset:
    """
    读取原始日志并运行完整的预处理流水线

    Raises:
        ConfigError: 没有配置 data.interactions
        DataFormatError: 过滤后没有用户
    """
    if not cfg.interactions:
        raise ConfigError("data.interactions is required to prepare a dataset")
    records = load_interactions(cfg.interactions, cfg.format)
    clients, vocab = prepare_records(records, cfg.min_count, cfg.max_len, cfg.min_len)
    if not clients:
        raise DataFormatError(f"no users left after {cfg.min_count}-core filtering and pruning", cfg.interactions)
    catalog = ItemRepository(cfg.items).load(vocab) if cfg.items else default_catalog(vocab)
    dataset = PreparedDataset(clients, catalog)
    logger.info(f"Prepared dataset: {dataset.summary()}")
    return dataset


def load_dataset(cfg: DataConfig) -> PreparedDataset:
    """优先读取预处理目录，否则从原始日志现场处理"""
    if cfg.prepared:
        clients, catalog = PreparedDatasetRepository(cfg.prepared).load()
        return PreparedDataset(clients, catalog)
    return prepare_dataset(cfg)
