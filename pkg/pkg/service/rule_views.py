"""Deterministic view generators: rule-based semantics and crop/mask augmentation.

Every function is a pure function of its arguments; all randomness comes from
a numpy Generator seeded with the ``seed`` argument.
"""
import logging
from collections import Counter
from typing import List, Sequence

import numpy as np

from pkg.core.errors import ContractError
from pkg.model.items import ItemCatalog

logger = logging.getLogger(__name__)

FUTURE_WINDOW = 3
POOL_FACTOR = 4


def _history(seq: Sequence[int]) -> List[int]:
    items = [int(i) for i in seq]
    if not items:
        raise ContractError("cannot generate views for an empty sequence")
    return items


def _modal_category(catalog: ItemCatalog, window: Sequence[int]) -> str:
    counts = Counter(catalog.category_of(i) for i in window)
    # 次数相同按标签排序取第一个
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]


def rule_future(seq: Sequence[int], catalog: ItemCatalog, future_len: int, seed: int) -> List[int]:
    """
    预测未来视图：贪心外推

    每一步以最近 min(3, T) 个商品（含已生成的）为窗口；有隐向量时从离窗口
    均值最近的 future_len·4 个未用商品中随机取一个，只有类别时从窗口众数
    类别里取。

    Args:
        seq: 用户历史
        catalog: 商品目录
        future_len: 目标长度
        seed: 随机种子

    Returns:
        长度 1..future_len 的商品 id 列表
    """
    if future_len < 1:
        raise ContractError(f"future_len must be >= 1, got {future_len}")
    history = _history(seq)
    rng = np.random.default_rng(seed)
    used = set(history)
    trail = list(history)
    out: List[int] = []

    for _ in range(future_len):
        candidates = np.array([i for i in range(catalog.n_items) if i not in used], dtype=np.int64)
        if candidates.size == 0:
            if out:
                break
            candidates = np.arange(catalog.n_items, dtype=np.int64)
        window = trail[-FUTURE_WINDOW:]
        if catalog.has_latents:
            center = catalog.latents[window].mean(axis=0)
            dist = np.linalg.norm(catalog.latents[candidates] - center, axis=1)
            order = np.lexsort((rng.random(candidates.size), dist))
            pool = candidates[order[: future_len * POOL_FACTOR]]
        else:
            modal = _modal_category(catalog, window)
            pool = np.array([c for c in candidates if catalog.category_of(c) == modal], dtype=np.int64)
            if pool.size == 0:
                pool = candidates
        choice = int(pool[rng.integers(pool.size)])
        out.append(choice)
        used.add(choice)
        trail.append(choice)
    return out


def rule_paraphrase(
    seq: Sequence[int],
    catalog: ItemCatalog,
    substitute_prob: float,
    swap_prob: float,
    seed: int,
) -> List[int]:
    """
    意图保持的改写视图：按概率替换为同类最近邻，再按概率交换相邻两项

    输出长度等于输入长度。
    """
    items = _history(seq)
    rng = np.random.default_rng(seed)
    substitute_draws = rng.random(len(items))
    swap_draws = rng.random(max(len(items) - 1, 0))

    for t, draw in enumerate(substitute_draws):
        if draw < substitute_prob:
            items[t] = catalog.nearest_same_category(items[t])
    for t, draw in enumerate(swap_draws):
        if draw < swap_prob:
            items[t], items[t + 1] = items[t + 1], items[t]
    return items


def _counterfactual_ranking(history: List[int], catalog: ItemCatalog, candidates: np.ndarray) -> np.ndarray:
    if catalog.has_latents:
        center = catalog.latents[history].mean(axis=0)
        dist = np.linalg.norm(catalog.latents[candidates] - center, axis=1)
        # 距离降序，并列按 id 升序
        return candidates[np.lexsort((candidates, -dist))]
    counts = Counter(catalog.category_of(i) for i in history)
    rank = {label: (counts.get(label, 0), label) for label in catalog.category_labels}
    keys = [rank[catalog.category_of(c)] for c in candidates]
    order = sorted(range(candidates.size), key=lambda j: (keys[j], int(candidates[j])))
    return candidates[order]


def rule_counterfactual(seq: Sequence[int], catalog: ItemCatalog, seed: int) -> List[int]:
    """
    反事实负视图：与用户偏好最不一致的同长度序列

    有隐向量时取离历史均值最远的一批商品；只有类别时取历史中出现最少的
    类别（次数相同按标签）。默认排除历史商品，目录太小时允许重叠并告警。
    """
    history = _history(seq)
    length = len(history)
    rng = np.random.default_rng(seed)
    seen = set(history)
    allowed = np.array([i for i in range(catalog.n_items) if i not in seen], dtype=np.int64)

    if allowed.size >= length:
        ranked = _counterfactual_ranking(history, catalog, allowed)
    else:
        logger.warning(
            f"Vocabulary of {catalog.n_items} items cannot exclude a history of {len(seen)} items "
            f"for a counterfactual of length {length}; allowing overlap"
        )
        overlap = np.array(sorted(seen), dtype=np.int64)
        ranked = np.concatenate([
            _counterfactual_ranking(history, catalog, allowed) if allowed.size else allowed,
            _counterfactual_ranking(history, catalog, overlap),
        ])

    if catalog.has_latents:
        pool = ranked[: max(length, length * POOL_FACTOR)]
    else:
        # 类别模式按整类扩展候选池，保证优先类别足够时只从该类别取
        pool_size = 0
        labels_taken = set()
        for item in ranked:
            label = catalog.category_of(item)
            if pool_size >= length and label not in labels_taken:
                break
            labels_taken.add(label)
            pool_size += 1
        pool = ranked[:pool_size]

    if pool.size >= length:
        picked = rng.choice(pool, size=length, replace=False)
    else:
        picked = rng.choice(pool, size=length, replace=True)
    return [int(i) for i in picked]


def augment_crop(seq: Sequence[int], crop_ratio: float, seed: int) -> List[int]:
    """随机连续裁剪，保留 max(1, ⌊ratio·T⌋) 个商品"""
    items = _history(seq)
    rng = np.random.default_rng(seed)
    size = max(1, int(np.floor(crop_ratio * len(items))))
    start = int(rng.integers(0, len(items) - size + 1))
    return items[start:start + size]


def augment_mask(seq: Sequence[int], mask_prob: float, padding_id: int, seed: int) -> List[int]:
    """按概率把位置替换为 padding id"""
    items = _history(seq)
    rng = np.random.default_rng(seed)
    draws = rng.random(len(items))
    return [padding_id if draw < mask_prob else item for item, draw in zip(items, draws)]


def augment_negative(seq: Sequence[int], n_items: int, seed: int) -> List[int]:
    """从历史之外均匀采样同长度的随机负序列"""
    history = _history(seq)
    rng = np.random.default_rng(seed)
    seen = set(history)
    allowed = np.array([i for i in range(n_items) if i not in seen], dtype=np.int64)
    if allowed.size == 0:
        allowed = np.arange(n_items, dtype=np.int64)
    replace = allowed.size < len(history)
    return [int(i) for i in rng.choice(allowed, size=len(history), replace=replace)]
