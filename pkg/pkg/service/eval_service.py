"""Full-ranking top-K evaluation (HR@K, NDCG@K, MRR)."""
import logging
import math
from typing import AbstractSet, Callable, List, Optional, Sequence

import numpy as np

from pkg.core.errors import ContractError, IndexRangeError
from pkg.model.dataset import ClientDataset
from pkg.model.encoder import encode_values, score_values
from pkg.model.metrics import RankingMetrics
from pkg.model.params import ParamSet

logger = logging.getLogger(__name__)

SPLITS = ("valid", "test")


def rank_target(scores: np.ndarray, exclude: AbstractSet[int], target: int) -> int:
    """
    目标在未排除候选中的名次（从 1 开始）

    分数更高的候选排在前面；分数相同时 id 小的排在前面。

    Raises:
        ContractError: 目标在排除集合中
        IndexRangeError: 目标越界
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if target < 0 or target >= n:
        raise IndexRangeError("target", int(target), n - 1)
    if target in exclude:
        raise ContractError(f"target {target} is in the exclusion set")
    candidate = np.ones(n, dtype=bool)
    if exclude:
        candidate[np.fromiter(exclude, dtype=np.int64)] = False
    candidate[target] = False
    s = scores[target]
    ahead = (scores > s) | ((scores == s) & (np.arange(n) < target))
    return 1 + int(np.count_nonzero(candidate & ahead))


def hr_at_k(rank: int, k: int = 20) -> int:
    return 1 if rank <= k else 0


def ndcg_at_k(rank: int, k: int = 20) -> float:
    """单个相关项时 IDCG = 1"""
    return 1.0 / math.log2(1 + rank) if rank <= k else 0.0


def mrr_of_rank(rank: int) -> float:
    return 1.0 / rank


def summarize_ranks(ranks: Sequence[int], k: int = 20) -> RankingMetrics:
    """按给定顺序累加后取平均"""
    if not ranks:
        raise ContractError("cannot summarize an empty rank list")
    hr = ndcg = mrr = 0.0
    for rank in ranks:
        if rank < 1:
            raise ContractError(f"rank must be >= 1, got {rank}")
        hr += hr_at_k(rank, k)
        ndcg += ndcg_at_k(rank, k)
        mrr += mrr_of_rank(rank)
    n = len(ranks)
    return RankingMetrics(hr_at_k=hr / n, ndcg_at_k=ndcg / n, mrr=mrr / n, k=k, n_users=n)


def client_rank(params: ParamSet, client: ClientDataset, split: str) -> int:
    """编码上下文、全量打分、排除已见商品（目标本身除外）后求名次"""
    context, target = client.context(split)
    context = context[-params.max_len:]
    scores = score_values(params, encode_values(params, context))
    return rank_target(scores, client.seen - {target}, target)


def rank_clients(
    params: ParamSet,
    clients: Sequence[ClientDataset],
    split: str,
    params_for: Optional[Callable[[int], ParamSet]] = None,
) -> List[int]:
    """
    每个客户端的目标名次，顺序与 clients 一致

    Args:
        params: 全局参数
        clients: 客户端列表
        split: valid | test
        params_for: 个性化评估时按客户端下标取参数
    """
    if split not in SPLITS:
        raise ContractError(f"unknown split {split!r}, expected one of {SPLITS}")
    return [
        client_rank(params_for(i) if params_for else params, client, split)
        for i, client in enumerate(clients)
    ]


def evaluate_split(
    params: ParamSet,
    clients: Sequence[ClientDataset],
    split: str = "valid",
    k: int = 20,
    params_for: Optional[Callable[[int], ParamSet]] = None,
) -> RankingMetrics:
    """
    全量排序评估

    Raises:
        ContractError: 客户端列表为空
    """
    if not clients:
        raise ContractError("evaluate_split needs at least one client")
    metrics = summarize_ranks(rank_clients(params, clients, split, params_for), k)
    logger.info(
        f"Evaluated {metrics.n_users} users on {split}: "
        f"HR@{k}={metrics.hr_at_k:.4f} NDCG@{k}={metrics.ndcg_at_k:.4f} MRR={metrics.mrr:.4f}"
    )
    return metrics
