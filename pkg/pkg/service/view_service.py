"""Behavioral view generation: rule, augment and LLM paths with caching and fallback."""
import asyncio
import logging
import re
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import httpx

from pkg.constants.prompts import PROMPT_TEMPLATES, PROMPT_VERSION
from pkg.core.config import ViewsConfig
from pkg.core.errors import ContractError, ViewParseError
from pkg.core.llm import EndpointConfig, GenerateRequest, HttpLLMClient, LLMClient
from pkg.core.seeding import derive_seed
from pkg.model.dataset import ViewTriple
from pkg.model.items import ItemCatalog, normalize_title
from pkg.repository.view_cache_repository import ViewCacheRepository, cache_get_or_generate, view_cache_key
from pkg.service import rule_views

logger = logging.getLogger(__name__)

VIEW_KINDS = ("future", "paraphrase", "counterfactual")

_BULLET = re.compile(r"^\s*(?:[-*•·]+\s+|\(?\d+[.):\]]\s*)")
_QUOTES = "\"'`“”‘’"


def build_prompt(view_kind: str, titles: Sequence[str], n_items: int) -> str:
    """
    按视图类型填充提示词模板

    Args:
        view_kind: future | paraphrase | counterfactual
        titles: 历史商品标题（按时间顺序）
        n_items: 要求返回的条目数
    """
    if view_kind not in PROMPT_TEMPLATES:
        raise ContractError(f"unknown view kind {view_kind!r}")
    if not titles:
        raise ContractError("prompt needs at least one history title")
    return PROMPT_TEMPLATES[view_kind].format(titles="\n".join(titles), n=n_items)


def parse_generated_items(text: str, title_index: Mapping[str, int]) -> List[int]:
    """
    把模型输出映射回商品 id

    逐行去掉项目符号、编号与引号，归一化后与目录标题精确匹配；
    不认识的行丢弃，重复保留，顺序不变。

    Raises:
        ViewParseError: 没有任何一行匹配
    """
    ids: List[int] = []
    for line in str(text).splitlines():
        cleaned = _BULLET.sub("", line).strip().strip(_QUOTES).strip()
        item = title_index.get(normalize_title(cleaned))
        if item is not None:
            ids.append(item)
    if not ids:
        raise ViewParseError(f"no known item titles in generated text ({len(text)} chars)")
    return ids


class ViewGenerator:
    """
    每个客户端每次参与时生成三视图

    种子为 derive_seed(global_seed, user_id, round)。llm 路径按视图回退到规则
    生成；只有三个视图都来自 LLM 的结果才写入缓存。
    """

    def __init__(
        self,
        cfg: ViewsConfig,
        catalog: ItemCatalog,
        global_seed: int = 0,
        cache: Optional[ViewCacheRepository] = None,
        client: Optional[LLMClient] = None,
        transport: Optional[httpx.AsyncBaseTransport] = None,
    ):
        self.cfg = cfg
        self.catalog = catalog
        self.global_seed = global_seed
        self.padding_id = catalog.n_items
        self.cache = cache if cache is not None else ViewCacheRepository(cfg.cache_path)
        self.digest = cfg.digest()
        self.client = client
        if self.client is None and cfg.kind == "llm":
            llm = cfg.llm
            self.client = HttpLLMClient(
                EndpointConfig(
                    endpoint=llm.endpoint,
                    timeout_ms=llm.timeout_ms,
                    max_retries=llm.max_retries,
                    backoff_base_ms=llm.backoff_base_ms,
                    memo_size=llm.memo_size,
                ),
                transport=transport,
            )

    def view_seed(self, user_id: str, round_index: int) -> int:
        return derive_seed(self.global_seed, user_id, round_index)

    def rule_view(self, view_kind: str, anchor: Sequence[int], seed: int) -> List[int]:
        sub_seed = derive_seed(seed, view_kind)
        if view_kind == "future":
            return rule_views.rule_future(anchor, self.catalog, self.cfg.future_len, sub_seed)
        if view_kind == "paraphrase":
            return rule_views.rule_paraphrase(
                anchor, self.catalog, self.cfg.substitute_prob, self.cfg.swap_prob, sub_seed
            )
        return rule_views.rule_counterfactual(anchor, self.catalog, sub_seed)

    def rule_triple(self, anchor: Sequence[int], seed: int) -> ViewTriple:
        return ViewTriple(*(self.rule_view(kind, anchor, seed) for kind in VIEW_KINDS))

    def augment_triple(self, anchor: Sequence[int], seed: int) -> ViewTriple:
        return ViewTriple(
            rule_views.augment_crop(anchor, self.cfg.crop_ratio, derive_seed(seed, "crop")),
            rule_views.augment_mask(anchor, self.cfg.mask_prob, self.padding_id, derive_seed(seed, "mask")),
            rule_views.augment_negative(anchor, self.catalog.n_items, derive_seed(seed, "negative")),
        )

    def generate_views(self, anchor: Sequence[int], seed: int) -> ViewTriple:
        """单个锚点序列的三视图"""
        return self.generate_round([anchor], [seed])[0]

    def generate_round(self, anchors: Sequence[Sequence[int]], seeds: Sequence[int]) -> List[ViewTriple]:
        """
        一轮中所有被选客户端的视图，结果顺序与输入一致

        Args:
            anchors: 各客户端的锚点序列
            seeds: 各客户端的视图种子
        """
        if len(anchors) != len(seeds):
            raise ContractError(f"{len(anchors)} anchors but {len(seeds)} seeds")
        if self.cfg.kind == "rule":
            return [self.rule_triple(a, s) for a, s in zip(anchors, seeds)]
        if self.cfg.kind == "augment":
            return [self.augment_triple(a, s) for a, s in zip(anchors, seeds)]
        return asyncio.run(self._llm_round(list(anchors), list(seeds)))

    async def _llm_round(self, anchors: List[Sequence[int]], seeds: List[int]) -> List[ViewTriple]:
        keys = [view_cache_key(PROMPT_VERSION, self.digest, a) for a in anchors]
        semaphore = asyncio.Semaphore(self.cfg.llm.parallelism)
        pending = [i for i, key in enumerate(keys) if key not in self.cache]
        self.client.set_available(True)
        try:
            generated = await asyncio.gather(
                *(self._llm_triple(anchors[i], seeds[i], semaphore) for i in pending)
            )
        finally:
            if isinstance(self.client, HttpLLMClient):
                await self.client.close()
        fresh: Dict[int, ViewTriple] = dict(zip(pending, generated))

        results = []
        for i, key in enumerate(keys):
            triple = cache_get_or_generate(
                self.cache,
                key,
                lambda i=i: fresh[i],
                store=lambda t: t.provenance == ("llm", "llm", "llm"),
            )
            results.append(triple)
        return results

    async def _llm_triple(self, anchor: Sequence[int], seed: int, semaphore: asyncio.Semaphore) -> ViewTriple:
        views: List[List[int]] = []
        provenance: List[str] = []
        for kind in VIEW_KINDS:
            async with semaphore:
                ids = await self._llm_view(kind, anchor, seed)
            if ids is None:
                views.append(self.rule_view(kind, anchor, seed))
                provenance.append("rule")
            else:
                views.append(ids)
                provenance.append("llm")
        return ViewTriple(views[0], views[1], views[2], tuple(provenance))

    async def _llm_view(self, kind: str, anchor: Sequence[int], seed: int) -> Optional[List[int]]:
        n_items = self.cfg.future_len if kind == "future" else len(anchor)
        prompt = build_prompt(kind, self.catalog.titles(anchor), n_items)
        request = GenerateRequest(
            prompt=prompt,
            max_tokens=self.cfg.llm.max_tokens,
            temperature=self.cfg.llm.temperature,
            seed=derive_seed(seed, kind) & 0x7FFFFFFF,
        )
        if not self.client.is_available():
            logger.debug(f"LLM endpoint marked unavailable this round, using rule {kind} view")
            return None
        try:
            response = await self.client.generate(request)
            ids = parse_generated_items(response.text, self.catalog.title_index)
        except Exception as e:
            logger.warning(f"LLM {kind} view failed, falling back to rule generation: {e}")
            return None
        if kind == "paraphrase" and len(ids) < len(anchor):
            logger.warning(
                f"LLM paraphrase returned {len(ids)} items for a history of {len(anchor)}, "
                f"falling back to rule generation"
            )
            return None
        return ids[:n_items]


def generate_views(
    cfg: ViewsConfig,
    seq: Sequence[int],
    catalog: ItemCatalog,
    round_seed: int,
    cache: Optional[ViewCacheRepository] = None,
    transport: Optional[httpx.AsyncBaseTransport] = None,
) -> ViewTriple:
    """按配置分派到规则、增强或 LLM 路径生成一个三视图"""
    generator = ViewGenerator(cfg, catalog, cache=cache, transport=transport)
    return generator.generate_views(seq, round_seed)


def provenance_counts(triples: Sequence[ViewTriple]) -> Tuple[int, int, int]:
    """(rule, llm, cache) 视图数量，用于日志"""
    flat = [p for t in triples for p in t.provenance]
    return flat.count("rule"), flat.count("llm"), flat.count("cache")
