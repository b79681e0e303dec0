from abc import ABC, abstractmethod
from typing import Optional
import asyncio
import json
import logging

import httpx
from cachetools import LRUCache

from .types import APIError, EndpointConfig, GenerateRequest, GenerateResponse

logger = logging.getLogger(__name__)


class LLMClient(ABC):
    """文本生成客户端抽象基类"""

    def __init__(self, config: EndpointConfig):
        self.config = config
        self._available = True

    @abstractmethod
    async def generate(self, request: GenerateRequest) -> GenerateResponse:
        """
        执行一次生成请求

        Args:
            request: 生成请求

        Returns:
            生成结果

        Raises:
            APIError: 重试耗尽后仍失败
        """
        pass

    def is_available(self) -> bool:
        """检查客户端是否可用"""
        return self._available

    def set_available(self, available: bool) -> None:
        self._available = available

    async def _retry_request(self, request_func, *args, **kwargs):
        """
        带重试的请求执行，首次失败后最多再试 max_retries 次

        Args:
            request_func: 请求函数
            *args: 位置参数
            **kwargs: 关键字参数

        Returns:
            请求结果

        Raises:
            APIError: 重试失败后抛出最后一次错误
        """
        attempts = self.config.max_retries + 1
        last_error = None

        for attempt in range(attempts):
            try:
                return await request_func(*args, **kwargs)
            except Exception as e:
                last_error = e
                logger.warning(
                    f"Attempt {attempt + 1}/{attempts} failed "
                    f"for endpoint {self.config.endpoint}: {e}"
                )

                if attempt < attempts - 1:
                    # 指数退避
                    wait_time = self.config.backoff_base_ms * (2 ** attempt) / 1000.0
                    await asyncio.sleep(wait_time)

        self.set_available(False)
        raise APIError(f"All {attempts} attempts failed: {last_error}")


class HttpLLMClient(LLMClient):
    """
    通过 HTTP POST {endpoint}/generate 调用模型

    相同请求（prompt、seed 等完全一致）在进程内只发送一次，结果记在 LRU 里。
    """

    def __init__(self, config: EndpointConfig, transport: Optional[httpx.AsyncBaseTransport] = None):
        super().__init__(config)
        self._transport = transport
        self._client: Optional[httpx.AsyncClient] = None
        self._memo: LRUCache = LRUCache(maxsize=max(1, config.memo_size))

    async def __aenter__(self):
        """异步上下文管理器入口"""
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        """异步上下文管理器出口"""
        await self.close()

    async def close(self):
        """关闭客户端连接"""
        if self._client is not None and not self._client.is_closed:
            await self._client.aclose()
        self._client = None

    def _get_client(self) -> httpx.AsyncClient:
        if self._client is None or self._client.is_closed:
            self._client = httpx.AsyncClient(
                timeout=self.config.timeout_ms / 1000.0,
                transport=self._transport,
                headers={"Content-Type": "application/json"},
            )
        return self._client

    async def generate(self, request: GenerateRequest) -> GenerateResponse:
        key = json.dumps(request.to_dict(), sort_keys=True)
        if key in self._memo:
            return self._memo[key]
        response = await self._retry_request(self._generate_impl, request)
        self._memo[key] = response
        return response

    async def _generate_impl(self, request: GenerateRequest) -> GenerateResponse:
        """实际的请求实现"""
        client = self._get_client()
        try:
            response = await client.post(self.config.generate_url, json=request.to_dict())
        except httpx.HTTPError as e:
            raise APIError(f"Request failed: {e}") from e

        if response.status_code != 200:
            raise APIError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            data = response.json()
        except ValueError as e:
            raise APIError(f"Malformed JSON: {e}") from e
        return GenerateResponse.from_dict(data)
