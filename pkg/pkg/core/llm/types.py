from dataclasses import dataclass, asdict
from typing import Any, Dict

from pkg.core.errors import FedSeqError


@dataclass(frozen=True)
class GenerateRequest:
    """/generate 请求体"""
    prompt: str
    max_tokens: int = 256
    temperature: float = 0.0
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class GenerateResponse:
    """/generate 响应体"""
    text: str

    @classmethod
    def from_dict(cls, data: Any) -> 'GenerateResponse':
        """
        从响应 JSON 创建对象

        Raises:
            APIError: 缺少 text 字段或类型不对
        """
        if not isinstance(data, dict) or not isinstance(data.get("text"), str):
            raise APIError(f"Invalid response: expected {{\"text\": string}}, got {str(data)[:200]}")
        return cls(text=data["text"])


@dataclass(frozen=True)
class EndpointConfig:
    """生成端点配置"""
    endpoint: str
    timeout_ms: int = 10000
    max_retries: int = 2
    backoff_base_ms: int = 250
    memo_size: int = 1024

    @property
    def generate_url(self) -> str:
        return f"{self.endpoint.rstrip('/')}/generate"


class LLMError(FedSeqError):
    """LLM相关错误基类"""
    pass


class APIError(LLMError):
    """API调用错误"""
    pass
