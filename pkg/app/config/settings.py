import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

# 根据环境加载对应的 .env 文件
env = os.getenv("APP_ENV", "dev")
env_file = os.path.join("deployment", f".env.{env}" if env != "dev" else ".env")

# 加载环境变量
load_dotenv(env_file)


class Settings:
    # 应用配置
    APP_NAME: str = os.getenv("APP_NAME", "fedseq-lab")

    # 日志配置
    LOG_DIR: str = os.getenv("LOG_DIR", "logs")
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_TO_FILE: bool = os.getenv("LOG_TO_FILE", "False").lower() == "true"
    LOG_FILE_NAME: str = os.getenv("LOG_FILE_NAME", os.getenv("APP_NAME", "fedseq-lab"))

    # 生成服务地址（覆盖 views.llm.endpoint）
    LLM_ENDPOINT: Optional[str] = os.getenv("FEDSEQ_LLM_ENDPOINT") or None

    # 桩服务
    STUB_HOST: str = os.getenv("STUB_HOST", "127.0.0.1")
    STUB_PORT: int = int(os.getenv("STUB_PORT", "8080"))

    def dict(self) -> Dict[str, Any]:
        """返回所有配置的字典形式"""
        return {
            key: value for key, value in self.__class__.__dict__.items()
            if not key.startswith('_') and not callable(value)
        }


settings = Settings()
