import os
import logging.config
from datetime import datetime
from typing import Optional

from .settings import settings
from pkg.core.logging.formatters import JSONFormatter


def setup_logging(level: Optional[str] = None):
    """配置日志：JSON 输出到 stderr，LOG_TO_FILE 时再按天滚动写文件"""
    level = (level or settings.LOG_LEVEL).upper()
    handlers = {
        'console': {
            'level': level,
            'formatter': 'json',
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
        },
    }

    if settings.LOG_TO_FILE:
        # 确保日志目录存在
        os.makedirs(settings.LOG_DIR, exist_ok=True)
        current_date = datetime.now().strftime("%Y-%m-%d")
        handlers['file'] = {
            'level': level,
            'formatter': 'json',
            'class': 'logging.handlers.TimedRotatingFileHandler',
            'filename': os.path.join(settings.LOG_DIR, f"{settings.LOG_FILE_NAME}.{current_date}"),
            'when': 'midnight',  # 每天午夜切换文件
            'interval': 1,
            'backupCount': 30,
            'encoding': 'utf-8',
        }

    logging_config = {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'json': {
                '()': JSONFormatter,
            },
        },
        'handlers': handlers,
        'loggers': {
            '': {  # root logger
                'handlers': list(handlers),
                'level': level,
                'propagate': True,
            },
            'httpx': {'level': 'WARNING'},
        },
    }

    logging.config.dictConfig(logging_config)
