import asyncio
import json
import logging
from argparse import Namespace

from hypercorn.asyncio import serve
from hypercorn.config import Config

from app.config.settings import settings
from app.handler.common import command
from pkg.core.errors import ConfigError
from pkg.service.stub_llm_service import create_stub_app

logger = logging.getLogger(__name__)


@command
def handle_serve_stub(args: Namespace) -> int:
    """用 hypercorn 启动 /generate 桩服务"""
    fixture = None
    if args.fixture:
        try:
            with open(args.fixture, "r", encoding="utf-8") as f:
                fixture = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read stub fixture {args.fixture}: {e}") from e
    try:
        app = create_stub_app(args.stub_mode, fixture)
    except ValueError as e:
        raise ConfigError(str(e)) from e

    config = Config()
    config.bind = [f"{args.host or settings.STUB_HOST}:{args.port or settings.STUB_PORT}"]
    config.accesslog = "-"
    logger.info(f"Serving the generation stub ({args.stub_mode}) on {config.bind[0]}")
    asyncio.run(serve(app, config))
    return 0
