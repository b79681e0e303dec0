import functools
import json
import logging
import sys
from argparse import Namespace
from typing import Any, Callable, Dict

from pydantic import BaseModel

from app.config.settings import settings
from pkg.core.config import RunConfig, load_config
from pkg.core.context.context_vars import clear_run_id, set_run_id
from pkg.core.errors import ContractError, ExitCode, FedSeqError

logger = logging.getLogger(__name__)

Handler = Callable[[Namespace], int]


def command(func: Handler) -> Handler:
    """
    命令处理器包装：设置 run_id，把领域错误翻译成稳定的退出码

    0 成功；2 配置/校验错误；3 读写错误；4 数值发散。
    """

    @functools.wraps(func)
    def wrapper(args: Namespace) -> int:
        run_id = set_run_id()
        try:
            return func(args)
        except ContractError as e:
            logger.error(f"{args.command} failed: {e}")
            print(f"error: {e}", file=sys.stderr)
            return ExitCode.CONFIG
        except FedSeqError as e:
            logger.error(f"{args.command} failed with exit code {e.exit_code}: {e}")
            print(f"error: {e}", file=sys.stderr)
            return e.exit_code
        finally:
            logger.debug(f"Command {args.command} finished (run {run_id})")
            clear_run_id()

    return wrapper


def run_config_from_args(args: Namespace) -> RunConfig:
    """配置文件 + --set 覆盖 + 快捷参数 + 环境变量中的生成服务地址"""
    shorthand: Dict[str, Any] = {}
    for flag, dotted in (
        ("seed", "run.seed"),
        ("rounds", "federation.rounds"),
        ("output_dir", "run.output_dir"),
        ("mode", "run.mode"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            shorthand[dotted] = value
    if settings.LLM_ENDPOINT:
        shorthand["views.llm.endpoint"] = settings.LLM_ENDPOINT
    return load_config(getattr(args, "config", None), getattr(args, "overrides", None) or (), shorthand)


def emit(payload: Any) -> None:
    """命令结果以 JSON 写到 stdout"""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump()
    print(json.dumps(payload, indent=2, sort_keys=True))
