import os
import sys

# 添加项目根目录到 Python 路径
current_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if current_dir not in sys.path:
    sys.path.append(current_dir)

from app.config.settings import settings
from app.routers.cli import dispatch
from pkg.core.context.context_vars import set_app

# 设置应用名称
set_app(settings.APP_NAME)


def main(argv=None) -> int:
    """进程入口：python -m app.main <command> [config] [options]"""
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
