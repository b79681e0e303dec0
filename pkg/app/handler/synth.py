import logging
from argparse import Namespace

from app.handler.common import command, emit, run_config_from_args
from pkg.service.synthetic_service import SyntheticDataGenerator

logger = logging.getLogger(__name__)


@command
def handle_synth(args: Namespace) -> int:
    """生成合成数据，写出 interactions.jsonl、items.jsonl 与预处理目录"""
    cfg = run_config_from_args(args)
    generator = SyntheticDataGenerator(cfg.synth)
    dataset = generator.generate()
    paths = generator.export(dataset, cfg.run.output_dir)
    emit({"summary": dataset.summary(), "files": paths})
    return 0
