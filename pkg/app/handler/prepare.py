import logging
import os
from argparse import Namespace

from app.handler.common import command, emit, run_config_from_args
from pkg.repository.prepared_repository import PreparedDatasetRepository
from pkg.service.data_service import prepare_dataset

logger = logging.getLogger(__name__)


@command
def handle_prepare(args: Namespace) -> int:
    """
    原始日志 → 5-core → 切分 → 截断，写出预处理目录

    目标目录为 data.prepared，未配置时为 <output_dir>/prepared。
    """
    cfg = run_config_from_args(args)
    dataset = prepare_dataset(cfg.data)
    directory = cfg.data.prepared or os.path.join(cfg.run.output_dir, "prepared")
    PreparedDatasetRepository(directory).save(dataset.clients, dataset.catalog)
    emit({"summary": dataset.summary(), "prepared": directory})
    return 0
