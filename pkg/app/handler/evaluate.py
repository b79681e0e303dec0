import logging
import os
from argparse import Namespace

from app.handler.common import command, emit, run_config_from_args
from pkg.core.errors import ConfigError
from pkg.repository.checkpoint_repository import CheckpointRepository
from pkg.repository.metrics_repository import write_json
from pkg.service.eval_service import evaluate_split
from pkg.service.experiment_service import dataset_for

logger = logging.getLogger(__name__)


@command
def handle_evaluate(args: Namespace) -> int:
    """
    加载检查点，在给定数据与切分上做全量排序评估

    Raises:
        ConfigError: 检查点的商品数与数据集不一致
    """
    cfg = run_config_from_args(args)
    params = CheckpointRepository(args.checkpoint).load()
    dataset = dataset_for(cfg)
    if params.n_items != dataset.n_items:
        raise ConfigError(
            f"checkpoint has {params.n_items} items but the dataset has {dataset.n_items}"
        )
    k = args.k if args.k is not None else cfg.run.k
    metrics = evaluate_split(params, dataset.clients, args.split, k)
    output = args.output or os.path.join(cfg.run.output_dir, f"eval_{args.split}.json")
    write_json(output, metrics)
    emit(metrics)
    return 0
