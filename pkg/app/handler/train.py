import logging
from argparse import Namespace

from app.handler.common import command, emit, run_config_from_args
from pkg.service.experiment_service import dataset_for, train_and_evaluate, write_run_outputs

logger = logging.getLogger(__name__)


@command
def handle_train(args: Namespace) -> int:
    """训练并写出 metrics.csv、checkpoint.fsql、config.resolved.json、final_metrics.json"""
    cfg = run_config_from_args(args).resolved()
    dataset = dataset_for(cfg)
    outcome = train_and_evaluate(dataset, cfg)
    paths = write_run_outputs(outcome, cfg.run.output_dir)
    logger.info(f"Run finished after {len(outcome.result.history)} rounds, outputs in {cfg.run.output_dir}")
    emit({"test": outcome.test_metrics.model_dump(), "files": paths})
    return 0
