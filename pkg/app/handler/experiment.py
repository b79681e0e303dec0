import logging
import os
from argparse import Namespace

from app.handler.common import command, emit, run_config_from_args
from pkg.service.experiment_service import (
    ABLATION_FILE,
    SWEEP_FILE,
    ablation_rows,
    dataset_for,
    run_ablation,
    run_sweep,
    write_ablation,
    write_sweep,
)

logger = logging.getLogger(__name__)


@command
def handle_ablate(args: Namespace) -> int:
    """四个视图消融变体，写出 ablation.csv"""
    cfg = run_config_from_args(args)
    dataset = dataset_for(cfg)
    outcomes = run_ablation(dataset, cfg)
    path = os.path.join(cfg.run.output_dir, ABLATION_FILE)
    write_ablation(path, outcomes)
    emit({"ablation": path, "rows": ablation_rows(outcomes)})
    return 0


@command
def handle_sweep(args: Namespace) -> int:
    """参与规模扫描，写出 sweep.csv"""
    cfg = run_config_from_args(args)
    dataset = dataset_for(cfg)
    points = run_sweep(dataset, cfg)
    path = os.path.join(cfg.run.output_dir, SWEEP_FILE)
    write_sweep(path, points)
    emit({"sweep": path, "rows": [p.to_row() for p in points]})
    return 0
