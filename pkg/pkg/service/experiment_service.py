"""Training runs, single-view ablations and participation sweeps."""
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from pkg.core.config import ALL_VIEWS, RunConfig
from pkg.model.metrics import RankingMetrics, format_metric
from pkg.repository.checkpoint_repository import CheckpointRepository
from pkg.repository.metrics_repository import (
    ABLATION_HEADER,
    SWEEP_HEADER,
    write_csv,
    write_json,
    write_round_reports,
    write_text,
)
from pkg.service.data_service import PreparedDataset, load_dataset
from pkg.service.eval_service import evaluate_split
from pkg.service.federation_service import TrainingResult, run_training
from pkg.service.synthetic_service import generate_synthetic
from pkg.service.view_service import ViewGenerator

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "checkpoint.fsql"
RESOLVED_CONFIG_FILE = "config.resolved.json"
FINAL_METRICS_FILE = "final_metrics.json"
ABLATION_FILE = "ablation.csv"
SWEEP_FILE = "sweep.csv"

ABLATION_VARIANTS: Dict[str, List[str]] = {
    "full": list(ALL_VIEWS),
    "no_future": ["paraphrase", "counterfactual"],
    "no_paraphrase": ["future", "counterfactual"],
    "no_counterfactual": ["future", "paraphrase"],
}


@dataclass
class RunOutcome:
    """一次训练的结果：历史、参数与测试集指标"""
    config: RunConfig
    result: TrainingResult
    test_metrics: RankingMetrics

    @property
    def final_rec_loss(self) -> Optional[float]:
        return self.result.history[-1].rec_loss if self.result.history else None

    @property
    def final_cl_loss(self) -> Optional[float]:
        return self.result.history[-1].cl_loss if self.result.history else None


def dataset_for(cfg: RunConfig) -> PreparedDataset:
    """配置了 data.prepared 或 data.interactions 时读取文件，否则按 [synth] 现场生成"""
    if cfg.data.prepared or cfg.data.interactions:
        return load_dataset(cfg.data)
    logger.info("No data configured, generating the synthetic dataset from [synth]")
    return generate_synthetic(cfg.synth)


def build_generator(dataset: PreparedDataset, cfg: RunConfig) -> Optional[ViewGenerator]:
    """按配置构造视图生成器；λ = 0 时不需要视图"""
    cfg = cfg.resolved()
    if cfg.federation.lambda_cl == 0:
        return None
    return ViewGenerator(cfg.views, dataset.catalog, cfg.run.seed)


def train_and_evaluate(
    dataset: PreparedDataset,
    cfg: RunConfig,
    generator: Optional[ViewGenerator] = None,
) -> RunOutcome:
    """训练后在测试集上评估（local_only 用各客户端自己的参数）"""
    cfg = cfg.resolved()
    if generator is None:
        generator = build_generator(dataset, cfg)
    result = run_training(dataset, cfg, generator)
    params_for = result.params_for if result.personalized else None
    test_metrics = evaluate_split(result.params, dataset.clients, "test", cfg.run.k, params_for)
    return RunOutcome(cfg, result, test_metrics)


def write_run_outputs(outcome: RunOutcome, output_dir: str) -> Dict[str, str]:
    """
    写出 metrics.csv、检查点、解析后的配置与最终测试指标

    Returns:
        文件名到路径的映射
    """
    paths = {
        "metrics": os.path.join(output_dir, METRICS_FILE),
        "checkpoint": os.path.join(output_dir, CHECKPOINT_FILE),
        "config": os.path.join(output_dir, RESOLVED_CONFIG_FILE),
        "final_metrics": os.path.join(output_dir, FINAL_METRICS_FILE),
    }
    write_round_reports(paths["metrics"], outcome.result.history)
    CheckpointRepository(paths["checkpoint"]).save(outcome.result.params)
    write_text(paths["config"], outcome.config.to_json() + "\n")
    write_json(paths["final_metrics"], outcome.test_metrics)
    return paths


def run_ablation(dataset: PreparedDataset, cfg: RunConfig) -> List[Tuple[str, RunOutcome]]:
    """
    四个变体共享同一个种子：完整、去掉未来视图、去掉改写视图、去掉反事实视图

    去掉正视图只删除正配分函数中的对应项；去掉反事实视图时负配分函数取 0。
    """
    outcomes: List[Tuple[str, RunOutcome]] = []
    for variant, enabled in ABLATION_VARIANTS.items():
        logger.info(f"Ablation variant {variant}: views={enabled}")
        variant_cfg = cfg.with_updates({"views.enabled": enabled})
        outcomes.append((variant, train_and_evaluate(dataset, variant_cfg)))
    return outcomes


def ablation_rows(outcomes: List[Tuple[str, RunOutcome]]) -> List[List[str]]:
    return [
        [
            variant,
            format_metric(o.test_metrics.hr_at_k),
            format_metric(o.test_metrics.ndcg_at_k),
            format_metric(o.test_metrics.mrr),
            format_metric(o.final_rec_loss),
            format_metric(o.final_cl_loss),
        ]
        for variant, o in outcomes
    ]


def write_ablation(path: str, outcomes: List[Tuple[str, RunOutcome]]) -> None:
    write_csv(path, ABLATION_HEADER, ablation_rows(outcomes))


@dataclass(frozen=True)
class SweepPoint:
    mode: str
    clients_per_round: int
    seed: int
    metrics: RankingMetrics

    def to_row(self) -> List[str]:
        return [
            self.mode,
            str(self.clients_per_round),
            str(self.seed),
            format_metric(self.metrics.hr_at_k),
            format_metric(self.metrics.ndcg_at_k),
            format_metric(self.metrics.mrr),
        ]


def run_sweep(dataset: PreparedDataset, cfg: RunConfig) -> List[SweepPoint]:
    """
    参与规模扫描：modes × clients_per_round × seeds

    每个点都是一次独立训练并在测试集上评估。
    """
    points: List[SweepPoint] = []
    sweep = cfg.sweep
    for mode in sweep.modes:
        for count in sweep.clients_per_round:
            for seed in sweep.seeds:
                point_cfg = cfg.with_updates({
                    "run.mode": mode,
                    "run.seed": seed,
                    "federation.clients_per_round": count,
                })
                if mode == "lumos" and point_cfg.views.kind == "augment":
                    point_cfg = point_cfg.with_updates({"views.kind": "rule"})
                logger.info(f"Sweep point mode={mode} clients_per_round={count} seed={seed}")
                outcome = train_and_evaluate(dataset, point_cfg)
                points.append(SweepPoint(mode, count, seed, outcome.test_metrics))
    return points


def write_sweep(path: str, points: List[SweepPoint]) -> None:
    write_csv(path, SWEEP_HEADER, (p.to_row() for p in points))
