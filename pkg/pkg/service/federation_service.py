"""FedAvg orchestration: client sampling, local training, aggregation, evaluation."""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from pkg.core.config import RunConfig
from pkg.core.context.context_vars import set_round
from pkg.core.errors import ConfigError, ContractError, DivergenceError, NumericalError, ShapeError
from pkg.core.numerics import Tape, Var, ops
from pkg.core.seeding import derive_seed, rng_for
from pkg.model.dataset import ClientDataset, ViewTriple, views_in
from pkg.model.encoder import encode, rec_loss_and_anchor
from pkg.model.metrics import RankingMetrics, RoundReport
from pkg.model.optim import AdamState, adam_step, clip_gradients, mask_padding, sgd_step
from pkg.model.params import ParamSet
from pkg.model.triview import ViewEmbeddings, local_objective, triview_loss
from pkg.service.data_service import PreparedDataset
from pkg.service.eval_service import evaluate_split
from pkg.service.view_service import ViewGenerator, provenance_counts

logger = logging.getLogger(__name__)


class AllClientsFailedError(DivergenceError):
    """一轮中所有被选客户端都因数值问题失败"""


@dataclass(frozen=True)
class LocalTrainConfig:
    """本地训练所需的全部超参数"""
    backbone: str = "attention"
    local_epochs: int = 5
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 128
    clip_norm: float = 5.0
    lambda_cl: float = 0.1
    tau: float = 0.07
    optimizer: str = "adam"
    loss_positions: str = "last"
    similarity: str = "cosine"
    stop_gradient_views: bool = False
    enabled_views: Tuple[str, ...] = ("future", "paraphrase", "counterfactual")

    @classmethod
    def from_run_config(cls, cfg: RunConfig) -> "LocalTrainConfig":
        fed = cfg.federation
        return cls(
            backbone=cfg.model.backbone,
            local_epochs=fed.local_epochs,
            learning_rate=fed.learning_rate,
            weight_decay=fed.weight_decay,
            batch_size=fed.batch_size,
            clip_norm=fed.clip_norm,
            lambda_cl=fed.lambda_cl,
            tau=fed.tau,
            optimizer=fed.optimizer,
            loss_positions=cfg.model.loss_positions,
            similarity=cfg.model.similarity,
            stop_gradient_views=cfg.model.stop_gradient_views,
            enabled_views=tuple(cfg.views.enabled),
        )

    @property
    def uses_views(self) -> bool:
        return self.lambda_cl > 0


@dataclass(frozen=True)
class TrainingExample:
    """一个 (上下文, 目标, 视图) 训练样本"""
    context: Tuple[int, ...]
    target: int
    views: Optional[ViewTriple] = None


@dataclass(frozen=True)
class ClientStats:
    rec_loss: float
    cl_loss: float
    steps: int
    epoch_objectives: Tuple[float, ...] = ()


@dataclass(frozen=True)
class ClientUpdate:
    """客户端上传给服务器的内容：只有参数与标量统计"""
    client_index: int
    params: ParamSet
    stats: ClientStats


def sample_clients(
    n_clients: int,
    fraction: float,
    round_rng: np.random.Generator,
    count: Optional[int] = None,
) -> List[int]:
    """
    无放回均匀抽样 max(1, round(fraction·n)) 个客户端，升序返回

    Args:
        n_clients: 客户端总数
        fraction: 抽样比例
        round_rng: 本轮的随机数发生器
        count: 显式指定每轮人数（覆盖 fraction）
    """
    if n_clients <= 0:
        raise ContractError("cannot sample from zero clients")
    if not 0 < fraction <= 1:
        raise ConfigError(f"client fraction must be in (0, 1], got {fraction}")
    size = count if count is not None else max(1, int(np.floor(fraction * n_clients + 0.5)))
    size = min(max(1, size), n_clients)
    return sorted(int(i) for i in round_rng.choice(n_clients, size=size, replace=False))


def _example_objective(p, example: TrainingExample, cfg: LocalTrainConfig) -> Tuple[Var, float, float]:
    rec, anchor = rec_loss_and_anchor(p, example.context, example.target, cfg.backbone, cfg.loss_positions)
    if not cfg.uses_views or example.views is None:
        return rec, rec.item(), 0.0
    embedded = {
        name: encode(p, ids, cfg.backbone)
        for name, ids in views_in(example.views, list(cfg.enabled_views)).items()
    }
    views = ViewEmbeddings(
        anchor=anchor,
        future=embedded.get("future"),
        paraphrase=embedded.get("paraphrase"),
        counterfactual=embedded.get("counterfactual"),
        tau=cfg.tau,
        lambda_cl=cfg.lambda_cl,
        similarity=cfg.similarity,
        stop_gradient_views=cfg.stop_gradient_views,
    )
    cl = triview_loss(views)
    return local_objective(rec, cl, cfg.lambda_cl), rec.item(), cl.item()


def train_steps(
    params: ParamSet,
    examples: Sequence[TrainingExample],
    cfg: LocalTrainConfig,
    state: Optional[AdamState] = None,
    shuffle_seed: Optional[int] = None,
) -> Tuple[ParamSet, AdamState, ClientStats]:
    """
    local_epochs 个 epoch 的小批量训练（每批取平均目标）

    Raises:
        NumericalError: 前向或更新中出现非有限值
    """
    if not examples:
        raise ContractError("no training examples")
    state = state if state is not None else AdamState.zeros(params)
    rec_total = cl_total = 0.0
    steps = 0
    epoch_objectives: List[float] = []
    order = np.arange(len(examples))

    for epoch in range(cfg.local_epochs):
        if shuffle_seed is not None and len(examples) > cfg.batch_size:
            order = np.random.default_rng(derive_seed(shuffle_seed, epoch)).permutation(len(examples))
        epoch_objective = 0.0
        for start in range(0, len(examples), cfg.batch_size):
            batch = [examples[i] for i in order[start:start + cfg.batch_size]]
            tape = Tape()
            p = tape.bind(params)
            objectives = []
            for example in batch:
                objective, rec_value, cl_value = _example_objective(p, example, cfg)
                objectives.append(objective)
                rec_total += rec_value
                cl_total += cl_value
            loss = objectives[0] if len(objectives) == 1 else ops.mean(objectives)
            epoch_objective += loss.item() * len(batch)
            grads = clip_gradients(mask_padding(params, tape.backward(loss)), cfg.clip_norm)
            if cfg.optimizer == "sgd":
                params = sgd_step(params, grads, cfg.learning_rate, cfg.weight_decay)
            else:
                params, state = adam_step(params, grads, state, cfg.learning_rate, cfg.weight_decay)
            if not params.is_finite():
                raise NumericalError(f"parameters became non-finite at epoch {epoch + 1}")
            steps += 1
        epoch_objectives.append(epoch_objective / len(examples))

    seen = cfg.local_epochs * len(examples)
    stats = ClientStats(rec_total / seen, cl_total / seen, steps, tuple(epoch_objectives))
    return params, state, stats


def local_train(
    global_params: ParamSet,
    client: ClientDataset,
    views: Optional[ViewTriple],
    cfg: LocalTrainConfig,
    client_index: int = 0,
) -> ClientUpdate:
    """
    客户端本地训练：复制全局参数，Adam 状态重新初始化，跑 local_epochs 步

    训练样本为 train[:-1] → train[-1]。
    """
    context, target = client.training_pair()
    example = TrainingExample(context, target, views)
    params, _, stats = train_steps(global_params.clone(), [example], cfg)
    return ClientUpdate(client_index, params, stats)


def fedavg_aggregate(updates: Sequence[ClientUpdate]) -> ParamSet:
    """
    无权重 FedAvg：按 client_index 升序，第一个更新加上各更新差值的均值，
    再截断到各输入的逐元素 [min, max]

    只接受 ClientUpdate（其中只有 ParamSet 与标量统计）。

    Raises:
        ContractError: 列表为空或 client_index 重复
        TypeError: 传入的不是 ClientUpdate/ParamSet
        ShapeError: 参数布局不一致
    """
    if not updates:
        raise ContractError("fedavg_aggregate needs at least one update")
    for u in updates:
        if not isinstance(u, ClientUpdate) or not isinstance(u.params, ParamSet):
            raise TypeError(f"fedavg_aggregate accepts ClientUpdate values only, got {type(u).__name__}")
    ordered = sorted(updates, key=lambda u: u.client_index)
    indices = [u.client_index for u in ordered]
    if len(set(indices)) != len(indices):
        raise ContractError(f"duplicate client indices in {indices}")
    base = ordered[0].params
    for u in ordered[1:]:
        if not u.params.same_layout(base):
            raise ShapeError("fedavg_aggregate", tuple(base.shapes().items()), tuple(u.params.shapes().items()))

    n = len(ordered)
    averaged = {}
    for name in base:
        total = np.zeros_like(base[name])
        lower = np.array(base[name])
        upper = np.array(base[name])
        for u in ordered:
            value = u.params[name]
            total += value - base[name]
            np.minimum(lower, value, out=lower)
            np.maximum(upper, value, out=upper)
        averaged[name] = np.clip(base[name] + total / n, lower, upper)
    return base.replace(averaged)


@dataclass
class TrainingResult:
    """训练历史与最终参数"""
    history: List[RoundReport]
    params: ParamSet
    personal: Optional[Dict[int, ParamSet]] = None
    best_round: Optional[int] = None
    stopped_early: bool = False
    excluded: int = 0

    def params_for(self, index: int) -> ParamSet:
        if self.personal is None:
            return self.params
        return self.personal.get(index, self.params)

    @property
    def personalized(self) -> bool:
        return self.personal is not None


class FederatedTrainer:
    """
    同步联邦训练循环

    每轮：抽样 → 生成视图 → 并行本地训练（按槽位收集）→ 聚合 → 按间隔评估。
    centralized 把全部序列交给一个伪客户端并保留优化器状态；local_only
    不聚合，每个客户端只更新自己的私有参数。
    """

    def __init__(
        self,
        dataset: PreparedDataset,
        cfg: RunConfig,
        generator: Optional[ViewGenerator] = None,
        on_round: Optional[Callable[[RoundReport], None]] = None,
    ):
        self.cfg = cfg.resolved()
        self.mode = self.cfg.run.mode
        self.train_cfg = LocalTrainConfig.from_run_config(self.cfg)
        self.clients = [c for c in dataset.clients if len(c.train) >= 2]
        if len(self.clients) < len(dataset.clients):
            logger.warning(f"Excluded {len(dataset.clients) - len(self.clients)} clients without a training target")
        if not self.clients:
            raise ContractError("run_training needs at least one client with a training target")
        self.dataset = dataset
        self.seed = self.cfg.run.seed
        self.generator = generator
        if self.generator is None and self.train_cfg.uses_views:
            self.generator = ViewGenerator(self.cfg.views, dataset.catalog, self.seed)
        self.on_round = on_round
        if self.train_cfg.uses_views and "counterfactual" not in self.train_cfg.enabled_views:
            logger.warning("Counterfactual view disabled: negative partition is 0 and the contrastive term is constant")

    def initial_params(self) -> ParamSet:
        model = self.cfg.model
        return ParamSet.initialize(
            model.backbone,
            self.dataset.n_items,
            dim=model.dim,
            seed=derive_seed(self.seed, "init"),
            max_len=model.max_len,
            init_scale=model.init_scale,
        )

    def _views_for(self, indices: Sequence[int], round_index: int) -> List[Optional[ViewTriple]]:
        if not self.train_cfg.uses_views:
            return [None] * len(indices)
        anchors = [self.clients[i].training_pair()[0] for i in indices]
        seeds = [self.generator.view_seed(self.clients[i].user_id, round_index) for i in indices]
        triples = self.generator.generate_round(anchors, seeds)
        rule, llm, cached = provenance_counts(triples)
        logger.debug(f"Views for round {round_index}: {rule} rule, {llm} llm, {cached} cache")
        return triples

    def _train_slots(
        self,
        starts: Sequence[ParamSet],
        indices: Sequence[int],
        views: Sequence[Optional[ViewTriple]],
    ) -> List[Optional[ClientUpdate]]:
        slots: List[Optional[ClientUpdate]] = [None] * len(indices)

        def run(slot: int) -> None:
            index = indices[slot]
            try:
                slots[slot] = local_train(starts[slot], self.clients[index], views[slot], self.train_cfg, index)
            except NumericalError as e:
                logger.warning(f"Client {self.clients[index].user_id} excluded from this round: {e}")

        workers = self.cfg.federation.parallel_clients
        if workers <= 1 or len(indices) <= 1:
            for slot in range(len(indices)):
                run(slot)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run, range(len(indices))))
        return slots

    def _sample(self, round_index: int) -> List[int]:
        fed = self.cfg.federation
        return sample_clients(
            len(self.clients),
            fed.client_fraction,
            rng_for(self.seed, "sample", round_index),
            fed.clients_per_round,
        )

    def _evaluate(self, params: ParamSet, personal: Optional[Dict[int, ParamSet]]) -> RankingMetrics:
        params_for = (lambda i: personal.get(i, params)) if personal is not None else None
        return evaluate_split(params, self.clients, "valid", self.cfg.run.k, params_for)

    def run(self) -> TrainingResult:
        fed = self.cfg.federation
        params = self.initial_params()
        personal: Optional[Dict[int, ParamSet]] = {} if self.mode == "local_only" else None
        history: List[RoundReport] = []
        if fed.rounds == 0:
            return TrainingResult(history, params, personal)

        central_state: Optional[AdamState] = None
        best: Optional[Tuple[float, int, ParamSet, Optional[Dict[int, ParamSet]]]] = None
        evals_since_best = 0
        stopped_early = False
        excluded = 0
        rounds = range(1, fed.rounds + 1)
        if self.cfg.run.progress:
            rounds = tqdm(rounds, desc=f"{self.mode} rounds", leave=False)

        logger.info(
            f"Training mode={self.mode} backbone={self.train_cfg.backbone} clients={len(self.clients)} "
            f"items={self.dataset.n_items} rounds={fed.rounds}"
        )
        for round_index in rounds:
            set_round(round_index)
            started = time.perf_counter()

            if self.mode == "centralized":
                indices = list(range(len(self.clients)))
                views = self._views_for(indices, round_index)
                examples = [
                    TrainingExample(*self.clients[i].training_pair(), views[slot]) for slot, i in enumerate(indices)
                ]
                try:
                    params, central_state, stats = train_steps(
                        params, examples, self.train_cfg, central_state, derive_seed(self.seed, "batches", round_index)
                    )
                except NumericalError as e:
                    raise DivergenceError(f"centralized training diverged in round {round_index}: {e}") from e
                rec_loss, cl_loss, participants = stats.rec_loss, stats.cl_loss, len(indices)
            else:
                indices = self._sample(round_index)
                views = self._views_for(indices, round_index)
                if personal is not None:
                    starts = [personal.get(i, params) for i in indices]
                else:
                    starts = [params] * len(indices)
                slots = self._train_slots(starts, indices, views)
                updates = [u for u in slots if u is not None]
                excluded += len(slots) - len(updates)
                if not updates:
                    raise AllClientsFailedError(f"all {len(indices)} sampled clients failed in round {round_index}")
                if personal is not None:
                    for u in updates:
                        personal[u.client_index] = u.params
                else:
                    params = fedavg_aggregate(updates)
                    if not params.is_finite():
                        raise DivergenceError(f"global parameters became non-finite in round {round_index}")
                rec_loss = sum(u.stats.rec_loss for u in updates) / len(updates)
                cl_loss = sum(u.stats.cl_loss for u in updates) / len(updates)
                participants = len(updates)

            if not np.isfinite(rec_loss) or not np.isfinite(cl_loss):
                raise DivergenceError(f"non-finite global loss in round {round_index}")

            metrics = None
            if round_index % fed.eval_every == 0 or round_index == fed.rounds:
                metrics = self._evaluate(params, personal)

            wall_ms = int(round((time.perf_counter() - started) * 1000)) if self.cfg.run.record_wall_ms else 0
            report = RoundReport(round_index, rec_loss, cl_loss, participants, metrics, wall_ms)
            history.append(report)
            logger.info(
                f"Round {round_index}: clients={participants} rec_loss={rec_loss:.4f} cl_loss={cl_loss:.4f}"
                + (f" hr@{self.cfg.run.k}={metrics.hr_at_k:.4f}" if metrics else "")
            )
            if self.on_round:
                self.on_round(report)

            if metrics is not None and fed.early_stopping_patience:
                if best is None or metrics.hr_at_k > best[0]:
                    snapshot = dict(personal) if personal is not None else None
                    best = (metrics.hr_at_k, round_index, params, snapshot)
                    evals_since_best = 0
                else:
                    evals_since_best += 1
                    if evals_since_best >= fed.early_stopping_patience:
                        logger.info(f"Early stopping at round {round_index}, best round {best[1]}")
                        stopped_early = True
                        break

        set_round(None)
        if stopped_early and best is not None:
            return TrainingResult(history, best[2], best[3], best[1], True, excluded)
        return TrainingResult(history, params, personal, best[1] if best else None, False, excluded)


def run_training(
    dataset: PreparedDataset,
    cfg: RunConfig,
    generator: Optional[ViewGenerator] = None,
) -> TrainingResult:
    """rounds 轮联邦训练，返回每轮报告与最终参数"""
    return FederatedTrainer(dataset, cfg, generator).run()
