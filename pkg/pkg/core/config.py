"""Run configuration: pydantic models, TOML/JSON loading and CLI overrides."""
import hashlib
import json
import logging
import os
import sys
from typing import Any, Dict, Iterable, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from pkg.core.errors import ConfigError
from pkg.model.params import MAX_LEN

logger = logging.getLogger(__name__)

MODES = ("lumos", "fedseq", "confedsrs", "centralized", "local_only")
VIEW_KINDS = ("rule", "llm", "augment")
ALL_VIEWS = ["future", "paraphrase", "counterfactual"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataConfig(_Section):
    """[data] 输入数据"""
    interactions: Optional[str] = None
    items: Optional[str] = None
    prepared: Optional[str] = None
    format: Literal["auto", "jsonl", "csv"] = "auto"
    min_count: int = Field(5, ge=1)
    max_len: int = Field(50, ge=3)
    min_len: int = Field(5, ge=3)


class ModelConfig(_Section):
    """[model] 骨干网络"""
    backbone: Literal["gru", "attention"] = "attention"
    dim: int = Field(32, ge=1)
    max_len: int = Field(MAX_LEN, ge=1)
    init_scale: float = Field(0.1, gt=0)
    loss_positions: Literal["last", "all"] = "last"
    similarity: Literal["cosine", "dot"] = "cosine"
    stop_gradient_views: bool = False

    @model_validator(mode="after")
    def _check_max_len(self):
        # GRU 没有位置表，上下文窗口固定为 MAX_LEN
        if self.backbone == "gru" and self.max_len != MAX_LEN:
            raise ValueError(f"backbone gru always uses max_len {MAX_LEN}, got {self.max_len}")
        return self


class FederationConfig(_Section):
    """[federation] 轮次与本地训练"""
    client_fraction: float = Field(0.10, gt=0, le=1)
    clients_per_round: Optional[int] = Field(None, ge=1)
    local_epochs: int = Field(5, ge=1)
    rounds: int = Field(100, ge=0)
    learning_rate: float = Field(1e-3, ge=0)
    weight_decay: float = Field(1e-5, ge=0)
    batch_size: int = Field(128, ge=1)
    clip_norm: float = Field(5.0, gt=0)
    lambda_cl: float = Field(0.1, ge=0)
    tau: float = Field(0.07, gt=0)
    optimizer: Literal["adam", "sgd"] = "adam"
    parallel_clients: int = Field(1, ge=1)
    eval_every: int = Field(5, ge=1)
    early_stopping_patience: Optional[int] = Field(None, ge=1)


class LLMConfig(_Section):
    """[views.llm] 生成端点"""
    endpoint: str = "http://127.0.0.1:8080"
    timeout_ms: int = Field(10000, ge=1)
    max_retries: int = Field(2, ge=0)
    backoff_base_ms: int = Field(250, ge=0)
    temperature: float = Field(0.7, ge=0)
    max_tokens: int = Field(256, ge=1)
    parallelism: int = Field(4, ge=1)
    memo_size: int = Field(1024, ge=1)


class ViewsConfig(_Section):
    """[views] 视图生成"""
    kind: Literal["rule", "llm", "augment"] = "rule"
    future_len: int = Field(5, ge=1)
    substitute_prob: float = Field(0.3, ge=0, le=1)
    swap_prob: float = Field(0.1, ge=0, le=1)
    crop_ratio: float = Field(0.6, gt=0, le=1)
    mask_prob: float = Field(0.3, ge=0, le=1)
    enabled: List[Literal["future", "paraphrase", "counterfactual"]] = Field(
        default_factory=lambda: list(ALL_VIEWS)
    )
    cache_path: Optional[str] = None
    llm: LLMConfig = Field(default_factory=LLMConfig)

    @model_validator(mode="after")
    def _check_enabled(self):
        if not {"future", "paraphrase"} & set(self.enabled):
            raise ValueError("at least one positive view (future or paraphrase) must be enabled")
        return self

    def digest(self) -> str:
        """影响生成结果的配置摘要（缓存键的一部分）"""
        payload = self.model_dump(exclude={"cache_path", "enabled"})
        payload["llm"] = {k: payload["llm"][k] for k in ("temperature", "max_tokens")}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()[:16]


class RunSection(_Section):
    """[run] 运行控制"""
    mode: Literal["lumos", "fedseq", "confedsrs", "centralized", "local_only"] = "lumos"
    seed: int = 0
    output_dir: str = "runs/default"
    k: int = Field(20, ge=1)
    record_wall_ms: bool = False
    progress: bool = False


class SynthConfig(_Section):
    """[synth] 合成数据"""
    n_users: int = Field(256, ge=1)
    n_items: int = Field(200, ge=20)
    latent_dim: int = Field(16, ge=1)
    n_categories: int = Field(8, ge=1)
    seq_len_min: int = Field(8, ge=5)
    seq_len_max: int = Field(30, ge=5)
    preference_temperature: float = Field(0.1, ge=0)
    drift: float = Field(0.05, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.seq_len_max < self.seq_len_min:
            raise ValueError(f"seq_len_max {self.seq_len_max} < seq_len_min {self.seq_len_min}")
        if self.seq_len_max > self.n_items:
            raise ValueError(f"seq_len_max {self.seq_len_max} exceeds n_items {self.n_items}")
        if self.n_categories > self.n_items:
            raise ValueError(f"n_categories {self.n_categories} exceeds n_items {self.n_items}")
        return self


class SweepConfig(_Section):
    """[sweep] 参与规模扫描"""
    modes: List[Literal["lumos", "fedseq", "confedsrs", "centralized", "local_only"]] = Field(
        default_factory=lambda: ["lumos", "local_only"]
    )
    clients_per_round: List[int] = Field(default_factory=lambda: [32, 64, 128, 256])
    seeds: List[int] = Field(default_factory=lambda: [0])


class RunConfig(_Section):
    """一次运行的全部配置"""
    data: DataConfig = Field(default_factory=DataConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    federation: FederationConfig = Field(default_factory=FederationConfig)
    views: ViewsConfig = Field(default_factory=ViewsConfig)
    run: RunSection = Field(default_factory=RunSection)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)

    def resolved(self) -> "RunConfig":
        """
        按模式落实派生设置

        fedseq 关闭对比项；confedsrs 改用裁剪/遮盖增强；lumos 必须使用
        rule 或 llm 视图。

        Raises:
            ConfigError: lumos 模式配置了 augment 视图
        """
        mode = self.run.mode
        if mode == "fedseq" and self.federation.lambda_cl != 0.0:
            return self.with_updates({"federation.lambda_cl": 0.0})
        if mode == "confedsrs" and self.views.kind != "augment":
            return self.with_updates({"views.kind": "augment"})
        if mode == "lumos" and self.views.kind == "augment":
            raise ConfigError("mode lumos needs views.kind = rule or llm (augment views belong to confedsrs)")
        return self

    def with_updates(self, updates: Dict[str, Any]) -> "RunConfig":
        """返回应用了点路径更新后的新配置（重新校验）"""
        payload = self.model_dump()
        for dotted, value in updates.items():
            _assign(payload, dotted, value)
        return validate_config(payload)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def _assign(payload: Dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    if len(parts) < 2 or not all(parts):
        raise ConfigError(f"override key must look like section.key, got {dotted!r}")
    node = payload
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"override {dotted!r}: {part!r} is not a section")
        node = child
    node[parts[-1]] = value


def parse_override(text: str) -> tuple:
    """
    解析 --set section.key=value

    值按 TOML 字面量解析，失败时当作裸字符串。
    """
    if "=" not in text:
        raise ConfigError(f"override must be section.key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key.strip(), value


def validate_config(payload: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def read_config_file(path: str) -> Dict[str, Any]:
    """
    读取 TOML 或 JSON 配置文件

    Raises:
        ConfigError: 文件不存在或语法错误
    """
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        if path.endswith(".json"):
            with open(path, "r", encoding="utf-8") as f:
                return json.load(f)
        with open(path, "rb") as f:
            return tomllib.load(f)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e


def load_config(
    path: Optional[str] = None,
    overrides: Iterable[str] = (),
    shorthand: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    加载配置：文件 → --set 覆盖 → 快捷参数（None 表示未给出）

    Args:
        path: 配置文件路径，None 使用全部默认值
        overrides: section.key=value 形式的覆盖
        shorthand: 点路径到值，例如 {"run.seed": 3}

    Returns:
        校验后的 RunConfig（尚未按模式落实）
    """
    overrides = list(overrides)
    payload = read_config_file(path) if path else {}
    for text in overrides:
        key, value = parse_override(text)
        _assign(payload, key, value)
    for key, value in (shorthand or {}).items():
        if value is not None:
            _assign(payload, key, value)
    config = validate_config(payload)
    logger.debug(f"Loaded configuration from {path or 'defaults'} with {len(overrides)} overrides")
    return config
