"""Evaluation and per-round report records."""
from dataclasses import dataclass
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

ROUND_REPORT_HEADER = ["round", "rec_loss", "cl_loss", "hr20", "ndcg20", "mrr", "clients", "wall_ms"]


class RankingMetrics(BaseModel):
    """全量排序评估结果"""
    hr_at_k: float = Field(ge=0, le=1)
    ndcg_at_k: float = Field(ge=0, le=1)
    mrr: float = Field(ge=0, le=1)
    k: int = Field(ge=1)
    n_users: int = Field(ge=1)

    @model_validator(mode="after")
    def _ndcg_below_hr(self):
        if self.ndcg_at_k > self.hr_at_k + 1e-12:
            raise ValueError(f"ndcg {self.ndcg_at_k} exceeds hr {self.hr_at_k}")
        return self


def format_metric(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.8f}"


@dataclass(frozen=True)
class RoundReport:
    """一轮的训练与评估指标，对应 metrics.csv 的一行"""
    round: int
    rec_loss: float
    cl_loss: float
    clients: int
    metrics: Optional[RankingMetrics] = None
    wall_ms: int = 0

    @property
    def hr20(self) -> Optional[float]:
        return self.metrics.hr_at_k if self.metrics else None

    @property
    def ndcg20(self) -> Optional[float]:
        return self.metrics.ndcg_at_k if self.metrics else None

    @property
    def mrr(self) -> Optional[float]:
        return self.metrics.mrr if self.metrics else None

    def to_row(self) -> List[str]:
        return [
            str(self.round),
            format_metric(self.rec_loss),
            format_metric(self.cl_loss),
            format_metric(self.hr20),
            format_metric(self.ndcg20),
            format_metric(self.mrr),
            str(self.clients),
            str(self.wall_ms),
        ]
