"""Tri-view contrastive objective and the composite client objective."""
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

from pkg.core.errors import ConfigError, ContractError
from pkg.core.numerics import Var, ops

SIMILARITIES = ("cosine", "dot")
POSITIVE_VIEWS = ("future", "paraphrase")
NEGATIVE_VIEWS = ("counterfactual",)
VIEW_NAMES = POSITIVE_VIEWS + NEGATIVE_VIEWS


def check_temperature(tau: float) -> float:
    if not tau > 0:
        raise ConfigError(f"temperature tau must be > 0, got {tau}")
    return float(tau)


def check_lambda(lambda_cl: float) -> float:
    if lambda_cl < 0:
        raise ConfigError(f"lambda_cl must be >= 0, got {lambda_cl}")
    return float(lambda_cl)


@dataclass
class ViewEmbeddings:
    """
    锚点与三个视图的表示（同一组参数编码）

    视图为 None 表示消融掉该视图：缺正视图时从正配分函数中去掉该项，
    缺反事实视图时负配分函数取 0。
    """
    anchor: Var
    future: Optional[Var]
    paraphrase: Optional[Var]
    counterfactual: Optional[Var]
    tau: float = 0.07
    lambda_cl: float = 0.1
    similarity: str = "cosine"
    stop_gradient_views: bool = False

    def __post_init__(self):
        check_temperature(self.tau)
        check_lambda(self.lambda_cl)
        if self.similarity not in SIMILARITIES:
            raise ConfigError(f"similarity must be one of {SIMILARITIES}, got {self.similarity!r}")

    def view(self, name: str) -> Optional[Var]:
        value = getattr(self, name)
        if value is not None and self.stop_gradient_views:
            return ops.stop_gradient(value)
        return value


def _sim(v: ViewEmbeddings, other: Var) -> Var:
    if v.similarity == "cosine":
        return ops.cosine_similarity(v.anchor, other)
    return ops.dot(v.anchor, other)


def _scaled_sims(v: ViewEmbeddings, names: Tuple[str, ...]) -> List[Var]:
    out = []
    for name in names:
        other = v.view(name)
        if other is not None:
            out.append(ops.scale(_sim(v, other), 1.0 / v.tau))
    return out


def _positive_logits(v: ViewEmbeddings) -> List[Var]:
    logits = _scaled_sims(v, POSITIVE_VIEWS)
    if not logits:
        raise ContractError("tri-view loss needs at least one positive view")
    return logits


def pos_partition(v: ViewEmbeddings) -> Var:
    """exp(sim(h_u,h^F)/τ) + exp(sim(h_u,h^P)/τ)"""
    return ops.exp(ops.logsumexp(ops.concat_scalars(_positive_logits(v))))


def neg_partition(v: ViewEmbeddings) -> Var:
    """exp(sim(h_u,h^N)/τ)，无反事实视图时为 0"""
    logits = _scaled_sims(v, NEGATIVE_VIEWS)
    if not logits:
        return v.anchor.tape.constant(0.0)
    return ops.exp(logits[0])


def triview_loss(v: ViewEmbeddings) -> Var:
    """
    −log(pos / (pos + neg))

    在相似度空间里用 log-sum-exp 计算：lse(全部) − lse(正视图)，
    τ = 0.07 时指数可达 ±14.3，不会溢出。
    """
    positives = _positive_logits(v)
    negatives = _scaled_sims(v, NEGATIVE_VIEWS)
    if not negatives:
        return v.anchor.tape.constant(0.0)
    everything = ops.logsumexp(ops.concat_scalars(positives + negatives))
    return ops.add(everything, ops.scale(ops.logsumexp(ops.concat_scalars(positives)), -1.0))


Scalar = Union[Var, float]


def local_objective(rec_loss: Scalar, cl_loss: Scalar, lambda_cl: float) -> Scalar:
    """
    L_u = L_Rec + λ_CL·L_CL

    Raises:
        ConfigError: λ_CL < 0
    """
    lambda_cl = check_lambda(lambda_cl)
    if isinstance(rec_loss, Var):
        if not isinstance(cl_loss, Var):
            cl_loss = rec_loss.tape.constant(float(cl_loss))
        return ops.add(rec_loss, ops.scale(cl_loss, lambda_cl))
    return float(rec_loss) + lambda_cl * float(cl_loss)
