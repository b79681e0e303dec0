"""Gradient clipping and parameter update rules (pure functions)."""
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from pkg.core.errors import ConfigError, ShapeError
from pkg.core.numerics import GradMap, Tensor
from pkg.model.params import ITEM_EMBEDDINGS, ParamSet, padding_mask

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8


def global_norm(grads: GradMap) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: GradMap, max_norm: float) -> GradMap:
    """
    全局 L2 范数超过 max_norm 时按 max_norm/norm 统一缩放

    Raises:
        ConfigError: max_norm ≤ 0
    """
    if not max_norm > 0:
        raise ConfigError(f"clip norm must be > 0, got {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm:
        return dict(grads)
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}


def mask_padding(params: ParamSet, grads: GradMap) -> GradMap:
    """padding 行梯度置零，保持该行恒为 0"""
    if ITEM_EMBEDDINGS not in grads:
        return grads
    masked = dict(grads)
    masked[ITEM_EMBEDDINGS] = grads[ITEM_EMBEDDINGS] * padding_mask(params)
    return masked


@dataclass(frozen=True)
class AdamState:
    """一阶、二阶矩与步数"""
    m: Dict[str, Tensor]
    v: Dict[str, Tensor]
    step: int = 0

    @classmethod
    def zeros(cls, params: ParamSet) -> "AdamState":
        return cls(
            {name: np.zeros_like(params[name]) for name in params},
            {name: np.zeros_like(params[name]) for name in params},
            0,
        )


def _grad_for(params: ParamSet, grads: GradMap, name: str) -> Tensor:
    g = grads.get(name)
    if g is None:
        return np.zeros_like(params[name])
    if g.shape != params[name].shape:
        raise ShapeError(f"grad[{name}]", g.shape, params[name].shape)
    return g


def adam_step(
    params: ParamSet,
    grads: GradMap,
    state: AdamState,
    lr: float,
    weight_decay: float,
    beta1: float = BETA1,
    beta2: float = BETA2,
    eps: float = ADAM_EPS,
) -> Tuple[ParamSet, AdamState]:
    """
    带偏差修正的 Adam，权重衰减解耦：先 θ ← θ − lr·wd·θ，再减去 Adam 增量

    不修改输入；返回新的参数与状态。
    """
    step = state.step + 1
    correction1 = 1.0 - beta1 ** step
    correction2 = 1.0 - beta2 ** step
    new_values: Dict[str, Tensor] = {}
    new_m: Dict[str, Tensor] = {}
    new_v: Dict[str, Tensor] = {}
    for name in params:
        g = _grad_for(params, grads, name)
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        theta = params[name] - lr * weight_decay * params[name]
        theta = theta - lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        new_values[name] = theta
        new_m[name] = m
        new_v[name] = v
    return params.replace(new_values), AdamState(new_m, new_v, step)


def sgd_step(params: ParamSet, grads: GradMap, lr: float, weight_decay: float) -> ParamSet:
    """θ ← θ − lr·wd·θ − lr·g"""
    return params.replace({
        name: params[name] - lr * weight_decay * params[name] - lr * _grad_for(params, grads, name)
        for name in params
    })
