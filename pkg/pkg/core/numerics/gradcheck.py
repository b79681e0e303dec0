"""Central finite-difference oracle for tape gradients."""
from collections.abc import Mapping
from typing import Callable, Dict

import numpy as np

from pkg.core.errors import ContractError
from pkg.core.numerics.tape import ParamBinding, Tape, Var

Forward = Callable[[ParamBinding], Var]


def _evaluate(forward: Forward, values: Dict[str, np.ndarray]) -> float:
    tape = Tape()
    return forward(tape.bind(values)).item()


def finite_diff_check(forward: Forward, params: Mapping, eps: float = 1e-5, floor: float = 1e-3) -> float:
    """
    用中心差分核对 backward 的梯度

    Args:
        forward: 接收绑定到磁带的参数、返回标量损失节点的闭包
        params: 参数集合（名字 -> 数组）
        eps: 差分步长
        floor: 相对误差分母下限

    Returns:
        所有坐标上最大的相对误差 |a-n| / max(|a|, |n|, floor)
    """
    if eps <= 0:
        raise ContractError(f"finite_diff_check: eps must be positive, got {eps}")

    values = {name: np.array(params[name], dtype=np.float64) for name in params}
    tape = Tape()
    analytic = tape.backward(forward(tape.bind(values)))

    worst = 0.0
    for name, grad in analytic.items():
        base = values[name]
        flat = base.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = _evaluate(forward, values)
            flat[i] = original - eps
            minus = _evaluate(forward, values)
            flat[i] = original
            numeric = (plus - minus) / (2.0 * eps)
            a = float(grad.reshape(-1)[i])
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, err)
    return worst
