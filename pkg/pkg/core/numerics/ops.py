"""Differentiable operations recorded on a Tape.

No broadcasting: binary elementwise ops require equal shapes. Vectors are
1-D, matrices 2-D, scalars 0-D.
"""
from typing import Iterable, List, Sequence

import numpy as np

from pkg.core.errors import ContractError, IndexRangeError, ShapeError
from pkg.core.numerics.tape import Tensor, Var

COSINE_EPS = 1e-12


def _same_shape(op: str, a: Var, b: Var) -> None:
    if a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)


def matmul(a: Var, b: Var) -> Var:
    """
    矩阵乘法，支持 (m,k)@(k,n)、(m,k)@(k,) 与 (k,)@(k,n)

    Raises:
        ShapeError: 内维不一致或秩不支持
    """
    av, bv = a.value, b.value
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2) or (av.ndim == 1 and bv.ndim == 1):
        raise ShapeError("matmul", av.shape, bv.shape)
    if av.shape[-1] != bv.shape[0]:
        raise ShapeError("matmul", av.shape, bv.shape)

    out = av @ bv

    def vjp(g: Tensor):
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if av.ndim == 2:
            return np.outer(g, bv), av.T @ g
        return bv @ g, np.outer(av, g)

    return a.tape.record("matmul", out, (a, b), vjp)


def linear(x: Var, weight: Var) -> Var:
    """
    x·Wᵀ：向量时即 W·x，矩阵时逐行作用

    矩阵输入逐行做矩阵-向量乘，第 t 行的结果只取决于第 t 行输入，
    与总行数无关（前缀与完整序列的结果逐位一致）。
    """
    if x.value.ndim == 1:
        return matmul(weight, x)
    xv, wv = x.value, weight.value
    if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[1]:
        raise ShapeError("linear", xv.shape, wv.shape)
    out = np.stack([wv @ row for row in xv])
    return x.tape.record("linear", out, (x, weight), lambda g: (g @ wv, g.T @ xv))


def sigmoid(x: Var) -> Var:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.value))
    return x.tape.record("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x: Var) -> Var:
    out = np.tanh(x.value)
    return x.tape.record("tanh", out, (x,), lambda g: (g * (1.0 - out * out),))


def exp(x: Var) -> Var:
    out = np.exp(x.value)
    return x.tape.record("exp", out, (x,), lambda g: (g * out,))


def add(a: Var, b: Var) -> Var:
    _same_shape("add", a, b)
    return a.tape.record("add", a.value + b.value, (a, b), lambda g: (g, g))


def mul(a: Var, b: Var) -> Var:
    _same_shape("mul", a, b)
    av, bv = a.value, b.value
    return a.tape.record("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(x: Var, factor: float) -> Var:
    factor = float(factor)
    return x.tape.record("scale", x.value * factor, (x,), lambda g: (g * factor,))


ELEMENTWISE = {
    "sigmoid": sigmoid,
    "tanh": tanh,
    "exp": exp,
    "add": add,
    "mul": mul,
    "scale": scale,
}


def elementwise(op_kind: str, *args) -> Var:
    """按名字分派逐元素运算"""
    try:
        fn = ELEMENTWISE[op_kind]
    except KeyError:
        raise ContractError(f"unknown elementwise op {op_kind!r}") from None
    return fn(*args)


def _softmax(x: Tensor) -> Tensor:
    shifted = np.exp(x - np.max(x))
    return shifted / np.sum(shifted)


def softmax_row(x: Var) -> Var:
    """数值稳定的一维 softmax"""
    if x.value.ndim != 1 or x.value.size == 0:
        raise ContractError(f"softmax_row: expected a non-empty vector, got shape {x.shape}")
    out = _softmax(x.value)
    return x.tape.record("softmax_row", out, (x,), lambda g: (out * (g - np.dot(g, out)),))


def causal_attention(q: Var, k: Var, v: Var) -> Var:
    """
    单头因果缩放点积注意力：softmax(q_t·k_j/√d, j ≤ t) 加权 v_j

    前向逐位置计算，只读取 ≤ t 的行，因此追加元素不会改变之前位置的输出。
    """
    qv, kv, vv = q.value, k.value, v.value
    if qv.ndim != 2 or qv.shape != kv.shape or kv.shape != vv.shape or qv.shape[0] == 0:
        raise ShapeError("causal_attention", qv.shape, kv.shape, vv.shape)
    n, d = qv.shape
    factor = 1.0 / np.sqrt(d)
    weights = np.zeros((n, n), dtype=np.float64)
    out = np.empty((n, d), dtype=np.float64)
    for t in range(n):
        row = _softmax((kv[: t + 1] @ qv[t]) * factor)
        weights[t, : t + 1] = row
        out[t] = row @ vv[: t + 1]

    def vjp(g: Tensor):
        d_weights = g @ vv.T
        d_scores = weights * (d_weights - np.sum(d_weights * weights, axis=1, keepdims=True))
        d_scores *= factor
        return d_scores @ kv, d_scores.T @ qv, weights.T @ g

    return q.tape.record("causal_attention", out, (q, k, v), vjp)


def embedding_lookup(table: Var, ids: Sequence[int]) -> Var:
    """
    按行收集，反向时 scatter-add 到表梯度

    Raises:
        IndexRangeError: id 不在 [0, rows-1]
    """
    rows = table.shape[0]
    index = np.asarray(list(ids), dtype=np.int64)
    for item in index:
        if item < 0 or item >= rows:
            raise IndexRangeError("embedding", int(item), rows - 1)
    out = table.value[index].copy()

    def vjp(g: Tensor):
        grad = np.zeros_like(table.value)
        np.add.at(grad, index, g)
        return (grad,)

    return table.tape.record("embedding_lookup", out, (table,), vjp)


def take_row(x: Var, row: int) -> Var:
    if x.value.ndim != 2 or not -x.shape[0] <= row < x.shape[0]:
        raise ShapeError("take_row", x.shape)
    out = x.value[row].copy()

    def vjp(g: Tensor):
        grad = np.zeros_like(x.value)
        grad[row] = g
        return (grad,)

    return x.tape.record("take_row", out, (x,), vjp)


def stack(items: Sequence[Var]) -> Var:
    """沿新的第 0 维堆叠同形状节点"""
    items = list(items)
    if not items:
        raise ContractError("stack: empty input")
    for other in items[1:]:
        _same_shape("stack", items[0], other)
    out = np.stack([v.value for v in items])
    return items[0].tape.record("stack", out, tuple(items), lambda g: tuple(g[i] for i in range(len(items))))


def sum_all(x: Var) -> Var:
    out = np.asarray(np.sum(x.value))
    return x.tape.record("sum", out, (x,), lambda g: (np.full(x.shape, float(g)),))


def mean(items: Iterable[Var]) -> Var:
    items = list(items)
    return scale(sum_all(stack(items)), 1.0 / len(items))


def dot(a: Var, b: Var) -> Var:
    _same_shape("dot", a, b)
    if a.value.ndim != 1:
        raise ShapeError("dot", a.shape, b.shape)
    av, bv = a.value, b.value
    out = np.asarray(np.dot(av, bv))
    return a.tape.record("dot", out, (a, b), lambda g: (g * bv, g * av))


def cosine_similarity(a: Var, b: Var) -> Var:
    """a·b / (‖a‖‖b‖ + ε)；零向量得到 0 而不是报错"""
    _same_shape("cosine_similarity", a, b)
    if a.value.ndim != 1 or a.value.size == 0:
        raise ShapeError("cosine_similarity", a.shape, b.shape)
    av, bv = a.value, b.value
    na, nb = np.linalg.norm(av), np.linalg.norm(bv)
    den = na * nb + COSINE_EPS
    ab = float(np.dot(av, bv))
    out = np.asarray(ab / den)

    def vjp(g: Tensor):
        unit_a = av / na if na > 0 else np.zeros_like(av)
        unit_b = bv / nb if nb > 0 else np.zeros_like(bv)
        da = bv / den - ab * nb * unit_a / (den * den)
        db = av / den - ab * na * unit_b / (den * den)
        return g * da, g * db

    return a.tape.record("cosine_similarity", out, (a, b), vjp)


def logsumexp(x: Var) -> Var:
    if x.value.ndim != 1 or x.value.size == 0:
        raise ContractError(f"logsumexp: expected a non-empty vector, got shape {x.shape}")
    m = np.max(x.value)
    out = np.asarray(m + np.log(np.sum(np.exp(x.value - m))))
    probs = _softmax(x.value)
    return x.tape.record("logsumexp", out, (x,), lambda g: (g * probs,))


def cross_entropy_logits(logits: Var, target: int) -> Var:
    """
    −log softmax(logits)[target]，按 log-sum-exp 计算

    Raises:
        IndexRangeError: target 越界
    """
    if logits.value.ndim != 1:
        raise ShapeError("cross_entropy_logits", logits.shape)
    n = logits.shape[0]
    if target < 0 or target >= n:
        raise IndexRangeError("target", int(target), n - 1)
    x = logits.value
    m = np.max(x)
    lse = m + np.log(np.sum(np.exp(x - m)))
    out = np.asarray(lse - x[target])
    probs = _softmax(x)

    def vjp(g: Tensor):
        grad = probs.copy()
        grad[target] -= 1.0
        return (g * grad,)

    return logits.tape.record("cross_entropy", out, (logits,), vjp)


def cross_entropy_rows(logits: Var, targets: Sequence[int]) -> Var:
    """逐行交叉熵的平均值，用于全前缀训练"""
    x = logits.value
    targets = np.asarray(list(targets), dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != targets.shape[0]:
        raise ShapeError("cross_entropy_rows", x.shape, targets.shape)
    for t in targets:
        if t < 0 or t >= x.shape[1]:
            raise IndexRangeError("target", int(t), x.shape[1] - 1)
    rows = np.arange(x.shape[0])
    m = x.max(axis=1, keepdims=True)
    shifted = np.exp(x - m)
    sums = shifted.sum(axis=1, keepdims=True)
    lse = (m + np.log(sums))[:, 0]
    out = np.asarray(np.mean(lse - x[rows, targets]))
    probs = shifted / sums

    def vjp(g: Tensor):
        grad = probs.copy()
        grad[rows, targets] -= 1.0
        return (g * grad / x.shape[0],)

    return logits.tape.record("cross_entropy_rows", out, (logits,), vjp)


def stop_gradient(x: Var) -> Var:
    """同值常量，切断梯度"""
    return x.tape.constant(x.value)


def concat_scalars(items: List[Var]) -> Var:
    for v in items:
        if v.value.ndim != 0:
            raise ShapeError("concat_scalars", v.shape)
    return stack(items)
