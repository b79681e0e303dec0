"""Define-by-run reverse-mode tape over float64 numpy buffers."""
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
import numpy.typing as npt

from pkg.core.errors import ContractError, NumericalError

Tensor = npt.NDArray[np.float64]
GradMap = Dict[str, Tensor]
VJP = Callable[[Tensor], Tuple[Optional[Tensor], ...]]


def as_tensor(value) -> Tensor:
    """转换为只读的 float64 数组（拷贝）"""
    arr = np.array(value, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Node:
    """磁带上的一条记录"""
    op: str
    inputs: Tuple[int, ...]
    vjp: Optional[VJP]


class Var:
    """磁带节点的句柄：持有前向值与所属磁带"""

    __slots__ = ("tape", "index", "value")

    def __init__(self, tape: "Tape", index: int, value: Tensor):
        self.tape = tape
        self.index = index
        self.value = value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        op = self.tape.nodes[self.index].op
        return f"Var(op={op}, shape={self.shape})"


class Tape:
    """
    记录一次前向计算的磁带

    节点按执行顺序追加，backward 严格逆序访问。参数通过 param() 以名字注册，
    同名参数重复注册返回同一个节点，因此多次使用的参数梯度会累加。
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.values: List[Tensor] = []
        self.params: Dict[str, int] = {}

    def _append(self, op: str, value: Tensor, inputs: Tuple[int, ...], vjp: Optional[VJP]) -> Var:
        if not np.all(np.isfinite(value)):
            raise NumericalError(f"{op} produced non-finite values")
        if value.flags.writeable:
            value.flags.writeable = False
        self.nodes.append(Node(op=op, inputs=inputs, vjp=vjp))
        self.values.append(value)
        return Var(self, len(self.nodes) - 1, value)

    def constant(self, value) -> Var:
        """常量节点，不参与求导"""
        return self._append("const", as_tensor(value), (), None)

    def param(self, name: str, value) -> Var:
        """
        注册（或取回）一个可训练参数

        Args:
            name: 参数名
            value: 参数值，仅在首次注册时使用

        Returns:
            参数节点
        """
        if name in self.params:
            index = self.params[name]
            return Var(self, index, self.values[index])
        var = self._append(f"param:{name}", as_tensor(value), (), None)
        self.params[name] = var.index
        return var

    def record(self, op: str, value: Tensor, inputs: Tuple[Var, ...], vjp: VJP) -> Var:
        """记录一次运算；inputs 必须属于本磁带"""
        for var in inputs:
            if var.tape is not self:
                raise ContractError(f"{op}: input recorded on a different tape")
        return self._append(op, value, tuple(v.index for v in inputs), vjp)

    def bind(self, params: Mapping) -> "ParamBinding":
        """把参数集合绑定到本磁带，按需注册"""
        return ParamBinding(self, params)

    def backward(self, loss: Var) -> GradMap:
        """
        反向传播

        Args:
            loss: 标量节点

        Returns:
            前向中用到的每个参数的梯度，形状与参数一致

        Raises:
            ContractError: loss 不是标量
        """
        if loss.tape is not self:
            raise ContractError("backward: loss recorded on a different tape")
        if loss.value.ndim != 0:
            raise ContractError(f"backward: root must be a scalar, got shape {loss.shape}")

        grads: List[Optional[Tensor]] = [None] * len(self.nodes)
        grads[loss.index] = np.ones((), dtype=np.float64)
        for index in range(loss.index, -1, -1):
            g = grads[index]
            node = self.nodes[index]
            if g is None or node.vjp is None:
                continue
            for source, contribution in zip(node.inputs, node.vjp(g)):
                if contribution is None:
                    continue
                if grads[source] is None:
                    grads[source] = contribution
                else:
                    grads[source] = grads[source] + contribution

        result: GradMap = {}
        for name, index in self.params.items():
            g = grads[index]
            result[name] = np.zeros_like(self.values[index]) if g is None else np.asarray(g, dtype=np.float64)
        return result


class ParamBinding(Mapping):
    """参数集合在某条磁带上的惰性视图"""

    def __init__(self, tape: Tape, source: Mapping):
        self.tape = tape
        self.source = source

    def __getitem__(self, name: str) -> Var:
        return self.tape.param(name, self.source[name])

    def __iter__(self) -> Iterator[str]:
        return iter(self.source)

    def __len__(self) -> int:
        return len(self.source)
