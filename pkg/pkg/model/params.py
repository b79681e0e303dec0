"""Trainable weights of the shared backbone."""
from typing import Callable, Dict, Iterator, List, Tuple

import numpy as np

from pkg.core.errors import ConfigError, ShapeError
from pkg.core.numerics import Tensor, as_tensor

BACKBONES = ("gru", "attention")
MAX_LEN = 50

GRU_MATRICES = ("gru.W_z", "gru.W_r", "gru.W_h", "gru.U_z", "gru.U_r", "gru.U_h")
GRU_BIASES = ("gru.b_z", "gru.b_r", "gru.b_h")
ATTN_MATRICES = ("attn.W_q", "attn.W_k", "attn.W_v", "attn.W_o")
ATTN_POSITIONAL = "attn.positional"
ITEM_EMBEDDINGS = "item_embeddings"


def param_shapes(kind: str, n_items: int, dim: int, max_len: int = MAX_LEN) -> Dict[str, Tuple[int, ...]]:
    """
    给定骨干类型返回参数名到形状的映射（顺序即序列化顺序）

    Args:
        kind: gru | attention
        n_items: 商品数 M（嵌入表多一行 padding）
        dim: 嵌入维度 d
        max_len: 位置嵌入长度（GRU 只接受 MAX_LEN）

    Raises:
        ConfigError: 未知骨干，或给 GRU 指定了别的 max_len
    """
    if kind not in BACKBONES:
        raise ConfigError(f"unknown backbone {kind!r}, expected one of {BACKBONES}")
    if kind == "gru" and max_len != MAX_LEN:
        raise ConfigError(f"backbone gru always uses max_len {MAX_LEN}, got {max_len}")
    shapes: Dict[str, Tuple[int, ...]] = {ITEM_EMBEDDINGS: (n_items + 1, dim)}
    if kind == "gru":
        shapes.update({name: (dim, dim) for name in GRU_MATRICES})
        shapes.update({name: (dim,) for name in GRU_BIASES})
    else:
        shapes.update({name: (dim, dim) for name in ATTN_MATRICES})
        shapes[ATTN_POSITIONAL] = (max_len, dim)
    return shapes


def backbone_of(names) -> str:
    """由参数名推断骨干类型（检查点里只有命名张量）"""
    names = set(names)
    if any(name.startswith("gru.") for name in names):
        return "gru"
    if any(name.startswith("attn.") for name in names):
        return "attention"
    raise ConfigError(f"cannot infer backbone from parameter names {sorted(names)}")


class ParamSet:
    """
    骨干网络 f_θ 的全部参数 θ

    值语义：构造后张量只读；更新总是返回新的 ParamSet。嵌入表最后一行是
    padding 行，不参与打分且始终为 0。
    """

    def __init__(self, backbone_kind: str, tensors: Dict[str, Tensor]):
        if ITEM_EMBEDDINGS not in tensors:
            raise ConfigError(f"missing {ITEM_EMBEDDINGS} tensor")
        rows, dim = np.shape(tensors[ITEM_EMBEDDINGS])
        max_len = np.shape(tensors[ATTN_POSITIONAL])[0] if ATTN_POSITIONAL in tensors else MAX_LEN
        expected = param_shapes(backbone_kind, rows - 1, dim, max_len)
        if set(expected) != set(tensors):
            raise ConfigError(f"parameter names {sorted(tensors)} do not match backbone {backbone_kind}")
        ordered: Dict[str, Tensor] = {}
        for name, shape in expected.items():
            value = tensors[name]
            if tuple(np.shape(value)) != shape:
                raise ShapeError(f"ParamSet[{name}]", np.shape(value), shape)
            ordered[name] = value if _is_frozen(value) else as_tensor(value)
        self.backbone_kind = backbone_kind
        self.tensors = ordered

    @classmethod
    def initialize(
        cls,
        kind: str,
        n_items: int,
        dim: int = 32,
        seed: int = 0,
        max_len: int = MAX_LEN,
        init_scale: float = 0.1,
    ) -> "ParamSet":
        """
        随机初始化

        Args:
            kind: 骨干类型
            n_items: 商品数 M
            dim: 嵌入维度
            seed: 随机种子
            max_len: 位置嵌入长度
            init_scale: 嵌入与位置向量的标准差
        """
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(dim)
        tensors: Dict[str, Tensor] = {}
        for name, shape in param_shapes(kind, n_items, dim, max_len).items():
            if name == ITEM_EMBEDDINGS:
                value = rng.normal(0.0, init_scale, size=shape)
                value[n_items] = 0.0
            elif name == ATTN_POSITIONAL:
                value = rng.normal(0.0, init_scale, size=shape)
            elif name in GRU_BIASES:
                value = np.zeros(shape)
            else:
                value = rng.uniform(-bound, bound, size=shape)
            tensors[name] = value
        return cls(kind, tensors)

    @classmethod
    def zeros(cls, kind: str, n_items: int, dim: int = 32, max_len: int = MAX_LEN) -> "ParamSet":
        shapes = param_shapes(kind, n_items, dim, max_len)
        return cls(kind, {name: np.zeros(shape) for name, shape in shapes.items()})

    @property
    def n_items(self) -> int:
        return self.tensors[ITEM_EMBEDDINGS].shape[0] - 1

    @property
    def dim(self) -> int:
        return self.tensors[ITEM_EMBEDDINGS].shape[1]

    @property
    def max_len(self) -> int:
        if ATTN_POSITIONAL in self.tensors:
            return self.tensors[ATTN_POSITIONAL].shape[0]
        return MAX_LEN

    @property
    def padding_id(self) -> int:
        return self.n_items

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def names(self) -> List[str]:
        return list(self.tensors)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: value.shape for name, value in self.tensors.items()}

    def clone(self) -> "ParamSet":
        """深拷贝"""
        return ParamSet(self.backbone_kind, {name: np.array(v) for name, v in self.tensors.items()})

    def replace(self, tensors: Dict[str, Tensor]) -> "ParamSet":
        """用同名张量构造新的 ParamSet（未给出的沿用当前值）"""
        merged = dict(self.tensors)
        merged.update(tensors)
        return ParamSet(self.backbone_kind, merged)

    def map(self, fn: Callable[[str, Tensor], Tensor]) -> "ParamSet":
        return ParamSet(self.backbone_kind, {name: fn(name, v) for name, v in self.tensors.items()})

    def same_layout(self, other: "ParamSet") -> bool:
        return self.backbone_kind == other.backbone_kind and self.shapes() == other.shapes()

    def array_equal(self, other: "ParamSet") -> bool:
        """逐位相等"""
        return self.same_layout(other) and all(
            np.array_equal(self.tensors[name], other.tensors[name]) for name in self.tensors
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.tensors.values())

    def flat(self) -> np.ndarray:
        return np.concatenate([v.reshape(-1) for v in self.tensors.values()])

    def __repr__(self) -> str:
        return f"ParamSet(backbone={self.backbone_kind}, n_items={self.n_items}, dim={self.dim})"


def _is_frozen(value) -> bool:
    return isinstance(value, np.ndarray) and value.dtype == np.float64 and not value.flags.writeable


def padding_mask(params: ParamSet) -> np.ndarray:
    """嵌入表梯度掩码：padding 行为 0"""
    mask = np.ones_like(params[ITEM_EMBEDDINGS])
    mask[params.padding_id] = 0.0
    return mask
