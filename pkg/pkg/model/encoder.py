"""Shared sequential backbone f_θ: GRU or single-block causal self-attention."""
from collections.abc import Mapping
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from pkg.core.errors import ContractError
from pkg.core.numerics import Tape, Tensor, Var, ops
from pkg.model.params import ATTN_POSITIONAL, ITEM_EMBEDDINGS, ParamSet

LOSS_POSITIONS = ("last", "all")


@dataclass(frozen=True)
class InteractionSequence:
    """一个用户按时间排序的交互序列 S_u"""
    user_id: str
    items: Tuple[int, ...]
    timestamps: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(int(i) for i in self.items))
        if self.timestamps is not None:
            ts = tuple(int(t) for t in self.timestamps)
            if len(ts) != len(self.items):
                raise ContractError(
                    f"sequence {self.user_id}: {len(ts)} timestamps for {len(self.items)} items"
                )
            if any(b < a for a, b in zip(ts, ts[1:])):
                raise ContractError(f"sequence {self.user_id}: timestamps must be nondecreasing")
            object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return len(self.items)


SequenceLike = Union[InteractionSequence, Sequence[int]]


def _ids(seq: SequenceLike) -> List[int]:
    items = seq.items if isinstance(seq, InteractionSequence) else seq
    ids = [int(i) for i in items]
    if not ids:
        raise ContractError("cannot encode an empty sequence")
    return ids


def gru_cell(p: Mapping, x: Var, h: Var) -> Var:
    """
    门控循环单元一步

    z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
    h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h), h' = (1 − z) ⊙ h + z ⊙ h̃
    """
    if x.shape != h.shape:
        raise ContractError(f"gru_cell: input {x.shape} and hidden {h.shape} differ")

    def gate(kind: str, recurrent: Var) -> Var:
        pre = ops.add(ops.linear(x, p[f"gru.W_{kind}"]), ops.linear(recurrent, p[f"gru.U_{kind}"]))
        return ops.add(pre, p[f"gru.b_{kind}"])

    z = ops.sigmoid(gate("z", h))
    r = ops.sigmoid(gate("r", h))
    candidate = ops.tanh(gate("h", ops.mul(r, h)))
    return ops.add(h, ops.mul(z, ops.add(candidate, ops.scale(h, -1.0))))


def _gru_states(p: Mapping, ids: List[int]) -> List[Var]:
    table = p[ITEM_EMBEDDINGS]
    embedded = ops.embedding_lookup(table, ids)
    h = table.tape.constant(np.zeros(table.shape[1]))
    states = []
    for t in range(len(ids)):
        h = gru_cell(p, ops.take_row(embedded, t), h)
        states.append(h)
    return states


def encode_gru(p: Mapping, seq: SequenceLike) -> Var:
    """h₀ = 0，沿嵌入序列折叠 gru_cell，返回最终隐藏状态"""
    return _gru_states(p, _ids(seq))[-1]


def encode_attention_states(p: Mapping, seq: SequenceLike) -> Var:
    """
    单块单头因果自注意力，返回每个位置的表示 (T, d)

    输入为商品嵌入加位置嵌入；输出为 W_o·attn + 输入（残差）。
    """
    ids = _ids(seq)
    positional = p[ATTN_POSITIONAL]
    if len(ids) > positional.shape[0]:
        raise ContractError(f"sequence length {len(ids)} exceeds max_len {positional.shape[0]}")
    x = ops.add(
        ops.embedding_lookup(p[ITEM_EMBEDDINGS], ids),
        ops.embedding_lookup(positional, range(len(ids))),
    )
    mixed = ops.causal_attention(
        ops.linear(x, p["attn.W_q"]),
        ops.linear(x, p["attn.W_k"]),
        ops.linear(x, p["attn.W_v"]),
    )
    return ops.add(ops.linear(mixed, p["attn.W_o"]), x)


def encode_attention(p: Mapping, seq: SequenceLike) -> Var:
    """最后一个位置的表示"""
    return ops.take_row(encode_attention_states(p, seq), -1)


def encode(p: Mapping, seq: SequenceLike, kind: str) -> Var:
    if kind == "gru":
        return encode_gru(p, seq)
    if kind == "attention":
        return encode_attention(p, seq)
    raise ContractError(f"unknown backbone {kind!r}")


def encode_states(p: Mapping, seq: SequenceLike, kind: str) -> Var:
    """所有前缀的表示 (T, d)"""
    if kind == "gru":
        return ops.stack(_gru_states(p, _ids(seq)))
    if kind == "attention":
        return encode_attention_states(p, seq)
    raise ContractError(f"unknown backbone {kind!r}")


def score_items(p: Mapping, h: Var) -> Var:
    """logits[i] = h·E[i]，i ∈ [0, M−1]，padding 行不参与（权重共享）"""
    table = p[ITEM_EMBEDDINGS]
    candidates = ops.embedding_lookup(table, range(table.shape[0] - 1))
    if h.value.ndim == 1:
        return ops.matmul(candidates, h)
    return ops.linear(h, candidates)


def rec_loss_and_anchor(
    p: Mapping,
    seq: SequenceLike,
    target: int,
    kind: str,
    loss_positions: str = "last",
) -> Tuple[Var, Var]:
    """
    下一商品损失与锚点表示 h_u（两者共用一次编码）

    Args:
        p: 绑定到磁带的参数
        seq: 输入序列
        target: 下一个商品
        kind: 骨干类型
        loss_positions: last 只训练最后一个目标；all 训练所有前缀

    Returns:
        (损失, 锚点表示)
    """
    if loss_positions == "last":
        anchor = encode(p, seq, kind)
        return ops.cross_entropy_logits(score_items(p, anchor), target), anchor
    if loss_positions == "all":
        ids = _ids(seq)
        states = encode_states(p, ids, kind)
        loss = ops.cross_entropy_rows(score_items(p, states), ids[1:] + [int(target)])
        return loss, ops.take_row(states, -1)
    raise ContractError(f"loss_positions must be one of {LOSS_POSITIONS}, got {loss_positions!r}")


def next_item_loss(p: Mapping, seq: SequenceLike, target: int, kind: str, loss_positions: str = "last") -> Var:
    """L_Rec = −log p_θ(target | seq)"""
    return rec_loss_and_anchor(p, seq, target, kind, loss_positions)[0]


def encode_values(params: ParamSet, seq: SequenceLike) -> Tensor:
    """不求导的编码，返回 numpy 向量"""
    tape = Tape()
    return encode(tape.bind(params), seq, params.backbone_kind).value


def score_values(params: ParamSet, h: Tensor) -> Tensor:
    """不求导的全量打分"""
    return params[ITEM_EMBEDDINGS][: params.n_items] @ h
